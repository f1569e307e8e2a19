use super::*;
use crate::ir::{parse_program, print_program};

fn body_text(src: &str) -> String {
    let p = parse_program(src).unwrap();
    print_program(&early_write_transform(&p))
}

fn same_after_transform(src: &str) {
    let p = parse_program(src).unwrap();
    assert_eq!(early_write_transform(&p), p);
}

#[test]
fn relaxed_store_hoists_above_unrelated_load() {
    let got = body_text("init x, y\nthread T:\n  r1 = load(x, rlx)\n  store(y, 1, rlx)\n");
    let want = print_program(
        &parse_program("init x, y\nthread T:\n  store(y, 1, rlx)\n  r1 = load(x, rlx)\n").unwrap(),
    );
    assert_eq!(got, want);
}

#[test]
fn acquire_load_blocks() {
    same_after_transform("init x, y\nthread T:\n  r1 = load(x, acq)\n  store(y, 1, rlx)\n");
}

#[test]
fn data_dependence_blocks() {
    same_after_transform("init x, y\nthread T:\n  r1 = load(x, rlx)\n  store(y, r1, rlx)\n");
}

#[test]
fn release_store_stays() {
    same_after_transform("init x, y\nthread T:\n  r1 = load(x, rlx)\n  store(y, 1, rel)\n");
}

#[test]
fn same_object_and_fences_block() {
    same_after_transform("init x\nthread T:\n  r1 = load(x, rlx)\n  store(x, 1, rlx)\n");
    same_after_transform(
        "init x, y\nthread T:\n  r1 = load(x, rlx)\n  fence(rel)\n  store(y, 1, rlx)\n",
    );
    same_after_transform(
        "init x, y\nthread T:\n  r1 = load(x, rlx)\n  fence(acq)\n  store(y, 1, rlx)\n",
    );
}

#[test]
fn writes_keep_relative_order() {
    let src = "init x, y, z\nthread T:\n  r = load(x, rlx)\n  store(y, 1, rlx)\n  store(z, 2, rlx)\n";
    let p = parse_program(src).unwrap();
    let q = early_write_transform(&p);
    let heads: Vec<String> = q.threads[0]
        .walk()
        .iter()
        .map(|s| crate::ir::print::print_stmt_head(s, &q, &q.threads[0]))
        .collect();
    assert_eq!(
        heads,
        ["store(y, 1, rlx)", "store(z, 2, rlx)", "r = load(x, rlx)"]
    );
    assert_eq!(early_write_transform(&q), q);
}

#[test]
fn hoisting_stays_inside_if_body() {
    let src = "\
init x, y
thread T:
  a = load(x, rlx)
  if (a == 1):
    b = load(x, rlx)
    store(y, 1, rlx)
";
    let p = parse_program(src).unwrap();
    let q = early_write_transform(&p);
    let StmtKind::If { then_body, .. } = &q.threads[0].body[1].kind else {
        panic!("if moved");
    };
    assert!(then_body[0].is_write());
    assert!(q.threads[0].body[0].is_read());
}

#[test]
fn rmw_result_conflicts_block() {
    // anti dependence: the earlier statement reads the local the rmw defines
    same_after_transform(
        "init x, y\nthread T:\n  a = 1\n  b = a\n  a = fadd(y, 1, rlx)\n  c = load(x, rlx)\n",
    );
}

#[test]
fn identity_passes_spr() {
    let p = parse_program("init x, y\nthread T:\n  r1 = load(x, rlx)\n  store(y, r1, rlx)\n").unwrap();
    assert!(check_spr(&p, &p).is_ok());
}

#[test]
fn hoisted_store_passes_spr() {
    let p = parse_program("init x, y\nthread T:\n  r1 = load(x, rlx)\n  store(y, 1, rlx)\n").unwrap();
    let q = early_write_transform(&p);
    assert_ne!(p, q);
    let v = check_spr(&p, &q);
    assert!(v.is_ok(), "{v:?}");
}

#[test]
fn swapped_same_object_stores_fail_spr3() {
    let p = parse_program("init x\nthread T:\n  store(x, 1, rlx)\n  store(x, 2, rlx)\n").unwrap();
    let q = parse_program("init x\nthread T:\n  store(x, 2, rlx)\n  store(x, 1, rlx)\n").unwrap();
    let v = check_spr(&p, &q);
    assert!(v.passes(SprRule::Spr1));
    assert!(!v.passes(SprRule::Spr3));
}

#[test]
fn store_moved_above_own_load_fails_spr2() {
    let p = parse_program("init x\nthread T:\n  store(x, 1, rlx)\n  a = load(x, rlx)\n").unwrap();
    let q = parse_program("init x\nthread T:\n  a = load(x, rlx)\n  store(x, 1, rlx)\n").unwrap();
    let v = check_spr(&p, &q);
    assert!(!v.passes(SprRule::Spr2));
    assert!(!v.passes(SprRule::Spr3));
}

#[test]
fn thread_count_mismatch_is_reported() {
    let p = parse_program("init x\nthread T:\n  store(x, 1, rlx)\n").unwrap();
    let q = parse_program("init x\nthread T:\n  store(x, 1, rlx)\nthread U:\n  a = load(x, rlx)\n").unwrap();
    let v = check_spr(&p, &q);
    assert!(!v.passes(SprRule::Spr1));
}

#[test]
fn restriction_kinds() {
    let p = parse_program(
        "init x, y\nthread T:\n  a = load(x, acq)\n  b = load(y, rlx)\n  store(y, b, rel)\n",
    )
    .unwrap();
    let t = &p.threads[0];
    let deps = DepInfo::new(t);
    let [l1, l2, w] = [&t.body[0], &t.body[1], &t.body[2]];
    assert_eq!(restriction(&deps, l1, l2).unwrap().kind, RestrictionKind::Noup);
    assert_eq!(restriction(&deps, l2, w).unwrap().kind, RestrictionKind::Dep);
    let p2 = parse_program("init x, y\nthread T:\n  a = load(x, rlx)\n  store(y, 1, rel)\n").unwrap();
    let t2 = &p2.threads[0];
    let d2 = DepInfo::new(t2);
    assert_eq!(
        restriction(&d2, &t2.body[0], &t2.body[1]).unwrap().kind,
        RestrictionKind::Nodown
    );
}
