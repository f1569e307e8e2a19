use super::*;
use crate::engine::{Machine, Pid};
use crate::ir::parse_program;

fn run(src: &str, toks: &[&str]) -> (Machine, Sequence, RelationSet) {
    let m = Machine::new(&parse_program(src).unwrap());
    let sched: Vec<Pid> = toks.iter().map(|t| m.parse_pid(t).unwrap()).collect();
    let s = m.run_sequence(&sched).unwrap();
    let r = compute_relations(&s.seq);
    (m, s.seq, r)
}

/// Index of the `k`-th step whose label contains `needle`.
fn find(m: &Machine, seq: &Sequence, needle: &str) -> usize {
    (0..seq.len())
        .find(|&i| m.describe(seq, i).contains(needle))
        .unwrap_or_else(|| panic!("no event matching {needle}"))
}

const MP: &str = "\
init x, y
thread T1:
  store(x, 1, rlx)
  store(y, 1, rel)
thread T2:
  a = load(y, acq)
  b = load(x, rlx)
";

#[test]
fn message_passing_synchronises() {
    let (m, seq, r) = run(MP, &["T1", "T1", "sh(T1,x)", "sh(T1,y)", "T2", "T2"]);
    let wx = find(&m, &seq, "T1#0");
    let wy = find(&m, &seq, "T1#1");
    let ry = find(&m, &seq, "T2#0");
    let rx = find(&m, &seq, "T2#1");
    assert_eq!(r.sw, vec![(wy, ry)]);
    assert!(r.ithb(wx, rx));
    assert!(r.hb(wx, rx));
    assert!(r.mhb(wx, rx));
    assert!(!r.mhb(wy, ry), "a direct sw pair is not in mhb");
}

#[test]
fn single_thread_hb_is_po() {
    let src = "init x, y\nthread T:\n  store(x, 1, rel)\n  a = load(x, acq)\n  store(y, a, sc)\n";
    let (_m, seq, r) = run(src, &["T", "T", "sh(T,x)", "T", "sh(T,y)"]);
    assert!(r.sw.is_empty() && r.dob.is_empty());
    for b in seq.init_len..seq.len() {
        for a in seq.init_len..seq.len() {
            assert_eq!(r.hb(a, b), r.po(a, b, &seq), "{a} {b}");
        }
    }
}

#[test]
fn dob_through_release_sequence_member() {
    let src = "init x\nthread T1:\n  store(x, 1, rel)\n  store(x, 2, rlx)\nthread T2:\n  a = load(x, acq)\n";
    let (m, seq, r) = run(src, &["T1", "T1", "sh(T1,x)", "sh(T1,x)", "T2"]);
    let w1 = find(&m, &seq, "T1#0");
    let w2 = find(&m, &seq, "T1#1");
    let rd = find(&m, &seq, "T2#0");
    assert_eq!(seq.steps[rd].rf, Some(w2));
    assert_eq!(r.release_sequence(&seq, w1), vec![w1, w2]);
    assert_eq!(r.dob, vec![(w1, rd)]);
    assert!(r.hb(w1, rd));
    assert!(!r.mhb(w1, rd));
}

#[test]
fn release_sequence_singleton_and_cut() {
    let src = "init x\nthread T1:\n  store(x, 1, rel)\nthread T2:\n  store(x, 2, rlx)\nthread T3:\n  fadd(x, 1, rlx)\n";
    let (m, seq, r) = run(src, &["T1", "sh(T1,x)"]);
    let w1 = find(&m, &seq, "T1#0");
    assert_eq!(r.release_sequence(&seq, w1), vec![w1]);

    // an rmw from another thread continues, a foreign relaxed store cuts
    let (m, seq, r) = run(src, &["T1", "sh(T1,x)", "T3", "T2", "sh(T2,x)"]);
    let w1 = find(&m, &seq, "T1#0");
    let rmw = find(&m, &seq, "T3#0");
    let got = r.release_sequence(&seq, w1);
    assert_eq!(got, vec![w1, rmw]);
    assert_eq!(got, subword_oracle(&seq, w1));
}

/// Independent reading of the definition: scan shadow-writes of the head's
/// object in sequence order and stop at the first excluded write.
fn subword_oracle(seq: &Sequence, h: usize) -> Vec<usize> {
    let o = seq.steps[h].event.obj;
    let th = seq.steps[h].event.actor.owner();
    let published: Vec<usize> = seq
        .steps
        .iter()
        .filter(|s| s.event.is_shadow() && s.event.obj == o)
        .map(|s| s.shadow_of.unwrap())
        .collect();
    let start = published.iter().position(|&w| w == h).unwrap();
    let mut out = Vec::new();
    for &w in &published[start..] {
        let e = seq.steps[w].event;
        let excluded = e.actor.owner() != th
            && e.act != Action::Rmw
            && matches!(e.ord, MemoryOrder::Na | MemoryOrder::Rlx);
        if w != h && excluded {
            break;
        }
        out.push(w);
    }
    out
}

#[test]
fn mo_follows_shadow_order() {
    let src = "init x\nthread T1:\n  store(x, 1, rlx)\nthread T2:\n  l1 = load(x, rlx)\n  store(x, 2, rlx)\n  l2 = load(x, rlx)\n";
    let (m, seq, r) = run(src, &["T1", "sh(T1,x)", "T2", "T2", "T2", "sh(T2,x)"]);
    let a = find(&m, &seq, "T1#0");
    let c = find(&m, &seq, "T2#1");
    assert_eq!(r.mo[0], vec![0, a, c]);
}

#[test]
fn fence_synchronisation() {
    let src = "init x, y\nthread T1:\n  store(x, 1, rlx)\n  fence(rel)\n  store(y, 1, rlx)\nthread T2:\n  a = load(y, rlx)\n  fence(acq)\n  b = load(x, rlx)\n";
    let (m, seq, r) = run(
        src,
        &["T1", "T1", "T1", "sh(T1,x)", "sh(T1,y)", "T2", "T2", "T2"],
    );
    let f1 = find(&m, &seq, "T1#1");
    let f2 = find(&m, &seq, "T2#1");
    let wx = find(&m, &seq, "T1#0");
    let rx = find(&m, &seq, "T2#2");
    assert_eq!(r.sw, vec![(f1, f2)]);
    assert!(r.hb(wx, rx) && r.mhb(wx, rx));
}

#[test]
fn sc_write_is_ordered_at_its_shadow() {
    let src = "init x, y\nthread T1:\n  store(x, 1, sc)\nthread T2:\n  a = load(y, sc)\n";
    let (m, seq, r) = run(src, &["T1", "T2", "sh(T1,x)"]);
    let w = find(&m, &seq, "T1#0");
    let rd = find(&m, &seq, "T2#0");
    assert_eq!(r.to, vec![rd, w]);
}

#[test]
fn prefix_relations_are_restrictions() {
    let (_m, seq, full) = run(MP, &["T1", "T1", "sh(T1,x)", "sh(T1,y)", "T2", "T2"]);
    for n in seq.init_len..=seq.len() {
        let pre = compute_relations(&seq.prefix(n));
        for b in 0..n {
            for a in 0..n {
                assert_eq!(pre.hb(a, b), full.hb(a, b));
            }
        }
    }
}

#[test]
fn mo_does_not_relate_different_objects() {
    let src = "\
init x, y
thread T1:
  store(x, 1, na)
  store(x, 1, sc)
thread T2:
  store(y, 1, sc)
";
    let (m, seq, r) = run(src, &["T1", "sh(T1,x)", "T1", "T2", "sh(T1,x)", "sh(T2,y)"]);
    let wx = find(&m, &seq, "T1#1");
    let wy = find(&m, &seq, "T2#0");
    assert_eq!(r.mo_position(wx), Some(2));
    assert_eq!(r.mo_position(wy), Some(1));
    assert!(!r.mo_before(wy, wx) && !r.mo_before(wx, wy));
    assert!(r.mo_before(find(&m, &seq, "T1#0"), wx));
}
