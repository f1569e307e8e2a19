mod common;

use proptest::prelude::*;

use moca::transform::{check_spr, early_write_transform};
use moca::parse_program;

#[test]
fn corpus_transforms_preserve_sequential_semantics() {
    for (name, p) in common::corpus() {
        let q = early_write_transform(&p);
        let v = check_spr(&p, &q);
        assert!(v.is_ok(), "{name}: {:?}", v.rules);
    }
}

#[test]
fn transform_is_idempotent_on_corpus() {
    for (name, p) in common::corpus() {
        let q = early_write_transform(&p);
        assert_eq!(early_write_transform(&q), q, "{name}");
    }
}

#[test]
fn load_buffering_stores_are_hoisted() {
    let p = common::corpus_program("Luc10");
    let q = early_write_transform(&p);
    assert_ne!(p, q);
    for t in q.to_string().split("thread ").skip(1) {
        let body: Vec<&str> = t.lines().skip(1).map(str::trim).collect();
        assert!(body[0].starts_with("store("), "{t}");
    }
}

#[test]
fn dependent_stores_stay_in_place() {
    for name in ["WRC+addrs", "IRIW+addrs", "mp", "simple-sw"] {
        let p = common::corpus_program(name);
        assert_eq!(early_write_transform(&p), p, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_transforms_pass_spr(src in common::arb_program(3, 6)) {
        let p = parse_program(&src).unwrap();
        let q = early_write_transform(&p);
        let v = check_spr(&p, &q);
        prop_assert!(v.is_ok(), "{:?}\n{}", v.rules, q);
        prop_assert_eq!(early_write_transform(&q), q);
    }
}
