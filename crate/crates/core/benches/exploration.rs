//! Sequential against data-parallel analysis and enumeration. Build with
//! `--no-default-features` to measure the fallback alone.

use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use moca::explorer::{enumerate_all, explore, ExploreConfig};
use moca::par::Pool;
use moca::transform::early_write_transform;
use moca::{parse_program, Program};

fn corpus(name: &str) -> Program {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../corpus/{name}.lit"));
    parse_program(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn explore_jobs(c: &mut Criterion) {
    let mut g = c.benchmark_group("explore");
    for name in ["WW+RR", "counter-3", "fibonacci-2"] {
        let p = corpus(name);
        for jobs in [1, 0] {
            let cfg = ExploreConfig {
                jobs,
                ..Default::default()
            };
            let label = if jobs == 1 { "sequential" } else { "parallel" };
            g.bench_with_input(BenchmarkId::new(label, name), &p, |b, p| {
                b.iter(|| explore(p, &cfg))
            });
        }
    }
    g.finish();
}

fn enumerate_jobs(c: &mut Criterion) {
    let mut g = c.benchmark_group("enumerate_all");
    g.sample_size(10);
    for name in ["WW+RR", "counter-3"] {
        let p = early_write_transform(&corpus(name));
        for (label, pool) in [("sequential", Pool::sequential()), ("parallel", Pool::new(0))] {
            g.bench_with_input(BenchmarkId::new(label, name), &p, |b, p| {
                b.iter(|| enumerate_all(p, 16, &pool).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, explore_jobs, enumerate_jobs);
criterion_main!(benches);
