use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use planar_sis::geometry::{ModelParams, TorusDomain};
use planar_sis::par;
use planar_sis::simulator::{run_until_extinction, SimConfig};

fn replicas() -> Vec<SimConfig> {
    let params = ModelParams::with_mu(1.0, 4.8, 1.0, 1.0, 5.0).unwrap();
    let dom = TorusDomain::new(12.0, params.a).unwrap();
    (0..32)
        .map(|r| {
            let mut cfg = SimConfig::new(params, dom, 5, 10.0);
            cfg.replica = r;
            cfg
        })
        .collect()
}

fn mtta_batch(c: &mut Criterion) {
    let cells = replicas();
    let mut g = c.benchmark_group("mtta_32_replicas");
    g.sample_size(10);
    g.bench_function("parallel", |b| {
        b.iter(|| par::map(black_box(&cells), |cfg| run_until_extinction(cfg).unwrap().time))
    });
    g.bench_function("sequential", |b| {
        b.iter(|| par::map_seq(black_box(&cells), |cfg| run_until_extinction(cfg).unwrap().time))
    });
    g.finish();
}

criterion_group!(benches, mtta_batch);
criterion_main!(benches);
