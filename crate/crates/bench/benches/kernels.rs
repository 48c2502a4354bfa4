use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use dissynth::admm::{self, AdmmConfig, Mode};
use dissynth::analysis::hinf_norm;
use dissynth::generate::example1;
use dissynth::linalg::{smat, svec, svec_len};
use dissynth::synthesis::centralized;
use dissynth_bench::{resonant_siso, symmetric_pair};
use nalgebra::{DMatrix, DVector};

fn linalg(c: &mut Criterion) {
    let x = DMatrix::from_fn(12, 12, |i, j| ((i * 7 + j * 3) % 11) as f64 + if i == j { 5.0 } else { 0.0 });
    let x = (&x + x.transpose()) * 0.5;
    let v = svec(&x).unwrap();
    c.bench_function("svec 12x12", |b| b.iter(|| svec(black_box(&x)).unwrap()));
    c.bench_function("smat 78", |b| b.iter(|| smat(black_box(v.as_slice())).unwrap()));
}

fn solvers(c: &mut Criterion) {
    let p = example1();
    let cfg = AdmmConfig::new(Mode::Hinf);
    let sub = &p.subsystems[0];
    let len = svec_len(sub.nw() + sub.ny());
    let (v, u) = (DVector::from_element(len, 0.1), DVector::zeros(len));
    c.bench_function("local step, Example I subsystem 1", |b| {
        b.iter(|| admm::local_step(0, black_box(sub), &v, &u, &cfg).unwrap())
    });

    let ss = resonant_siso();
    c.bench_function("hinf norm, resonant oscillator", |b| b.iter(|| hinf_norm(black_box(&ss), 1e-6).unwrap()));

    let mut group = c.benchmark_group("synthesis");
    group.sample_size(10);
    group.bench_function("centralized SDP, Example I", |b| b.iter(|| centralized(black_box(&p), Mode::Hinf).unwrap()));
    let pair = symmetric_pair();
    let cfg = AdmmConfig::new(Mode::Stabilize);
    group.bench_function("ADMM to convergence, symmetric pair", |b| b.iter(|| admm::run(black_box(&pair), &cfg).unwrap()));
    let short = AdmmConfig::builder(Mode::Hinf).rho(1.0).mu(1.0).accelerated(true).max_iter(10).build().unwrap();
    group.bench_function("10 accelerated ADMM iterations, Example I", |b| b.iter(|| admm::run(black_box(&p), &short).unwrap()));
    group.finish();
}

criterion_group!(benches, linalg, solvers);
criterion_main!(benches);
