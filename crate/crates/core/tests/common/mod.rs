//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use dissynth::generate::{example2, Example2Params};
use dissynth::model::{InterconnectionProblem, Subsystem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let m = normal_matrix(rng, k, k);
    (&m + m.transpose()) * 0.5
}

/// Random valid problem with 1 to `max_subsystems` subsystems of random
/// small sizes and a dense random interconnection.
pub fn random_problem(rng: &mut ChaCha8Rng, max_subsystems: usize, exogenous: bool) -> InterconnectionProblem {
    let count = rng.random_range(1..=max_subsystems);
    let subsystems: Vec<Subsystem> = (0..count)
        .map(|_| {
            let n = rng.random_range(1..=3);
            let m = rng.random_range(1..=2);
            let nw = rng.random_range(1..=2);
            let ny = rng.random_range(1..=2);
            Subsystem::new(normal_matrix(rng, n, n), normal_matrix(rng, n, m), normal_matrix(rng, n, nw), normal_matrix(rng, ny, n))
        })
        .collect();
    let nw: usize = subsystems.iter().map(|s| s.nw()).sum();
    let ny: usize = subsystems.iter().map(|s| s.ny()).sum();
    let (n_d, n_z) = if exogenous { (rng.random_range(1..=2), rng.random_range(1..=2)) } else { (0, 0) };
    InterconnectionProblem {
        subsystems,
        m_wy: normal_matrix(rng, nw, ny) * 0.5,
        m_wd: normal_matrix(rng, nw, n_d),
        m_zy: normal_matrix(rng, n_z, ny),
        m_zd: normal_matrix(rng, n_z, n_d),
        n_d,
        n_z,
    }
}

/// Unstable but stabilizable two-subsystem stabilization instance with weak coupling.
pub fn coupled_pair() -> InterconnectionProblem {
    let m = |r, c, v: &[f64]| DMatrix::from_row_slice(r, c, v);
    let s1 = Subsystem::new(m(1, 1, &[1.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0]));
    let s2 = Subsystem::new(m(1, 1, &[0.5]), m(1, 1, &[2.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0]));
    InterconnectionProblem {
        subsystems: vec![s1, s2],
        m_wy: m(2, 2, &[0.0, 0.3, 0.3, 0.0]),
        m_wd: DMatrix::zeros(2, 0),
        m_zy: DMatrix::zeros(0, 2),
        m_zd: DMatrix::zeros(0, 0),
        n_d: 0,
        n_z: 0,
    }
}

/// Small seeded H-infinity instance: `subsystems` two-state subsystems with
/// square input matrices, one disturbance and one output each, dense-ish coupling.
pub fn desk_instance(seed: u64) -> InterconnectionProblem {
    example2(&Example2Params {
        subsystems: 2 + (seed % 2) as usize,
        states: 2,
        inputs: 2,
        outputs: 1,
        disturbances: 1,
        density: 0.5,
        n_d: 1,
        n_z: 1,
        seed,
    })
    .expect("desk instance")
}

/// `x' = a x` with `a < 0`, one input, one output, no coupling beyond `d -> w`, `z = y`.
pub fn scalar_hinf(a: f64) -> InterconnectionProblem {
    let one = DMatrix::from_element(1, 1, 1.0);
    InterconnectionProblem {
        subsystems: vec![Subsystem::new(DMatrix::from_element(1, 1, a), one.clone(), one.clone(), one.clone())],
        m_wy: DMatrix::zeros(1, 1),
        m_wd: one.clone(),
        m_zy: one,
        m_zd: DMatrix::zeros(1, 1),
        n_d: 1,
        n_z: 1,
    }
}

/// The zero-input trap: an unstable scalar with `B = 0`.
pub fn trap() -> InterconnectionProblem {
    let mut p = scalar_hinf(1.0);
    p.subsystems[0].b = DMatrix::zeros(1, 1);
    p.subsystems[0].g = DMatrix::zeros(1, 1);
    p
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}
