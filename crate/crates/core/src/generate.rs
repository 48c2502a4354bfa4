//! Built-in benchmark instances.
//!
//! Example II draws from `ChaCha8Rng` seeded with `seed_from_u64(seed)`;
//! subsystem `i` uses stream `i` and the interconnection uses stream
//! `u64::MAX`, so every subsystem is reproducible on its own.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::analysis::spectral_abscissa;
use crate::error::{Error, Result};
use crate::linalg::rank;
use crate::model::{InterconnectionProblem, Subsystem};

fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(r, c, v)
}

/// Three coupled second-order subsystems with one exogenous input and one
/// performance output.
///
/// * subsystem 1 receives `[w2; w4 + d]`, emits `w1 = 0.5 [1 1] x1`
/// * subsystem 2 receives `w1`, emits `[w2; w3] = 0.5 x2`
/// * subsystem 3 receives `w3`, emits `w4 = 0.4 [1 1] x3`
/// * `z = w4`
///
/// The stacked vectors are `w = (w2, w4 + d | w1 | w3)` and
/// `y = (w1 | w2, w3 | w4)`.
pub fn example1() -> InterconnectionProblem {
    let eye = DMatrix::identity(2, 2);
    let ones = m(2, 1, &[1.0, 1.0]);
    let s1 = Subsystem::new(m(2, 2, &[4.0, 0.0, 2.0, -2.0]), eye.clone(), eye.clone(), m(1, 2, &[0.5, 0.5]));
    let s2 = Subsystem::new(m(2, 2, &[8.0, 0.0, 12.0, -2.0]), eye.clone(), ones.clone(), &eye * 0.5);
    let s3 = Subsystem::new(m(2, 2, &[2.0, 0.0, 2.0, -2.0]), eye, ones, m(1, 2, &[0.4, 0.4]));

    let mut m_wy = DMatrix::zeros(4, 4);
    m_wy[(0, 1)] = 1.0; // w2
    m_wy[(1, 3)] = 1.0; // w4
    m_wy[(2, 0)] = 1.0; // w1
    m_wy[(3, 2)] = 1.0; // w3
    let mut m_wd = DMatrix::zeros(4, 1);
    m_wd[(1, 0)] = 1.0;
    let mut m_zy = DMatrix::zeros(1, 4);
    m_zy[(0, 3)] = 1.0;
    InterconnectionProblem {
        subsystems: vec![s1, s2, s3],
        m_wy,
        m_wd,
        m_zy,
        m_zd: DMatrix::zeros(1, 1),
        n_d: 1,
        n_z: 1,
    }
}

/// Parameters of the random Example II ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example2Params {
    pub subsystems: usize,
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
    /// Disturbance channels per subsystem.
    pub disturbances: usize,
    /// Probability that an entry of `M_wy` is nonzero.
    pub density: f64,
    pub n_d: usize,
    pub n_z: usize,
    pub seed: u64,
}

impl Default for Example2Params {
    fn default() -> Self {
        Self { subsystems: 20, states: 5, inputs: 2, outputs: 2, disturbances: 2, density: 0.05, n_d: 2, n_z: 2, seed: 0 }
    }
}

/// Resampling budget per subsystem.
pub const MAX_TRIES: usize = 1000;
/// Relative singular-value tolerance of the controllability test.
pub const CONTROLLABILITY_TOL: f64 = 1e-9;

fn normal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    // filled column by column, which fixes the draw order
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `[B, AB, ..., A^{n-1} B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    out
}

pub fn is_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    rank(&controllability_matrix(a, b), CONTROLLABILITY_TOL) == a.nrows()
}

fn random_subsystem(params: &Example2Params, index: usize) -> Result<Subsystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(index as u64);
    let n = params.states;
    for _ in 0..MAX_TRIES {
        let mut a = normal(&mut rng, n, n);
        let b = normal(&mut rng, n, params.inputs);
        let g = normal(&mut rng, n, params.disturbances);
        let c = normal(&mut rng, params.outputs, n);
        let shift = spectral_abscissa(&a)? - 1.0;
        for i in 0..n {
            a[(i, i)] -= shift;
        }
        if is_controllable(&a, &b) {
            return Ok(Subsystem::new(a, b, g, c));
        }
    }
    Err(Error::ResampleExhausted { index, tries: MAX_TRIES })
}

/// Random ensemble: unstable subsystems with spectral abscissa 1, sparse
/// standard-normal `M_wy`, each exogenous input entering one random
/// disturbance channel and each performance output reading one random
/// measured output.
pub fn example2(params: &Example2Params) -> Result<InterconnectionProblem> {
    if params.subsystems == 0 || params.states == 0 {
        return Err(Error::Config("need at least one subsystem with one state".into()));
    }
    if !(0.0..=1.0).contains(&params.density) {
        return Err(Error::Config(format!("density must lie in [0, 1], got {}", params.density)));
    }
    let subsystems = (0..params.subsystems).map(|i| random_subsystem(params, i)).collect::<Result<Vec<_>>>()?;
    let nw = params.subsystems * params.disturbances;
    let ny = params.subsystems * params.outputs;
    if (params.n_d > 0 && nw == 0) || (params.n_z > 0 && ny == 0) {
        return Err(Error::Config("exogenous channels need at least one disturbance and one output".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(u64::MAX);
    let mut m_wy = DMatrix::zeros(nw, ny);
    for j in 0..ny {
        for i in 0..nw {
            if rng.random::<f64>() < params.density {
                m_wy[(i, j)] = rng.sample(StandardNormal);
            }
        }
    }
    let mut m_wd = DMatrix::zeros(nw, params.n_d);
    for j in 0..params.n_d {
        m_wd[(rng.random_range(0..nw), j)] = 1.0;
    }
    let mut m_zy = DMatrix::zeros(params.n_z, ny);
    for i in 0..params.n_z {
        m_zy[(i, rng.random_range(0..ny))] = 1.0;
    }
    Ok(InterconnectionProblem {
        subsystems,
        m_wy,
        m_wd,
        m_zy,
        m_zd: DMatrix::zeros(params.n_z, params.n_d),
        n_d: params.n_d,
        n_z: params.n_z,
    })
}
