mod common;

use common::*;
use dissynth::analysis::simulate;
use dissynth::model::{assemble_closed_loop, assemble_open_loop, build_permutation, validate_problem, SubsystemDims};
use dissynth::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dims(v: &[(usize, usize)]) -> Vec<SubsystemDims> {
    v.iter().map(|&(w, y)| SubsystemDims { states: 1, inputs: 1, disturbances: w, outputs: y }).collect()
}

fn row_sources(p: &DMatrix<f64>) -> Vec<usize> {
    (0..p.nrows()).map(|r| (0..p.ncols()).find(|&c| p[(r, c)] == 1.0).unwrap()).collect()
}

#[test]
fn permutation_of_one_scalar_subsystem() {
    // [w; z; y; d] -> [w1; y1; d; z]
    let p = build_permutation(&dims(&[(1, 1)]), 1, 1);
    assert_eq!(row_sources(&p), vec![0, 2, 3, 1]);
}

#[test]
fn permutation_of_two_scalar_subsystems() {
    // [w1 w2 z y1 y2 d] -> [w1 y1 w2 y2 d z]
    let p = build_permutation(&dims(&[(1, 1), (1, 1)]), 1, 1);
    assert_eq!(row_sources(&p), vec![0, 3, 1, 4, 5, 2]);
}

#[test]
fn permutation_without_exogenous_channels() {
    let p = build_permutation(&dims(&[(2, 1), (1, 2)]), 0, 0);
    assert_eq!(row_sources(&p), vec![0, 1, 3, 2, 4, 5]);
}

#[test]
fn examples_validate() {
    assert!(validate_problem(&dissynth::generate::example1()).is_empty());
    assert!(validate_problem(&coupled_pair()).is_empty());
    assert!(validate_problem(&trap()).is_empty());
}

#[test]
fn mismatched_interconnection_is_reported() {
    let mut p = coupled_pair();
    p.m_wy = DMatrix::zeros(3, 2);
    assert!(!validate_problem(&p).is_empty());
    assert!(matches!(assemble_open_loop(&p), Err(Error::InvalidProblem(_)) | Err(Error::Dimension(_))));
}

#[test]
fn open_loop_of_example1_has_expected_sizes() {
    let ol = assemble_open_loop(&dissynth::generate::example1()).unwrap();
    assert_eq!(ol.a.shape(), (6, 6));
    assert_eq!(ol.b.shape(), (6, 1));
    assert_eq!(ol.c.shape(), (1, 6));
    assert_eq!(ol.d.shape(), (1, 1));
}

/// RK4 over the subsystem network, evaluating `w = M_wy y + M_wd d` at every stage.
fn simulate_network(
    p: &dissynth::model::InterconnectionProblem,
    d: impl Fn(f64) -> DVector<f64>,
    x0: &DVector<f64>,
    horizon: f64,
    h: f64,
) -> Vec<DVector<f64>> {
    let field = |x: &DVector<f64>, t: f64| {
        let mut y = Vec::new();
        let mut off = 0;
        for s in &p.subsystems {
            y.extend((&s.c * x.rows(off, s.n())).iter().copied());
            off += s.n();
        }
        let y = DVector::from_vec(y);
        let w = &p.m_wy * &y + &p.m_wd * d(t);
        let mut dx = Vec::new();
        let (mut xo, mut wo) = (0, 0);
        for s in &p.subsystems {
            let xi = x.rows(xo, s.n());
            let wi = w.rows(wo, s.nw());
            dx.extend((&s.a * xi + &s.g * wi).iter().copied());
            xo += s.n();
            wo += s.nw();
        }
        DVector::from_vec(dx)
    };
    let steps = (horizon / h).round() as usize;
    let mut x = x0.clone();
    let mut out = vec![x.clone()];
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = field(&x, t);
        let k2 = field(&(&x + &k1 * (0.5 * h)), t + 0.5 * h);
        let k3 = field(&(&x + &k2 * (0.5 * h)), t + 0.5 * h);
        let k4 = field(&(&x + &k3 * h), t + h);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push(x.clone());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permutation_is_orthogonal_and_interleaves(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, 4, seed % 3 != 0);
        let dims = p.dims();
        let perm = build_permutation(&dims, p.n_d, p.n_z);
        prop_assert!(perm.iter().all(|v| *v == 0.0 || *v == 1.0));
        let eye = DMatrix::<f64>::identity(perm.nrows(), perm.nrows());
        prop_assert_eq!(&perm * perm.transpose(), eye);

        let ws: Vec<DVector<f64>> = dims.iter().map(|d| normal_vector(&mut r, d.disturbances)).collect();
        let ys: Vec<DVector<f64>> = dims.iter().map(|d| normal_vector(&mut r, d.outputs)).collect();
        let z = normal_vector(&mut r, p.n_z);
        let d = normal_vector(&mut r, p.n_d);
        let mut stacked = Vec::new();
        for w in &ws { stacked.extend(w.iter().copied()); }
        stacked.extend(z.iter().copied());
        for y in &ys { stacked.extend(y.iter().copied()); }
        stacked.extend(d.iter().copied());
        let mut expected = Vec::new();
        for (w, y) in ws.iter().zip(&ys) {
            expected.extend(w.iter().copied());
            expected.extend(y.iter().copied());
        }
        expected.extend(d.iter().copied());
        expected.extend(z.iter().copied());
        let permuted = &perm * DVector::from_vec(stacked);
        prop_assert_eq!(permuted, DVector::from_vec(expected));
    }

    #[test]
    fn zero_gain_closed_loop_is_open_loop(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, 4, seed % 2 == 0);
        let zeros: Vec<DMatrix<f64>> = p.subsystems.iter().map(|s| DMatrix::zeros(s.b.ncols(), s.n())).collect();
        prop_assert_eq!(assemble_closed_loop(&p, &zeros).unwrap(), assemble_open_loop(&p).unwrap());
    }

    #[test]
    fn assembled_model_matches_network_simulation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut p = random_problem(&mut r, 3, true);
        // keep trajectories bounded over the horizon
        for s in &mut p.subsystems {
            let n = s.n();
            s.a -= DMatrix::identity(n, n) * 3.0;
        }
        let ol = assemble_open_loop(&p).unwrap();
        let x0 = normal_vector(&mut r, ol.states());
        let freq = normal_vector(&mut r, p.n_d);
        let input = |t: f64| freq.map(|f| (f * t).sin());
        let (horizon, h) = (1.0, 1e-2);
        let traj = simulate(&ol, input, &x0, horizon, h).unwrap();
        let net = simulate_network(&p, input, &x0, horizon, h);
        prop_assert_eq!(traj.states.len(), net.len());
        for (a, b) in traj.states.iter().zip(&net) {
            let scale = 1.0 + a.norm().max(b.norm());
            prop_assert!((a - b).norm() <= 1e-8 * scale, "{} vs {}", a, b);
        }
    }
}
