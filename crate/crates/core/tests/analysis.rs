mod common;

use common::*;
use dissynth::admm::{AdmmConfig, Mode};
use dissynth::analysis::{check_dissipation, hinf_norm, hinf_norm_lmi, simulate, spectral_abscissa};
use dissynth::generate::example1;
use dissynth::lmi::hinf_supply;
use dissynth::model::{assemble_closed_loop, StateSpace};
use dissynth::synthesis::{synthesize_hinf, SynthesisStatus};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn siso(a: &[f64], b: &[f64], c: &[f64], d: f64) -> StateSpace {
    let n = b.len();
    StateSpace::new(
        DMatrix::from_row_slice(n, n, a),
        DMatrix::from_column_slice(n, 1, b),
        DMatrix::from_row_slice(1, n, c),
        DMatrix::from_element(1, 1, d),
    )
    .unwrap()
}

#[test]
fn hinf_analytic_values() {
    assert!((hinf_norm(&siso(&[-1.0], &[1.0], &[1.0], 0.0), 1e-6).unwrap() - 1.0).abs() <= 1e-6);
    assert!((hinf_norm(&siso(&[-1.0], &[1.0], &[1.0], 0.5), 1e-6).unwrap() - 1.5).abs() <= 1e-6);
    let resonant = siso(&[0.0, 1.0, -1.0, -0.1], &[0.0, 1.0], &[1.0, 0.0], 0.0);
    assert!((hinf_norm(&resonant, 1e-6).unwrap() - 10.0125).abs() <= 1e-3);
}

/// Random stable systems with poles in the sweep range.
fn random_stable(seed: u64) -> StateSpace {
    let mut r = rng(seed);
    let n = 1 + (seed % 4) as usize;
    let mut a = normal_matrix(&mut r, n, n);
    let shift = spectral_abscissa(&a).unwrap() + 0.2 + (seed % 3) as f64 * 0.3;
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let m = 1 + (seed % 2) as usize;
    let p = 1 + ((seed / 2) % 2) as usize;
    StateSpace::new(a, normal_matrix(&mut r, n, m), normal_matrix(&mut r, p, n), normal_matrix(&mut r, p, m) * 0.3).unwrap()
}

#[test]
fn sweep_agrees_with_bounded_real_lemma() {
    for seed in 0..20 {
        let ss = random_stable(seed);
        let sweep = hinf_norm(&ss, 1e-8).unwrap();
        let lmi = hinf_norm_lmi(&ss).unwrap();
        assert!((sweep - lmi).abs() <= 1e-4 * sweep, "seed {seed}: sweep {sweep} lmi {lmi}");
    }
}

#[test]
fn simulate_examples() {
    let decay = siso(&[-1.0], &[0.0], &[1.0], 0.0);
    let traj = simulate(&decay, |_| DVector::zeros(1), &DVector::from_element(1, 1.0), 1.0, 0.01).unwrap();
    assert_eq!(traj.len(), 101);
    assert!((traj.states.last().unwrap()[0] - (-1f64).exp()).abs() <= 1e-8);

    let still = siso(&[0.0, 0.0, 0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], 0.0);
    let x0 = DVector::from_vec(vec![3.0, -2.0]);
    let traj = simulate(&still, |_| DVector::zeros(1), &x0, 2.0, 0.1).unwrap();
    assert!(traj.states.iter().all(|x| *x == x0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulation_is_linear_in_the_initial_state(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ss = random_stable(seed);
        let n = ss.states();
        let (xa, xb) = (normal_vector(&mut r, n), normal_vector(&mut r, n));
        let zero = |_| DVector::zeros(ss.b.ncols());
        let ta = simulate(&ss, zero, &xa, 2.0, 0.01).unwrap();
        let tb = simulate(&ss, zero, &xb, 2.0, 0.01).unwrap();
        let tab = simulate(&ss, zero, &(&xa + &xb), 2.0, 0.01).unwrap();
        for ((a, b), ab) in ta.states.iter().zip(&tb.states).zip(&tab.states) {
            prop_assert!((a + b - ab).amax() <= 1e-9);
        }
    }
}

/// One verified Example I synthesis, reused for the trajectory checks.
#[test]
fn example1_verified_closed_loop_trajectories() {
    let p = example1();
    let cfg = AdmmConfig::builder(Mode::Hinf).rho(1.0).mu(1.0).accelerated(true).max_iter(300).build().unwrap();
    let res = synthesize_hinf(&p, &cfg).unwrap();
    assert_eq!(res.status, SynthesisStatus::Verified, "{}", res.admm_status);
    let cl = assemble_closed_loop(&p, &res.gains).unwrap();
    let supply = hinf_supply(res.eta.unwrap(), p.n_d, p.n_z).unwrap();
    let mut r = rng(17);

    // The gains are large, so the closed loop is stiff; RK4 needs h |lambda| < 2.78.
    let radius = cl.a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let h = (1.0 / radius).min(1e-2);

    // decay from a random state
    let x0 = normal_vector(&mut r, cl.states());
    let abscissa = spectral_abscissa(&cl.a).unwrap();
    let horizon = 10.0 / -abscissa;
    let traj = simulate(&cl, |_| DVector::zeros(p.n_d), &x0, horizon, h).unwrap();
    assert!(traj.states.last().unwrap().norm() < 1e-3 * x0.norm());

    // dissipation inequalities along a forced trajectory
    let traj = simulate(&cl, |t| DVector::from_element(p.n_d, (2.0 * t).sin()), &x0, 1.0, h).unwrap();
    let check = check_dissipation(&traj, &res.certificates, &p, &res.gains, &supply).unwrap();
    assert!(check.max_violation.is_finite());

    // flipping the storage sign is detected
    let flipped: Vec<_> = res
        .certificates
        .iter()
        .map(|c| dissynth::lmi::LocalCertificate { p: -&c.p, ..c.clone() })
        .collect();
    let bad = check_dissipation(&traj, &flipped, &p, &res.gains, &supply).unwrap();
    assert!(bad.max_violation > 0.0 && !bad.passed);

    // the zero trajectory has exactly zero violation
    let rest = simulate(&cl, |_| DVector::zeros(p.n_d), &DVector::zeros(cl.states()), 1.0, 1e-2).unwrap();
    let zero = check_dissipation(&rest, &res.certificates, &p, &res.gains, &supply).unwrap();
    assert_eq!(zero.max_violation, 0.0);
    assert!(zero.passed);
}
