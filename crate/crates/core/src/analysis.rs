//! Closed-loop validation: spectra, H-infinity norm, simulation and
//! trajectory-level dissipation checks.

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmi::{LmiConstraint, LocalCertificate, Sense, SupplyRate, VarSpace};
use crate::model::{InterconnectionProblem, StateSpace};
use crate::sdp::{solve_sdp, SdpProblem, SdpSettings};

/// Largest real part over the eigenvalues of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("spectral abscissa of a {}x{} matrix", a.nrows(), a.ncols())));
    }
    if a.nrows() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    if !crate::linalg::all_finite(a) {
        return Err(Error::Numerical("non-finite entries in state matrix".into()));
    }
    Ok(a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Frequency grid and refinement settings for [`hinf_norm_with`].
#[derive(Debug, Clone, Copy)]
pub struct SweepSettings {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    /// Relative tolerance of the golden-section refinement.
    pub tol: f64,
    /// Number of grid peaks that get refined.
    pub refine_peaks: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { omega_min: 1e-4, omega_max: 1e4, points: 800, tol: 1e-6, refine_peaks: 4 }
    }
}

/// Largest singular value of `C (jw I - A)^-1 B + D`.
pub fn gain_at(ss: &StateSpace, omega: f64) -> f64 {
    let n = ss.states();
    if ss.c.nrows() == 0 || ss.b.ncols() == 0 {
        return 0.0;
    }
    let cplx = |m: &DMatrix<f64>| m.map(|v| Complex::new(v, 0.0));
    let mut resolvent = -cplx(&ss.a);
    for i in 0..n {
        resolvent[(i, i)] += Complex::new(0.0, omega);
    }
    let x = if n == 0 {
        DMatrix::zeros(0, ss.b.ncols())
    } else {
        match resolvent.lu().solve(&cplx(&ss.b)) {
            Some(x) => x,
            None => return f64::INFINITY,
        }
    };
    let h = cplx(&ss.c) * x + cplx(&ss.d);
    h.singular_values().max()
}

/// H-infinity norm by a logarithmic sweep with golden-section refinement.
pub fn hinf_norm(ss: &StateSpace, tol: f64) -> Result<f64> {
    hinf_norm_with(ss, &SweepSettings { tol, ..SweepSettings::default() })
}

pub fn hinf_norm_with(ss: &StateSpace, settings: &SweepSettings) -> Result<f64> {
    let abscissa = spectral_abscissa(&ss.a)?;
    if abscissa >= 0.0 {
        return Err(Error::Unstable(abscissa));
    }
    let points = settings.points.max(2);
    let (lo, hi) = (settings.omega_min.ln(), settings.omega_max.ln());
    let grid: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&t| gain_at(ss, t.exp())).collect();
    let mut best = values.iter().copied().fold(gain_at(ss, 0.0), f64::max);

    // Local maxima of the grid, largest first.
    let mut peaks: Vec<usize> = (0..points)
        .filter(|&i| (i == 0 || values[i] >= values[i - 1]) && (i + 1 == points || values[i] >= values[i + 1]))
        .collect();
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    for &i in peaks.iter().take(settings.refine_peaks) {
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(points - 1)];
        best = best.max(golden_max(|t| gain_at(ss, t.exp()), a, b, settings.tol));
    }
    Ok(best)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = fc.max(fd).max(f(a)).max(f(b));
    // `a`, `b` are log-frequencies, so the interval width is a relative step.
    while b - a > tol.max(1e-14) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        best = best.max(fc).max(fd);
    }
    best
}

/// H-infinity norm from the bounded-real inequality, minimizing `gamma^2`
/// directly with the SDP solver. Intended as a cross-check for small systems.
pub fn hinf_norm_lmi(ss: &StateSpace) -> Result<f64> {
    let abscissa = spectral_abscissa(&ss.a)?;
    if abscissa >= 0.0 {
        return Err(Error::Unstable(abscissa));
    }
    let (n, m, q) = (ss.states(), ss.b.ncols(), ss.c.nrows());
    let mut space = VarSpace::new();
    let p = space.add_symmetric("P", n);
    let g = space.add_scalar("gamma2");
    let nvars = space.dim();
    let sp = space.clone();
    let a = ss.a.clone();
    let (b, c, d) = (ss.b.clone(), ss.c.clone(), ss.d.clone());
    let k = n + m + q;
    let brl = LmiConstraint::from_affine("bounded real", k, nvars, Sense::NegativeSemidefinite, 0.0, move |x| {
        let pm = sp.matrix(p, x);
        let gamma2 = sp.scalar(g, x);
        let mut out = DMatrix::zeros(k, k);
        out.view_mut((0, 0), (n, n)).copy_from(&(a.transpose() * &pm + &pm * &a));
        let pb = &pm * &b;
        out.view_mut((0, n), (n, m)).copy_from(&pb);
        out.view_mut((n, 0), (m, n)).copy_from(&pb.transpose());
        out.view_mut((0, n + m), (n, q)).copy_from(&c.transpose());
        out.view_mut((n + m, 0), (q, n)).copy_from(&c);
        out.view_mut((n, n + m), (m, q)).copy_from(&d.transpose());
        out.view_mut((n + m, n), (q, m)).copy_from(&d);
        for i in 0..m {
            out[(n + i, n + i)] = -gamma2;
        }
        for i in 0..q {
            out[(n + m + i, n + m + i)] = -1.0;
        }
        out
    });
    let sp = space.clone();
    let pos = LmiConstraint::from_affine("storage", n, nvars, Sense::PositiveSemidefinite, 0.0, move |x| sp.matrix(p, x));
    let mut prob = SdpProblem::new(space.clone());
    prob.linear[space.range(g).start] = 1.0;
    prob.add_constraint(brl);
    prob.add_constraint(pos);
    let sol = solve_sdp(&prob, &SdpSettings::default());
    if !sol.is_usable() {
        return Err(Error::Numerical(format!(
            "bounded-real SDP ended with {:?} (pres {:e}, dres {:e}, gap {:e}, {} iterations)",
            sol.status, sol.primal_residual, sol.dual_residual, sol.gap, sol.iterations
        )));
    }
    Ok(space.scalar(g, &sol.x).max(0.0).sqrt())
}

/// Uniformly sampled state and input history.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub step: f64,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Output samples `z = C x + D d`.
    pub fn outputs(&self, ss: &StateSpace) -> Vec<DVector<f64>> {
        self.states.iter().zip(&self.inputs).map(|(x, d)| ss.output(x, d)).collect()
    }
}

/// Magnitude at which [`simulate`] gives up.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Fixed-step RK4 integration of `x' = A x + B d(t)` on `[0, horizon]`.
pub fn simulate<F>(ss: &StateSpace, input: F, x0: &DVector<f64>, horizon: f64, step: f64) -> Result<Trajectory>
where
    F: Fn(f64) -> DVector<f64>,
{
    if !(step > 0.0) || !(step <= horizon) {
        return Err(Error::Config(format!("need 0 < h <= T, got h={step}, T={horizon}")));
    }
    if x0.len() != ss.states() {
        return Err(Error::Dimension(format!("initial state has {} entries, system has {}", x0.len(), ss.states())));
    }
    let steps = (horizon / step).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    for k in 0..=steps {
        let t = k as f64 * step;
        let d = input(t);
        if d.len() != ss.b.ncols() {
            return Err(Error::Dimension(format!("input has {} entries, system expects {}", d.len(), ss.b.ncols())));
        }
        times.push(t);
        states.push(x.clone());
        inputs.push(d.clone());
        if k == steps {
            break;
        }
        let mid = input(t + 0.5 * step);
        let end = input(t + step);
        let k1 = ss.derivative(&x, &d);
        let k2 = ss.derivative(&(&x + &k1 * (0.5 * step)), &mid);
        let k3 = ss.derivative(&(&x + &k2 * (0.5 * step)), &mid);
        let k4 = ss.derivative(&(&x + &k3 * step), &end);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0);
        let size = x.amax();
        if !size.is_finite() || size > DIVERGENCE_LIMIT {
            return Err(Error::Numerical(format!(
                "state magnitude {size:e} exceeded {DIVERGENCE_LIMIT:e} at t={:.6}",
                t + step
            )));
        }
    }
    Ok(Trajectory { step, times, states, inputs })
}

/// Outcome of [`check_dissipation`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DissipationCheck {
    /// Largest `dV/dt - supply` over samples and over the local and global inequalities.
    pub max_violation: f64,
    /// Largest `violation - 1e-8 (1 + |x|^2)`; `<= 0` means passed.
    pub max_excess: f64,
    pub passed: bool,
}

/// Relative threshold of [`check_dissipation`].
pub const DISSIPATION_TOL: f64 = 1e-8;

/// Checks `dV_i/dt <= [w_i; y_i]' S_i [w_i; y_i]` for every subsystem and
/// `dV/dt <= [d; z]' S [d; z]` along `traj`, with `V = sum x_i' P_i x_i` and
/// the derivative taken from the closed-loop vector field.
pub fn check_dissipation(
    traj: &Trajectory,
    certificates: &[LocalCertificate],
    p: &InterconnectionProblem,
    gains: &[DMatrix<f64>],
    supply: &SupplyRate,
) -> Result<DissipationCheck> {
    crate::model::check_gains(p, gains)?;
    if certificates.len() != p.subsystems.len() {
        return Err(Error::Dimension(format!(
            "{} certificates for {} subsystems",
            certificates.len(),
            p.subsystems.len()
        )));
    }
    if supply.s.nrows() != p.n_d + p.n_z {
        return Err(Error::Dimension(format!("supply is {}x{}, expected size {}", supply.s.nrows(), supply.s.ncols(), p.n_d + p.n_z)));
    }
    let c = p.block_c();
    let mut max_violation = f64::NEG_INFINITY;
    let mut max_excess = f64::NEG_INFINITY;
    for (x, d) in traj.states.iter().zip(&traj.inputs) {
        let y = &c * x;
        let w = &p.m_wy * &y + &p.m_wd * d;
        let z = &p.m_zy * &y + &p.m_zd * d;
        let (mut xo, mut wo, mut yo) = (0, 0, 0);
        let mut total_rate = 0.0;
        let mut worst: f64 = f64::NEG_INFINITY;
        for ((sub, cert), k) in p.subsystems.iter().zip(certificates).zip(gains) {
            let (n, nw, ny) = (sub.n(), sub.nw(), sub.ny());
            let xi = x.rows(xo, n).into_owned();
            let wi = w.rows(wo, nw).into_owned();
            let yi = y.rows(yo, ny).into_owned();
            let dx = (&sub.a + &sub.b * k) * &xi + &sub.g * &wi;
            let rate = 2.0 * xi.dot(&(&cert.p * dx));
            total_rate += rate;
            worst = worst.max(rate - cert.supply(&wi, &yi));
            xo += n;
            wo += nw;
            yo += ny;
        }
        worst = worst.max(total_rate - supply.value(d, &z));
        max_violation = max_violation.max(worst);
        max_excess = max_excess.max(worst - DISSIPATION_TOL * (1.0 + x.norm_squared()));
    }
    if traj.is_empty() {
        max_violation = 0.0;
        max_excess = -DISSIPATION_TOL;
    }
    Ok(DissipationCheck { max_violation, max_excess, passed: max_excess <= 0.0 })
}
