//! End-to-end synthesis: ADMM, gain recovery and post-hoc verification, plus
//! a centralized single-SDP oracle for small problems.
//!
//! Gains are recovered as `K_i = B_i^+ P_i^-1 Y_i`. The local inequality
//! treats `Y_i` as free, so the recovered gain reproduces `Y_i` only when
//! `P_i^-1 Y_i` lies in the range of `B_i`. [`verify_certificates`] closes
//! that gap by substituting `P_i B_i K_i` back into every inequality and by
//! checking the assembled closed loop directly.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::admm::{self, AdmmConfig, AdmmStatus, Mode, ResidualTrace};
use crate::analysis::{hinf_norm, spectral_abscissa};
use crate::error::{Error, Result};
use crate::linalg::{block_diag, max_sym_eigenvalue, min_sym_eigenvalue, pinv, rank};
use crate::lmi::{
    dissipation_matrix, global_lmi, hinf_supply, local_lmi, GlobalSupply, LocalCertificate, SupplyRate, VarSpace,
    DEFAULT_MARGIN,
};
use crate::model::{assemble_closed_loop, build_permutation, InterconnectionProblem};
use crate::sdp::{solve_sdp, SdpProblem, SdpSettings, SdpStatus};

/// Threshold on the re-evaluated local inequalities and on the recovery residual.
pub const TOL_VERIFY: f64 = 1e-7;
/// Relative singular-value cutoff of the pseudo-inverse in gain recovery.
pub const PINV_CUTOFF: f64 = 1e-12;
/// Storage matrices with a smaller minimum eigenvalue are treated as singular.
pub const SINGULAR_STORAGE: f64 = 1e-14;
/// Relative accuracy of the frequency sweep used for the H-infinity check.
pub const HINF_SWEEP_TOL: f64 = 1e-8;
/// Absolute-plus-relative slack of the H-infinity check, `sqrt(eta) + slack (1 + sqrt(eta))`.
pub const HINF_SLACK: f64 = 1e-6;
/// Largest variable count accepted by [`centralized_synthesis`].
pub const CENTRAL_LIMIT: usize = 20_000;

/// `K_i = B_i^+ P_i^-1 Y_i` for every subsystem.
pub fn recover_gains(ps: &[DMatrix<f64>], ys: &[DMatrix<f64>], bs: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    if ps.len() != ys.len() || ps.len() != bs.len() {
        return Err(Error::Dimension(format!("{} P, {} Y and {} B matrices", ps.len(), ys.len(), bs.len())));
    }
    ps.iter()
        .zip(ys)
        .zip(bs)
        .enumerate()
        .map(|(index, ((p, y), b))| {
            let n = p.nrows();
            if p.shape() != (n, n) || y.shape() != (n, n) || b.nrows() != n {
                return Err(Error::Dimension(format!(
                    "subsystem {index}: P {:?}, Y {:?}, B {:?}",
                    p.shape(),
                    y.shape(),
                    b.shape()
                )));
            }
            let min_eig = if n == 0 { 1.0 } else { min_sym_eigenvalue(p) };
            let p_inv_y = match p.clone().cholesky() {
                Some(ch) if min_eig > SINGULAR_STORAGE => ch.solve(y),
                _ => return Err(Error::SingularStorage { index, min_eig }),
            };
            Ok(pinv(b, PINV_CUTOFF) * p_inv_y)
        })
        .collect()
}

/// Pass/fail thresholds stored next to the measured values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub recovery: f64,
    pub local: f64,
    /// Upper bound on the global inequality's largest eigenvalue, `-margin + tol`.
    pub global: f64,
    pub hinf_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    /// `||B B^+ P^-1 Y - P^-1 Y||_F` per subsystem.
    pub recovery: Vec<f64>,
    /// Largest eigenvalue of the local inequality with `Y_i = P_i B_i K_i`.
    pub local: Vec<f64>,
    /// Largest eigenvalue of the interconnection inequality (margin not included).
    pub global: f64,
    pub spectral_abscissa: f64,
    /// Swept closed-loop H-infinity norm and its certified bound `sqrt(eta)`.
    pub hinf_norm: Option<f64>,
    pub hinf_bound: Option<f64>,
    /// Whether `rank(M_zy blockdiag(C_i)) = n_y`; only evaluated with exogenous channels.
    pub detectable: Option<bool>,
    pub thresholds: Thresholds,
    pub passed: bool,
}

impl VerificationReport {
    /// Human-readable descriptions of the failed checks.
    pub fn failures(&self) -> Vec<String> {
        let t = &self.thresholds;
        let mut out = Vec::new();
        for (i, r) in self.recovery.iter().enumerate() {
            if !(*r <= t.recovery) {
                out.push(format!("subsystem {}: gain recovery residual {r:.3e} > {:.0e}", i + 1, t.recovery));
            }
        }
        for (i, l) in self.local.iter().enumerate() {
            if !(*l <= t.local) {
                out.push(format!("subsystem {}: local inequality eigenvalue {l:.3e} > {:.0e}", i + 1, t.local));
            }
        }
        if !(self.global <= t.global) {
            out.push(format!("interconnection inequality eigenvalue {:.3e} > {:.3e}", self.global, t.global));
        }
        if !(self.spectral_abscissa < 0.0) {
            out.push(format!("closed loop unstable, spectral abscissa {:.3e}", self.spectral_abscissa));
        }
        if let Some(bound) = self.hinf_bound {
            match self.hinf_norm {
                Some(g) if g <= bound + t.hinf_slack * (1.0 + bound) => {}
                Some(g) => out.push(format!("closed-loop H-infinity norm {g:.6e} exceeds bound {bound:.6e}")),
                None => out.push("closed-loop H-infinity norm unavailable".to_string()),
            }
        }
        out
    }
}

/// Re-checks certificates and gains on the assembled closed loop.
///
/// Only malformed inputs (wrong counts or shapes) produce an error; every
/// numerical outcome is reported.
pub fn verify_certificates(
    p: &InterconnectionProblem,
    gains: &[DMatrix<f64>],
    certificates: &[LocalCertificate],
    supply: &SupplyRate,
    margin: f64,
) -> Result<VerificationReport> {
    p.ensure_valid()?;
    if certificates.len() != p.subsystems.len() {
        return Err(Error::Dimension(format!(
            "{} certificates for {} subsystems",
            certificates.len(),
            p.subsystems.len()
        )));
    }
    let closed = assemble_closed_loop(p, gains)?;

    let mut recovery = Vec::with_capacity(gains.len());
    let mut local = Vec::with_capacity(gains.len());
    for ((sub, cert), k) in p.subsystems.iter().zip(certificates).zip(gains) {
        let expected = sub.dims().supply_dim();
        if cert.s.shape() != (expected, expected) || cert.p.shape() != (sub.n(), sub.n()) {
            return Err(Error::Dimension(format!("certificate shapes {:?}, {:?}", cert.s.shape(), cert.p.shape())));
        }
        let p_inv_y = cert.p.clone().lu().solve(&cert.y);
        let residual = match &p_inv_y {
            Some(z) => (&sub.b * pinv(&sub.b, PINV_CUTOFF) * z - z).norm(),
            None => f64::INFINITY,
        };
        recovery.push(residual);
        let y = &cert.p * &sub.b * k;
        local.push(max_sym_eigenvalue(&dissipation_matrix(sub, &cert.s, &cert.p, &y)));
    }

    let global = global_eigenvalue(p, certificates, supply)?;
    let abscissa = spectral_abscissa(&closed.a)?;
    let hinf_bound = supply.eta.map(f64::sqrt);
    let hinf = match hinf_bound {
        Some(_) if abscissa < 0.0 => Some(hinf_norm(&closed, HINF_SWEEP_TOL)?),
        _ => None,
    };
    let detectable = (p.n_d > 0 || p.n_z > 0).then(|| is_detectable(p));
    let thresholds =
        Thresholds { recovery: TOL_VERIFY, local: TOL_VERIFY, global: -margin + TOL_VERIFY, hinf_slack: HINF_SLACK };
    let mut report = VerificationReport {
        recovery,
        local,
        global,
        spectral_abscissa: abscissa,
        hinf_norm: hinf,
        hinf_bound,
        detectable,
        thresholds,
        passed: false,
    };
    report.passed = report.failures().is_empty();
    Ok(report)
}

fn global_eigenvalue(p: &InterconnectionProblem, certificates: &[LocalCertificate], supply: &SupplyRate) -> Result<f64> {
    if p.n_y() + p.n_d == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let perm = build_permutation(&p.dims(), p.n_d, p.n_z);
    let lmi = global_lmi(p, &perm, &GlobalSupply::Fixed(supply.clone()), 0.0)?;
    let mut x = DVector::zeros(lmi.space.dim());
    for (id, cert) in lmi.supplies.iter().zip(certificates) {
        lmi.space.write(*id, &cert.s, &mut x)?;
    }
    Ok(max_sym_eigenvalue(&lmi.constraint.evaluate(&x)))
}

/// Rank condition `rank(M_zy blockdiag(C_i)) = n_y` of the detectability assumption.
pub fn is_detectable(p: &InterconnectionProblem) -> bool {
    rank(&(&p.m_zy * p.block_c()), 1e-9) == p.n_y()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthesisStatus {
    Verified,
    VerificationFailed,
    NotConverged,
    Infeasible,
}

impl std::fmt::Display for SynthesisStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Verified => "verified",
            Self::VerificationFailed => "verification-failed",
            Self::NotConverged => "not-converged",
            Self::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub mode: Mode,
    pub gains: Vec<DMatrix<f64>>,
    pub eta: Option<f64>,
    /// `sqrt(eta)`, the certified closed-loop H-infinity bound.
    pub bound: Option<f64>,
    pub certificates: Vec<LocalCertificate>,
    pub trace: ResidualTrace,
    /// Missing when gains could not be recovered.
    pub report: Option<VerificationReport>,
    pub status: SynthesisStatus,
    pub admm_status: AdmmStatus,
    pub iterations: usize,
}

/// Stabilizing structured feedback for a problem without exogenous channels.
pub fn synthesize_stabilizing(p: &InterconnectionProblem, cfg: &AdmmConfig) -> Result<SynthesisResult> {
    if p.n_d != 0 || p.n_z != 0 {
        return Err(Error::Precondition(format!(
            "stabilization requires d = z = 0 (no exogenous channels), got n_d={}, n_z={}",
            p.n_d, p.n_z
        )));
    }
    if let Some(i) = p.subsystems.iter().position(|s| s.b.iter().all(|v| *v == 0.0)) {
        return Err(Error::Precondition(format!("subsystem {} has no actuation (B = 0)", i + 1)));
    }
    let cfg = AdmmConfig { mode: Mode::Stabilize, ..cfg.clone() };
    synthesize(p, &cfg)
}

/// H-infinity synthesis; the detectability rank condition is recorded in the
/// report rather than enforced.
pub fn synthesize_hinf(p: &InterconnectionProblem, cfg: &AdmmConfig) -> Result<SynthesisResult> {
    if p.n_d == 0 || p.n_z == 0 {
        return Err(Error::Precondition(format!(
            "H-infinity synthesis needs n_d >= 1 and n_z >= 1, got n_d={}, n_z={}",
            p.n_d, p.n_z
        )));
    }
    let cfg = AdmmConfig { mode: Mode::Hinf, ..cfg.clone() };
    synthesize(p, &cfg)
}

/// Dispatches on `cfg.mode`.
pub fn synthesize_with_mode(p: &InterconnectionProblem, cfg: &AdmmConfig) -> Result<SynthesisResult> {
    match cfg.mode {
        Mode::Stabilize => synthesize_stabilizing(p, cfg),
        Mode::Hinf => synthesize_hinf(p, cfg),
    }
}

fn synthesize(p: &InterconnectionProblem, cfg: &AdmmConfig) -> Result<SynthesisResult> {
    synthesize_observed(p, cfg, &mut |_, _| {})
}

/// Like [`synthesize_with_mode`] but reports every ADMM iteration.
pub fn synthesize_observed(
    p: &InterconnectionProblem,
    cfg: &AdmmConfig,
    observer: admm::Observer<'_>,
) -> Result<SynthesisResult> {
    let out = admm::run_observed(p, cfg, observer)?;
    let supply = supply_for(p, cfg.mode, out.eta)?;
    let bound = out.eta.map(|e| e.max(0.0).sqrt());
    let mut result = SynthesisResult {
        mode: cfg.mode,
        gains: Vec::new(),
        eta: out.eta,
        bound,
        certificates: out.certificates,
        trace: out.trace,
        report: None,
        status: SynthesisStatus::NotConverged,
        admm_status: out.status,
        iterations: out.iterations,
    };
    if matches!(out.status, AdmmStatus::Infeasible { .. }) {
        result.status = SynthesisStatus::Infeasible;
        return Ok(result);
    }
    finish(p, &mut result, &supply, cfg.margin, out.status.converged());
    Ok(result)
}

fn supply_for(p: &InterconnectionProblem, mode: Mode, eta: Option<f64>) -> Result<SupplyRate> {
    match (mode, eta) {
        (Mode::Hinf, Some(e)) => hinf_supply(e.max(0.0), p.n_d, p.n_z),
        _ => Ok(SupplyRate::zero(p.n_d, p.n_z)),
    }
}

/// Recovers gains and verifies them; updates status in place.
fn finish(p: &InterconnectionProblem, result: &mut SynthesisResult, supply: &SupplyRate, margin: f64, converged: bool) {
    let ps: Vec<_> = result.certificates.iter().map(|c| c.p.clone()).collect();
    let ys: Vec<_> = result.certificates.iter().map(|c| c.y.clone()).collect();
    let bs: Vec<_> = p.subsystems.iter().map(|s| s.b.clone()).collect();
    if let Ok(gains) = recover_gains(&ps, &ys, &bs) {
        result.report = verify_certificates(p, &gains, &result.certificates, supply, margin).ok();
        result.gains = gains;
    }
    let passed = result.report.as_ref().is_some_and(|r| r.passed);
    result.status = match (converged, passed) {
        (false, _) => SynthesisStatus::NotConverged,
        (true, true) => SynthesisStatus::Verified,
        (true, false) => SynthesisStatus::VerificationFailed,
    };
}

/// Block-diagonal global gain `blockdiag(K_i)`.
pub fn global_gain(gains: &[DMatrix<f64>]) -> DMatrix<f64> {
    block_diag(&gains.iter().collect::<Vec<_>>())
}

#[derive(Debug, Clone)]
pub struct CentralizedResult {
    pub certificates: Vec<LocalCertificate>,
    pub eta: Option<f64>,
    pub gains: Vec<DMatrix<f64>>,
    pub report: Option<VerificationReport>,
    pub sdp_status: SdpStatus,
    pub status: SynthesisStatus,
}

/// Weight of the norm regularizer that keeps the H-infinity oracle bounded.
pub const CENTRAL_REGULARIZATION: f64 = 1e-8;

/// Solves all local inequalities and the interconnection inequality jointly.
///
/// Stabilization finds the minimum-norm certificate; H-infinity minimizes
/// `eta` plus a tiny norm regularizer (the feasible set is a cone in the
/// certificates, so pure `min eta` has no bounded minimizer).
pub fn centralized_synthesis(p: &InterconnectionProblem, mode: Mode, margin: f64) -> Result<CentralizedResult> {
    p.ensure_valid()?;
    if mode == Mode::Stabilize && (p.n_d != 0 || p.n_z != 0) {
        return Err(Error::Precondition("stabilize mode requires n_d = n_z = 0".into()));
    }
    if mode == Mode::Hinf && (p.n_d == 0 || p.n_z == 0) {
        return Err(Error::Precondition("H-infinity mode needs n_d >= 1 and n_z >= 1".into()));
    }
    let lmis: Vec<_> = p.subsystems.iter().map(|s| local_lmi(s, margin)).collect();
    let total: usize = lmis.iter().map(|l| l.space.dim()).sum::<usize>() + usize::from(mode == Mode::Hinf);
    if total > CENTRAL_LIMIT {
        return Err(Error::Precondition(format!("centralized problem has {total} variables, limit {CENTRAL_LIMIT}")));
    }

    let mut space = VarSpace::new();
    let mut offsets = Vec::with_capacity(lmis.len());
    let mut supplies = Vec::with_capacity(lmis.len());
    for (i, (sub, lmi)) in p.subsystems.iter().zip(&lmis).enumerate() {
        offsets.push(space.dim());
        supplies.push(space.add_symmetric(&format!("S{}", i + 1), sub.dims().supply_dim()));
        space.add_symmetric(&format!("P{}", i + 1), sub.n());
        space.add_general(&format!("Y{}", i + 1), sub.n(), sub.n());
        debug_assert_eq!(space.dim() - offsets[i], lmi.space.dim());
    }
    let eta = (mode == Mode::Hinf).then(|| space.add_scalar("eta"));

    let mut prob = SdpProblem::new(space.clone());
    let weight = match mode {
        Mode::Stabilize => 1.0,
        Mode::Hinf => CENTRAL_REGULARIZATION,
    };
    prob.add_squared_norm(0..space.dim(), weight);
    for (lmi, &off) in lmis.iter().zip(&offsets) {
        for c in lmi.constraints() {
            prob.add_constraint(c.remap(|k| k + off));
        }
    }
    let perm = build_permutation(&p.dims(), p.n_d, p.n_z);
    let supply = match mode {
        Mode::Stabilize => GlobalSupply::Fixed(SupplyRate::zero(p.n_d, p.n_z)),
        Mode::Hinf => GlobalSupply::HinfVariable,
    };
    let global = global_lmi(p, &perm, &supply, margin)?;
    if global.constraint.dim() > 0 {
        let mut map = vec![0; global.space.dim()];
        for (g, c) in global.supplies.iter().zip(&supplies) {
            for (a, b) in global.space.range(*g).zip(space.range(*c)) {
                map[a] = b;
            }
        }
        if let (Some(g), Some(c)) = (global.eta, eta) {
            map[global.space.range(g).start] = space.range(c).start;
        }
        prob.add_constraint(global.constraint.remap(|k| map[k]));
    }
    if let Some(e) = eta {
        let k = space.range(e).start;
        prob.linear[k] += 1.0;
        prob.add_lower_bound(k, 0.0);
    }

    let settings = SdpSettings { tol_feas: 1e-10, tol_gap: 1e-10, ..SdpSettings::default() };
    let sol = solve_sdp(&prob, &settings);
    let certificates: Vec<LocalCertificate> = lmis
        .iter()
        .zip(&offsets)
        .zip(&p.subsystems)
        .map(|((lmi, &off), sub)| lmi.unpack(&sol.x.rows(off, lmi.space.dim()).into_owned(), sub.nw()))
        .collect();
    let eta_value = eta.map(|e| space.scalar(e, &sol.x).max(0.0));
    let mut out = CentralizedResult {
        certificates,
        eta: eta_value,
        gains: Vec::new(),
        report: None,
        sdp_status: sol.status,
        status: SynthesisStatus::NotConverged,
    };
    if sol.status == SdpStatus::Infeasible {
        out.status = SynthesisStatus::Infeasible;
        return Ok(out);
    }
    let supply = supply_for(p, mode, eta_value)?;
    let mut tmp = SynthesisResult {
        mode,
        gains: Vec::new(),
        eta: eta_value,
        bound: eta_value.map(f64::sqrt),
        certificates: out.certificates.clone(),
        trace: ResidualTrace::default(),
        report: None,
        status: SynthesisStatus::NotConverged,
        admm_status: AdmmStatus::Converged,
        iterations: 0,
    };
    finish(p, &mut tmp, &supply, margin, sol.is_usable());
    out.gains = tmp.gains;
    out.report = tmp.report;
    out.status = tmp.status;
    Ok(out)
}

/// Default-margin convenience for [`centralized_synthesis`].
pub fn centralized(p: &InterconnectionProblem, mode: Mode) -> Result<CentralizedResult> {
    centralized_synthesis(p, mode, DEFAULT_MARGIN)
}
