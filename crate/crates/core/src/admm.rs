//! Consensus ADMM over the local supply matrices.
//!
//! The local problems own `(S_i, P_i, Y_i)` and the global problem owns the
//! consensus copies of every `S_i` (plus `eta` in H-infinity mode). Only the
//! `S_i` blocks are coupled, so `P_i` and `Y_i` never leave their subsystem.
//!
//! Each iteration is
//!
//! ```text
//! y^k = argmin_{y in L_i}  mu d(y) + rho/2 |y - vbar^k + ubar^k|^2     (per subsystem, parallel)
//! v^k = argmin_{v in L}    g(v)    + rho/2 |y^k - v + ubar^k|^2
//! u^k = ubar^k + y^k - v^k
//! ```
//!
//! with `vbar = v^{k-1}`, `ubar = u^{k-1}` for standard ADMM, and Nesterov
//! extrapolation of both for the accelerated variant.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svec, svec_len};
use crate::lmi::{global_lmi, local_lmi, GlobalLmi, GlobalSupply, LmiConstraint, LocalCertificate, LocalLmi, Sense, SupplyRate, VarSpace, DEFAULT_MARGIN};
use crate::model::{build_permutation, InterconnectionProblem, Subsystem};
use crate::sdp::{solve_sdp, SdpProblem, SdpSettings, SdpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Zero global supply, `d` and `z` absent.
    Stabilize,
    /// `S = diag(eta I, -I)` with `eta` minimized.
    Hinf,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stabilize" => Ok(Mode::Stabilize),
            "hinf" => Ok(Mode::Hinf),
            other => Err(Error::Config(format!("unknown mode {other:?} (expected stabilize or hinf)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Stabilize => "stabilize",
            Mode::Hinf => "hinf",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub rho: f64,
    pub mu: f64,
    pub accelerated: bool,
    pub restart: bool,
    pub max_iter: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub margin: f64,
    pub mode: Mode,
    pub sdp: SdpSettings,
    /// Solve the local problems on the rayon pool.
    pub parallel: bool,
}

impl AdmmConfig {
    pub const DEFAULT_MU: f64 = 1e-3;
    /// Subproblem tolerances. The subproblems are only `2 mu + rho` strongly
    /// convex, so a loose duality gap turns into a large error in the iterate
    /// and the consensus residuals stall well above `tol_primal`.
    pub const SUBPROBLEM: SdpSettings = SdpSettings { tol_feas: 1e-10, tol_gap: 1e-12, max_iter: 200, regularization: 1e-10 };

    pub fn builder(mode: Mode) -> AdmmConfigBuilder {
        AdmmConfigBuilder { cfg: Self::unchecked(mode) }
    }

    fn unchecked(mode: Mode) -> Self {
        Self {
            rho: Self::DEFAULT_MU,
            mu: Self::DEFAULT_MU,
            accelerated: false,
            restart: false,
            max_iter: 200,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            margin: DEFAULT_MARGIN,
            mode,
            sdp: Self::SUBPROBLEM,
            parallel: true,
        }
    }

    /// Defaults with the given mode; always valid.
    pub fn new(mode: Mode) -> Self {
        Self::unchecked(mode)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("rho", self.rho)?;
        positive("mu", self.mu)?;
        positive("tol_primal", self.tol_primal)?;
        positive("tol_dual", self.tol_dual)?;
        if !(self.margin >= 0.0) || !self.margin.is_finite() {
            return Err(Error::Config(format!("margin must be non-negative, got {}", self.margin)));
        }
        if self.accelerated && self.rho > self.mu {
            return Err(Error::Config(format!(
                "accelerated ADMM requires rho <= mu, got rho={} mu={}",
                self.rho, self.mu
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Builder for [`AdmmConfig`] that validates on [`build`](AdmmConfigBuilder::build).
#[derive(Debug, Clone)]
pub struct AdmmConfigBuilder {
    cfg: AdmmConfig,
}

impl AdmmConfigBuilder {
    pub fn rho(mut self, v: f64) -> Self {
        self.cfg.rho = v;
        self
    }
    pub fn mu(mut self, v: f64) -> Self {
        self.cfg.mu = v;
        self
    }
    pub fn accelerated(mut self, v: bool) -> Self {
        self.cfg.accelerated = v;
        self
    }
    pub fn restart(mut self, v: bool) -> Self {
        self.cfg.restart = v;
        self
    }
    pub fn max_iter(mut self, v: usize) -> Self {
        self.cfg.max_iter = v;
        self
    }
    /// Sets both the primal and the dual tolerance.
    pub fn tol(mut self, v: f64) -> Self {
        self.cfg.tol_primal = v;
        self.cfg.tol_dual = v;
        self
    }
    pub fn tol_primal(mut self, v: f64) -> Self {
        self.cfg.tol_primal = v;
        self
    }
    pub fn tol_dual(mut self, v: f64) -> Self {
        self.cfg.tol_dual = v;
        self
    }
    pub fn margin(mut self, v: f64) -> Self {
        self.cfg.margin = v;
        self
    }
    pub fn sdp(mut self, v: SdpSettings) -> Self {
        self.cfg.sdp = v;
        self
    }
    pub fn parallel(mut self, v: bool) -> Self {
        self.cfg.parallel = v;
        self
    }
    pub fn build(self) -> Result<AdmmConfig> {
        self.cfg.validate()?;
        Ok(self.cfg)
    }
}

/// Where a subproblem failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "stage", content = "subsystem", rename_all = "lowercase")]
pub enum Stage {
    Local(usize),
    Global,
    Polish(usize),
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Local(i) => write!(f, "local step of subsystem {}", i + 1),
            Stage::Global => f.write_str("global step"),
            Stage::Polish(i) => write!(f, "polish step of subsystem {}", i + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("{stage} ended with status {status:?}")]
pub struct StepError {
    pub stage: Stage,
    pub status: SdpStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AdmmStatus {
    Converged,
    MaxIterations,
    Infeasible { stage: Stage },
    SubproblemFailure { stage: Stage, status: SdpStatus },
}

impl std::fmt::Display for AdmmStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AdmmStatus::Converged => f.write_str("converged"),
            AdmmStatus::MaxIterations => f.write_str("max-iterations"),
            AdmmStatus::Infeasible { stage } => write!(f, "infeasible ({stage})"),
            AdmmStatus::SubproblemFailure { stage, status } => write!(f, "subproblem failure ({stage}: {status:?})"),
        }
    }
}

impl AdmmStatus {
    pub fn converged(&self) -> bool {
        matches!(self, AdmmStatus::Converged)
    }

    fn from_step(e: StepError) -> Self {
        match e.status {
            SdpStatus::Infeasible => AdmmStatus::Infeasible { stage: e.stage },
            status => AdmmStatus::SubproblemFailure { stage: e.stage, status },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualRecord {
    pub k: usize,
    pub primal: f64,
    pub dual: f64,
    pub eta: Option<f64>,
    pub elapsed_ms: f64,
}

/// One record per completed iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResidualTrace {
    pub records: Vec<ResidualRecord>,
}

impl ResidualTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&ResidualRecord> {
        self.records.last()
    }

    /// First iteration at which both residuals are within `tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.primal <= tol && r.dual <= tol).map(|r| r.k)
    }

    pub fn at(&self, k: usize) -> Option<&ResidualRecord> {
        self.records.iter().find(|r| r.k == k)
    }
}

/// Offsets of each `svec(S_i)` block in the consensus vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusLayout {
    pub blocks: Vec<std::ops::Range<usize>>,
    pub eta: Option<usize>,
    pub len: usize,
}

impl ConsensusLayout {
    pub fn new(p: &InterconnectionProblem, mode: Mode) -> Self {
        let mut blocks = Vec::with_capacity(p.subsystems.len());
        let mut off = 0;
        for d in p.dims() {
            let len = svec_len(d.supply_dim());
            blocks.push(off..off + len);
            off += len;
        }
        let eta = (mode == Mode::Hinf).then_some(off);
        let len = off + usize::from(eta.is_some());
        Self { blocks, eta, len }
    }
}

/// Iterates of the (accelerated) scaled consensus ADMM.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub k: usize,
    /// Local copies of the coupled coordinates.
    pub y: DVector<f64>,
    /// Full local certificates, including the local-only `P_i`, `Y_i`.
    pub locals: Vec<LocalCertificate>,
    pub v: DVector<f64>,
    pub v_prev: DVector<f64>,
    pub u: DVector<f64>,
    pub u_prev: DVector<f64>,
    pub v_bar: DVector<f64>,
    pub u_bar: DVector<f64>,
    pub alpha: f64,
    /// `|r|^2 + |s|^2` of the last iteration, used by the restart test.
    pub last_combined: Option<f64>,
}

impl AdmmState {
    /// All-identity start: `S = P = Y = I`, `u = I` packed, `eta = 1`.
    pub fn initial(p: &InterconnectionProblem, layout: &ConsensusLayout) -> Self {
        let mut packed = DVector::zeros(layout.len);
        let mut locals = Vec::with_capacity(p.subsystems.len());
        for (sub, range) in p.subsystems.iter().zip(&layout.blocks) {
            let k = sub.nw() + sub.ny();
            let eye = DMatrix::identity(k, k);
            packed.rows_mut(range.start, range.len()).copy_from(&svec(&eye).expect("identity is symmetric"));
            let n = sub.n();
            locals.push(LocalCertificate { s: eye, p: DMatrix::identity(n, n), y: DMatrix::identity(n, n), nw: sub.nw() });
        }
        if let Some(e) = layout.eta {
            packed[e] = 1.0;
        }
        Self {
            k: 0,
            y: packed.clone(),
            locals,
            v: packed.clone(),
            v_prev: packed.clone(),
            u: packed.clone(),
            u_prev: packed.clone(),
            v_bar: packed.clone(),
            u_bar: packed,
            alpha: 1.0,
            last_combined: None,
        }
    }
}

/// Minimizer of one subsystem's smoothed, proximal local problem.
#[derive(Debug, Clone)]
pub struct LocalStep {
    pub certificate: LocalCertificate,
    pub status: SdpStatus,
    pub objective: f64,
}

fn usable(status: SdpStatus) -> bool {
    matches!(status, SdpStatus::Optimal | SdpStatus::AlmostOptimal)
}

fn local_problem(lmi: &LocalLmi, anchor: &[f64], cfg: &AdmmConfig) -> SdpProblem {
    let mut prob = SdpProblem::new(lmi.space.clone());
    prob.add_squared_norm(0..lmi.space.dim(), cfg.mu);
    prob.add_prox(lmi.space.range(lmi.s), cfg.rho, anchor);
    prob.add_constraint(lmi.positivity.clone());
    prob.add_constraint(lmi.dissipation.clone());
    prob
}

/// `argmin mu (|S|^2 + |P|^2 + |Y|^2) + rho/2 |svec S - vbar_i + ubar_i|^2` over the local LMIs.
pub fn local_step(
    index: usize,
    sub: &Subsystem,
    v_bar: &DVector<f64>,
    u_bar: &DVector<f64>,
    cfg: &AdmmConfig,
) -> std::result::Result<LocalStep, StepError> {
    local_step_with(index, &local_lmi(sub, cfg.margin), sub.nw(), v_bar, u_bar, cfg)
}

fn local_step_with(
    index: usize,
    lmi: &LocalLmi,
    nw: usize,
    v_bar: &DVector<f64>,
    u_bar: &DVector<f64>,
    cfg: &AdmmConfig,
) -> std::result::Result<LocalStep, StepError> {
    let anchor = v_bar - u_bar;
    let prob = local_problem(lmi, anchor.as_slice(), cfg);
    let sol = solve_sdp(&prob, &cfg.sdp);
    if !usable(sol.status) {
        return Err(StepError { stage: Stage::Local(index), status: sol.status });
    }
    Ok(LocalStep { certificate: lmi.unpack(&sol.x, nw), status: sol.status, objective: sol.objective })
}

/// Consensus update of the global step.
#[derive(Debug, Clone)]
pub struct GlobalStep {
    pub v: DVector<f64>,
    pub eta: Option<f64>,
    pub status: SdpStatus,
}

/// Variables and constraint of the global step, reusable across iterations.
#[derive(Debug, Clone)]
pub struct GlobalProblem {
    pub lmi: GlobalLmi,
    pub mode: Mode,
}

impl GlobalProblem {
    pub fn new(p: &InterconnectionProblem, mode: Mode, margin: f64) -> Result<Self> {
        let perm = build_permutation(&p.dims(), p.n_d, p.n_z);
        let supply = match mode {
            Mode::Stabilize => GlobalSupply::Fixed(SupplyRate::zero(p.n_d, p.n_z)),
            Mode::Hinf => GlobalSupply::HinfVariable,
        };
        Ok(Self { lmi: global_lmi(p, &perm, &supply, margin)?, mode })
    }
}

/// `argmin eta + mu (sum |S_i|^2 + eta^2) + rho/2 |y - v + ubar|^2` over the
/// interconnection LMI and `eta >= 0`. In stabilize mode the `eta` terms vanish.
///
/// The global variable ordering (`S_1, ..., S_N, eta`) matches the consensus
/// layout, so `v` is the solution vector itself.
pub fn global_step(
    global: &GlobalProblem,
    y: &DVector<f64>,
    u_bar: &DVector<f64>,
    cfg: &AdmmConfig,
) -> std::result::Result<GlobalStep, StepError> {
    let space = &global.lmi.space;
    let mut prob = SdpProblem::new(space.clone());
    let anchor = y + u_bar;
    prob.add_squared_norm(0..space.dim(), cfg.mu);
    prob.add_prox(0..space.dim(), cfg.rho, anchor.as_slice());
    if let Some(eta) = global.lmi.eta {
        let k = space.range(eta).start;
        prob.linear[k] += 1.0;
        prob.add_lower_bound(k, 0.0);
    }
    prob.add_constraint(global.lmi.constraint.clone());
    let sol = solve_sdp(&prob, &cfg.sdp);
    if !usable(sol.status) {
        return Err(StepError { stage: Stage::Global, status: sol.status });
    }
    let eta = global.lmi.eta.map(|e| space.scalar(e, &sol.x));
    Ok(GlobalStep { v: sol.x, eta, status: sol.status })
}

/// `u = ubar + y - v`.
pub fn dual_step(u_bar: &DVector<f64>, y: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    if u_bar.len() != y.len() || y.len() != v.len() {
        return Err(Error::Dimension(format!(
            "dual step on vectors of lengths {}, {}, {}",
            u_bar.len(),
            y.len(),
            v.len()
        )));
    }
    Ok(u_bar + y - v)
}

/// `alpha_{k+1} = (1 + sqrt(1 + 4 alpha_k^2)) / 2`.
pub fn next_alpha(alpha: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * alpha * alpha).sqrt()) / 2.0
}

/// Primal and dual residual norms `(|y - v|, rho |v - v_prev|)`.
pub fn residuals(state: &AdmmState, rho: f64) -> (f64, f64) {
    ((&state.y - &state.v).norm(), rho * (&state.v - &state.v_prev).norm())
}

/// Extrapolates `vbar`, `ubar` for the next iteration. With `restart` set and
/// a combined residual larger than at the previous iteration, the momentum is
/// dropped instead.
pub fn accelerate(state: &mut AdmmState, rho: f64, restart: bool) {
    let (r, s) = residuals(state, rho);
    let combined = r * r + s * s;
    let increased = state.last_combined.is_some_and(|prev| combined > prev);
    state.last_combined = Some(combined);
    if restart && increased {
        state.alpha = 1.0;
        state.v_bar = state.v.clone();
        state.u_bar = state.u.clone();
        return;
    }
    let next = next_alpha(state.alpha);
    let beta = (state.alpha - 1.0) / next;
    state.v_bar = &state.v + (&state.v - &state.v_prev) * beta;
    state.u_bar = &state.u + (&state.u - &state.u_prev) * beta;
    state.alpha = next;
}

#[derive(Debug, Clone)]
pub struct AdmmResult {
    /// Certificates with `S_i` taken from the consensus variable.
    pub certificates: Vec<LocalCertificate>,
    pub eta: Option<f64>,
    pub trace: ResidualTrace,
    pub status: AdmmStatus,
    pub iterations: usize,
    /// Final consensus vector.
    pub consensus: DVector<f64>,
    /// Largest dissipation-LMI eigenvalue left after polishing, per subsystem.
    pub polish_slack: Vec<f64>,
}

/// Weight of the norm term in the polish objective.
pub const POLISH_NORM_WEIGHT: f64 = 1e-9;
/// Slack below which the polish re-solves with the dissipation LMI enforced exactly.
pub const POLISH_FEASIBLE: f64 = 1e-9;

/// Re-solves each local problem for `(P_i, Y_i)` with `S_i` fixed to its
/// consensus value. The first solve minimizes the dissipation violation
/// `t >= 0`; when that reaches zero a second solve minimizes the norms of
/// `P_i`, `Y_i` subject to the exact inequality, which keeps the gains small.
pub fn polish(
    p: &InterconnectionProblem,
    lmis: &[LocalLmi],
    layout: &ConsensusLayout,
    v: &DVector<f64>,
    cfg: &AdmmConfig,
) -> std::result::Result<(Vec<LocalCertificate>, Vec<f64>), StepError> {
    let run = |i: usize| -> std::result::Result<(LocalCertificate, f64), StepError> {
        let sub = &p.subsystems[i];
        let lmi = &lmis[i];
        let range = &layout.blocks[i];
        let s_fixed = crate::linalg::smat(&v.as_slice()[range.clone()]).expect("block length is triangular");
        let mut fixed = DVector::zeros(lmi.space.dim());
        lmi.space.write(lmi.s, &s_fixed, &mut fixed).expect("shape from layout");
        let p_range = lmi.space.range(lmi.p);
        let y_range = lmi.space.range(lmi.y);
        let keep: Vec<usize> = p_range.clone().chain(y_range.clone()).collect();

        let mut space = VarSpace::new();
        let pv = space.add_symmetric("P", sub.n());
        let yv = space.add_general("Y", sub.n(), sub.n());
        let t = space.add_scalar("t");
        let nvars = space.dim();
        let tk = space.range(t).start;
        let positivity = lmi.positivity.restrict(&fixed, &keep);
        let dissipation = lmi.dissipation.restrict(&fixed, &keep);
        let dim = dissipation.dim();
        let relaxed = LmiConstraint::from_affine("relaxed dissipation", dim, nvars, Sense::NegativeSemidefinite, 0.0, |x| {
            let mut m = dissipation.evaluate(&x.rows(0, tk).into_owned());
            for j in 0..dim {
                m[(j, j)] -= x[tk];
            }
            m
        });
        let positivity = pad(positivity, nvars);
        let mut prob = SdpProblem::new(space.clone());
        // tie-breaker only: a weight comparable to the slack trades violation for smaller gains
        prob.add_squared_norm(0..tk, POLISH_NORM_WEIGHT);
        prob.linear[tk] = 1.0;
        prob.add_lower_bound(tk, 0.0);
        prob.add_constraint(positivity);
        prob.add_constraint(relaxed);
        let sol = solve_sdp(&prob, &cfg.sdp);
        if !usable(sol.status) {
            return Err(StepError { stage: Stage::Polish(i), status: sol.status });
        }
        let mut x = sol.x;
        if x[tk] <= POLISH_FEASIBLE {
            // feasible with S_i fixed: keep the constraint exact and shrink P_i, Y_i
            let mut space = VarSpace::new();
            space.add_symmetric("P", sub.n());
            space.add_general("Y", sub.n(), sub.n());
            let mut prob = SdpProblem::new(space);
            prob.add_squared_norm(0..tk, 1.0);
            prob.add_constraint(lmi.positivity.restrict(&fixed, &keep));
            prob.add_constraint(dissipation.clone());
            let sol = solve_sdp(&prob, &cfg.sdp);
            if usable(sol.status) {
                x.rows_mut(0, tk).copy_from(&sol.x);
            }
        }
        let cert = LocalCertificate {
            s: s_fixed,
            p: space.matrix(pv, &x),
            y: space.matrix(yv, &x),
            nw: sub.nw(),
        };
        let slack = crate::linalg::max_sym_eigenvalue(&crate::lmi::dissipation_matrix(sub, &cert.s, &cert.p, &cert.y));
        Ok((cert, slack))
    };
    let out: Vec<_> = if cfg.parallel {
        (0..p.subsystems.len()).into_par_iter().map(run).collect()
    } else {
        (0..p.subsystems.len()).map(run).collect()
    };
    let mut certs = Vec::with_capacity(out.len());
    let mut slack = Vec::with_capacity(out.len());
    for r in out {
        let (c, s) = r?;
        certs.push(c);
        slack.push(s);
    }
    Ok((certs, slack))
}

/// Extends a constraint over `k` variables to `nvars >= k` variables.
fn pad(c: LmiConstraint, nvars: usize) -> LmiConstraint {
    let k = c.coeffs().iter().map(|(j, _)| j + 1).max().unwrap_or(0);
    LmiConstraint::from_affine(&c.label, c.dim(), nvars, c.sense, c.margin, |x| c.evaluate(&x.rows(0, k).into_owned()))
}

/// Callback invoked after every completed iteration.
pub type Observer<'a> = &'a mut dyn FnMut(&AdmmState, &ResidualRecord);

pub fn run(p: &InterconnectionProblem, cfg: &AdmmConfig) -> Result<AdmmResult> {
    run_observed(p, cfg, &mut |_, _| {})
}

pub fn run_observed(p: &InterconnectionProblem, cfg: &AdmmConfig, observer: Observer<'_>) -> Result<AdmmResult> {
    cfg.validate()?;
    p.ensure_valid()?;
    if cfg.mode == Mode::Stabilize && (p.n_d != 0 || p.n_z != 0) {
        return Err(Error::Precondition(format!(
            "stabilize mode requires n_d = n_z = 0 (no exogenous channels), got n_d={}, n_z={}",
            p.n_d, p.n_z
        )));
    }
    let start = Instant::now();
    let layout = ConsensusLayout::new(p, cfg.mode);
    let lmis: Vec<LocalLmi> = p.subsystems.iter().map(|s| local_lmi(s, cfg.margin)).collect();
    let global = GlobalProblem::new(p, cfg.mode, cfg.margin)?;
    let mut state = AdmmState::initial(p, &layout);
    let mut trace = ResidualTrace::default();
    let mut eta = layout.eta.map(|e| state.v[e]);

    let fail = |status: AdmmStatus, state: &AdmmState, trace: ResidualTrace, eta| AdmmResult {
        certificates: state.locals.clone(),
        eta,
        trace,
        status,
        iterations: state.k,
        consensus: state.v.clone(),
        polish_slack: Vec::new(),
    };

    let mut status = AdmmStatus::MaxIterations;
    for k in 1..=cfg.max_iter {
        state.k = k;
        // local steps
        let solve_local = |i: usize| {
            let r = &layout.blocks[i];
            let vb = state.v_bar.rows(r.start, r.len()).into_owned();
            let ub = state.u_bar.rows(r.start, r.len()).into_owned();
            local_step_with(i, &lmis[i], p.subsystems[i].nw(), &vb, &ub, cfg)
        };
        let steps: Vec<_> = if cfg.parallel {
            (0..lmis.len()).into_par_iter().map(solve_local).collect()
        } else {
            (0..lmis.len()).map(solve_local).collect()
        };
        let mut y = DVector::zeros(layout.len);
        for (i, step) in steps.into_iter().enumerate() {
            let step = match step {
                Ok(s) => s,
                Err(e) => return Ok(fail(AdmmStatus::from_step(e), &state, trace, eta)),
            };
            let r = &layout.blocks[i];
            y.rows_mut(r.start, r.len()).copy_from(&svec(&step.certificate.s)?);
            state.locals[i] = step.certificate;
        }
        if let Some(e) = layout.eta {
            // eta has no local owner: its local copy minimizes the prox term alone
            y[e] = state.v_bar[e] - state.u_bar[e];
        }
        state.y = y;

        // global step
        let g = match global_step(&global, &state.y, &state.u_bar, cfg) {
            Ok(g) => g,
            Err(e) => return Ok(fail(AdmmStatus::from_step(e), &state, trace, eta)),
        };
        eta = g.eta;
        state.v_prev = std::mem::replace(&mut state.v, g.v);

        // dual step
        let u = dual_step(&state.u_bar, &state.y, &state.v)?;
        state.u_prev = std::mem::replace(&mut state.u, u);

        let (primal, dual) = residuals(&state, cfg.rho);
        let record = ResidualRecord { k, primal, dual, eta, elapsed_ms: start.elapsed().as_secs_f64() * 1e3 };
        trace.records.push(record);
        observer(&state, &record);
        if primal <= cfg.tol_primal && dual <= cfg.tol_dual {
            status = AdmmStatus::Converged;
            break;
        }

        if cfg.accelerated {
            accelerate(&mut state, cfg.rho, cfg.restart);
        } else {
            state.v_bar = state.v.clone();
            state.u_bar = state.u.clone();
        }
    }

    let (certificates, polish_slack) = match polish(p, &lmis, &layout, &state.v, cfg) {
        Ok(out) => out,
        Err(_) => {
            // fall back to the local copies, whose S_i differ from consensus by the primal residual
            let slack = p
                .subsystems
                .iter()
                .zip(&state.locals)
                .map(|(s, c)| crate::linalg::max_sym_eigenvalue(&crate::lmi::dissipation_matrix(s, &c.s, &c.p, &c.y)))
                .collect();
            (state.locals.clone(), slack)
        }
    };
    Ok(AdmmResult {
        certificates,
        eta,
        trace,
        status,
        iterations: state.k,
        consensus: state.v.clone(),
        polish_slack,
    })
}
