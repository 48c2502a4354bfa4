//! Primal-dual interior-point solver for small semidefinite programs
//!
//! ```text
//! minimize    c'x + 1/2 x' diag(h) x
//! subject to  F_j(x) = C_j + sum_k x_k A_jk >= 0,   j = 1..J
//! ```
//!
//! Iterates are Nesterov-Todd scaled and each step uses a Mehrotra
//! predictor-corrector pair sharing one factorization of the Schur complement
//! `diag(h) + sum_j [<W_j^-1 A_jk W_j^-1, A_jl>]`. The start is infeasible
//! (`S_j = F_j(x) + shift I`, `Z_j = I`), so no phase-one search is needed for
//! feasible problems. Primal infeasibility is reported with a dual improving
//! ray `Z >= 0`, `<C, Z> = -1`, `A'(Z) ~ 0`.

use nalgebra::{Cholesky, DMatrix, DVector, SVD};
use serde::Serialize;

use crate::lmi::{LmiConstraint, SymEntries, VarSpace};
use crate::linalg::{min_sym_eigenvalue, symmetrize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    /// Tolerances met only within a factor of 1000 before progress stalled.
    AlmostOptimal,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
    /// Static diagonal regularization of the Schur complement.
    pub regularization: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self { tol_feas: 1e-8, tol_gap: 1e-8, max_iter: 200, regularization: 1e-10 }
    }
}

/// Linear-plus-diagonal-quadratic objective over affine semidefinite constraints.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub space: VarSpace,
    pub linear: DVector<f64>,
    /// Diagonal of the quadratic term; the objective carries a factor 1/2.
    pub quadratic: DVector<f64>,
    /// Constant added to the reported objective value.
    pub offset: f64,
    pub constraints: Vec<LmiConstraint>,
    pub lower_bounds: Vec<(usize, f64)>,
}

impl SdpProblem {
    pub fn new(space: VarSpace) -> Self {
        let n = space.dim();
        Self {
            space,
            linear: DVector::zeros(n),
            quadratic: DVector::zeros(n),
            offset: 0.0,
            constraints: Vec::new(),
            lower_bounds: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn add_constraint(&mut self, c: LmiConstraint) {
        self.constraints.push(c);
    }

    /// Adds `weight * ||x[range]||^2`.
    pub fn add_squared_norm(&mut self, range: std::ops::Range<usize>, weight: f64) {
        for k in range {
            self.quadratic[k] += 2.0 * weight;
        }
    }

    /// Adds `weight / 2 * ||x[range] - anchor||^2`.
    pub fn add_prox(&mut self, range: std::ops::Range<usize>, weight: f64, anchor: &[f64]) {
        debug_assert_eq!(range.len(), anchor.len());
        for (k, a) in range.zip(anchor) {
            self.quadratic[k] += weight;
            self.linear[k] -= weight * a;
            self.offset += 0.5 * weight * a * a;
        }
    }

    pub fn add_lower_bound(&mut self, index: usize, bound: f64) {
        self.lower_bounds.push((index, bound));
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.offset + self.linear.dot(x) + 0.5 * x.iter().zip(self.quadratic.iter()).map(|(v, h)| h * v * v).sum::<f64>()
    }

    /// Largest constraint violation at `x` (bounds included); `<= 0` means feasible.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let lmi = self.constraints.iter().map(|c| c.violation(x)).fold(f64::NEG_INFINITY, f64::max);
        let bounds = self.lower_bounds.iter().map(|&(k, lb)| lb - x[k]).fold(f64::NEG_INFINITY, f64::max);
        lmi.max(bounds)
    }

    fn blocks(&self) -> Vec<Block> {
        let mut out: Vec<Block> = self
            .constraints
            .iter()
            .filter(|c| c.dim() > 0)
            .map(|c| {
                let (constant, coeffs) = c.canonical();
                Block::new(constant, coeffs)
            })
            .collect();
        for &(k, lb) in &self.lower_bounds {
            out.push(Block::new(DMatrix::from_element(1, 1, -lb), vec![(k, vec![(0, 0, 1.0)])]));
        }
        out
    }
}

/// Dual improving ray proving primal infeasibility.
#[derive(Debug, Clone)]
pub struct InfeasibilityCertificate {
    /// One multiplier per constraint (in canonical `>= 0` form), then one per bound.
    pub duals: Vec<DMatrix<f64>>,
    /// `||A'(Z)||` for the normalization `<C, Z> = -1`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub status: SdpStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Relative duality gap.
    pub gap: f64,
    pub iterations: usize,
    pub certificate: Option<InfeasibilityCertificate>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    /// Optimal or almost optimal.
    pub fn is_usable(&self) -> bool {
        matches!(self.status, SdpStatus::Optimal | SdpStatus::AlmostOptimal)
    }
}

struct Block {
    dim: usize,
    constant: DMatrix<f64>,
    vars: Vec<usize>,
    coeffs: Vec<SymEntries>,
}

impl Block {
    fn new(constant: DMatrix<f64>, coeffs: Vec<(usize, SymEntries)>) -> Self {
        let dim = constant.nrows();
        let (vars, coeffs) = coeffs.into_iter().unzip();
        Self { dim, constant, vars, coeffs }
    }

    fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        self.add_linear(x, &mut out);
        out
    }

    fn add_linear(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        for (k, entries) in self.vars.iter().zip(&self.coeffs) {
            let xk = x[*k];
            if xk != 0.0 {
                for &(i, j, v) in entries {
                    out[(i, j)] += xk * v;
                }
            }
        }
    }

    /// Adds `A'(Z)` into `out`.
    fn add_adjoint(&self, z: &DMatrix<f64>, out: &mut DVector<f64>) {
        for (k, entries) in self.vars.iter().zip(&self.coeffs) {
            out[*k] += entries.iter().map(|&(i, j, v)| v * z[(i, j)]).sum::<f64>();
        }
    }
}

fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let k = m.nrows();
    let mut idx = 0;
    for j in 0..k {
        for i in 0..=j {
            out[idx] = if i == j { m[(i, i)] } else { std::f64::consts::SQRT_2 * m[(i, j)] };
            idx += 1;
        }
    }
}

fn smat_from(v: &[f64], k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(k, k);
    let mut idx = 0;
    for j in 0..k {
        for i in 0..=j {
            if i == j {
                out[(i, i)] = v[idx];
            } else {
                let val = v[idx] / std::f64::consts::SQRT_2;
                out[(i, j)] = val;
                out[(j, i)] = val;
            }
            idx += 1;
        }
    }
    out
}

fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Nesterov-Todd scaling of one block: `R^-1 S R^-T = R' Z R = diag(lambda)`.
struct Scaling {
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl Scaling {
    fn new(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Self> {
        let ls = Cholesky::new(s.clone())?.l();
        let lz = Cholesky::new(z.clone())?.l();
        let svd = SVD::new(lz.transpose() * &ls, true, true);
        let u = svd.u?;
        let v = svd.v_t?.transpose();
        let lambda = svd.singular_values;
        if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return None;
        }
        let inv_sqrt = lambda.map(|l| 1.0 / l.sqrt());
        let r = ls * v * DMatrix::from_diagonal(&inv_sqrt);
        let r_inv = DMatrix::from_diagonal(&inv_sqrt) * u.transpose() * lz.transpose();
        Some(Self { r, r_inv, lambda })
    }

    /// `R^-1 M R^-T`.
    fn to_scaled(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.r_inv * m * self.r_inv.transpose()
    }

    /// Largest `alpha` with `diag(lambda) + alpha * d >= 0`.
    fn max_step(&self, d: &DMatrix<f64>) -> f64 {
        let k = self.lambda.len();
        let scaled = DMatrix::from_fn(k, k, |i, j| d[(i, j)] / (self.lambda[i] * self.lambda[j]).sqrt());
        let m = min_sym_eigenvalue(&scaled);
        if m < 0.0 {
            -1.0 / m
        } else {
            f64::INFINITY
        }
    }
}

struct Ipm<'a> {
    blocks: &'a [Block],
    h: DVector<f64>,
    c: DVector<f64>,
    settings: SdpSettings,
}

struct IpmOutcome {
    x: DVector<f64>,
    z: Vec<DMatrix<f64>>,
    status: SdpStatus,
    pres: f64,
    dres: f64,
    gap: f64,
    iterations: usize,
    certificate: Option<InfeasibilityCertificate>,
}

const REFINEMENT_STEPS: usize = 8;
/// An iterate within this factor of every tolerance is reported as almost optimal.
const RELAXED_FACTOR: f64 = 1e3;
/// Growth of the merit over its best value that ends the iteration.
const STALL_FACTOR: f64 = 100.0;

/// Factor `R` of the regularized Schur complement `R'R = diag(h) + shift I + J'J`,
/// computed by a QR factorization of `[sqrt(diag(h) + shift I); J]` so that the
/// conditioning of `J` is not squared.
struct SchurFactor {
    r: DMatrix<f64>,
}

impl SchurFactor {
    fn new(blocks: &[Block], cols: &[DMatrix<f64>], h: &DVector<f64>, shift: f64) -> Option<Self> {
        let n = h.len();
        let rows = n + cols.iter().map(|c| c.nrows()).sum::<usize>();
        let mut k = DMatrix::zeros(rows, n);
        for i in 0..n {
            k[(i, i)] = (h[i] + shift).sqrt();
        }
        let mut row = n;
        for (b, xj) in blocks.iter().zip(cols) {
            for (p, &var) in b.vars.iter().enumerate() {
                k.view_mut((row, var), (xj.nrows(), 1)).copy_from(&xj.column(p));
            }
            row += xj.nrows();
        }
        let r = k.qr().r();
        let tiny = r.diagonal().iter().any(|d| !(d.abs() > 0.0) || !d.is_finite());
        (!tiny).then_some(Self { r })
    }

    fn solve_factored(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let w = self.r.tr_solve_upper_triangular(rhs).expect("nonzero diagonal");
        self.r.solve_upper_triangular(&w).expect("nonzero diagonal")
    }

    fn solve(&self, op: impl Fn(&DVector<f64>) -> DVector<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        let mut dx = self.solve_factored(rhs);
        // iterative refinement against the unregularized operator
        let mut r = rhs - op(&dx);
        let mut rn = r.norm();
        for _ in 0..REFINEMENT_STEPS {
            let cand = &dx + self.solve_factored(&r);
            let rc = rhs - op(&cand);
            let rcn = rc.norm();
            if !(rcn < rn) {
                break;
            }
            dx = cand;
            r = rc;
            rn = rcn;
        }
        dx
    }
}

impl<'a> Ipm<'a> {
    fn adjoint(&self, z: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.h.len());
        for (b, zj) in self.blocks.iter().zip(z) {
            b.add_adjoint(zj, &mut out);
        }
        out
    }

    fn certificate(&self, z: &[DMatrix<f64>]) -> Option<InfeasibilityCertificate> {
        let cz: f64 = self.blocks.iter().zip(z).map(|(b, zj)| frob_dot(&b.constant, zj)).sum();
        if !(cz < 0.0) {
            return None;
        }
        let duals: Vec<DMatrix<f64>> = z.iter().map(|zj| zj / (-cz)).collect();
        let residual = self.adjoint(&duals).norm();
        Some(InfeasibilityCertificate { duals, residual })
    }

    fn run(&self, x0: DVector<f64>) -> IpmOutcome {
        let n = self.h.len();
        let nu: usize = self.blocks.iter().map(|b| b.dim).sum();
        let tol = self.settings;
        let mut x = x0;
        let mut s: Vec<DMatrix<f64>> = Vec::with_capacity(self.blocks.len());
        let mut z: Vec<DMatrix<f64>> = Vec::with_capacity(self.blocks.len());
        for b in self.blocks {
            let f = b.eval(&x);
            let shift = (1.0 - min_sym_eigenvalue(&f)).max(0.0);
            s.push(f + DMatrix::identity(b.dim, b.dim) * shift);
            z.push(DMatrix::identity(b.dim, b.dim));
        }
        let c_norm = self.c.norm();

        let outcome = |x: &DVector<f64>, z: &[DMatrix<f64>], status, pres, dres, gap, it, cert| IpmOutcome {
            x: x.clone(),
            z: z.to_vec(),
            status,
            pres,
            dres,
            gap,
            iterations: it,
            certificate: cert,
        };

        let (mut pres, mut dres, mut relgap) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut best: Option<(f64, IpmOutcome)> = None;
        for it in 0..=tol.max_iter {
            // residuals
            let rp: Vec<DMatrix<f64>> =
                self.blocks.iter().zip(&s).map(|(b, sj)| sj - b.eval(&x)).collect();
            let atz = self.adjoint(&z);
            let rd = self.h.component_mul(&x) + &self.c - &atz;
            let gap: f64 = s.iter().zip(&z).map(|(a, b)| frob_dot(a, b)).sum();
            let pobj = self.c.dot(&x) + 0.5 * self.h.component_mul(&x).dot(&x);
            pres = rp.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
            dres = rd.norm() / (1.0 + c_norm);
            relgap = gap.max(0.0) / (1.0 + pobj.abs());
            if !pres.is_finite() || !dres.is_finite() || !gap.is_finite() {
                return self.finish(best, outcome(&x, &z, SdpStatus::NumericalFailure, pres, dres, relgap, it, None));
            }
            if pres <= tol.tol_feas && dres <= tol.tol_feas && relgap <= tol.tol_gap {
                return outcome(&x, &z, SdpStatus::Optimal, pres, dres, relgap, it, None);
            }
            // Near the optimum the scaled systems lose accuracy and the dual
            // residual can start to grow again; keep the best iterate.
            let merit = (pres / tol.tol_feas).max(dres / tol.tol_feas).max(relgap / tol.tol_gap);
            match &best {
                Some((m, _)) if merit >= *m => {
                    if *m <= RELAXED_FACTOR && merit > STALL_FACTOR * m {
                        return self.finish(best, outcome(&x, &z, SdpStatus::NumericalFailure, pres, dres, relgap, it, None));
                    }
                }
                _ => best = Some((merit, outcome(&x, &z, SdpStatus::Optimal, pres, dres, relgap, it, None))),
            }
            if pres > tol.tol_feas {
                if let Some(cert) = self.certificate(&z) {
                    if cert.residual <= tol.tol_feas {
                        return outcome(&x, &z, SdpStatus::Infeasible, pres, dres, relgap, it, Some(cert));
                    }
                }
            }
            if it == tol.max_iter {
                break;
            }

            // scaling and Schur complement
            let mut scalings = Vec::with_capacity(self.blocks.len());
            for (sj, zj) in s.iter().zip(&z) {
                match Scaling::new(sj, zj) {
                    Some(sc) => scalings.push(sc),
                    None => {
                        return self.finish(best, outcome(&x, &z, SdpStatus::NumericalFailure, pres, dres, relgap, it, None))
                    }
                }
            }
            let cols: Vec<DMatrix<f64>> =
                self.blocks.iter().zip(&scalings).map(|(b, sc)| scaled_columns(b, &sc.r_inv)).collect();
            let Some(factor) = SchurFactor::new(self.blocks, &cols, &self.h, tol.regularization) else {
                return self.finish(best, outcome(&x, &z, SdpStatus::NumericalFailure, pres, dres, relgap, it, None));
            };
            let rp_scaled: Vec<DMatrix<f64>> = scalings.iter().zip(&rp).map(|(sc, r)| sc.to_scaled(r)).collect();

            let solve = |q: &[DMatrix<f64>]| -> (DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
                let rhs_blocks: Vec<DMatrix<f64>> = q.iter().zip(&rp_scaled).map(|(qj, r)| qj + r).collect();
                let mut rhs = -&rd;
                for ((b, xj), bj) in self.blocks.iter().zip(&cols).zip(&rhs_blocks) {
                    let mut sv = vec![0.0; xj.nrows()];
                    svec_into(bj, &mut sv);
                    let contrib = xj.tr_mul(&DVector::from_vec(sv));
                    for (p, &k) in b.vars.iter().enumerate() {
                        rhs[k] += contrib[p];
                    }
                }
                let op = |v: &DVector<f64>| {
                    let mut out = self.h.component_mul(v);
                    for (b, xj) in self.blocks.iter().zip(&cols) {
                        let sub = DVector::from_iterator(b.vars.len(), b.vars.iter().map(|&k| v[k]));
                        let back = xj.tr_mul(&(xj * sub));
                        for (p, &k) in b.vars.iter().enumerate() {
                            out[k] += back[p];
                        }
                    }
                    out
                };
                let dx = factor.solve(op, &rhs);
                let mut ds = Vec::with_capacity(q.len());
                let mut dz = Vec::with_capacity(q.len());
                for (((b, xj), bj), r) in self.blocks.iter().zip(&cols).zip(&rhs_blocks).zip(&rp_scaled) {
                    let sub = DVector::from_iterator(b.vars.len(), b.vars.iter().map(|&k| dx[k]));
                    let adx = smat_from((xj * sub).as_slice(), b.dim);
                    dz.push(bj - &adx);
                    ds.push(adx - r);
                }
                (dx, ds, dz)
            };
            let step_to_boundary = |ds: &[DMatrix<f64>], dz: &[DMatrix<f64>]| -> f64 {
                scalings
                    .iter()
                    .zip(ds.iter().zip(dz))
                    .map(|(sc, (a, b))| sc.max_step(a).min(sc.max_step(b)))
                    .fold(f64::INFINITY, f64::min)
            };

            // predictor
            let q_aff: Vec<DMatrix<f64>> =
                scalings.iter().map(|sc| DMatrix::from_diagonal(&(-&sc.lambda))).collect();
            let (_, ds_a, dz_a) = solve(&q_aff);
            let alpha_aff = step_to_boundary(&ds_a, &dz_a).min(1.0);
            let mu = gap / nu as f64;
            let mu_aff: f64 = scalings
                .iter()
                .zip(ds_a.iter().zip(&dz_a))
                .map(|(sc, (a, b))| {
                    let l = DMatrix::from_diagonal(&sc.lambda);
                    frob_dot(&(&l + a * alpha_aff), &(&l + b * alpha_aff))
                })
                .sum::<f64>()
                / nu as f64;
            let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

            // corrector
            let q_cor: Vec<DMatrix<f64>> = scalings
                .iter()
                .zip(ds_a.iter().zip(&dz_a))
                .map(|(sc, (a, b))| {
                    let k = sc.lambda.len();
                    let cross = symmetrize(&(a * b));
                    DMatrix::from_fn(k, k, |i, j| {
                        let mut rs = cross[(i, j)];
                        if i == j {
                            rs += sc.lambda[i] * sc.lambda[i] - sigma * mu;
                        }
                        -2.0 * rs / (sc.lambda[i] + sc.lambda[j])
                    })
                })
                .collect();
            let (dx, ds, dz) = solve(&q_cor);
            let alpha = (0.99 * step_to_boundary(&ds, &dz)).min(1.0);
            if !(alpha > 1e-12) {
                return self.finish(best, outcome(&x, &z, SdpStatus::NumericalFailure, pres, dres, relgap, it, None));
            }

            x += &dx * alpha;
            for (j, sc) in scalings.iter().enumerate() {
                // update in the original coordinates so S and Z keep their accuracy
                let s_step = &sc.r * &ds[j] * sc.r.transpose();
                let z_step = sc.r_inv.transpose() * &dz[j] * &sc.r_inv;
                s[j] = symmetrize(&(&s[j] + s_step * alpha));
                z[j] = symmetrize(&(&z[j] + z_step * alpha));
            }
            debug_assert_eq!(x.len(), n);
        }
        self.finish(best, outcome(&x, &z, SdpStatus::MaxIterations, pres, dres, relgap, tol.max_iter, None))
    }

    /// Falls back to the best iterate seen when it meets the relaxed tolerances.
    fn finish(&self, best: Option<(f64, IpmOutcome)>, current: IpmOutcome) -> IpmOutcome {
        match best {
            Some((merit, mut b)) if merit <= RELAXED_FACTOR => {
                b.status = SdpStatus::AlmostOptimal;
                b
            }
            _ => current,
        }
    }
}

/// Columns `svec(R^-1 A_k R^-T)` for every variable of a block.
fn scaled_columns(b: &Block, r_inv: &DMatrix<f64>) -> DMatrix<f64> {
    let m = b.dim;
    let len = m * (m + 1) / 2;
    let mut out = DMatrix::zeros(len, b.vars.len());
    let mut scaled = DMatrix::zeros(m, m);
    for (col, entries) in b.coeffs.iter().enumerate() {
        scaled.fill(0.0);
        if entries.len() <= 2 * m {
            for &(i, j, v) in entries {
                // scaled += v * r_inv[:, i] r_inv[:, j]'
                for q in 0..m {
                    let rq = v * r_inv[(q, j)];
                    if rq != 0.0 {
                        for p in 0..m {
                            scaled[(p, q)] += r_inv[(p, i)] * rq;
                        }
                    }
                }
            }
        } else {
            let mut a = DMatrix::zeros(m, m);
            for &(i, j, v) in entries {
                a[(i, j)] += v;
            }
            scaled = r_inv * a * r_inv.transpose();
        }
        svec_into(&scaled, out.column_mut(col).as_mut_slice());
    }
    out
}

/// Solves `prob`; a primal-infeasibility fallback search runs when the main
/// iteration stalls.
pub fn solve_sdp(prob: &SdpProblem, settings: &SdpSettings) -> SdpSolution {
    let n = prob.dim();
    let blocks = prob.blocks();
    let scale = prob.linear.amax().max(prob.quadratic.amax());
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let ipm = Ipm { blocks: &blocks, h: &prob.quadratic / scale, c: &prob.linear / scale, settings: *settings };
    let out = ipm.run(DVector::zeros(n));

    let mut certificate = out.certificate;
    let mut status = out.status;
    if matches!(status, SdpStatus::MaxIterations | SdpStatus::NumericalFailure) {
        if let Some(cert) = phase_one(&blocks, n, settings) {
            status = SdpStatus::Infeasible;
            certificate = Some(cert);
        }
    }
    let _ = out.z;
    SdpSolution {
        objective: prob.objective(&out.x),
        x: out.x,
        status,
        primal_residual: out.pres,
        dual_residual: out.dres,
        gap: out.gap,
        iterations: out.iterations,
        certificate,
    }
}

/// Minimizes `t` subject to `F_j(x) + t I >= 0`, `t >= -1`; a positive optimum
/// yields an infeasibility certificate for the original blocks.
fn phase_one(blocks: &[Block], n: usize, settings: &SdpSettings) -> Option<InfeasibilityCertificate> {
    let t = n;
    let mut aux: Vec<Block> = blocks
        .iter()
        .map(|b| {
            let mut vars = b.vars.clone();
            let mut coeffs = b.coeffs.clone();
            vars.push(t);
            coeffs.push((0..b.dim).map(|i| (i, i, 1.0)).collect());
            Block { dim: b.dim, constant: b.constant.clone(), vars, coeffs }
        })
        .collect();
    aux.push(Block { dim: 1, constant: DMatrix::from_element(1, 1, 1.0), vars: vec![t], coeffs: vec![vec![(0, 0, 1.0)]] });
    let mut c = DVector::zeros(n + 1);
    c[t] = 1.0;
    let ipm = Ipm { blocks: &aux, h: DVector::zeros(n + 1), c, settings: *settings };
    let out = ipm.run(DVector::zeros(n + 1));
    if !matches!(out.status, SdpStatus::Optimal | SdpStatus::AlmostOptimal) || out.x[t] <= settings.tol_feas {
        return None;
    }
    let main = Ipm { blocks, h: DVector::zeros(n), c: DVector::zeros(n), settings: *settings };
    let cert = main.certificate(&out.z[..blocks.len()])?;
    (cert.residual <= settings.tol_feas).then_some(cert)
}
