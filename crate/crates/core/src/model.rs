//! Subsystems, the static interconnection `[w; z] = M [y; d]`, and assembly of
//! the global open- and closed-loop realizations.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, block_diag};

/// One block `x' = A x + B u + G w`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

/// Channel dimensions of a subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemDims {
    pub states: usize,
    pub inputs: usize,
    pub disturbances: usize,
    pub outputs: usize,
}

impl SubsystemDims {
    /// Side of the local supply matrix `S_i`, i.e. `n_w + n_y`.
    pub fn supply_dim(&self) -> usize {
        self.disturbances + self.outputs
    }
}

impl Subsystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, g: DMatrix<f64>, c: DMatrix<f64>) -> Self {
        Self { a, b, g, c }
    }

    pub fn dims(&self) -> SubsystemDims {
        SubsystemDims {
            states: self.a.nrows(),
            inputs: self.b.ncols(),
            disturbances: self.g.ncols(),
            outputs: self.c.nrows(),
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn nw(&self) -> usize {
        self.g.ncols()
    }

    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    fn check(&self, index: usize, issues: &mut Vec<ValidationIssue>) {
        let n = self.a.nrows();
        let loc = |name: &str| format!("subsystem {index} {name}");
        if n == 0 {
            issues.push(ValidationIssue::dimension(loc("A"), "needs at least one state".into()));
        }
        if !self.a.is_square() {
            issues.push(ValidationIssue::dimension(
                loc("A"),
                format!("is {}x{}, expected square", self.a.nrows(), self.a.ncols()),
            ));
        }
        for (name, m, rows_expected) in [("B", &self.b, true), ("G", &self.g, true)] {
            if rows_expected && m.nrows() != n {
                issues.push(ValidationIssue::dimension(
                    loc(name),
                    format!("has {} rows, expected {n}", m.nrows()),
                ));
            }
        }
        if self.c.ncols() != n {
            issues.push(ValidationIssue::dimension(
                loc("C"),
                format!("has {} columns, expected {n}", self.c.ncols()),
            ));
        }
        for (name, m) in [("A", &self.a), ("B", &self.b), ("G", &self.g), ("C", &self.c)] {
            if !all_finite(m) {
                issues.push(ValidationIssue::NonFinite { location: loc(name) });
            }
        }
    }
}

/// Subsystems plus the four blocks of the interconnection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InterconnectionProblem {
    pub subsystems: Vec<Subsystem>,
    pub m_wy: DMatrix<f64>,
    pub m_wd: DMatrix<f64>,
    pub m_zy: DMatrix<f64>,
    pub m_zd: DMatrix<f64>,
    pub n_d: usize,
    pub n_z: usize,
}

/// One problem found by [`validate_problem`].
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    Dimension { location: String, detail: String },
    NonFinite { location: String },
}

impl ValidationIssue {
    fn dimension(location: String, detail: String) -> Self {
        Self::Dimension { location, detail }
    }

    pub fn location(&self) -> &str {
        match self {
            Self::Dimension { location, .. } | Self::NonFinite { location } => location,
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dimension { location, detail } => write!(f, "{location} {detail}"),
            Self::NonFinite { location } => write!(f, "{location} has a non-finite entry"),
        }
    }
}

/// Global realization `x' = A x + B d`, `z = C x + D d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols()
        {
            return Err(Error::Dimension(format!(
                "state-space blocks A {:?}, B {:?}, C {:?}, D {:?} are inconsistent",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn derivative(&self, x: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * d
    }

    pub fn output(&self, x: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        &self.c * x + &self.d * d
    }
}

impl InterconnectionProblem {
    pub fn dims(&self) -> Vec<SubsystemDims> {
        self.subsystems.iter().map(Subsystem::dims).collect()
    }

    pub fn n_states(&self) -> usize {
        self.subsystems.iter().map(Subsystem::n).sum()
    }

    pub fn n_w(&self) -> usize {
        self.subsystems.iter().map(Subsystem::nw).sum()
    }

    pub fn n_y(&self) -> usize {
        self.subsystems.iter().map(Subsystem::ny).sum()
    }

    pub fn n_inputs(&self) -> usize {
        self.subsystems.iter().map(|s| s.b.ncols()).sum()
    }

    /// `blockdiag(A_i)`.
    pub fn block_a(&self) -> DMatrix<f64> {
        block_diag(&self.subsystems.iter().map(|s| &s.a).collect::<Vec<_>>())
    }

    pub fn block_b(&self) -> DMatrix<f64> {
        block_diag(&self.subsystems.iter().map(|s| &s.b).collect::<Vec<_>>())
    }

    pub fn block_g(&self) -> DMatrix<f64> {
        block_diag(&self.subsystems.iter().map(|s| &s.g).collect::<Vec<_>>())
    }

    pub fn block_c(&self) -> DMatrix<f64> {
        block_diag(&self.subsystems.iter().map(|s| &s.c).collect::<Vec<_>>())
    }

    /// Full interconnection matrix `M = [[M_wy, M_wd], [M_zy, M_zd]]`.
    pub fn m_full(&self) -> DMatrix<f64> {
        let (nw, ny, nd, nz) = (self.n_w(), self.n_y(), self.n_d, self.n_z);
        let mut m = DMatrix::zeros(nw + nz, ny + nd);
        m.view_mut((0, 0), (nw, ny)).copy_from(&self.m_wy);
        m.view_mut((0, ny), (nw, nd)).copy_from(&self.m_wd);
        m.view_mut((nw, 0), (nz, ny)).copy_from(&self.m_zy);
        m.view_mut((nw, ny), (nz, nd)).copy_from(&self.m_zd);
        m
    }

    /// Returns `Ok` when [`validate_problem`] reports nothing.
    pub fn ensure_valid(&self) -> Result<()> {
        let issues = validate_problem(self);
        if issues.is_empty() {
            Ok(())
        } else {
            let text: Vec<String> = issues.iter().map(ToString::to_string).collect();
            Err(Error::InvalidProblem(text.join("; ")))
        }
    }
}

/// Lists every dimension mismatch and non-finite entry; empty means valid.
///
/// Subsystems have no direct feedthrough, so `w = M_wy y + M_wd d` is always
/// uniquely determined and well-posedness needs no separate check.
pub fn validate_problem(p: &InterconnectionProblem) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    if p.subsystems.is_empty() {
        issues.push(ValidationIssue::dimension("problem".into(), "has no subsystems".into()));
    }
    for (i, s) in p.subsystems.iter().enumerate() {
        s.check(i, &mut issues);
    }
    let (nw, ny, nd, nz) = (p.n_w(), p.n_y(), p.n_d, p.n_z);
    for (name, m, rows, cols) in [
        ("M_wy", &p.m_wy, nw, ny),
        ("M_wd", &p.m_wd, nw, nd),
        ("M_zy", &p.m_zy, nz, ny),
        ("M_zd", &p.m_zd, nz, nd),
    ] {
        if m.shape() != (rows, cols) {
            issues.push(ValidationIssue::dimension(
                name.into(),
                format!("is {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols()),
            ));
        }
        if !all_finite(m) {
            issues.push(ValidationIssue::NonFinite { location: name.into() });
        }
    }
    issues
}

/// Permutation taking `[w; z; y; d]` to `[w_1; y_1; ...; w_N; y_N; d; z]`.
pub fn build_permutation(dims: &[SubsystemDims], n_d: usize, n_z: usize) -> DMatrix<f64> {
    let nw: usize = dims.iter().map(|d| d.disturbances).sum();
    let ny: usize = dims.iter().map(|d| d.outputs).sum();
    let total = nw + n_z + ny + n_d;
    let (z0, y0, d0) = (nw, nw + n_z, nw + n_z + ny);

    let mut source = Vec::with_capacity(total);
    let (mut w_off, mut y_off) = (0, 0);
    for d in dims {
        source.extend(w_off..w_off + d.disturbances);
        source.extend(y0 + y_off..y0 + y_off + d.outputs);
        w_off += d.disturbances;
        y_off += d.outputs;
    }
    source.extend(d0..d0 + n_d);
    source.extend(z0..z0 + n_z);

    let mut p = DMatrix::zeros(total, total);
    for (row, &col) in source.iter().enumerate() {
        p[(row, col)] = 1.0;
    }
    p
}

/// Global open-loop realization from `d` to `z`.
///
/// The disturbance map is `blockdiag(G_i) M_wd`; the `G` factor is required
/// for the blocks to be dimensionally consistent.
pub fn assemble_open_loop(p: &InterconnectionProblem) -> Result<StateSpace> {
    p.ensure_valid()?;
    let g = p.block_g();
    let c = p.block_c();
    let a = p.block_a() + &g * &p.m_wy * &c;
    let b = &g * &p.m_wd;
    let cz = &p.m_zy * &c;
    StateSpace::new(a, b, cz, p.m_zd.clone())
}

/// Closed loop under the block-diagonal state feedback `u_i = K_i x_i`.
pub fn assemble_closed_loop(p: &InterconnectionProblem, gains: &[DMatrix<f64>]) -> Result<StateSpace> {
    check_gains(p, gains)?;
    let mut ss = assemble_open_loop(p)?;
    let k = block_diag(&gains.iter().collect::<Vec<_>>());
    ss.a += p.block_b() * k;
    Ok(ss)
}

pub(crate) fn check_gains(p: &InterconnectionProblem, gains: &[DMatrix<f64>]) -> Result<()> {
    if gains.len() != p.subsystems.len() {
        return Err(Error::Dimension(format!(
            "{} gains for {} subsystems",
            gains.len(),
            p.subsystems.len()
        )));
    }
    for (index, (k, s)) in gains.iter().zip(&p.subsystems).enumerate() {
        let expected = (s.b.ncols(), s.n());
        if k.shape() != expected {
            return Err(Error::GainShape { index, got: k.shape(), expected });
        }
    }
    Ok(())
}
