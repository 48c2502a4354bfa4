//! Decision-variable layouts, affine matrix constraints, and the local and
//! global dissipation inequalities.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{max_sym_eigenvalue, min_sym_eigenvalue, smat, svec, svec_len};
use crate::model::{InterconnectionProblem, Subsystem};

/// Default absolute margin used to model strict inequalities.
pub const DEFAULT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarShape {
    /// Symmetric `k x k`, packed with [`svec`].
    Symmetric(usize),
    /// General `rows x cols`, packed column-major.
    General(usize, usize),
    Scalar,
}

impl VarShape {
    pub fn len(&self) -> usize {
        match *self {
            VarShape::Symmetric(k) => svec_len(k),
            VarShape::General(r, c) => r * c,
            VarShape::Scalar => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub shape: VarShape,
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(usize);

/// An ordered list of matrix decision variables packed into one flat vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarSpace {
    decls: Vec<VarDecl>,
    dim: usize,
}

impl VarSpace {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, shape: VarShape) -> VarId {
        let id = VarId(self.decls.len());
        self.decls.push(VarDecl { name: name.to_string(), shape, offset: self.dim });
        self.dim += shape.len();
        id
    }

    pub fn add_symmetric(&mut self, name: &str, k: usize) -> VarId {
        self.push(name, VarShape::Symmetric(k))
    }

    pub fn add_general(&mut self, name: &str, rows: usize, cols: usize) -> VarId {
        self.push(name, VarShape::General(rows, cols))
    }

    pub fn add_scalar(&mut self, name: &str) -> VarId {
        self.push(name, VarShape::Scalar)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn decls(&self) -> &[VarDecl] {
        &self.decls
    }

    pub fn decl(&self, id: VarId) -> &VarDecl {
        &self.decls[id.0]
    }

    pub fn range(&self, id: VarId) -> Range<usize> {
        let d = self.decl(id);
        d.offset..d.offset + d.shape.len()
    }

    /// Unpacks a matrix variable from `x`.
    pub fn matrix(&self, id: VarId, x: &DVector<f64>) -> DMatrix<f64> {
        let r = self.range(id);
        let slice = &x.as_slice()[r];
        match self.decl(id).shape {
            VarShape::Symmetric(_) => smat(slice).expect("svec length from declaration"),
            VarShape::General(rows, cols) => DMatrix::from_column_slice(rows, cols, slice),
            VarShape::Scalar => DMatrix::from_element(1, 1, slice[0]),
        }
    }

    pub fn scalar(&self, id: VarId, x: &DVector<f64>) -> f64 {
        x[self.decl(id).offset]
    }

    /// Packs `value` into the coordinates of variable `id`.
    pub fn write(&self, id: VarId, value: &DMatrix<f64>, x: &mut DVector<f64>) -> Result<()> {
        let r = self.range(id);
        let packed = match self.decl(id).shape {
            VarShape::Symmetric(k) => {
                if value.shape() != (k, k) {
                    return Err(Error::Dimension(format!("variable {} expects {k}x{k}", self.decl(id).name)));
                }
                svec(value)?
            }
            VarShape::General(rows, cols) => {
                if value.shape() != (rows, cols) {
                    return Err(Error::Dimension(format!(
                        "variable {} expects {rows}x{cols}",
                        self.decl(id).name
                    )));
                }
                DVector::from_column_slice(value.as_slice())
            }
            VarShape::Scalar => DVector::from_element(1, value[(0, 0)]),
        };
        x.rows_mut(r.start, r.len()).copy_from(&packed);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `expr >= margin I`.
    PositiveSemidefinite,
    /// `expr <= -margin I`.
    NegativeSemidefinite,
}

/// Nonzero entries of a symmetric coefficient matrix, both triangles listed.
pub type SymEntries = Vec<(usize, usize, f64)>;

/// An affine symmetric matrix expression `C + sum_k x_k A_k` with a sense.
#[derive(Debug, Clone)]
pub struct LmiConstraint {
    pub label: String,
    dim: usize,
    constant: DMatrix<f64>,
    coeffs: Vec<(usize, SymEntries)>,
    pub sense: Sense,
    pub margin: f64,
}

fn sym_entries(d: &DMatrix<f64>) -> SymEntries {
    let mut out = Vec::new();
    for j in 0..d.ncols() {
        for i in 0..=j {
            let v = if i == j { d[(i, i)] } else { 0.5 * (d[(i, j)] + d[(j, i)]) };
            if v != 0.0 {
                out.push((i, j, v));
                if i != j {
                    out.push((j, i, v));
                }
            }
        }
    }
    out
}

impl LmiConstraint {
    /// Extracts the affine structure of `f` over an `nvars`-dimensional space by
    /// evaluating it at the origin and at each unit vector.
    pub fn from_affine<F>(label: &str, dim: usize, nvars: usize, sense: Sense, margin: f64, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DMatrix<f64>,
    {
        let mut x = DVector::zeros(nvars);
        let base = f(&x);
        debug_assert_eq!(base.shape(), (dim, dim));
        let constant = crate::linalg::symmetrize(&base);
        let mut coeffs = Vec::new();
        for k in 0..nvars {
            x[k] = 1.0;
            let entries = sym_entries(&(f(&x) - &base));
            x[k] = 0.0;
            if !entries.is_empty() {
                coeffs.push((k, entries));
            }
        }
        Self { label: label.to_string(), dim, constant, coeffs, sense, margin }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant(&self) -> &DMatrix<f64> {
        &self.constant
    }

    pub fn coeffs(&self) -> &[(usize, SymEntries)] {
        &self.coeffs
    }

    /// The raw expression `C + sum_k x_k A_k`.
    pub fn evaluate(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (k, entries) in &self.coeffs {
            let xk = x[*k];
            if xk != 0.0 {
                for &(i, j, v) in entries {
                    out[(i, j)] += xk * v;
                }
            }
        }
        out
    }

    /// Expression shifted by the margin: `expr + margin I` must be `<= 0` for
    /// the negative sense, `expr - margin I` must be `>= 0` for the positive one.
    pub fn margin_form(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let shift = match self.sense {
            Sense::NegativeSemidefinite => self.margin,
            Sense::PositiveSemidefinite => -self.margin,
        };
        self.evaluate(x) + DMatrix::identity(self.dim, self.dim) * shift
    }

    /// Largest eigenvalue of the violation; `<= 0` means satisfied.
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        if self.dim == 0 {
            return f64::NEG_INFINITY;
        }
        let m = self.margin_form(x);
        match self.sense {
            Sense::NegativeSemidefinite => max_sym_eigenvalue(&m),
            Sense::PositiveSemidefinite => -min_sym_eigenvalue(&m),
        }
    }

    /// Canonical form `F(x) = C + sum_k x_k A_k >= 0` with the margin folded in.
    pub fn canonical(&self) -> (DMatrix<f64>, Vec<(usize, SymEntries)>) {
        let eye = DMatrix::<f64>::identity(self.dim, self.dim);
        match self.sense {
            Sense::PositiveSemidefinite => (&self.constant - eye * self.margin, self.coeffs.clone()),
            Sense::NegativeSemidefinite => {
                let coeffs = self
                    .coeffs
                    .iter()
                    .map(|(k, e)| (*k, e.iter().map(|&(i, j, v)| (i, j, -v)).collect()))
                    .collect();
                (-&self.constant - eye * self.margin, coeffs)
            }
        }
    }

    /// Renames variable `k` to `map(k)`, e.g. to embed a constraint into a
    /// larger variable space.
    pub fn remap(&self, map: impl Fn(usize) -> usize) -> Self {
        let mut coeffs: Vec<(usize, SymEntries)> = self.coeffs.iter().map(|(k, e)| (map(*k), e.clone())).collect();
        coeffs.sort_by_key(|(k, _)| *k);
        Self { coeffs, ..self.clone() }
    }

    /// Substitutes `fixed[k]` for every variable not listed in `keep` and
    /// renumbers the kept variables by their position in `keep`.
    pub fn restrict(&self, fixed: &DVector<f64>, keep: &[usize]) -> Self {
        let mut constant = self.constant.clone();
        let mut coeffs = Vec::new();
        for (k, entries) in &self.coeffs {
            if let Some(pos) = keep.iter().position(|kk| kk == k) {
                coeffs.push((pos, entries.clone()));
            } else if fixed[*k] != 0.0 {
                for &(i, j, v) in entries {
                    constant[(i, j)] += fixed[*k] * v;
                }
            }
        }
        coeffs.sort_by_key(|(k, _)| *k);
        Self { label: self.label.clone(), dim: self.dim, constant, coeffs, sense: self.sense, margin: self.margin }
    }
}

/// Quadratic supply matrix over `[d; z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplyRate {
    pub s: DMatrix<f64>,
    /// Set for the H-infinity supply `diag(eta I, -I)`.
    pub eta: Option<f64>,
}

impl SupplyRate {
    /// The zero supply used for stabilization.
    pub fn zero(n_d: usize, n_z: usize) -> Self {
        Self { s: DMatrix::zeros(n_d + n_z, n_d + n_z), eta: None }
    }

    pub fn value(&self, d: &DVector<f64>, z: &DVector<f64>) -> f64 {
        let dz = DVector::from_iterator(d.len() + z.len(), d.iter().chain(z.iter()).copied());
        dz.dot(&(&self.s * &dz))
    }
}

/// `S = diag(eta I_{n_d}, -I_{n_z})`.
pub fn hinf_supply(eta: f64, n_d: usize, n_z: usize) -> Result<SupplyRate> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidProblem(format!("H-infinity level must be non-negative, got {eta}")));
    }
    let mut s = DMatrix::zeros(n_d + n_z, n_d + n_z);
    for i in 0..n_d {
        s[(i, i)] = eta;
    }
    for i in n_d..n_d + n_z {
        s[(i, i)] = -1.0;
    }
    Ok(SupplyRate { s, eta: Some(eta) })
}

/// Per-subsystem decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCertificate {
    /// Local supply matrix over `[w_i; y_i]`.
    pub s: DMatrix<f64>,
    /// Storage matrix, `V_i = x' P x`.
    pub p: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub nw: usize,
}

impl LocalCertificate {
    pub fn s11(&self) -> DMatrix<f64> {
        self.s.view((0, 0), (self.nw, self.nw)).into_owned()
    }

    pub fn s12(&self) -> DMatrix<f64> {
        let ny = self.s.nrows() - self.nw;
        self.s.view((0, self.nw), (self.nw, ny)).into_owned()
    }

    pub fn s22(&self) -> DMatrix<f64> {
        let ny = self.s.nrows() - self.nw;
        self.s.view((self.nw, self.nw), (ny, ny)).into_owned()
    }

    /// `[w; y]' S [w; y]`.
    pub fn supply(&self, w: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let wy = DVector::from_iterator(w.len() + y.len(), w.iter().chain(y.iter()).copied());
        wy.dot(&(&self.s * &wy))
    }
}

/// Dissipation expression of one subsystem at `(S, P, Y)`:
/// `[[A'P + PA + Y' + Y - C' S22 C, PG - C' S12'], [G'P - S12 C, -S11]]`.
pub fn dissipation_matrix(sub: &Subsystem, s: &DMatrix<f64>, p: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, nw, ny) = (sub.n(), sub.nw(), sub.ny());
    let s11 = s.view((0, 0), (nw, nw));
    let s12 = s.view((0, nw), (nw, ny));
    let s22 = s.view((nw, nw), (ny, ny));
    let a = &sub.a;
    let c = &sub.c;
    let top_left = a.transpose() * p + p * a + y.transpose() + y - c.transpose() * s22 * c;
    let top_right = p * &sub.g - c.transpose() * s12.transpose();
    let mut out = DMatrix::zeros(n + nw, n + nw);
    out.view_mut((0, 0), (n, n)).copy_from(&top_left);
    out.view_mut((0, n), (n, nw)).copy_from(&top_right);
    out.view_mut((n, 0), (nw, n)).copy_from(&top_right.transpose());
    out.view_mut((n, n), (nw, nw)).copy_from(&(-s11));
    out
}

/// Variables and constraints of one subsystem's dissipation inequality.
#[derive(Debug, Clone)]
pub struct LocalLmi {
    pub space: VarSpace,
    pub s: VarId,
    pub p: VarId,
    pub y: VarId,
    /// `P >= margin I`.
    pub positivity: LmiConstraint,
    /// Dissipation inequality `<= 0`.
    pub dissipation: LmiConstraint,
}

impl LocalLmi {
    pub fn constraints(&self) -> [&LmiConstraint; 2] {
        [&self.positivity, &self.dissipation]
    }

    pub fn unpack(&self, x: &DVector<f64>, nw: usize) -> LocalCertificate {
        LocalCertificate {
            s: self.space.matrix(self.s, x),
            p: self.space.matrix(self.p, x),
            y: self.space.matrix(self.y, x),
            nw,
        }
    }

    pub fn pack(&self, cert: &LocalCertificate) -> Result<DVector<f64>> {
        let mut x = DVector::zeros(self.space.dim());
        self.space.write(self.s, &cert.s, &mut x)?;
        self.space.write(self.p, &cert.p, &mut x)?;
        self.space.write(self.y, &cert.y, &mut x)?;
        Ok(x)
    }
}

/// Local storage positivity and dissipation constraints over `(S_i, P_i, Y_i)`.
pub fn local_lmi(sub: &Subsystem, margin: f64) -> LocalLmi {
    let (n, nw, ny) = (sub.n(), sub.nw(), sub.ny());
    let mut space = VarSpace::new();
    let s = space.add_symmetric("S", nw + ny);
    let p = space.add_symmetric("P", n);
    let y = space.add_general("Y", n, n);
    let nvars = space.dim();

    let positivity = {
        let space = space.clone();
        LmiConstraint::from_affine("storage positivity", n, nvars, Sense::PositiveSemidefinite, margin, move |x| {
            space.matrix(p, x)
        })
    };
    let dissipation = {
        let space = space.clone();
        LmiConstraint::from_affine("local dissipation", n + nw, nvars, Sense::NegativeSemidefinite, 0.0, move |x| {
            dissipation_matrix(sub, &space.matrix(s, x), &space.matrix(p, x), &space.matrix(y, x))
        })
    };
    LocalLmi { space, s, p, y, positivity, dissipation }
}

/// How the global supply enters the interconnection inequality.
#[derive(Debug, Clone, PartialEq)]
pub enum GlobalSupply {
    Fixed(SupplyRate),
    /// `diag(eta I, -I)` with `eta` a decision variable.
    HinfVariable,
}

#[derive(Debug, Clone)]
pub struct GlobalLmi {
    pub space: VarSpace,
    pub supplies: Vec<VarId>,
    pub eta: Option<VarId>,
    pub constraint: LmiConstraint,
}

/// Rows of `P_pi [M; I]` mapping `[y; d]` to `[w_1; y_1; ...; w_N; y_N; d; z]`.
pub fn stacked_map(p: &InterconnectionProblem, permutation: &DMatrix<f64>) -> DMatrix<f64> {
    let m = p.m_full();
    let k = p.n_y() + p.n_d;
    let mut mi = DMatrix::zeros(m.nrows() + k, k);
    mi.view_mut((0, 0), m.shape()).copy_from(&m);
    mi.view_mut((m.nrows(), 0), (k, k)).fill_with_identity();
    permutation * mi
}

/// Interconnection inequality `[M; I]' P' Q P [M; I] <= -margin I` over
/// `[y; d]`, with `Q = diag(S_1, ..., S_N, -S)`.
pub fn global_lmi(
    p: &InterconnectionProblem,
    permutation: &DMatrix<f64>,
    supply: &GlobalSupply,
    margin: f64,
) -> Result<GlobalLmi> {
    let (nd, nz) = (p.n_d, p.n_z);
    if let GlobalSupply::Fixed(s) = supply {
        if s.s.shape() != (nd + nz, nd + nz) {
            return Err(Error::Dimension(format!(
                "supply matrix is {:?}, expected {}x{}",
                s.s.shape(),
                nd + nz,
                nd + nz
            )));
        }
    }
    let mut space = VarSpace::new();
    let dims = p.dims();
    let supplies: Vec<VarId> =
        dims.iter().enumerate().map(|(i, d)| space.add_symmetric(&format!("S{}", i + 1), d.supply_dim())).collect();
    let eta = matches!(supply, GlobalSupply::HinfVariable).then(|| space.add_scalar("eta"));

    let map = stacked_map(p, permutation);
    let k = map.ncols();
    let mut row = 0;
    let mut blocks = Vec::with_capacity(dims.len());
    for d in &dims {
        blocks.push(map.rows(row, d.supply_dim()).into_owned());
        row += d.supply_dim();
    }
    let dz = map.rows(row, nd + nz).into_owned();

    let nvars = space.dim();
    let sp = space.clone();
    let supply = supply.clone();
    let ids = supplies.clone();
    let constraint = LmiConstraint::from_affine("interconnection", k, nvars, Sense::NegativeSemidefinite, margin, move |x| {
        let mut out = DMatrix::zeros(k, k);
        for (id, t) in ids.iter().zip(&blocks) {
            out += t.transpose() * sp.matrix(*id, x) * t;
        }
        let s = match &supply {
            GlobalSupply::Fixed(s) => s.s.clone(),
            GlobalSupply::HinfVariable => {
                let mut s = DMatrix::zeros(nd + nz, nd + nz);
                let e = x[sp.decl(eta.expect("eta declared")).offset];
                for i in 0..nd {
                    s[(i, i)] = e;
                }
                for i in nd..nd + nz {
                    s[(i, i)] = -1.0;
                }
                s
            }
        };
        out - dz.transpose() * s * &dz
    });
    Ok(GlobalLmi { space, supplies, eta, constraint })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_sub(a: f64, b: f64, g: f64, c: f64) -> Subsystem {
        let m = |v| DMatrix::from_element(1, 1, v);
        Subsystem::new(m(a), m(b), m(g), m(c))
    }

    fn local_point(lmi: &LocalLmi, s: [[f64; 2]; 2], p: f64, y: f64) -> DVector<f64> {
        let cert = LocalCertificate {
            s: DMatrix::from_row_slice(2, 2, &[s[0][0], s[0][1], s[1][0], s[1][1]]),
            p: DMatrix::from_element(1, 1, p),
            y: DMatrix::from_element(1, 1, y),
            nw: 1,
        };
        lmi.pack(&cert).unwrap()
    }

    #[test]
    fn local_lmi_feasible_scalar_point() {
        let sub = scalar_sub(-1.0, 1.0, 1.0, 1.0);
        let lmi = local_lmi(&sub, DEFAULT_MARGIN);
        // s11 = 1, s12 = 1, s22 = 0
        let x = local_point(&lmi, [[1.0, 1.0], [1.0, 0.0]], 1.0, 0.0);
        let e = lmi.dissipation.evaluate(&x);
        assert_eq!(e, DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -1.0]));
        assert!(lmi.dissipation.violation(&x) <= 0.0);
    }

    #[test]
    fn local_lmi_violated_for_unstable_block() {
        let sub = scalar_sub(1.0, 1.0, 1.0, 1.0);
        let lmi = local_lmi(&sub, DEFAULT_MARGIN);
        let x = local_point(&lmi, [[0.0, 0.0], [0.0, 0.0]], 1.0, 0.0);
        assert_eq!(lmi.dissipation.evaluate(&x)[(0, 0)], 2.0);
        assert!(lmi.dissipation.violation(&x) > 0.0);
    }

    #[test]
    fn local_lmi_at_identity_assignment() {
        let sub = Subsystem::new(
            DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 2.0, -2.0]),
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[0.5, 0.5]),
        );
        let lmi = local_lmi(&sub, DEFAULT_MARGIN);
        let cert = LocalCertificate {
            s: DMatrix::identity(2, 2),
            p: DMatrix::identity(2, 2),
            y: DMatrix::identity(2, 2),
            nw: 1,
        };
        let e = lmi.dissipation.evaluate(&lmi.pack(&cert).unwrap());
        let a = &sub.a;
        let c = &sub.c;
        let tl = a.transpose() + a + DMatrix::identity(2, 2) * 2.0 - c.transpose() * c;
        assert_eq!(e.view((0, 0), (2, 2)).into_owned(), tl);
        // S = I has a zero off-diagonal block, so the coupling block is P G = G.
        assert_eq!(e.view((0, 2), (2, 1)).into_owned(), sub.g.clone());
        assert_eq!(e[(2, 2)], -1.0);
    }

    #[test]
    fn local_expression_is_exactly_symmetric() {
        let sub = Subsystem::new(
            DMatrix::from_row_slice(2, 2, &[0.3, -1.2, 2.5, 0.7]),
            DMatrix::from_row_slice(2, 1, &[1.0, -0.4]),
            DMatrix::from_row_slice(2, 2, &[0.9, 0.1, -0.3, 1.7]),
            DMatrix::from_row_slice(1, 2, &[0.2, -1.1]),
        );
        let lmi = local_lmi(&sub, DEFAULT_MARGIN);
        let x = DVector::from_fn(lmi.space.dim(), |i, _| ((i * 7919) % 13) as f64 * 0.37 - 2.0);
        let e = lmi.dissipation.evaluate(&x);
        assert_eq!(e, e.transpose());
    }

    #[test]
    fn hinf_supply_values() {
        let s = hinf_supply(1.0, 1, 1).unwrap();
        assert_eq!(s.s, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        let s = hinf_supply(0.0, 2, 1).unwrap();
        assert_eq!(s.s, DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, -1.0])));
        let s = hinf_supply(4.9e-4, 1, 1).unwrap();
        assert_eq!(s.s[(0, 0)], 4.9e-4);
        assert_eq!(s.s[(1, 1)], -1.0);
        assert!(hinf_supply(-1.0, 1, 1).is_err());
    }

    #[test]
    fn restrict_substitutes_fixed_values() {
        let sub = scalar_sub(-1.0, 1.0, 1.0, 1.0);
        let lmi = local_lmi(&sub, 0.0);
        let x = local_point(&lmi, [[1.0, 1.0], [1.0, 0.0]], 1.0, 0.0);
        let keep: Vec<usize> = (3..lmi.space.dim()).collect();
        let restricted = lmi.dissipation.restrict(&x, &keep);
        let sub_x = DVector::from_iterator(keep.len(), keep.iter().map(|&k| x[k]));
        assert_eq!(restricted.evaluate(&sub_x), lmi.dissipation.evaluate(&x));
    }
}
