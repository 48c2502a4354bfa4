//! Dense linear-algebra helpers shared by the synthesis pipeline.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Tolerance for accepting a matrix as symmetric in [`svec`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Number of entries in the scaled half-vectorization of a `k x k` matrix.
pub fn svec_len(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Scaled half-vectorization of a symmetric matrix.
///
/// The upper triangle is read column by column and off-diagonal entries are
/// multiplied by `sqrt(2)`, so `svec(X) . svec(Y) = trace(XY)`.
pub fn svec(x: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !x.is_square() {
        return Err(Error::Dimension(format!(
            "svec expects a square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let k = x.nrows();
    let scale = x.amax().max(1.0);
    let mut out = DVector::zeros(svec_len(k));
    let mut idx = 0;
    for j in 0..k {
        for i in 0..=j {
            if i == j {
                out[idx] = x[(i, i)];
            } else {
                let (a, b) = (x[(i, j)], x[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::NotSymmetric { row: i, col: j, gap: (a - b).abs() });
                }
                out[idx] = std::f64::consts::SQRT_2 * 0.5 * (a + b);
            }
            idx += 1;
        }
    }
    Ok(out)
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64]) -> Result<DMatrix<f64>> {
    let k = side_from_svec_len(v.len())
        .ok_or_else(|| Error::Dimension(format!("{} is not a triangular number", v.len())))?;
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
    Ok(out)
}

/// Side length `k` with `k(k+1)/2 == len`, if any.
pub fn side_from_svec_len(len: usize) -> Option<usize> {
    let mut k = ((2.0 * len as f64).sqrt()) as usize;
    while svec_len(k) < len {
        k += 1;
    }
    while k > 0 && svec_len(k) > len {
        k -= 1;
    }
    (svec_len(k) == len).then_some(k)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn max_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NEG_INFINITY)
}

pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pinv(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.max();
    let cutoff = rel_cutoff * smax;
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut out = DMatrix::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += vt.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    out
}

/// Numerical rank with a tolerance relative to the largest singular value.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Builds a matrix from nested rows, using `cols_hint` when there are no rows.
pub fn from_rows(rows: &[Vec<f64>], cols_hint: usize) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(cols_hint, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
