//! Dense linear-algebra kernels: sign-normalized truncated SVD, spectral
//! norm, r-th singular value, least-squares transforms and guarded inverses.
//!
//! Every decomposition returned here is deterministic. Singular values are
//! sorted in non-increasing order, values at the numerical-rank floor are
//! snapped to exactly zero, and each left singular vector is flipped so its
//! largest-magnitude entry is non-negative.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::error::{QuiltError, Result};

/// Dense real matrix. All data matrices are stored features x samples.
pub type Matrix = DMatrix<f64>;
/// Dense real vector.
pub type Vector = DVector<f64>;

/// Singular values below this multiple of `sigma[0]` in the Gram matrix of a
/// least-squares design are treated as zero.
pub const PINV_GRAM_CUTOFF: f64 = 1e-12;
/// Largest condition number accepted by [`invert_square`].
pub const MAX_CONDITION: f64 = 1e12;

/// Top-r singular triple `A ~ U diag(sigma) V^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdTriple {
    /// Left singular vectors, rows x r.
    pub u: Matrix,
    /// Singular values, non-increasing.
    pub sigma: Vector,
    /// Right singular vectors, cols x r.
    pub v: Matrix,
}

impl SvdTriple {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> Matrix {
        self.scaled_u() * self.v.transpose()
    }

    /// `U diag(sigma)`.
    pub fn scaled_u(&self) -> Matrix {
        let mut h = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            h.column_mut(j).scale_mut(*s);
        }
        h
    }
}

pub(crate) fn ensure_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(QuiltError::InvalidInput(format!(
            "{what} contains non-finite entries"
        )))
    }
}

fn to_faer(a: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Thin SVD with all `min(rows, cols)` components, sorted and sign-normalized.
pub fn full_svd(a: &Matrix) -> Result<SvdTriple> {
    ensure_finite(a, "matrix")?;
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SvdTriple {
            u: Matrix::zeros(rows, 0),
            sigma: Vector::zeros(0),
            v: Matrix::zeros(cols, 0),
        });
    }
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|e| QuiltError::InvalidInput(format!("SVD did not converge: {e:?}")))?;
    let u = from_faer(svd.U());
    let v = from_faer(svd.V());
    let s = svd.S().column_vector();
    let mut sigma: Vec<f64> = (0..k).map(|j| s[j]).collect();

    let floor = sigma.iter().copied().fold(0.0_f64, f64::max) * rows.max(cols) as f64 * f64::EPSILON;
    for s in sigma.iter_mut() {
        if *s <= floor {
            *s = 0.0;
        }
    }
    Ok(canonicalize(&u, &sigma, &v))
}

/// Apply the sign convention and the descending (sigma, U-column) order to
/// an unordered set of singular triplets.
pub(crate) fn canonicalize(u: &Matrix, sigma: &[f64], v: &Matrix) -> SvdTriple {
    let k = sigma.len();
    let mut u_cols: Vec<Vector> = (0..k).map(|j| u.column(j).into_owned()).collect();
    let mut v_cols: Vec<Vector> = (0..k).map(|j| v.column(j).into_owned()).collect();
    for (uc, vc) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        if needs_flip(uc) {
            uc.neg_mut();
            vc.neg_mut();
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        sigma[j]
            .total_cmp(&sigma[i])
            .then_with(|| lex_desc(&u_cols[i], &u_cols[j]))
    });

    let gather = |cols: &[Vector], rows: usize| {
        let picked: Vec<Vector> = order.iter().map(|&i| cols[i].clone()).collect();
        if picked.is_empty() {
            Matrix::zeros(rows, 0)
        } else {
            Matrix::from_columns(&picked)
        }
    };
    SvdTriple {
        u: gather(&u_cols, u.nrows()),
        sigma: Vector::from_iterator(k, order.iter().map(|&i| sigma[i])),
        v: gather(&v_cols, v.nrows()),
    }
}

/// Largest-magnitude entry must end up non-negative; ties go to the lowest row.
fn needs_flip(col: &Vector) -> bool {
    let mut best = 0usize;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[best].abs() {
            best = i;
        }
    }
    !col.is_empty() && col[best] < 0.0
}

/// Lexicographically larger columns sort first.
fn lex_desc(a: &Vector, b: &Vector) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

fn check_rank(a: &Matrix, r: usize) -> Result<()> {
    let max = a.nrows().min(a.ncols());
    if r == 0 || r > max {
        return Err(QuiltError::InvalidRank { rank: r, max });
    }
    Ok(())
}

/// Best rank-r approximation in Frobenius norm.
pub fn truncated_svd(a: &Matrix, r: usize) -> Result<SvdTriple> {
    check_rank(a, r)?;
    let full = full_svd(a)?;
    Ok(SvdTriple {
        u: full.u.columns(0, r).into_owned(),
        sigma: full.sigma.rows(0, r).into_owned(),
        v: full.v.columns(0, r).into_owned(),
    })
}

fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    ensure_finite(a, "matrix")?;
    if a.nrows().min(a.ncols()) == 0 {
        return Ok(Vec::new());
    }
    let mut sv = to_faer(a)
        .singular_values()
        .map_err(|e| QuiltError::InvalidInput(format!("SVD did not converge: {e:?}")))?;
    sv.sort_by(|x, y| y.total_cmp(x));
    let floor = sv[0] * a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    for s in sv.iter_mut() {
        if *s <= floor {
            *s = 0.0;
        }
    }
    Ok(sv)
}

/// Largest singular value; zero for an empty or all-zero matrix.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// The r-th largest singular value (1-based `r`).
pub fn rth_singular_value(a: &Matrix, r: usize) -> Result<f64> {
    check_rank(a, r)?;
    Ok(singular_values(a)?[r - 1])
}

/// Like [`rth_singular_value`] but returns 0 when the matrix has fewer than
/// `r` rows or columns (the block cannot carry rank r).
pub fn rth_singular_value_or_zero(a: &Matrix, r: usize) -> Result<f64> {
    if r == 0 {
        return Err(QuiltError::InvalidRank { rank: 0, max: a.nrows().min(a.ncols()) });
    }
    if r > a.nrows().min(a.ncols()) {
        ensure_finite(a, "matrix")?;
        return Ok(0.0);
    }
    rth_singular_value(a, r)
}

/// Minimum-norm minimizer of `||Z G - Y||_F`, i.e. `(Z^T Z)^+ Z^T Y`.
///
/// Evaluated through the SVD of `Z` so the Gram matrix is never formed; a
/// singular value `s` of `Z` is dropped when `s^2 < PINV_GRAM_CUTOFF * s_0^2`,
/// which is the same cutoff applied to the Gram matrix spectrum.
pub fn least_squares_transform(z: &Matrix, y: &Matrix) -> Result<Matrix> {
    if z.nrows() != y.nrows() {
        return Err(QuiltError::InvalidInput(format!(
            "least squares: Z has {} rows but Y has {}",
            z.nrows(),
            y.nrows()
        )));
    }
    ensure_finite(z, "Z")?;
    ensure_finite(y, "Y")?;
    let svd = full_svd(z)?;
    let mut g = Matrix::zeros(z.ncols(), y.ncols());
    let s0 = svd.sigma.get(0).copied().unwrap_or(0.0);
    if s0 == 0.0 {
        return Ok(g);
    }
    let uty = svd.u.transpose() * y;
    for (j, s) in svd.sigma.iter().enumerate() {
        if s * s < PINV_GRAM_CUTOFF * s0 * s0 {
            continue;
        }
        let row = uty.row(j) / *s;
        g += svd.v.column(j) * row;
    }
    Ok(g)
}

/// Inverse of a square matrix, refusing condition numbers above [`MAX_CONDITION`].
pub fn invert_square(g: &Matrix) -> Result<Matrix> {
    if !g.is_square() {
        return Err(QuiltError::InvalidInput(format!(
            "cannot invert a {}x{} matrix",
            g.nrows(),
            g.ncols()
        )));
    }
    ensure_finite(g, "matrix")?;
    let sv = singular_values(g)?;
    let (Some(&hi), Some(&lo)) = (sv.first(), sv.last()) else {
        return Ok(Matrix::zeros(0, 0));
    };
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(QuiltError::SingularMatrix { condition });
    }
    g.clone()
        .try_inverse()
        .ok_or(QuiltError::SingularMatrix { condition })
}

/// Thin QR factorization `A = Q R` with `Q` rows x min(rows, cols).
pub fn thin_qr(a: &Matrix) -> (Matrix, Matrix) {
    let qr = a.clone().qr();
    (qr.q(), qr.r())
}

/// Select rows of `a` by index.
pub fn select_rows(a: &Matrix, rows: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Select columns of `a` by index.
pub fn select_columns(a: &Matrix, cols: &[usize]) -> Matrix {
    Matrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// Select the submatrix `a[rows, cols]`.
pub fn submatrix(a: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}
