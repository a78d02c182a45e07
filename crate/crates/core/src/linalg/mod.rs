//! Dense real linear algebra and scalar Gaussian primitives.
//!
//! Storage is `nalgebra`'s heap-allocated `DMatrix<f64>`; the operations here
//! add the validation and tolerance contracts every other module relies on.
//! Singular value decompositions go through `faer`: nalgebra's SVD returns
//! factors that do not reconstruct some exactly rank-deficient inputs.

mod expm;
mod normal;
mod quadrature;

pub use expm::expm;
pub use normal::{norm_cdf, norm_pdf, norm_quantile, norm_sf};
pub use quadrature::{gauss_legendre, Quadrature};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative Frobenius tolerance for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues above `-PSD_TOL * ||X||_2` count as non-negative.
pub const PSD_TOL: f64 = 1e-12;

/// A symmetric positive semidefinite matrix (positive definite where the
/// caller says so).
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(Matrix);

impl SpdMatrix {
    /// Validates symmetry and semidefiniteness; the stored value is the
    /// symmetrized input.
    pub fn new(m: Matrix) -> Result<Self> {
        check_finite(&m, "SPD matrix")?;
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.norm().max(f64::MIN_POSITIVE);
        let asym = (&m - m.transpose()).norm() / scale;
        if asym > SYMMETRY_TOL {
            return Err(Error::Domain(format!(
                "matrix is not symmetric (relative asymmetry {asym:e})"
            )));
        }
        let sym = symmetrize(&m);
        let min_eig = min_eigenvalue(&sym);
        if min_eig < -PSD_TOL * spectral_norm(&sym) {
            return Err(Error::Domain(format!(
                "matrix is indefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(SpdMatrix(sym))
    }

    /// Like [`SpdMatrix::new`] but additionally requires a Cholesky factor to exist.
    pub fn positive_definite(m: Matrix) -> Result<Self> {
        let s = Self::new(m)?;
        if s.0.clone().cholesky().is_none() {
            return Err(Error::Domain("matrix is not positive definite".into()));
        }
        Ok(s)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.0.clone().cholesky().is_some()
    }

    /// Quadratic form `xᵀ S x`.
    pub fn quad_form(&self, x: &Vector) -> f64 {
        x.dot(&(&self.0 * x))
    }
}

pub fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Dimension(format!("{what} has an empty dimension")));
    }
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} has non-finite entries")))
    }
}

/// `(X + Xᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

fn min_eigenvalue(sym: &Matrix) -> f64 {
    sym.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest singular value.
pub fn spectral_norm(x: &Matrix) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    match to_faer(x).singular_values() {
        Ok(s) => s.into_iter().fold(0.0, f64::max),
        Err(_) => x.singular_values().iter().copied().fold(0.0, f64::max),
    }
}

fn to_faer(x: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)])
}

/// Thin SVD `X = U diag(s) Vᵀ` with `k = min(rows, cols)` columns in `U`, `V`.
pub fn thin_svd(x: &Matrix) -> Result<(Matrix, Vector, Matrix)> {
    check_finite(x, "SVD input")?;
    let (r, c) = x.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok((Matrix::zeros(r, 0), Vector::zeros(0), Matrix::zeros(c, 0)));
    }
    let svd = to_faer(x)
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (fu, fv, fs) = (svd.U(), svd.V(), svd.S().column_vector());
    Ok((
        Matrix::from_fn(r, k, |i, j| fu[(i, j)]),
        Vector::from_fn(k, |i, _| fs[i]),
        Matrix::from_fn(c, k, |i, j| fv[(i, j)]),
    ))
}

/// Default relative rank tolerance for [`pinv`]: `max(rows, cols) * eps`.
pub fn default_rank_tol(x: &Matrix) -> f64 {
    x.nrows().max(x.ncols()) as f64 * f64::EPSILON
}

/// Moore-Penrose pseudoinverse through the SVD.
///
/// Singular values at or below `rank_tol * sigma_max` are dropped. `rank_tol`
/// defaults to [`default_rank_tol`].
pub fn pinv(x: &Matrix, rank_tol: Option<f64>) -> Result<Matrix> {
    let (p, _) = pinv_with_rank(x, rank_tol)?;
    Ok(p)
}

/// [`pinv`] that also reports the numerical rank.
pub fn pinv_with_rank(x: &Matrix, rank_tol: Option<f64>) -> Result<(Matrix, usize)> {
    check_finite(x, "pinv input")?;
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(x));
    if !(tol >= 0.0) {
        return Err(Error::Domain(format!("rank tolerance must be >= 0, got {tol}")));
    }
    let (u, sigma, v) = thin_svd(x)?;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let cutoff = tol * smax;
    let mut out = Matrix::zeros(x.ncols(), x.nrows());
    let mut rank = 0;
    for (i, &s) in sigma.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            // out += v_i (1/s) u_iᵀ
            out += (v.column(i) / s) * u.column(i).transpose();
        }
    }
    Ok((out, rank))
}

/// Returns `L` with `L Lᵀ = X`: Cholesky when positive definite, otherwise
/// the symmetric eigenvalue square root with clipped negative round-off.
pub fn psd_sqrt(x: &SpdMatrix) -> Result<Matrix> {
    let m = x.as_matrix();
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = m.clone().symmetric_eigen();
    let scale = spectral_norm(m);
    let mut d = eig.eigenvalues.clone();
    for v in d.iter_mut() {
        if *v < -PSD_TOL * scale {
            return Err(Error::Domain(format!("indefinite matrix (eigenvalue {v:e})")));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * Matrix::from_diagonal(&d))
}

/// Neumaier-compensated sum; order-dependent only through the iterator order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `‖X − Y‖_F / max(‖Y‖_F, tiny)`.
pub fn rel_frobenius(x: &Matrix, reference: &Matrix) -> f64 {
    (x - reference).norm() / reference.norm().max(f64::MIN_POSITIVE)
}
