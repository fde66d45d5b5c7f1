//! Symmetric positive definite matrices and maximum characteristic roots of
//! matrix products.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative threshold below which a maximum characteristic root is treated as zero.
pub const DEGENERATE_CHMAX_TOL: f64 = 1e-12;

/// A symmetric positive definite matrix together with its Cholesky factor.
///
/// Construction fails when the input is not symmetric (to [`SYMMETRY_TOL`]
/// relative) or when the Cholesky factorization fails.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl SpdMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "expected a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_symmetric(&matrix)?;
        let matrix = symmetrize(&matrix);
        let chol = Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        Ok(Self { matrix, chol })
    }

    /// `c * I` of dimension `dim`.
    pub fn scalar(dim: usize, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::NotPositiveDefinite(format!(
                "scalar multiple {c} of the identity must be positive"
            )));
        }
        Self::new(DMatrix::identity(dim, dim) * c)
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `M⁻¹ b` by Cholesky solve.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `bᵀ M b`.
    pub fn quad_form(&self, b: &DVector<f64>) -> f64 {
        b.dot(&(&self.matrix * b))
    }

    /// `bᵀ M⁻¹ b`, evaluated as `‖L⁻¹ b‖²`.
    pub fn inv_quad_form(&self, b: &DVector<f64>) -> f64 {
        let mut y = b.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut y);
        y.norm_squared()
    }

    /// `M⁻¹`, symmetrized.
    pub fn inverse(&self) -> DMatrix<f64> {
        symmetrize(&self.chol.inverse())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.matrix * c)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Symmetric square root `M^{1/2}` from the eigendecomposition.
    pub fn sqrt(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        symmetrize(&root)
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax();
    if !scale.is_finite() {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(format!(
            "max |M - Mᵀ| = {asym:.3e} exceeds {SYMMETRY_TOL:e} relative tolerance"
        )));
    }
    Ok(())
}

/// Largest eigenvalue of `M Q` for symmetric PSD `M` and SPD `Q`.
///
/// `MQ` is similar to the symmetric matrix `Q^{1/2} M Q^{1/2}`, so the
/// spectrum is real and nonnegative and a symmetric eigensolver suffices.
pub fn chmax_product(m: &DMatrix<f64>, q: &SpdMatrix) -> Result<f64> {
    if m.nrows() != q.dim() || m.ncols() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "M is {}x{} but Q is {}x{}",
            m.nrows(),
            m.ncols(),
            q.dim(),
            q.dim()
        )));
    }
    check_symmetric(m)?;
    let root = q.sqrt();
    let sandwich = symmetrize(&(&root * symmetrize(m) * &root));
    let eig = SymmetricEigen::new(sandwich);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(max.max(0.0))
}

/// `tr(MQ) / Ch_max(MQ)`.
///
/// Fails with [`Error::Degenerate`] when `Ch_max(MQ)` is zero relative to the
/// scale of `M` and `Q`.
pub fn trace_ratio(m: &DMatrix<f64>, q: &SpdMatrix) -> Result<f64> {
    let chmax = chmax_product(m, q)?;
    if is_degenerate_chmax(chmax, m, q) {
        return Err(Error::Degenerate(
            "maximum characteristic root of MQ is zero".into(),
        ));
    }
    Ok(trace_product(m, q.matrix()) / chmax)
}

/// `tr(MQ)` without forming the product.
pub fn trace_product(m: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    m.component_mul(&q.transpose()).sum()
}

pub(crate) fn is_degenerate_chmax(chmax: f64, m: &DMatrix<f64>, q: &SpdMatrix) -> bool {
    let scale = m.norm() * q.matrix().norm();
    scale == 0.0 || chmax <= DEGENERATE_CHMAX_TOL * scale
}
