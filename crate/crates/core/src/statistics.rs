//! Pooled mean, the dispersion statistics `F`, `G`, `B`, and the two
//! quadratic-form inequalities that bound `B`.
//!
//! All quadratic forms `xᵀV⁻¹x` are evaluated through Cholesky solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Model, Sample};
use crate::numerics::{chmax_product, symmetrize, SpdMatrix};

/// Pooled quantities of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledStats {
    /// `ν̂ = A Σ V_i⁻¹ X_i`.
    pub nu_hat: DVector<f64>,
    /// `Σ ‖X_i − ν̂‖²_{V_i⁻¹}`.
    pub dispersion: f64,
    pub f: f64,
    pub g: f64,
    /// `None` when every `X_i` coincides with `ν̂`.
    pub b: Option<f64>,
}

impl PooledStats {
    pub fn compute(model: &Model, sample: &Sample) -> Result<Self> {
        check_sample(sample, model.k(), model.p())?;
        pooled_stats(model.v(), model.precision(), model.q(), sample)
    }
}

fn check_sample(sample: &Sample, k: usize, p: usize) -> Result<()> {
    if sample.x.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} vectors, model has k = {k}",
            sample.x.len()
        )));
    }
    if sample.x.iter().any(|x| x.len() != p) {
        return Err(Error::DimensionMismatch(format!(
            "sample vectors must have length p = {p}"
        )));
    }
    check_s(sample.s)
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("S must be positive (got {s})")));
    }
    Ok(())
}

fn check_consistent(v: &[SpdMatrix], x: &[DVector<f64>]) -> Result<()> {
    if v.is_empty() || v.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariance matrices for {} vectors",
            v.len(),
            x.len()
        )));
    }
    let p = v[0].dim();
    if v.iter().any(|m| m.dim() != p) || x.iter().any(|xi| xi.len() != p) {
        return Err(Error::DimensionMismatch(format!(
            "all matrices must be {p}x{p} and vectors length {p}"
        )));
    }
    Ok(())
}

pub(crate) fn precision_sum(v: &[SpdMatrix]) -> Result<SpdMatrix> {
    let p = v
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no covariance matrices".into()))?
        .dim();
    if v.iter().any(|m| m.dim() != p) {
        return Err(Error::DimensionMismatch("covariance matrices differ in size".into()));
    }
    let sum = v
        .iter()
        .fold(DMatrix::zeros(p, p), |acc, vi| acc + vi.inverse());
    SpdMatrix::new(symmetrize(&sum))
}

/// `A = (Σ V_i⁻¹)⁻¹`.
pub fn pooled_matrix(v: &[SpdMatrix]) -> Result<SpdMatrix> {
    let precision = precision_sum(v)?;
    SpdMatrix::new(symmetrize(&precision.inverse()))
}

/// `ν̂` together with `Σ V_i⁻¹ X_i` (which equals `A⁻¹ν̂`).
fn pooled_parts(
    v: &[SpdMatrix],
    precision: &SpdMatrix,
    x: &[DVector<f64>],
) -> (DVector<f64>, DVector<f64>) {
    let p = precision.dim();
    let weighted = v
        .iter()
        .zip(x)
        .fold(DVector::zeros(p), |acc, (vi, xi)| acc + vi.solve(xi));
    (precision.solve(&weighted), weighted)
}

/// `ν̂ = A Σ V_i⁻¹ X_i`.
pub fn pooled_mean(v: &[SpdMatrix], x: &[DVector<f64>]) -> Result<DVector<f64>> {
    check_consistent(v, x)?;
    let precision = precision_sum(v)?;
    Ok(pooled_parts(v, &precision, x).0)
}

// Dispersion that is rounding noise relative to the size of the data.
fn is_degenerate_dispersion(disp: f64, v: &[SpdMatrix], x: &[DVector<f64>]) -> bool {
    let scale: f64 = v.iter().zip(x).map(|(vi, xi)| vi.inv_quad_form(xi)).sum();
    !(disp > 1e-24 * scale)
}

fn dispersion(v: &[SpdMatrix], x: &[DVector<f64>], nu_hat: &DVector<f64>) -> f64 {
    v.iter()
        .zip(x)
        .map(|(vi, xi)| vi.inv_quad_form(&(xi - nu_hat)))
        .sum()
}

pub(crate) fn pooled_stats(
    v: &[SpdMatrix],
    precision: &SpdMatrix,
    q: &SpdMatrix,
    sample: &Sample,
) -> Result<PooledStats> {
    check_s(sample.s)?;
    let (nu_hat, weighted) = pooled_parts(v, precision, &sample.x);
    let disp = dispersion(v, &sample.x, &nu_hat);
    let g = (nu_hat.dot(&weighted) / sample.s).max(0.0);
    let b = if !is_degenerate_dispersion(disp, v, &sample.x) {
        Some(q.quad_form(&(&sample.x[0] - &nu_hat)) / disp)
    } else {
        None
    };
    Ok(PooledStats {
        f: disp / sample.s,
        g,
        b,
        dispersion: disp,
        nu_hat,
    })
}

/// Test statistic `F = Σ ‖X_i − ν̂‖²_{V_i⁻¹} / S`.
pub fn stat_f(sample: &Sample, v: &[SpdMatrix]) -> Result<f64> {
    check_s(sample.s)?;
    let nu_hat = pooled_mean(v, &sample.x)?;
    Ok(dispersion(v, &sample.x, &nu_hat) / sample.s)
}

/// `G = ν̂ᵀ A⁻¹ ν̂ / S`.
pub fn stat_g(sample: &Sample, v: &[SpdMatrix]) -> Result<f64> {
    check_s(sample.s)?;
    check_consistent(v, &sample.x)?;
    let precision = precision_sum(v)?;
    let (nu_hat, weighted) = pooled_parts(v, &precision, &sample.x);
    Ok((nu_hat.dot(&weighted) / sample.s).max(0.0))
}

/// `B = (X₁ − ν̂)ᵀ Q (X₁ − ν̂) / Σ ‖X_j − ν̂‖²_{V_j⁻¹}`.
pub fn stat_b(sample: &Sample, v: &[SpdMatrix], q: &SpdMatrix) -> Result<f64> {
    let (value, _) = linear_form_ratio(&sample.x, v, q, None)?;
    Ok(value)
}

/// Gap `Σ_j ‖x_j − ν̂‖²_{V_j⁻¹} − (x₁ − ν̂)ᵀ(V₁ − A)⁻¹(x₁ − ν̂)`, which is
/// nonnegative for every input and zero when `k = 2`.
pub fn lemma_in_gap(x: &[DVector<f64>], v: &[SpdMatrix]) -> Result<f64> {
    check_consistent(v, x)?;
    if v.len() < 2 {
        return Err(Error::Domain("need k >= 2".into()));
    }
    let precision = precision_sum(v)?;
    let a = pooled_matrix(v)?;
    let c_inv = SpdMatrix::new(symmetrize(&(v[0].matrix() - a.matrix())))
        .map_err(|_| Error::Degenerate("V1 - A is singular".into()))?;
    let (nu_hat, _) = pooled_parts(v, &precision, x);
    let lhs = dispersion(v, x, &nu_hat);
    let rhs = c_inv.inv_quad_form(&(&x[0] - &nu_hat));
    Ok(lhs - rhs)
}

/// `Σ d_i² V_i − (Σ d_i)² A`, symmetrized.
pub fn contrast_matrix(v: &[SpdMatrix], a: &SpdMatrix, d: &[f64]) -> Result<DMatrix<f64>> {
    if d.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for k = {}",
            d.len(),
            v.len()
        )));
    }
    let p = a.dim();
    let sum_d: f64 = d.iter().sum();
    let m = v
        .iter()
        .zip(d)
        .fold(DMatrix::zeros(p, p), |acc, (vi, di)| acc + vi.matrix() * (di * di))
        - a.matrix() * (sum_d * sum_d);
    Ok(symmetrize(&m))
}

/// `B(x)` for the weighted contrast `Σ d_i (x_i − ν̂)` and its upper bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearBound {
    pub b_value: f64,
    pub bound: f64,
}

/// Evaluates `B(x) = ‖Σ d_i (x_i − ν̂)‖²_Q / Σ ‖x_j − ν̂‖²_{V_j⁻¹}` and
/// `Ch_max((Σ d_i² V_i − (Σ d_i)² A) Q)`.
pub fn linear_bound_check(
    x: &[DVector<f64>],
    v: &[SpdMatrix],
    q: &SpdMatrix,
    d: &[f64],
) -> Result<LinearBound> {
    let (b_value, a) = linear_form_ratio(x, v, q, Some(d))?;
    let bound = chmax_product(&contrast_matrix(v, &a, d)?, q)?;
    Ok(LinearBound { b_value, bound })
}

fn linear_form_ratio(
    x: &[DVector<f64>],
    v: &[SpdMatrix],
    q: &SpdMatrix,
    d: Option<&[f64]>,
) -> Result<(f64, SpdMatrix)> {
    check_consistent(v, x)?;
    if q.dim() != v[0].dim() {
        return Err(Error::DimensionMismatch("Q does not match V".into()));
    }
    if let Some(d) = d {
        if d.len() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for k = {}",
                d.len(),
                x.len()
            )));
        }
    }
    let precision = precision_sum(v)?;
    let a = SpdMatrix::new(symmetrize(&precision.inverse()))?;
    let (nu_hat, _) = pooled_parts(v, &precision, x);
    let denom = dispersion(v, x, &nu_hat);
    if is_degenerate_dispersion(denom, v, x) {
        return Err(Error::Degenerate(
            "all sample vectors coincide with the pooled mean".into(),
        ));
    }
    let contrast = match d {
        None => &x[0] - &nu_hat,
        Some(d) => x
            .iter()
            .zip(d)
            .fold(DVector::zeros(nu_hat.len()), |acc, (xi, di)| acc + (xi - &nu_hat) * *di),
    };
    Ok((q.quad_form(&contrast) / denom, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ident(p: usize, k: usize) -> Vec<SpdMatrix> {
        (0..k).map(|_| SpdMatrix::identity(p)).collect()
    }

    fn vecs(rows: &[&[f64]]) -> Vec<DVector<f64>> {
        rows.iter().map(|r| DVector::from_row_slice(r)).collect()
    }

    #[test]
    fn pooled_matrix_two_identities() {
        let a = pooled_matrix(&ident(3, 2)).unwrap();
        assert!((a.matrix() - DMatrix::identity(3, 3) * 0.5).amax() < 1e-15);
    }

    #[test]
    fn pooled_matrix_table_config() {
        let v: Vec<_> = (1..=5)
            .map(|i| SpdMatrix::scalar(5, 0.1 * i as f64).unwrap())
            .collect();
        let a = pooled_matrix(&v).unwrap();
        let expect = 60.0 / 1370.0;
        for i in 0..5 {
            assert_relative_eq!(a.matrix()[(i, i)], expect, max_relative = 1e-14);
        }
        assert_relative_eq!(expect, 0.0437956, epsilon = 1e-7);
    }

    #[test]
    fn pooled_matrix_diagonal_harmonic() {
        let diags = [[1.0, 2.0, 0.5], [3.0, 0.25, 1.5], [0.7, 4.0, 2.0]];
        let v: Vec<_> = diags
            .iter()
            .map(|d| SpdMatrix::new(DMatrix::from_diagonal(&DVector::from_row_slice(d))).unwrap())
            .collect();
        let a = pooled_matrix(&v).unwrap();
        for j in 0..3 {
            let h = 1.0 / diags.iter().map(|d| 1.0 / d[j]).sum::<f64>();
            assert_relative_eq!(a.matrix()[(j, j)], h, max_relative = 1e-14);
        }
    }

    #[test]
    fn pooled_mean_fixed_point_and_average() {
        let x = vecs(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]);
        let v: Vec<_> = (1..=3).map(|i| SpdMatrix::scalar(3, i as f64).unwrap()).collect();
        let nu = pooled_mean(&v, &x).unwrap();
        assert!((nu - &x[0]).amax() < 1e-14);

        let x = vecs(&[&[1.0, 0.0], &[3.0, -4.0]]);
        let nu = pooled_mean(&ident(2, 2), &x).unwrap();
        assert!((nu - DVector::from_row_slice(&[2.0, -2.0])).amax() < 1e-15);
    }

    #[test]
    fn f_statistic_cases() {
        let x = vecs(&[&[2.0, 2.0], &[2.0, 2.0], &[2.0, 2.0]]);
        let s = Sample::new(x, 1.0).unwrap();
        assert!(stat_f(&s, &ident(2, 3)).unwrap().abs() < 1e-28);

        // two-sample: F = (X1−X2)ᵀ(V1+V2)⁻¹(X1−X2)/S = 2/(2·2)
        let x = vecs(&[&[1.0, -1.0, 0.0, 0.0], &[0.0; 4]]);
        let s = Sample::new(x, 2.0).unwrap();
        assert_relative_eq!(stat_f(&s, &ident(4, 2)).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn f_rejects_nonpositive_s() {
        let s = Sample {
            x: vecs(&[&[1.0], &[0.0]]),
            s: 0.0,
        };
        assert!(stat_f(&s, &ident(1, 2)).is_err());
        assert!(stat_g(&s, &ident(1, 2)).is_err());
    }

    #[test]
    fn g_statistic_cases() {
        let x = vecs(&[&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0]]);
        let s = Sample::new(x, 1.0).unwrap();
        assert_eq!(stat_g(&s, &ident(3, 2)).unwrap(), 0.0);

        let x = vecs(&[&[2.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        let s = Sample::new(x, 2.0).unwrap();
        assert_relative_eq!(stat_g(&s, &ident(3, 2)).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn b_two_sample_identity_is_half() {
        let x = vecs(&[&[1.3, -0.2, 4.0], &[0.1, 0.9, -2.0]]);
        let q = SpdMatrix::identity(3);
        assert_relative_eq!(stat_b(&Sample::new(x, 1.0).unwrap(), &ident(3, 2), &q).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn b_degenerate_and_homogeneous() {
        let same = vecs(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(
            stat_b(&Sample::new(same, 1.0).unwrap(), &ident(2, 2), &SpdMatrix::identity(2)),
            Err(Error::Degenerate(_))
        ));
        let x = vecs(&[&[1.0, 2.0], &[0.5, -1.0], &[3.0, 0.0]]);
        let v: Vec<_> = (1..=3).map(|i| SpdMatrix::scalar(2, i as f64).unwrap()).collect();
        let q = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        let s = Sample::new(x, 1.0).unwrap();
        let b1 = stat_b(&s, &v, &q).unwrap();
        let b3 = stat_b(&s, &v, &q.scaled(3.0).unwrap()).unwrap();
        assert_relative_eq!(b3, 3.0 * b1, max_relative = 1e-14);
    }

    #[test]
    fn lemma_gap_cases() {
        let v: Vec<_> = (1..=2).map(|i| SpdMatrix::scalar(2, i as f64).unwrap()).collect();
        let x = vecs(&[&[1.0, 2.0], &[-0.5, 3.0]]);
        assert!(lemma_in_gap(&x, &v).unwrap().abs() < 1e-12);

        let v: Vec<_> = (1..=3).map(|i| SpdMatrix::scalar(2, i as f64).unwrap()).collect();
        let x = vecs(&[&[0.4, 0.4], &[0.4, 0.4], &[0.4, 0.4]]);
        assert!(lemma_in_gap(&x, &v).unwrap().abs() < 1e-14);
        let x = vecs(&[&[1.0, 2.0], &[-0.5, 3.0], &[2.0, 0.0]]);
        assert!(lemma_in_gap(&x, &v).unwrap() > 0.0);
    }

    #[test]
    fn linear_bound_reduces_to_b() {
        let x = vecs(&[&[1.0, 2.0], &[0.5, -1.0], &[3.0, 0.0]]);
        let v: Vec<_> = (1..=3).map(|i| SpdMatrix::scalar(2, i as f64).unwrap()).collect();
        let q = SpdMatrix::identity(2);
        let lb = linear_bound_check(&x, &v, &q, &[1.0, 0.0, 0.0]).unwrap();
        let s = Sample::new(x, 1.0).unwrap();
        assert_relative_eq!(lb.b_value, stat_b(&s, &v, &q).unwrap(), max_relative = 1e-14);
        let a = pooled_matrix(&v).unwrap();
        let bound1 = chmax_product(&(v[0].matrix() - a.matrix()), &q).unwrap();
        assert_relative_eq!(lb.bound, bound1, max_relative = 1e-13);
        assert!(lb.b_value <= lb.bound);
    }

    #[test]
    fn linear_bound_identity_case() {
        let d = [0.3, -1.2, 2.0, 0.5];
        let mean = d.iter().sum::<f64>() / 4.0;
        let expect: f64 = d.iter().map(|x| (x - mean) * (x - mean)).sum();
        let x = vecs(&[&[1.0, 2.0, 0.0], &[0.5, -1.0, 1.0], &[3.0, 0.0, 1.0], &[0.0, 0.0, 0.2]]);
        let lb = linear_bound_check(&x, &ident(3, 4), &SpdMatrix::identity(3), &d).unwrap();
        assert_relative_eq!(lb.bound, expect, max_relative = 1e-13);
    }
}
