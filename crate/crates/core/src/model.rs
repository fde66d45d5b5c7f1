//! The canonical k-sample normal model: `X_i ~ N_p(μ_i, σ²V_i)`
//! independently for `i = 1..k`, and `S/σ² ~ χ²_n`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, FieldError, Result};
use crate::numerics::{check_symmetric, SpdMatrix};
use crate::statistics::{pooled_matrix, precision_sum};

/// Unvalidated model description. Call [`ModelSpec::validate`] to obtain a
/// [`Model`] that can be sampled and estimated against.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub p: usize,
    pub k: usize,
    pub n: u32,
    pub v: Vec<DMatrix<f64>>,
    pub q: DMatrix<f64>,
    pub sigma2: f64,
    pub mu: Vec<DVector<f64>>,
}

impl ModelSpec {
    /// Model with `V_i = v_scales[i]·I_p`, `Q = q_scale·I_p`, and
    /// `μ_i = mean_scales[i]·j_p`.
    pub fn scalar(
        p: usize,
        n: u32,
        sigma2: f64,
        v_scales: &[f64],
        q_scale: f64,
        mean_scales: &[f64],
    ) -> Self {
        Self {
            p,
            k: v_scales.len(),
            n,
            v: v_scales
                .iter()
                .map(|&c| DMatrix::identity(p, p) * c)
                .collect(),
            q: DMatrix::identity(p, p) * q_scale,
            sigma2,
            mu: mean_scales
                .iter()
                .map(|&c| DVector::from_element(p, c))
                .collect(),
        }
    }

    /// Checks every invariant and returns the validated model, or the full
    /// list of violations.
    pub fn validate(&self) -> Result<Model> {
        let mut errs = Vec::new();
        if self.p == 0 {
            errs.push(FieldError::new("p", "dimension must be at least 1"));
        }
        if self.k < 2 {
            errs.push(FieldError::new(
                "k",
                format!("need at least 2 populations for pooling (got {})", self.k),
            ));
        }
        if self.n == 0 {
            errs.push(FieldError::new("n", "degrees of freedom must be at least 1"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            errs.push(FieldError::new(
                "sigma2",
                format!("must be positive and finite (got {})", self.sigma2),
            ));
        }
        if self.v.len() != self.k {
            errs.push(FieldError::new(
                "V",
                format!("expected {} matrices, got {}", self.k, self.v.len()),
            ));
        }
        if self.mu.len() != self.k {
            errs.push(FieldError::new(
                "mu",
                format!("expected {} mean vectors, got {}", self.k, self.mu.len()),
            ));
        }
        let mut v = Vec::with_capacity(self.v.len());
        for (i, m) in self.v.iter().enumerate() {
            match spd_field(m, self.p) {
                Ok(s) => v.push(s),
                Err(msg) => errs.push(FieldError::new(format!("V[{}]", i + 1), msg)),
            }
        }
        let q = match spd_field(&self.q, self.p) {
            Ok(q) => Some(q),
            Err(msg) => {
                errs.push(FieldError::new("Q", msg));
                None
            }
        };
        for (i, m) in self.mu.iter().enumerate() {
            if m.len() != self.p {
                errs.push(FieldError::new(
                    format!("mu[{}]", i + 1),
                    format!("expected length {}, got {}", self.p, m.len()),
                ));
            } else if m.iter().any(|x| !x.is_finite()) {
                errs.push(FieldError::new(format!("mu[{}]", i + 1), "non-finite entry"));
            }
        }
        if !errs.is_empty() {
            return Err(Error::InvalidSpec(errs));
        }
        let q = q.expect("validated");
        let a = pooled_matrix(&v).map_err(|e| Error::InvalidSpec(vec![FieldError::new("A", e.to_string())]))?;
        // V1 - A must be positive definite for the pooled shrinkage bounds.
        if let Err(e) = SpdMatrix::new(v[0].matrix() - a.matrix()) {
            return Err(Error::InvalidSpec(vec![FieldError::new(
                "V1-A",
                format!("not positive definite: {e}"),
            )]));
        }
        let precision = precision_sum(&v)
            .map_err(|e| Error::InvalidSpec(vec![FieldError::new("V", e.to_string())]))?;
        let sample_factors = v
            .iter()
            .map(|vi| vi.cholesky_factor() * self.sigma2.sqrt())
            .collect();
        let chi = ChiSquared::new(self.n as f64).expect("n >= 1");
        Ok(Model {
            spec: self.clone(),
            v,
            q,
            a,
            precision,
            sample_factors,
            chi,
        })
    }
}

fn spd_field(m: &DMatrix<f64>, p: usize) -> std::result::Result<SpdMatrix, String> {
    if m.nrows() != p || m.ncols() != p {
        return Err(format!("expected {p}x{p}, got {}x{}", m.nrows(), m.ncols()));
    }
    check_symmetric(m).map_err(|e| e.to_string())?;
    SpdMatrix::new(m.clone()).map_err(|e| e.to_string())
}

/// One draw `(X_1, …, X_k, S)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<DVector<f64>>,
    pub s: f64,
}

impl Sample {
    pub fn new(x: Vec<DVector<f64>>, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!("S must be positive (got {s})")));
        }
        if x.is_empty() {
            return Err(Error::DimensionMismatch("sample has no vectors".into()));
        }
        let p = x[0].len();
        if x.iter().any(|xi| xi.len() != p) {
            return Err(Error::DimensionMismatch("sample vectors differ in length".into()));
        }
        Ok(Self { x, s })
    }

    pub fn k(&self) -> usize {
        self.x.len()
    }

    pub fn p(&self) -> usize {
        self.x.first().map_or(0, |x| x.len())
    }

    /// Same sample with every `X_i` shifted by `c`.
    pub fn translated(&self, c: &DVector<f64>) -> Self {
        Self {
            x: self.x.iter().map(|xi| xi + c).collect(),
            s: self.s,
        }
    }
}

/// A validated model: immutable, cheap to share across sampling workers.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    v: Vec<SpdMatrix>,
    q: SpdMatrix,
    a: SpdMatrix,
    precision: SpdMatrix,
    sample_factors: Vec<DMatrix<f64>>,
    chi: ChiSquared<f64>,
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn p(&self) -> usize {
        self.spec.p
    }

    pub fn k(&self) -> usize {
        self.spec.k
    }

    pub fn n(&self) -> u32 {
        self.spec.n
    }

    pub fn sigma2(&self) -> f64 {
        self.spec.sigma2
    }

    pub fn mu(&self) -> &[DVector<f64>] {
        &self.spec.mu
    }

    pub fn v(&self) -> &[SpdMatrix] {
        &self.v
    }

    pub fn q(&self) -> &SpdMatrix {
        &self.q
    }

    /// Pooled matrix `A = (Σ V_i⁻¹)⁻¹`.
    pub fn a(&self) -> &SpdMatrix {
        &self.a
    }

    /// `A⁻¹ = Σ V_i⁻¹`.
    pub fn precision(&self) -> &SpdMatrix {
        &self.precision
    }

    /// `V_1 − A`.
    pub fn v1_minus_a(&self) -> DMatrix<f64> {
        self.v[0].matrix() - self.a.matrix()
    }

    /// Risk of the unshrunk estimator `X_1`: `tr(V_1 Q)`.
    pub fn baseline_risk(&self) -> f64 {
        crate::numerics::trace_product(self.v[0].matrix(), self.q.matrix())
    }

    /// Same model with different mean vectors.
    pub fn with_means(&self, mu: Vec<DVector<f64>>) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.mu = mu;
        spec.validate()
    }

    /// Draws `X_i = μ_i + L_i z_i` with `L_i L_iᵀ = σ²V_i`, and
    /// `S = σ²·χ²_n`.
    pub fn sample_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        let p = self.p();
        let x = self
            .sample_factors
            .iter()
            .zip(&self.spec.mu)
            .map(|(l, mu)| {
                let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
                mu + l * z
            })
            .collect();
        let s = self.spec.sigma2 * self.chi.sample(rng);
        Sample { x, s }
    }

    /// Loss of `delta` as an estimate of `μ_1`.
    pub fn loss(&self, delta: &DVector<f64>) -> Result<f64> {
        loss(delta, &self.spec.mu[0], self.spec.sigma2, &self.q)
    }
}

/// Draws one sample from a validated model.
pub fn sample_draw<R: Rng + ?Sized>(model: &Model, rng: &mut R) -> Sample {
    model.sample_draw(rng)
}

/// Quadratic loss `(δ − μ₁)ᵀ Q (δ − μ₁) / σ²`.
pub fn loss(delta: &DVector<f64>, mu1: &DVector<f64>, sigma2: f64, q: &SpdMatrix) -> Result<f64> {
    if delta.len() != mu1.len() || delta.len() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "delta has length {}, mu1 {}, Q is {}x{}",
            delta.len(),
            mu1.len(),
            q.dim(),
            q.dim()
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2 must be positive (got {sigma2})")));
    }
    let d = delta - mu1;
    Ok(q.quad_form(&d).max(0.0) / sigma2)
}
