//! Point estimators of `μ₁` (and of `θ = Σ d_i μ_i`) that shrink toward the
//! pooled mean.
//!
//! Every shrinkage estimator here is a Class-1 form
//! `X₁ − (φ(F,S)/F)(X₁ − ν̂)` or the double-shrinkage Class-2 form that
//! additionally pulls `ν̂` toward the origin through `ψ(G,S)/G`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::minimax;
use crate::model::{Model, Sample};
use crate::numerics::{
    f_quantile, integrate_components, ln_inc_beta, ln_reg_inc_gamma_q, DEFAULT_MAX_DEPTH,
};
use crate::statistics::PooledStats;

/// Significance level of the preliminary test when none is configured.
pub const DEFAULT_ALPHA: f64 = 0.05;

const HB_REL_TOL: f64 = 1e-12;

/// A shrink function `φ(F, S)` (or `ψ(G, S)`).
pub trait ShrinkFunction: Send + Sync {
    fn value(&self, stat: f64, s: f64) -> Result<f64>;

    /// Shrink factor `φ(stat, S)/stat`. At `stat = 0` this is 1 (full
    /// shrinkage), the limit of `min(a₀/F, 1)`.
    fn factor(&self, stat: f64, s: f64) -> Result<f64> {
        if stat > 0.0 {
            Ok(self.value(stat, s)? / stat)
        } else {
            Ok(1.0)
        }
    }
}

impl<F> ShrinkFunction for F
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
{
    fn value(&self, stat: f64, s: f64) -> Result<f64> {
        Ok(self(stat, s))
    }
}

/// Serializable description of a shrink function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShrinkSpec {
    /// `φ ≡ 0`: no shrinkage.
    Zero,
    Constant { value: f64 },
    /// `min(a0, stat)`, i.e. shrink factor `min(a0/stat, 1)`.
    Clipped { a0: f64 },
    /// The hierarchical Bayes shrink function.
    Hb {
        a: f64,
        #[serde(default = "default_c")]
        c: f64,
        #[serde(rename = "L", alias = "l", default)]
        l: f64,
    },
}

fn default_c() -> f64 {
    1.0
}

impl ShrinkSpec {
    /// Binds the spec to a model's dimensions.
    pub fn bind(&self, model: &Model) -> Result<BoundShrink> {
        Ok(match *self {
            ShrinkSpec::Zero => BoundShrink::Constant(0.0),
            ShrinkSpec::Constant { value } => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::Domain(format!(
                        "constant shrink value must be finite and >= 0 (got {value})"
                    )));
                }
                BoundShrink::Constant(value)
            }
            ShrinkSpec::Clipped { a0 } => {
                if !(a0 > 0.0 && a0.is_finite()) {
                    return Err(Error::Domain(format!("a0 must be positive (got {a0})")));
                }
                BoundShrink::Clipped(a0)
            }
            ShrinkSpec::Hb { a, c, l } => {
                BoundShrink::Hb(PhiHb::new(model.p(), model.k(), model.n(), a, c, l)?)
            }
        })
    }
}

/// A shrink function ready for evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundShrink {
    Constant(f64),
    Clipped(f64),
    Hb(PhiHb),
}

impl ShrinkFunction for BoundShrink {
    fn value(&self, stat: f64, s: f64) -> Result<f64> {
        match self {
            BoundShrink::Constant(c) => Ok(*c),
            BoundShrink::Clipped(a0) => Ok(a0.min(stat)),
            BoundShrink::Hb(hb) => hb.value(stat, s),
        }
    }

    fn factor(&self, stat: f64, s: f64) -> Result<f64> {
        match self {
            BoundShrink::Constant(c) if *c == 0.0 => Ok(0.0),
            BoundShrink::Clipped(a0) if stat > 0.0 => Ok((a0 / stat).min(1.0)),
            BoundShrink::Hb(hb) => hb.factor(stat, s),
            _ if stat > 0.0 => Ok(self.value(stat, s)? / stat),
            _ => Ok(1.0),
        }
    }
}

/// `φ^HB(F, S)`: ratio of the two hyperprior integrals, with
/// `q = p(k−1)/2`, `s = q + a`, `m = (n + p(k−1))/2 − c`.
///
/// For `L = 0` the inner integral is a complete gamma integral and the
/// outer ratio reduces to
/// `(s/(m−s)) · I_T(s+1, m−s) / I_T(s, m−s+1)` with `T = F/(1+F)`.
/// For `L > 0` both outer integrals are evaluated on a shared quadrature
/// partition after substituting `t = x/(1+x)` and `u = t^s/s`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiHb {
    s: f64,
    m: f64,
    l: f64,
}

impl PhiHb {
    pub fn new(p: usize, k: usize, n: u32, a: f64, c: f64, l: f64) -> Result<Self> {
        let q2 = (p * (k.saturating_sub(1))) as f64;
        let n = n as f64;
        if !(a.is_finite() && c.is_finite()) {
            return Err(Error::Domain(format!("a and c must be finite (got a={a}, c={c})")));
        }
        if !(a > -q2 / 2.0) {
            return Err(Error::Domain(format!(
                "need a > -p(k-1)/2 = {} (got a = {a})",
                -q2 / 2.0
            )));
        }
        if !(a + c < n / 2.0) {
            return Err(Error::Domain(format!(
                "need a + c < n/2 = {} (got a + c = {})",
                n / 2.0,
                a + c
            )));
        }
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::Domain(format!("L must be finite and >= 0 (got {l})")));
        }
        Ok(Self {
            s: q2 / 2.0 + a,
            m: (n + q2) / 2.0 - c,
            l,
        })
    }

    /// `lim_{F→∞} φ^HB = (p(k−1)+2a)/(n−2(a+c))`.
    pub fn sup_bound(&self) -> f64 {
        self.s / (self.m - self.s)
    }

    /// `lim_{F→0} φ^HB(F)/F = (q+a)/(q+a+1)`.
    pub fn zero_limit(&self) -> f64 {
        self.s / (self.s + 1.0)
    }

    pub fn value(&self, f: f64, s: f64) -> Result<f64> {
        check_args(f, s)?;
        if f == 0.0 {
            return Ok(0.0);
        }
        if self.l == 0.0 {
            Ok(self.closed_form(f))
        } else {
            self.value_by_quadrature(f, s)
        }
    }

    /// `φ^HB(F,S)/F`, equal to [`PhiHb::zero_limit`] at `F = 0`.
    pub fn factor(&self, f: f64, s: f64) -> Result<f64> {
        check_args(f, s)?;
        if f == 0.0 {
            return Ok(self.zero_limit());
        }
        Ok(self.value(f, s)? / f)
    }

    fn closed_form(&self, f: f64) -> f64 {
        if f.is_infinite() {
            return self.sup_bound();
        }
        let t = f / (1.0 + f);
        let (s, m) = (self.s, self.m);
        let ln_ratio = ln_inc_beta(s + 1.0, m - s, t) - ln_inc_beta(s, m - s + 1.0, t);
        self.sup_bound() * ln_ratio.exp()
    }

    /// Evaluates the ratio of integrals by adaptive quadrature for any `L`.
    pub fn value_by_quadrature(&self, f: f64, s_stat: f64) -> Result<f64> {
        check_args(f, s_stat)?;
        if f == 0.0 {
            return Ok(0.0);
        }
        if f.is_infinite() {
            return Err(Error::Domain("quadrature route needs finite F".into()));
        }
        let (s, m) = (self.s, self.m);
        let t_hi = f / (1.0 + f);
        let u_hi = t_hi.powf(s) / s;
        let x0 = 0.5 * self.l * s_stat;
        let lq0 = if self.l > 0.0 {
            ln_reg_inc_gamma_q(m + 1.0, x0)?
        } else {
            0.0
        };
        let integrand = |u: f64| {
            let t = (s * u).powf(1.0 / s).min(t_hi);
            let ln_om = (-t).ln_1p();
            let lq = if self.l > 0.0 {
                ln_reg_inc_gamma_q(m + 1.0, x0 / (1.0 - t)).unwrap_or(f64::NAN) - lq0
            } else {
                0.0
            };
            let den = ((m - s) * ln_om + lq).exp();
            let num = t * ((m - s - 1.0) * ln_om + lq).exp();
            [num, den]
        };
        let [num, den] = integrate_components(integrand, 0.0, u_hi, HB_REL_TOL, DEFAULT_MAX_DEPTH)?;
        if !(den.value > 0.0) {
            return Err(Error::Degenerate(
                "hyperprior denominator integral underflowed".into(),
            ));
        }
        Ok(num.value / den.value)
    }
}

fn check_args(f: f64, s: f64) -> Result<()> {
    if !(f >= 0.0) {
        return Err(Error::Domain(format!("F must be >= 0 (got {f})")));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("S must be positive (got {s})")));
    }
    Ok(())
}

impl ShrinkFunction for PhiHb {
    fn value(&self, stat: f64, s: f64) -> Result<f64> {
        PhiHb::value(self, stat, s)
    }

    fn factor(&self, stat: f64, s: f64) -> Result<f64> {
        PhiHb::factor(self, stat, s)
    }
}

/// `φ^HB(F, S)` for the given dimensions and hyperparameters.
#[allow(clippy::too_many_arguments)]
pub fn phi_hb(f: f64, s: f64, p: usize, k: usize, n: u32, a: f64, c: f64, l: f64) -> Result<f64> {
    PhiHb::new(p, k, n, a, c, l)?.value(f, s)
}

/// An estimator and its tuning constants. Constants left as `None` are
/// filled in by [`EstimatorConfig::resolve`] from the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE", deny_unknown_fields)]
pub enum EstimatorConfig {
    Pt {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
    Js,
    Eb {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a0: Option<f64>,
    },
    Hb {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
        #[serde(rename = "L", alias = "l", default, skip_serializing_if = "Option::is_none")]
        l: Option<f64>,
    },
    Heb {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b0: Option<f64>,
    },
    Lincomb {
        d: Vec<f64>,
        phi: ShrinkSpec,
    },
    Class1 {
        phi: ShrinkSpec,
    },
    Class2 {
        phi: ShrinkSpec,
        psi: ShrinkSpec,
    },
}

impl EstimatorConfig {
    pub fn pt(alpha: f64) -> Self {
        Self::Pt { alpha: Some(alpha) }
    }

    pub fn eb(a0: f64) -> Self {
        Self::Eb { a0: Some(a0) }
    }

    pub fn hb(a: f64, c: f64, l: f64) -> Self {
        Self::Hb {
            a: Some(a),
            c: Some(c),
            l: Some(l),
        }
    }

    pub fn heb(a0: f64, b0: f64) -> Self {
        Self::Heb {
            a0: Some(a0),
            b0: Some(b0),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Pt { .. } => "PT",
            Self::Js => "JS",
            Self::Eb { .. } => "EB",
            Self::Hb { .. } => "HB",
            Self::Heb { .. } => "HEB",
            Self::Lincomb { .. } => "LINCOMB",
            Self::Class1 { .. } => "CLASS1",
            Self::Class2 { .. } => "CLASS2",
        }
    }

    /// Fills unset constants: `α = 0.05`; EB `a₀ = (ratio−2)/(n+2)`;
    /// HB `c = 1`, `L = 0`, `a` from [`minimax::solve_hb_a`]; HEB halves of
    /// the Theorem 2 bounds for `(V₁−A)Q` and `AQ`.
    pub fn resolve(&self, model: &Model) -> Result<Self> {
        let missing = |field: &str, e: Error| {
            Error::InvalidConfig(vec![FieldError::new(
                format!("{}.{field}", self.kind()),
                format!("no default available: {e}"),
            )])
        };
        let positive_default = |field: &str, v: f64| {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::InvalidConfig(vec![FieldError::new(
                    format!("{}.{field}", self.kind()),
                    format!("minimax condition fails for this model (default would be {v}); set it explicitly"),
                )]))
            }
        };
        Ok(match self {
            Self::Pt { alpha } => Self::pt(alpha.unwrap_or(DEFAULT_ALPHA)),
            Self::Eb { a0: Some(a0) } => Self::eb(*a0),
            Self::Eb { a0: None } => {
                let r = minimax::theorem1_report(model).map_err(|e| missing("a0", e))?;
                Self::eb(positive_default("a0", r.phi_upper_theorem2)?)
            }
            Self::Hb { a, c, l } => {
                let c = c.unwrap_or(1.0);
                let a = match a {
                    Some(a) => *a,
                    None => minimax::solve_hb_a_with_c(model, c).map_err(|e| missing("a", e))?,
                };
                Self::hb(a, c, l.unwrap_or(0.0))
            }
            Self::Heb { a0, b0 } => {
                let a0 = match a0 {
                    Some(v) => *v,
                    None => {
                        let r = minimax::theorem1_report(model).map_err(|e| missing("a0", e))?;
                        positive_default("a0", r.phi_upper_theorem2 / 2.0)?
                    }
                };
                let b0 = match b0 {
                    Some(v) => *v,
                    None => {
                        let r = minimax::theorem2_report(model).map_err(|e| missing("b0", e))?;
                        let psi = r.psi_upper_theorem2.unwrap_or(f64::NAN);
                        positive_default("b0", psi / 2.0)?
                    }
                };
                Self::heb(a0, b0)
            }
            other => other.clone(),
        })
    }
}

#[derive(Clone, Debug)]
enum Rule {
    Pt { threshold: f64 },
    Js { coef: f64 },
    Class1 { phi: BoundShrink },
    Class2 { phi: BoundShrink, psi: BoundShrink },
    Lincomb { d: Vec<f64>, phi: BoundShrink },
}

/// A resolved estimator with its constants precomputed for one model.
#[derive(Clone, Debug)]
pub struct Estimator {
    config: EstimatorConfig,
    rule: Rule,
}

impl Estimator {
    pub fn new(config: &EstimatorConfig, model: &Model) -> Result<Self> {
        let config = config.resolve(model)?;
        let field_err = |field: &str, e: Error| {
            Error::InvalidConfig(vec![FieldError::new(
                format!("{}.{field}", config.kind()),
                e.to_string(),
            )])
        };
        let rule = match &config {
            EstimatorConfig::Pt { alpha } => {
                let alpha = alpha.expect("resolved");
                let threshold = pt_threshold(model.p(), model.k(), model.n(), alpha)
                    .map_err(|e| field_err("alpha", e))?;
                Rule::Pt { threshold }
            }
            EstimatorConfig::Js => Rule::Js {
                coef: js_coefficient(model.p(), model.n()).map_err(|e| field_err("p", e))?,
            },
            EstimatorConfig::Eb { a0 } => Rule::Class1 {
                phi: ShrinkSpec::Clipped { a0: a0.expect("resolved") }
                    .bind(model)
                    .map_err(|e| field_err("a0", e))?,
            },
            EstimatorConfig::Hb { a, c, l } => Rule::Class1 {
                phi: ShrinkSpec::Hb {
                    a: a.expect("resolved"),
                    c: c.expect("resolved"),
                    l: l.expect("resolved"),
                }
                .bind(model)
                .map_err(|e| field_err("a", e))?,
            },
            EstimatorConfig::Heb { a0, b0 } => Rule::Class2 {
                phi: ShrinkSpec::Clipped { a0: a0.expect("resolved") }
                    .bind(model)
                    .map_err(|e| field_err("a0", e))?,
                psi: ShrinkSpec::Clipped { a0: b0.expect("resolved") }
                    .bind(model)
                    .map_err(|e| field_err("b0", e))?,
            },
            EstimatorConfig::Lincomb { d, phi } => {
                if d.len() != model.k() {
                    return Err(field_err(
                        "d",
                        Error::DimensionMismatch(format!("{} weights for k = {}", d.len(), model.k())),
                    ));
                }
                if d.iter().any(|x| !x.is_finite()) {
                    return Err(field_err("d", Error::Domain("non-finite weight".into())));
                }
                Rule::Lincomb {
                    d: d.clone(),
                    phi: phi.bind(model).map_err(|e| field_err("phi", e))?,
                }
            }
            EstimatorConfig::Class1 { phi } => Rule::Class1 {
                phi: phi.bind(model).map_err(|e| field_err("phi", e))?,
            },
            EstimatorConfig::Class2 { phi, psi } => Rule::Class2 {
                phi: phi.bind(model).map_err(|e| field_err("phi", e))?,
                psi: psi.bind(model).map_err(|e| field_err("psi", e))?,
            },
        };
        Ok(Self { config, rule })
    }

    /// The configuration with every default filled in.
    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn kind(&self) -> &'static str {
        self.config.kind()
    }

    pub fn estimate(&self, model: &Model, sample: &Sample) -> Result<DVector<f64>> {
        let stats = PooledStats::compute(model, sample)?;
        self.estimate_with(model, sample, &stats)
    }

    /// Estimate from precomputed pooled statistics of `sample`.
    pub fn estimate_with(
        &self,
        model: &Model,
        sample: &Sample,
        stats: &PooledStats,
    ) -> Result<DVector<f64>> {
        let x1 = &sample.x[0];
        let nu = &stats.nu_hat;
        match &self.rule {
            Rule::Pt { threshold } => Ok(if stats.f > *threshold {
                x1.clone()
            } else {
                nu.clone()
            }),
            Rule::Js { coef } => Ok(js_from(x1, sample.s, *coef, &model.v()[0])),
            Rule::Class1 { phi } => shrink_toward(x1, nu, phi.factor(stats.f, sample.s)?),
            Rule::Class2 { phi, psi } => {
                let fa = phi.factor(stats.f, sample.s)?;
                let fb = psi.factor(stats.g, sample.s)?;
                Ok(shrink_toward(x1, nu, fa)? - nu * fb)
            }
            Rule::Lincomb { d, phi } => {
                let fa = phi.factor(stats.f, sample.s)?;
                let xd = weighted_sum(&sample.x, d);
                let sum_d: f64 = d.iter().sum();
                Ok(&xd - (&xd - nu * sum_d) * fa)
            }
        }
    }

    /// The quantity being estimated: `μ₁`, or `Σ d_i μ_i` for LINCOMB.
    pub fn target(&self, mu: &[DVector<f64>]) -> DVector<f64> {
        match &self.rule {
            Rule::Lincomb { d, .. } => weighted_sum(mu, d),
            _ => mu[0].clone(),
        }
    }

    /// The unshrunk estimator of [`Estimator::target`].
    pub fn baseline(&self, sample: &Sample) -> DVector<f64> {
        match &self.rule {
            Rule::Lincomb { d, .. } => weighted_sum(&sample.x, d),
            _ => sample.x[0].clone(),
        }
    }
}

fn weighted_sum(x: &[DVector<f64>], d: &[f64]) -> DVector<f64> {
    x.iter()
        .zip(d)
        .fold(DVector::zeros(x[0].len()), |acc, (xi, di)| acc + xi * *di)
}

fn shrink_toward(x1: &DVector<f64>, nu: &DVector<f64>, factor: f64) -> Result<DVector<f64>> {
    if !factor.is_finite() {
        return Err(Error::Domain(format!("shrink factor is not finite ({factor})")));
    }
    if factor == 0.0 {
        return Ok(x1.clone());
    }
    if factor == 1.0 {
        return Ok(nu.clone());
    }
    Ok(x1 - (x1 - nu) * factor)
}

fn js_from(x1: &DVector<f64>, s: f64, coef: f64, v1: &crate::numerics::SpdMatrix) -> DVector<f64> {
    let norm = v1.inv_quad_form(x1);
    if !(norm > 0.0) {
        return DVector::zeros(x1.len());
    }
    x1 * (1.0 - coef * s / norm)
}

/// `(p(k−1)/n) · F_{p(k−1), n, α}`.
pub fn pt_threshold(p: usize, k: usize, n: u32, alpha: f64) -> Result<f64> {
    let d1 = u32::try_from(p * (k - 1))
        .map_err(|_| Error::Domain("p(k-1) too large".into()))?;
    Ok(d1 as f64 / n as f64 * f_quantile(d1, n, alpha)?)
}

fn js_coefficient(p: usize, n: u32) -> Result<f64> {
    if p < 2 {
        return Err(Error::Domain(format!("James-Stein needs p >= 2 (got {p})")));
    }
    Ok((p as f64 - 2.0) / (n as f64 + 2.0))
}

fn stats(model: &Model, sample: &Sample) -> Result<PooledStats> {
    PooledStats::compute(model, sample)
}

/// Preliminary-test estimator: `X₁` if the F test rejects equal means,
/// `ν̂` otherwise.
pub fn pt_estimate(sample: &Sample, model: &Model, alpha: f64) -> Result<DVector<f64>> {
    Estimator::new(&EstimatorConfig::pt(alpha), model)?.estimate(model, sample)
}

/// James–Stein shrinkage of `X₁` toward the origin.
pub fn js_estimate(sample: &Sample, model: &Model) -> Result<DVector<f64>> {
    let coef = js_coefficient(model.p(), model.n())?;
    if sample.x.len() != model.k() || sample.p() != model.p() {
        return Err(Error::DimensionMismatch("sample does not match model".into()));
    }
    Ok(js_from(&sample.x[0], sample.s, coef, &model.v()[0]))
}

/// `X₁ − (φ(F,S)/F)(X₁ − ν̂)`.
pub fn class1_estimate(
    sample: &Sample,
    model: &Model,
    phi: &dyn ShrinkFunction,
) -> Result<DVector<f64>> {
    let st = stats(model, sample)?;
    shrink_toward(&sample.x[0], &st.nu_hat, phi.factor(st.f, sample.s)?)
}

/// `X₁ − (φ(F,S)/F)(X₁ − ν̂) − (ψ(G,S)/G) ν̂`.
pub fn class2_estimate(
    sample: &Sample,
    model: &Model,
    phi: &dyn ShrinkFunction,
    psi: &dyn ShrinkFunction,
) -> Result<DVector<f64>> {
    let st = stats(model, sample)?;
    let out = shrink_toward(&sample.x[0], &st.nu_hat, phi.factor(st.f, sample.s)?)?;
    Ok(out - &st.nu_hat * psi.factor(st.g, sample.s)?)
}

/// Empirical Bayes: `X₁ − min(a₀/F, 1)(X₁ − ν̂)`.
pub fn eb_estimate(sample: &Sample, model: &Model, a0: f64) -> Result<DVector<f64>> {
    Estimator::new(&EstimatorConfig::eb(a0), model)?.estimate(model, sample)
}

/// Hierarchical Bayes: `X₁ − (φ^HB(F,S)/F)(X₁ − ν̂)`.
pub fn hb_estimate(sample: &Sample, model: &Model, a: f64, c: f64, l: f64) -> Result<DVector<f64>> {
    Estimator::new(&EstimatorConfig::hb(a, c, l), model)?.estimate(model, sample)
}

/// Hierarchical empirical Bayes:
/// `X₁ − min(a₀/F,1)(X₁ − ν̂) − min(b₀/G,1) ν̂`.
pub fn heb_estimate(sample: &Sample, model: &Model, a0: f64, b0: f64) -> Result<DVector<f64>> {
    Estimator::new(&EstimatorConfig::heb(a0, b0), model)?.estimate(model, sample)
}

/// `Σ d_i [X_i − (φ(F,S)/F)(X_i − ν̂)]`, an estimate of `Σ d_i μ_i`.
pub fn lincomb_estimate(
    sample: &Sample,
    model: &Model,
    d: &[f64],
    phi: &dyn ShrinkFunction,
) -> Result<DVector<f64>> {
    if d.len() != model.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for k = {}",
            d.len(),
            model.k()
        )));
    }
    let st = stats(model, sample)?;
    let fa = phi.factor(st.f, sample.s)?;
    let xd = weighted_sum(&sample.x, d);
    let sum_d: f64 = d.iter().sum();
    Ok(&xd - (&xd - &st.nu_hat * sum_d) * fa)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || v.is_nan() {
        return Err(Error::Domain(format!("{name} must be positive (got {v})")));
    }
    Ok(())
}

/// Bayes rule under `μ_i ~ N(ν, τ²V_i)` with a flat prior on `ν`:
/// `X₁ − (σ²/(τ²+σ²))(X₁ − ν̂)`.
pub fn bayes_oracle_uniform(
    sample: &Sample,
    model: &Model,
    tau2: f64,
    sigma2: f64,
) -> Result<DVector<f64>> {
    check_positive("tau2", tau2)?;
    check_positive("sigma2", sigma2)?;
    let st = stats(model, sample)?;
    let w = if tau2.is_infinite() { 0.0 } else { sigma2 / (tau2 + sigma2) };
    shrink_toward(&sample.x[0], &st.nu_hat, w)
}

/// Bayes rule when additionally `ν ~ N(0, γ²A)`:
/// `X₁ − (σ²/(τ²+σ²))(X₁ − ν̂) − (σ²/(γ²+τ²+σ²)) ν̂`.
pub fn bayes_oracle_normal(
    sample: &Sample,
    model: &Model,
    tau2: f64,
    gamma2: f64,
    sigma2: f64,
) -> Result<DVector<f64>> {
    check_positive("tau2", tau2)?;
    check_positive("gamma2", gamma2)?;
    check_positive("sigma2", sigma2)?;
    let st = stats(model, sample)?;
    let w1 = if tau2.is_infinite() { 0.0 } else { sigma2 / (tau2 + sigma2) };
    let w2 = if (gamma2 + tau2).is_infinite() {
        0.0
    } else {
        sigma2 / (gamma2 + tau2 + sigma2)
    };
    Ok(shrink_toward(&sample.x[0], &st.nu_hat, w1)? - &st.nu_hat * w2)
}
