//! Monte Carlo risk and PRIAL estimation, the reference experiment preset,
//! and Monte Carlo checks of the Stein and chi-square identities.
//!
//! Replication `r` draws from its own ChaCha stream derived from
//! `(seed, r)`, and replications are reduced in fixed-size chunks whose
//! partial sums are combined in index order. Results are therefore
//! bit-identical for any number of worker threads.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::estimators::{Estimator, EstimatorConfig, DEFAULT_ALPHA};
use crate::model::{loss, Model, ModelSpec};
use crate::numerics::SpdMatrix;
use crate::statistics::PooledStats;

const CHUNK: u64 = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct SimPlan {
    pub spec: ModelSpec,
    pub estimators: Vec<EstimatorConfig>,
    pub replications: u64,
    pub seed: u64,
    pub common_random_numbers: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRisk {
    pub estimator: String,
    pub risk_estimate: f64,
    pub std_error: f64,
    pub prial: f64,
    pub prial_std_error: f64,
    /// Monte Carlo risk of the unshrunk estimator on the draws paired with
    /// this estimator.
    pub baseline_risk: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub estimators: Vec<EstimatorRisk>,
    /// Monte Carlo risk of `X₁` and its standard error.
    pub baseline_risk: f64,
    pub baseline_std_error: f64,
    /// Exact risk of `X₁`, `tr(V₁Q)`.
    pub trace_v1q: f64,
    pub replications: u64,
    pub seed: u64,
}

/// Compensated (Neumaier) running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

// Per-estimator sums of the loss L, the baseline loss L0, and D = L0 − L.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    l: Neumaier,
    ll: Neumaier,
    l0: Neumaier,
    l0l0: Neumaier,
    d: Neumaier,
    dd: Neumaier,
    dl0: Neumaier,
}

impl Moments {
    fn push(&mut self, l: f64, l0: f64) {
        let d = l0 - l;
        self.l.add(l);
        self.ll.add(l * l);
        self.l0.add(l0);
        self.l0l0.add(l0 * l0);
        self.d.add(d);
        self.dd.add(d * d);
        self.dl0.add(d * l0);
    }

    fn merge(&mut self, o: &Moments) {
        self.l.add(o.l.value());
        self.ll.add(o.ll.value());
        self.l0.add(o.l0.value());
        self.l0l0.add(o.l0l0.value());
        self.d.add(o.d.value());
        self.dd.add(o.dd.value());
        self.dl0.add(o.dl0.value());
    }
}

fn sample_var(sum: f64, sum_sq: f64, r: f64) -> f64 {
    if r < 2.0 {
        return 0.0;
    }
    ((sum_sq - sum * sum / r) / (r - 1.0)).max(0.0)
}

fn sample_cov(sx: f64, sy: f64, sxy: f64, r: f64) -> f64 {
    if r < 2.0 {
        return 0.0;
    }
    (sxy - sx * sy / r) / (r - 1.0)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Unique display names: the estimator kind, suffixed `#2`, `#3`, … when a
/// kind repeats.
pub fn estimator_names(configs: &[EstimatorConfig]) -> Vec<String> {
    let mut out = Vec::with_capacity(configs.len());
    for (i, c) in configs.iter().enumerate() {
        let seen = configs[..i].iter().filter(|o| o.kind() == c.kind()).count();
        out.push(if seen == 0 {
            c.kind().to_string()
        } else {
            format!("{}#{}", c.kind(), seen + 1)
        });
    }
    out
}

impl SimPlan {
    pub fn validate(&self) -> Result<(Model, Vec<Estimator>)> {
        let mut errs = Vec::new();
        if self.replications == 0 {
            errs.push(FieldError::new("replications", "must be at least 1"));
        }
        if self.estimators.is_empty() {
            errs.push(FieldError::new("estimators", "at least one estimator is required"));
        }
        let model = match self.spec.validate() {
            Ok(m) => Some(m),
            Err(Error::InvalidSpec(e)) => {
                errs.extend(e);
                None
            }
            Err(e) => return Err(e),
        };
        let mut ests = Vec::new();
        if let Some(model) = &model {
            for (i, c) in self.estimators.iter().enumerate() {
                match Estimator::new(c, model) {
                    Ok(e) => ests.push(e),
                    Err(Error::InvalidConfig(e)) => errs.extend(e.into_iter().map(|f| {
                        FieldError::new(format!("estimators[{}].{}", i + 1, f.field), f.message)
                    })),
                    Err(e) => errs.push(FieldError::new(format!("estimators[{}]", i + 1), e.to_string())),
                }
            }
        }
        if !errs.is_empty() {
            return Err(Error::InvalidConfig(errs));
        }
        Ok((model.expect("validated"), ests))
    }
}

struct Runner<'a> {
    model: &'a Model,
    estimators: &'a [Estimator],
    names: &'a [String],
    targets: Vec<DVector<f64>>,
    seed: u64,
    crn: bool,
}

impl Runner<'_> {
    fn fail(&self, j: usize, r: u64, e: Error) -> Error {
        Error::Replication {
            estimator: self.names[j].clone(),
            replication: r,
            seed: self.seed,
            source: Box::new(e),
        }
    }

    fn losses(&self, j: usize, r: u64, draw: &crate::model::Sample, stats: &PooledStats) -> Result<(f64, f64)> {
        let est = &self.estimators[j];
        let sigma2 = self.model.sigma2();
        let q = self.model.q();
        let delta = est
            .estimate_with(self.model, draw, stats)
            .map_err(|e| self.fail(j, r, e))?;
        let l = loss(&delta, &self.targets[j], sigma2, q).map_err(|e| self.fail(j, r, e))?;
        let l0 = self.baseline_loss(j, r, draw)?;
        if !l.is_finite() {
            return Err(self.fail(j, r, Error::Domain(format!("loss is not finite ({l})"))));
        }
        Ok((l, l0))
    }

    fn baseline_loss(&self, j: usize, r: u64, draw: &crate::model::Sample) -> Result<f64> {
        let est = &self.estimators[j];
        loss(&est.baseline(draw), &self.targets[j], self.model.sigma2(), self.model.q())
            .map_err(|e| self.fail(j, r, e))
    }

    fn stats(&self, r: u64, draw: &crate::model::Sample) -> Result<PooledStats> {
        PooledStats::compute(self.model, draw).map_err(|e| Error::Replication {
            estimator: "pooled statistics".into(),
            replication: r,
            seed: self.seed,
            source: Box::new(e),
        })
    }

    fn chunk(&self, lo: u64, hi: u64) -> Result<(Vec<Moments>, Moments)> {
        let e = self.estimators.len();
        let mut m = vec![Moments::default(); e];
        let mut base = Moments::default();
        for r in lo..hi {
            if self.crn {
                let draw = self.model.sample_draw(&mut stream_rng(self.seed, r));
                let l0 = self.model.loss(&draw.x[0])?;
                base.push(l0, l0);
                let stats = self.stats(r, &draw)?;
                for (j, mj) in m.iter_mut().enumerate() {
                    let (l, l0) = self.losses(j, r, &draw, &stats)?;
                    mj.push(l, l0);
                }
            } else {
                let width = e as u64 + 1;
                let draw = self.model.sample_draw(&mut stream_rng(self.seed, r * width + e as u64));
                let l0 = self.model.loss(&draw.x[0])?;
                base.push(l0, l0);
                for (j, mj) in m.iter_mut().enumerate() {
                    // unpaired: the baseline comes from the shared draw
                    let l0 = self.baseline_loss(j, r, &draw)?;
                    let own = self.model.sample_draw(&mut stream_rng(self.seed, r * width + j as u64));
                    let stats = self.stats(r, &own)?;
                    let (l, _) = self.losses(j, r, &own, &stats)?;
                    mj.push(l, l0);
                }
            }
        }
        Ok((m, base))
    }
}

/// Estimates the risk of every estimator in the plan, and its PRIAL
/// `100·(R(X₁) − R(δ))/R(X₁)` relative to the unshrunk estimator.
pub fn simulate_risk(plan: &SimPlan) -> Result<RiskReport> {
    let (model, estimators) = plan.validate()?;
    let names = estimator_names(&plan.estimators);
    let runner = Runner {
        model: &model,
        targets: estimators.iter().map(|e| e.target(model.mu())).collect(),
        estimators: &estimators,
        names: &names,
        seed: plan.seed,
        crn: plan.common_random_numbers,
    };
    let n_chunks = plan.replications.div_ceil(CHUNK);
    let chunks: Vec<Result<(Vec<Moments>, Moments)>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| runner.chunk(c * CHUNK, ((c + 1) * CHUNK).min(plan.replications)))
        .collect();
    let mut totals = vec![Moments::default(); estimators.len()];
    let mut base = Moments::default();
    for chunk in chunks {
        let (m, b) = chunk?;
        for (t, mj) in totals.iter_mut().zip(&m) {
            t.merge(mj);
        }
        base.merge(&b);
    }

    let r = plan.replications as f64;
    let entries = totals
        .iter()
        .zip(names)
        .map(|(t, name)| {
            let l_bar = t.l.value() / r;
            let l0_bar = t.l0.value() / r;
            let d_bar = t.d.value() / r;
            let var_l = sample_var(t.l.value(), t.ll.value(), r);
            let ratio = d_bar / l0_bar;
            let prial_var = if plan.common_random_numbers {
                let var_d = sample_var(t.d.value(), t.dd.value(), r);
                let var_0 = sample_var(t.l0.value(), t.l0l0.value(), r);
                let cov = sample_cov(t.d.value(), t.l0.value(), t.dl0.value(), r);
                (var_d - 2.0 * ratio * cov + ratio * ratio * var_0).max(0.0) / (r * l0_bar * l0_bar)
            } else {
                let var_0 = sample_var(t.l0.value(), t.l0l0.value(), r);
                let q = l_bar / l0_bar;
                (var_l + q * q * var_0) / (r * l0_bar * l0_bar)
            };
            EstimatorRisk {
                estimator: name,
                risk_estimate: l_bar,
                std_error: (var_l / r).sqrt(),
                prial: 100.0 * ratio,
                prial_std_error: 100.0 * prial_var.sqrt(),
                baseline_risk: l0_bar,
            }
        })
        .collect();
    Ok(RiskReport {
        estimators: entries,
        baseline_risk: base.l0.value() / r,
        baseline_std_error: (sample_var(base.l0.value(), base.l0l0.value(), r) / r).sqrt(),
        trace_v1q: model.baseline_risk(),
        replications: plan.replications,
        seed: plan.seed,
    })
}

/// Scale used by [`table1_preset`]; see [`Table1Options::sigma2`].
pub const TABLE1_SIGMA2: f64 = 4.0;

/// Mean patterns of the reference experiment: `μ_i = c_i · j₅`.
pub const TABLE1_MEANS: [[f64; 5]; 11] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 1.0, 1.0, 1.0],
    [2.0, 2.0, 2.0, 2.0, 2.0],
    [3.0, 3.0, 3.0, 3.0, 3.0],
    [-0.4, -0.2, 0.0, 0.2, 0.4],
    [2.0, -0.5, -0.5, -0.5, -0.5],
    [4.0, -1.0, -1.0, -1.0, -1.0],
    [1.2, 1.4, 1.6, 1.8, 2.0],
    [0.2, 2.0, 2.0, 2.0, 2.0],
    [0.4, 4.0, 4.0, 4.0, 4.0],
    [2.0, 0.0, 0.0, 0.0, 0.0],
];

#[derive(Clone, Debug, PartialEq)]
pub struct Table1Options {
    /// `σ²` of the simulated model. The default `4.0` (unit `σ = 2`)
    /// matches the reference PRIAL values; `2.0` does not.
    pub sigma2: f64,
    pub alpha: f64,
    pub replications: u64,
    pub seed: u64,
}

impl Default for Table1Options {
    fn default() -> Self {
        Self {
            sigma2: TABLE1_SIGMA2,
            alpha: DEFAULT_ALPHA,
            replications: 100_000,
            seed: 42,
        }
    }
}

/// Display name of a mean pattern, e.g. `(2,-0.5,-0.5,-0.5,-0.5)`.
pub fn mean_config_name(c: &[f64]) -> String {
    let parts: Vec<String> = c.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(","))
}

/// The five estimators of the reference experiment with their tuned
/// constants.
pub fn table1_estimators(alpha: f64) -> Vec<EstimatorConfig> {
    vec![
        EstimatorConfig::pt(alpha),
        EstimatorConfig::Js,
        EstimatorConfig::eb(3.0 / 22.0),
        EstimatorConfig::hb(-7.72, 1.0, 0.0),
        EstimatorConfig::heb(3.0 / 44.0, 3.0 / 44.0),
    ]
}

/// `p = k = 5`, `n = 20`, `V_i = 0.1·i·I₅`, `Q = V₁⁻¹`, with the given
/// mean pattern.
pub fn table1_spec(sigma2: f64, means: &[f64]) -> ModelSpec {
    ModelSpec::scalar(5, 20, sigma2, &[0.1, 0.2, 0.3, 0.4, 0.5], 10.0, means)
}

pub fn table1_preset() -> Vec<(String, SimPlan)> {
    table1_preset_with(&Table1Options::default())
}

/// One plan per mean pattern. All plans share the seed, so every
/// configuration sees the same standardized draws.
pub fn table1_preset_with(opts: &Table1Options) -> Vec<(String, SimPlan)> {
    TABLE1_MEANS
        .iter()
        .map(|c| {
            (
                mean_config_name(c),
                SimPlan {
                    spec: table1_spec(opts.sigma2, c),
                    estimators: table1_estimators(opts.alpha),
                    replications: opts.replications,
                    seed: opts.seed,
                    common_random_numbers: true,
                },
            )
        })
        .collect()
}

/// Monte Carlo estimates of both sides of an expectation identity and the
/// standard error of their paired difference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub std_error: f64,
}

impl IdentityCheck {
    /// `|lhs − rhs| ≤ z · std_error`, exact agreement counting as a pass.
    pub fn agrees_within(&self, z: f64) -> bool {
        let diff = (self.lhs - self.rhs).abs();
        diff == 0.0 || diff <= z * self.std_error
    }
}

fn paired_check(
    replications: u64,
    seed: u64,
    draw: impl Fn(&mut ChaCha8Rng) -> (f64, f64) + Sync,
) -> Result<IdentityCheck> {
    if replications < 2 {
        return Err(Error::Domain("need at least 2 replications".into()));
    }
    let n_chunks = replications.div_ceil(CHUNK);
    let parts: Vec<[Neumaier; 3]> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = [Neumaier::default(); 3];
            for r in c * CHUNK..((c + 1) * CHUNK).min(replications) {
                let (a, b) = draw(&mut stream_rng(seed, r));
                acc[0].add(a);
                acc[1].add(b);
                acc[2].add((a - b) * (a - b));
            }
            acc
        })
        .collect();
    let mut tot = [Neumaier::default(); 3];
    for p in &parts {
        for i in 0..3 {
            tot[i].add(p[i].value());
        }
    }
    let r = replications as f64;
    let diff_sum = tot[0].value() - tot[1].value();
    let var = sample_var(diff_sum, tot[2].value(), r);
    let out = IdentityCheck {
        lhs: tot[0].value() / r,
        rhs: tot[1].value() / r,
        std_error: (var / r).sqrt(),
    };
    if !(out.lhs.is_finite() && out.rhs.is_finite()) {
        return Err(Error::Domain("identity check produced non-finite averages".into()));
    }
    Ok(out)
}

/// Stein identity `E[(Y−μ)ᵀh(Y)] = E[tr{Σ ∇h(Y)ᵀ}]` for `Y ~ N_p(μ, Σ)`.
/// `sigma_jacobian_trace(y)` must return `tr{Σ ∇h(y)ᵀ}`.
pub fn stein_identity_check<H, T>(
    h: H,
    sigma_jacobian_trace: T,
    mu: &DVector<f64>,
    sigma: &SpdMatrix,
    replications: u64,
    seed: u64,
) -> Result<IdentityCheck>
where
    H: Fn(&DVector<f64>) -> DVector<f64> + Sync,
    T: Fn(&DVector<f64>) -> f64 + Sync,
{
    if mu.len() != sigma.dim() {
        return Err(Error::DimensionMismatch("mu does not match Sigma".into()));
    }
    let l = sigma.cholesky_factor();
    let p = mu.len();
    paired_check(replications, seed, |rng| {
        let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let dev = &l * z;
        let y = mu + &dev;
        (dev.dot(&h(&y)), sigma_jacobian_trace(&y))
    })
}

/// Chi-square identity `E[S g(S)] = σ² E[n g(S) + 2 S g′(S)]` for
/// `S/σ² ~ χ²_n`.
pub fn chisq_identity_check<G, D>(
    g: G,
    g_prime: D,
    n: u32,
    sigma2: f64,
    replications: u64,
    seed: u64,
) -> Result<IdentityCheck>
where
    G: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("sigma2 must be positive (got {sigma2})")));
    }
    let chi = ChiSquared::new(n as f64).map_err(|e| Error::Domain(e.to_string()))?;
    let nf = n as f64;
    paired_check(replications, seed, |rng| {
        let s = sigma2 * chi.sample(rng);
        (s * g(s), sigma2 * (nf * g(s) + 2.0 * s * g_prime(s)))
    })
}
