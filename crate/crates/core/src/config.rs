//! TOML run configuration.
//!
//! ```toml
//! replications = 100000
//! seed = 42
//!
//! [model]
//! p = 5
//! k = 5
//! n = 20
//! sigma2 = 2.0
//! V = ["0.1*I", "0.2*I", "0.3*I", "0.4*I", "0.5*I"]
//! Q = "10*I"
//!
//! [[means]]
//! name = "equal"
//! mu = [1, 1, 1, 1, 1]        # scalar c_i means μ_i = c_i·j_p
//!
//! [[estimators]]
//! kind = "EB"
//! a0 = 0.13636
//! ```
//!
//! A matrix is a `"c*I"` string, a bare number `c` (also `c·I`), or a list
//! of rows. A mean entry is a scalar multiple of `j_p` or a full vector.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::estimators::EstimatorConfig;
use crate::model::ModelSpec;
use crate::risk_sim::SimPlan;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixValue {
    Scalar(f64),
    Shorthand(String),
    Rows(Vec<Vec<f64>>),
}

impl MatrixValue {
    pub fn to_matrix(&self, p: usize) -> std::result::Result<DMatrix<f64>, String> {
        match self {
            MatrixValue::Scalar(c) => Ok(DMatrix::identity(p, p) * *c),
            MatrixValue::Shorthand(s) => parse_shorthand(s).map(|c| DMatrix::identity(p, p) * c),
            MatrixValue::Rows(rows) => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(format!("expected a {p}x{p} matrix"));
                }
                Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
            }
        }
    }

    /// Shorthand when `m` is a multiple of the identity, full rows otherwise.
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let c = m[(0, 0)];
        if *m == DMatrix::identity(m.nrows(), m.ncols()) * c {
            MatrixValue::Shorthand(format!("{c}*I"))
        } else {
            MatrixValue::Rows(m.row_iter().map(|r| r.iter().copied().collect()).collect())
        }
    }
}

fn parse_shorthand(s: &str) -> std::result::Result<f64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let coef = if t == "I" {
        "1"
    } else if let Some(c) = t.strip_suffix("*I") {
        c
    } else {
        &t
    };
    coef.parse::<f64>()
        .map_err(|_| format!("cannot parse matrix shorthand {s:?} (expected \"c*I\")"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeanValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl MeanValue {
    fn to_vector(&self, p: usize) -> std::result::Result<DVector<f64>, String> {
        match self {
            MeanValue::Scalar(c) => Ok(DVector::from_element(p, *c)),
            MeanValue::Vector(v) if v.len() == p => Ok(DVector::from_column_slice(v)),
            MeanValue::Vector(v) => Err(format!("expected length {p}, got {}", v.len())),
        }
    }

    fn from_vector(v: &DVector<f64>) -> Self {
        if v.iter().all(|&x| x == v[0]) {
            MeanValue::Scalar(v[0])
        } else {
            MeanValue::Vector(v.iter().copied().collect())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub p: usize,
    pub k: usize,
    pub n: u32,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(rename = "V")]
    pub v: Vec<MatrixValue>,
    #[serde(rename = "Q")]
    pub q: MatrixValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<MeanValue>>,
}

fn default_sigma2() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mu: Vec<MeanValue>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub replications: u64,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub common_random_numbers: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub means: Vec<MeanConfig>,
    pub estimators: Vec<EstimatorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidConfig(vec![FieldError::new("config", e.to_string())]))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Model spec without means (all zero), validated for shape only by the
    /// caller.
    pub fn model_spec(&self, mu: Vec<DVector<f64>>) -> Result<ModelSpec> {
        let m = &self.model;
        let mut errs = Vec::new();
        let v = m
            .v
            .iter()
            .enumerate()
            .filter_map(|(i, x)| match x.to_matrix(m.p) {
                Ok(mat) => Some(mat),
                Err(e) => {
                    errs.push(FieldError::new(format!("model.V[{}]", i + 1), e));
                    None
                }
            })
            .collect();
        let q = match m.q.to_matrix(m.p) {
            Ok(q) => q,
            Err(e) => {
                errs.push(FieldError::new("model.Q", e));
                DMatrix::zeros(0, 0)
            }
        };
        if !errs.is_empty() {
            return Err(Error::InvalidConfig(errs));
        }
        Ok(ModelSpec {
            p: m.p,
            k: m.k,
            n: m.n,
            v,
            q,
            sigma2: m.sigma2,
            mu,
        })
    }

    /// One named plan per mean configuration; `model.mu` is used when no
    /// `[[means]]` are given.
    pub fn to_plans(&self) -> Result<Vec<(String, SimPlan)>> {
        let mut errs = Vec::new();
        let p = self.model.p;
        let mut mean_sets: Vec<(String, &Vec<MeanValue>, String)> = Vec::new();
        if self.means.is_empty() {
            match &self.model.mu {
                Some(mu) => mean_sets.push(("model".into(), mu, "model.mu".into())),
                None => errs.push(FieldError::new("means", "give model.mu or at least one [[means]] entry")),
            }
        }
        for (i, mc) in self.means.iter().enumerate() {
            let name = mc.name.clone().unwrap_or_else(|| default_name(&mc.mu));
            mean_sets.push((name, &mc.mu, format!("means[{}].mu", i + 1)));
        }
        if self.replications == 0 {
            errs.push(FieldError::new("replications", "must be at least 1"));
        }
        if self.estimators.is_empty() {
            errs.push(FieldError::new("estimators", "at least one estimator is required"));
        }
        if self.workers == Some(0) {
            errs.push(FieldError::new("workers", "must be at least 1"));
        }
        let mut plans = Vec::new();
        for (name, mu, field) in mean_sets {
            let mut vecs = Vec::new();
            for (j, m) in mu.iter().enumerate() {
                match m.to_vector(p) {
                    Ok(v) => vecs.push(v),
                    Err(e) => errs.push(FieldError::new(format!("{field}[{}]", j + 1), e)),
                }
            }
            let spec = match self.model_spec(vecs) {
                Ok(s) => s,
                Err(Error::InvalidConfig(e)) => {
                    errs.extend(e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let plan = SimPlan {
                spec,
                estimators: self.estimators.clone(),
                replications: self.replications,
                seed: self.seed,
                common_random_numbers: self.common_random_numbers,
            };
            if let Err(Error::InvalidConfig(e)) = plan.validate() {
                errs.extend(
                    e.into_iter()
                        .filter(|f| f.field != "replications" && f.field != "estimators")
                        .map(|f| FieldError::new(format!("{name}: {}", f.field), f.message)),
                );
            }
            plans.push((name, plan));
        }
        if !errs.is_empty() {
            return Err(Error::InvalidConfig(errs));
        }
        Ok(plans)
    }

    /// Inverse of [`RunConfig::to_plans`] for plans that share everything
    /// except their means.
    pub fn from_plans(plans: &[(String, SimPlan)], output: Option<OutputConfig>) -> Result<Self> {
        let (_, first) = plans
            .first()
            .ok_or_else(|| Error::InvalidConfig(vec![FieldError::new("means", "no plans")]))?;
        let spec = &first.spec;
        for (name, plan) in plans {
            let mut other = plan.spec.clone();
            other.mu = spec.mu.clone();
            if other != *spec
                || plan.estimators != first.estimators
                || plan.replications != first.replications
                || plan.seed != first.seed
                || plan.common_random_numbers != first.common_random_numbers
            {
                return Err(Error::InvalidConfig(vec![FieldError::new(
                    name.clone(),
                    "plans differ in more than their means",
                )]));
            }
        }
        Ok(Self {
            replications: first.replications,
            seed: first.seed,
            common_random_numbers: first.common_random_numbers,
            workers: None,
            model: ModelConfig {
                p: spec.p,
                k: spec.k,
                n: spec.n,
                sigma2: spec.sigma2,
                v: spec.v.iter().map(MatrixValue::from_matrix).collect(),
                q: MatrixValue::from_matrix(&spec.q),
                mu: None,
            },
            means: plans
                .iter()
                .map(|(name, plan)| MeanConfig {
                    name: Some(name.clone()),
                    mu: plan.spec.mu.iter().map(MeanValue::from_vector).collect(),
                })
                .collect(),
            estimators: first.estimators.clone(),
            output,
        })
    }
}

fn default_name(mu: &[MeanValue]) -> String {
    if mu.iter().all(|m| matches!(m, MeanValue::Scalar(_))) {
        let c: Vec<f64> = mu
            .iter()
            .map(|m| match m {
                MeanValue::Scalar(c) => *c,
                MeanValue::Vector(_) => unreachable!(),
            })
            .collect();
        crate::risk_sim::mean_config_name(&c)
    } else {
        let parts: Vec<String> = mu
            .iter()
            .map(|m| match m {
                MeanValue::Scalar(c) => format!("{c}"),
                MeanValue::Vector(v) => {
                    let xs: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
                    format!("[{}]", xs.join(","))
                }
            })
            .collect();
        format!("({})", parts.join(","))
    }
}
