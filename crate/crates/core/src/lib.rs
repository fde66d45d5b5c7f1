//! Minimax shrinkage estimation of a normal mean vector in the k-sample
//! problem.
//!
//! The model is `X_i ~ N_p(μ_i, σ²V_i)` for `i = 1..k` with an independent
//! `S/σ² ~ χ²_n`, and estimators of `μ₁` are judged under the loss
//! `(δ − μ₁)ᵀQ(δ − μ₁)/σ²`. The crate provides the pooled statistics,
//! preliminary-test, James–Stein, empirical Bayes, hierarchical Bayes and
//! hierarchical empirical Bayes estimators, checks of the minimaxity
//! conditions, and a deterministic parallel Monte Carlo risk engine.
//!
//! ```
//! use kshrink::{eb_estimate, ModelSpec, Sample};
//! use nalgebra::DVector;
//!
//! let model = ModelSpec::scalar(3, 10, 1.0, &[1.0, 2.0, 3.0], 1.0, &[0.0; 3])
//!     .validate()
//!     .unwrap();
//! let x = vec![
//!     DVector::from_row_slice(&[1.0, 0.5, -0.2]),
//!     DVector::from_row_slice(&[0.3, 0.1, 0.0]),
//!     DVector::from_row_slice(&[-0.4, 0.9, 1.1]),
//! ];
//! let sample = Sample::new(x, 8.0).unwrap();
//! let est = eb_estimate(&sample, &model, 0.2).unwrap();
//! assert_eq!(est.len(), 3);
//! ```

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod minimax;
pub mod model;
pub mod numerics;
pub mod risk_sim;
pub mod statistics;

pub use error::{Error, FieldError, Result};
pub use estimators::{
    bayes_oracle_normal, bayes_oracle_uniform, class1_estimate, class2_estimate, eb_estimate,
    hb_estimate, heb_estimate, js_estimate, lincomb_estimate, phi_hb, pt_estimate, pt_threshold,
    BoundShrink, Estimator, EstimatorConfig, PhiHb, ShrinkFunction, ShrinkSpec,
};
pub use minimax::{
    check_shrink_function, log_grid, solve_hb_a, solve_hb_a_from, solve_hb_a_with_c,
    theorem1_report, theorem2_report, theorem3_report, MinimaxReport, ShrinkCheck, Violation,
    ViolationKind,
};
pub use model::{loss, sample_draw, Model, ModelSpec, Sample};
pub use numerics::SpdMatrix;
pub use risk_sim::{
    chisq_identity_check, estimator_names, mean_config_name, simulate_risk, stein_identity_check,
    table1_estimators, table1_preset, table1_preset_with, table1_spec, EstimatorRisk,
    IdentityCheck, RiskReport, SimPlan, Table1Options, TABLE1_MEANS, TABLE1_SIGMA2,
};
pub use statistics::{
    lemma_in_gap, linear_bound_check, pooled_matrix, pooled_mean, stat_b, stat_f, stat_g,
    LinearBound, PooledStats,
};
