//! Minimaxity conditions and bounds on the shrink functions, and the
//! equation that tunes the hierarchical Bayes constant `a`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ShrinkFunction;
use crate::model::Model;
use crate::numerics::{chmax_product, is_degenerate_chmax, symmetrize, trace_product, SpdMatrix};
use crate::statistics::contrast_matrix;

/// `tr(MQ)`, `Ch_max(MQ)` and the derived bounds on `φ` (and `ψ`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxReport {
    pub trace: f64,
    pub chmax: f64,
    /// `NaN` (serialized as `null`) when `chmax` is zero.
    pub ratio: f64,
    pub condition_holds: bool,
    pub phi_upper_theorem1: f64,
    pub phi_upper_theorem2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aq_trace: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aq_chmax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aq_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aq_condition_holds: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_upper_theorem2: Option<f64>,
}

// Ratios within this relative distance of 2 count as the boundary, where the
// condition fails.
const RATIO_BOUNDARY_RTOL: f64 = 1e-12;

struct RatioParts {
    trace: f64,
    chmax: f64,
    ratio: f64,
    holds: bool,
}

fn ratio_parts(m: &DMatrix<f64>, q: &SpdMatrix) -> Result<RatioParts> {
    let m = symmetrize(m);
    let chmax = chmax_product(&m, q)?;
    let trace = trace_product(&m, q.matrix());
    if is_degenerate_chmax(chmax, &m, q) {
        return Ok(RatioParts {
            trace,
            chmax: 0.0,
            ratio: f64::NAN,
            holds: false,
        });
    }
    let ratio = trace / chmax;
    Ok(RatioParts {
        trace,
        chmax,
        ratio,
        holds: ratio > 2.0 * (1.0 + RATIO_BOUNDARY_RTOL),
    })
}

fn report(m: &DMatrix<f64>, q: &SpdMatrix, n: u32) -> Result<MinimaxReport> {
    let r = ratio_parts(m, q)?;
    let t2 = (r.ratio - 2.0) / (n as f64 + 2.0);
    Ok(MinimaxReport {
        trace: r.trace,
        chmax: r.chmax,
        ratio: r.ratio,
        condition_holds: r.holds,
        phi_upper_theorem1: 2.0 * t2,
        phi_upper_theorem2: t2,
        aq_trace: None,
        aq_chmax: None,
        aq_ratio: None,
        aq_condition_holds: None,
        psi_upper_theorem2: None,
    })
}

/// Condition and bounds for `M = V₁ − A`.
pub fn theorem1_report(model: &Model) -> Result<MinimaxReport> {
    report(&model.v1_minus_a(), model.q(), model.n())
}

/// [`theorem1_report`] plus the `AQ` ratio and the bound on `ψ`.
pub fn theorem2_report(model: &Model) -> Result<MinimaxReport> {
    let mut out = theorem1_report(model)?;
    let r = ratio_parts(model.a().matrix(), model.q())?;
    out.aq_trace = Some(r.trace);
    out.aq_chmax = Some(r.chmax);
    out.aq_ratio = Some(r.ratio);
    out.aq_condition_holds = Some(r.holds);
    out.psi_upper_theorem2 = Some((r.ratio - 2.0) / (model.n() as f64 + 2.0));
    Ok(out)
}

/// Condition and bounds for `M_d = Σ d_i² V_i − (Σ d_i)² A`, which govern
/// the linear-combination estimator with weights `d`.
pub fn theorem3_report(model: &Model, d: &[f64]) -> Result<MinimaxReport> {
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("weights must be finite".into()));
    }
    let m = contrast_matrix(model.v(), model.a(), d)?;
    report(&m, model.q(), model.n())
}

/// HB constant `a` with `c = 1`; see [`solve_hb_a_with_c`].
pub fn solve_hb_a(model: &Model) -> Result<f64> {
    solve_hb_a_with_c(model, 1.0)
}

/// Solves `(p(k−1)+2a)/(n−2(a+c)) = R/(n+2)` for `a`, with
/// `R = tr{(V₁−A)Q}/Ch_max{(V₁−A)Q} − 2`, so that the supremum of `φ^HB`
/// equals the Theorem 2 bound.
pub fn solve_hb_a_with_c(model: &Model, c: f64) -> Result<f64> {
    let r = theorem1_report(model)?;
    if !r.condition_holds {
        return Err(Error::Domain(format!(
            "minimax condition tr/Ch_max > 2 fails (ratio = {})",
            r.ratio
        )));
    }
    let q2 = (model.p() * (model.k() - 1)) as f64;
    solve_hb_a_from(r.ratio - 2.0, model.n() as f64, q2, c)
}

/// Closed-form root for given `R`, `n`, `p(k−1)` and `c`.
pub fn solve_hb_a_from(r: f64, n: f64, q2: f64, c: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("R must be positive and finite (got {r})")));
    }
    let a = (r * (n - 2.0 * c) - q2 * (n + 2.0)) / (2.0 * (n + 2.0) + 2.0 * r);
    if !(a > -q2 / 2.0) {
        return Err(Error::Domain(format!(
            "solution a = {a} violates a > -p(k-1)/2 = {}",
            -q2 / 2.0
        )));
    }
    if !(a + c < n / 2.0) {
        return Err(Error::Domain(format!(
            "solution a = {a} violates a + c < n/2 = {}",
            n / 2.0
        )));
    }
    Ok(a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NotPositive,
    AboveBound,
    DecreasingInF,
    IncreasingInS,
    EvaluationFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub f: f64,
    pub s: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkCheck {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

// Relative slack for the monotonicity comparisons.
const MONOTONE_RTOL: f64 = 1e-10;

/// Checks `0 < φ ≤ bound`, nondecreasing in `F` and nonincreasing in `S`
/// on the grid.
pub fn check_shrink_function(
    phi: &dyn ShrinkFunction,
    bound: f64,
    f_grid: &[f64],
    s_grid: &[f64],
) -> Result<ShrinkCheck> {
    for (name, grid) in [("F", f_grid), ("S", s_grid)] {
        if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain(format!("{name} grid must be nonempty and strictly increasing")));
        }
    }
    let mut values = vec![vec![f64::NAN; s_grid.len()]; f_grid.len()];
    let mut violations = Vec::new();
    for (i, &f) in f_grid.iter().enumerate() {
        for (j, &s) in s_grid.iter().enumerate() {
            match phi.value(f, s) {
                Ok(v) => {
                    values[i][j] = v;
                    if !(v > 0.0) {
                        violations.push(Violation { kind: ViolationKind::NotPositive, f, s, value: v });
                    } else if v > bound {
                        violations.push(Violation { kind: ViolationKind::AboveBound, f, s, value: v });
                    }
                }
                Err(_) => violations.push(Violation {
                    kind: ViolationKind::EvaluationFailed,
                    f,
                    s,
                    value: f64::NAN,
                }),
            }
        }
    }
    for i in 0..f_grid.len() {
        for j in 0..s_grid.len() {
            let v = values[i][j];
            if i > 0 {
                let prev = values[i - 1][j];
                if v < prev - MONOTONE_RTOL * prev.abs() {
                    violations.push(Violation {
                        kind: ViolationKind::DecreasingInF,
                        f: f_grid[i],
                        s: s_grid[j],
                        value: v,
                    });
                }
            }
            if j > 0 {
                let prev = values[i][j - 1];
                if v > prev + MONOTONE_RTOL * prev.abs() {
                    violations.push(Violation {
                        kind: ViolationKind::IncreasingInS,
                        f: f_grid[i],
                        s: s_grid[j],
                        value: v,
                    });
                }
            }
        }
    }
    Ok(ShrinkCheck {
        passed: violations.is_empty(),
        violations,
    })
}

/// `n` points spaced evenly in `ln x` over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
