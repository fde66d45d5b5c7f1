//! Python bindings. Vectors are lists of floats, matrices are lists of rows,
//! and reports come back as plain dicts.

use kshrink::config::MatrixValue;
use kshrink::{
    numerics, statistics, Error, Estimator, EstimatorConfig, ModelSpec, PooledStats, SimPlan,
    SpdMatrix, Table1Options,
};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::QuadratureNonConvergence { .. } | Error::Replication { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn to_list(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

// A matrix argument: a scalar c (meaning c·I), "c*I", or a list of rows.
fn matrix_arg(obj: &Bound<'_, PyAny>, p: usize) -> PyResult<DMatrix<f64>> {
    let value: MatrixValue = from_py(obj)?;
    value.to_matrix(p).map_err(PyValueError::new_err)
}

fn spd(rows: &[Vec<f64>]) -> PyResult<SpdMatrix> {
    SpdMatrix::new(matrix(rows)?).map_err(to_py_err)
}

/// Validated k-sample normal model.
#[pyclass(name = "Model", module = "kshrink_py", frozen)]
struct PyModel {
    inner: kshrink::Model,
}

#[pymethods]
impl PyModel {
    /// `v` holds k matrices; each matrix (and `q`) may be a scalar, `"c*I"`
    /// or a list of rows. `mu` defaults to all zeros.
    #[new]
    #[pyo3(signature = (p, k, n, v, q, sigma2 = 1.0, mu = None))]
    fn new(
        p: usize,
        k: usize,
        n: u32,
        v: Vec<Bound<'_, PyAny>>,
        q: Bound<'_, PyAny>,
        sigma2: f64,
        mu: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let v = v.iter().map(|m| matrix_arg(m, p)).collect::<PyResult<Vec<_>>>()?;
        let mu = match mu {
            Some(mu) => mu.iter().map(|m| vector(m)).collect(),
            None => vec![DVector::zeros(p); k],
        };
        let spec = ModelSpec { p, k, n, v, q: matrix_arg(&q, p)?, sigma2, mu };
        Ok(Self { inner: spec.validate().map_err(to_py_err)? })
    }

    /// `V_i = v_scales[i]·I`, `Q = q_scale·I`, `μ_i = mean_scales[i]·1`.
    #[staticmethod]
    fn scalar(p: usize, n: u32, sigma2: f64, v_scales: Vec<f64>, q_scale: f64, mean_scales: Vec<f64>) -> PyResult<Self> {
        let spec = ModelSpec::scalar(p, n, sigma2, &v_scales, q_scale, &mean_scales);
        Ok(Self { inner: spec.validate().map_err(to_py_err)? })
    }

    /// The reference experiment's model for one mean pattern.
    #[staticmethod]
    #[pyo3(signature = (means, sigma2 = kshrink::TABLE1_SIGMA2))]
    fn table1(means: Vec<f64>, sigma2: f64) -> PyResult<Self> {
        let spec = kshrink::table1_spec(sigma2, &means);
        Ok(Self { inner: spec.validate().map_err(to_py_err)? })
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n()
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2()
    }

    #[getter]
    fn mu(&self) -> Vec<Vec<f64>> {
        self.inner.mu().iter().map(to_list).collect()
    }

    /// `A = (Σ V_i⁻¹)⁻¹`.
    fn a(&self) -> Vec<Vec<f64>> {
        rows(self.inner.a().matrix())
    }

    /// Risk of `X₁`, `tr(V₁Q)`.
    fn baseline_risk(&self) -> f64 {
        self.inner.baseline_risk()
    }

    fn with_means(&self, mu: Vec<Vec<f64>>) -> PyResult<Self> {
        let mu = mu.iter().map(|m| vector(m)).collect();
        Ok(Self { inner: self.inner.with_means(mu).map_err(to_py_err)? })
    }

    /// One draw of `(X₁, …, X_k, S)`.
    fn sample(&self, seed: u64) -> PySample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PySample { inner: self.inner.sample_draw(&mut rng) }
    }

    /// `(δ − μ₁)ᵀQ(δ − μ₁)/σ²`.
    fn loss(&self, delta: Vec<f64>) -> PyResult<f64> {
        self.inner.loss(&vector(&delta)).map_err(to_py_err)
    }

    fn theorem1<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &kshrink::theorem1_report(&self.inner).map_err(to_py_err)?)
    }

    fn theorem2<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &kshrink::theorem2_report(&self.inner).map_err(to_py_err)?)
    }

    fn theorem3<'py>(&self, py: Python<'py>, d: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &kshrink::theorem3_report(&self.inner, &d).map_err(to_py_err)?)
    }

    /// HB constant `a` that puts the supremum of `φ^HB` on the tuned bound.
    #[pyo3(signature = (c = 1.0))]
    fn solve_hb_a(&self, c: f64) -> PyResult<f64> {
        kshrink::solve_hb_a_with_c(&self.inner, c).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(p={}, k={}, n={}, sigma2={})",
            self.inner.p(),
            self.inner.k(),
            self.inner.n(),
            self.inner.sigma2()
        )
    }
}

#[pyclass(name = "Sample", module = "kshrink_py", frozen)]
struct PySample {
    inner: kshrink::Sample,
}

#[pymethods]
impl PySample {
    #[new]
    fn new(x: Vec<Vec<f64>>, s: f64) -> PyResult<Self> {
        let x = x.iter().map(|r| vector(r)).collect();
        Ok(Self { inner: kshrink::Sample::new(x, s).map_err(to_py_err)? })
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        self.inner.x.iter().map(to_list).collect()
    }

    #[getter]
    fn s(&self) -> f64 {
        self.inner.s
    }

    fn __repr__(&self) -> String {
        format!("Sample(k={}, p={}, s={})", self.inner.k(), self.inner.p(), self.inner.s)
    }
}

/// An estimator bound to a model. `config` is a dict such as
/// `{"kind": "HB"}` or `{"kind": "EB", "a0": 0.1}`; unset constants take
/// their tuned defaults.
#[pyclass(name = "Estimator", module = "kshrink_py", frozen)]
struct PyEstimator {
    inner: Estimator,
}

#[pymethods]
impl PyEstimator {
    #[new]
    fn new(model: PyRef<'_, PyModel>, config: Bound<'_, PyAny>) -> PyResult<Self> {
        let config: EstimatorConfig = from_py(&config)?;
        Ok(Self { inner: Estimator::new(&config, &model.inner).map_err(to_py_err)? })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    /// The configuration with defaults filled in.
    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.config())
    }

    fn estimate(&self, model: PyRef<'_, PyModel>, sample: PyRef<'_, PySample>) -> PyResult<Vec<f64>> {
        let est = self.inner.estimate(&model.inner, &sample.inner).map_err(to_py_err)?;
        Ok(to_list(&est))
    }

    fn __repr__(&self) -> String {
        format!("Estimator({})", self.inner.kind())
    }
}

/// `{"nu_hat", "dispersion", "F", "G", "B"}` for a sample.
#[pyfunction]
fn pooled_stats<'py>(py: Python<'py>, model: PyRef<'_, PyModel>, sample: PyRef<'_, PySample>) -> PyResult<Bound<'py, PyAny>> {
    let st = PooledStats::compute(&model.inner, &sample.inner).map_err(to_py_err)?;
    let out = serde_json::json!({
        "nu_hat": to_list(&st.nu_hat),
        "dispersion": st.dispersion,
        "F": st.f,
        "G": st.g,
        "B": st.b,
    });
    to_py(py, &out)
}

#[pyfunction]
#[pyo3(signature = (f, s, p, k, n, a, c = 1.0, l = 0.0))]
#[allow(clippy::too_many_arguments)]
fn phi_hb(f: f64, s: f64, p: usize, k: usize, n: u32, a: f64, c: f64, l: f64) -> PyResult<f64> {
    kshrink::phi_hb(f, s, p, k, n, a, c, l).map_err(to_py_err)
}

#[pyfunction]
fn pt_threshold(p: usize, k: usize, n: u32, alpha: f64) -> PyResult<f64> {
    kshrink::pt_threshold(p, k, n, alpha).map_err(to_py_err)
}

#[pyfunction]
fn lemma_in_gap(x: Vec<Vec<f64>>, v: Vec<Vec<Vec<f64>>>) -> PyResult<f64> {
    let x: Vec<_> = x.iter().map(|r| vector(r)).collect();
    let v = v.iter().map(|m| spd(m)).collect::<PyResult<Vec<_>>>()?;
    statistics::lemma_in_gap(&x, &v).map_err(to_py_err)
}

/// Returns `(B(x), bound)`.
#[pyfunction]
fn linear_bound_check(x: Vec<Vec<f64>>, v: Vec<Vec<Vec<f64>>>, q: Vec<Vec<f64>>, d: Vec<f64>) -> PyResult<(f64, f64)> {
    let x: Vec<_> = x.iter().map(|r| vector(r)).collect();
    let v = v.iter().map(|m| spd(m)).collect::<PyResult<Vec<_>>>()?;
    let lb = statistics::linear_bound_check(&x, &v, &spd(&q)?, &d).map_err(to_py_err)?;
    Ok((lb.b_value, lb.bound))
}

/// Upper-α point of `F(d1, d2)`.
#[pyfunction]
fn f_quantile(d1: u32, d2: u32, alpha: f64) -> PyResult<f64> {
    numerics::f_quantile(d1, d2, alpha).map_err(to_py_err)
}

#[pyfunction]
fn reg_inc_beta(a: f64, b: f64, x: f64) -> PyResult<f64> {
    numerics::reg_inc_beta(a, b, x).map_err(to_py_err)
}

/// Monte Carlo risk and PRIAL of `estimators` (a list of config dicts).
#[pyfunction]
#[pyo3(signature = (model, estimators, replications, seed = 42, common_random_numbers = true))]
fn simulate<'py>(
    py: Python<'py>,
    model: PyRef<'_, PyModel>,
    estimators: Vec<Bound<'py, PyAny>>,
    replications: u64,
    seed: u64,
    common_random_numbers: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let estimators = estimators.iter().map(from_py).collect::<PyResult<Vec<EstimatorConfig>>>()?;
    let plan = SimPlan {
        spec: model.inner.spec().clone(),
        estimators,
        replications,
        seed,
        common_random_numbers,
    };
    let report = py.detach(|| kshrink::simulate_risk(&plan)).map_err(to_py_err)?;
    to_py(py, &report)
}

/// The reference experiment: a list of `{"mean_config", "report"}` dicts.
#[pyfunction]
#[pyo3(signature = (replications = 100_000, seed = 42, sigma2 = kshrink::TABLE1_SIGMA2, alpha = 0.05))]
fn table1<'py>(py: Python<'py>, replications: u64, seed: u64, sigma2: f64, alpha: f64) -> PyResult<Bound<'py, PyAny>> {
    let opts = Table1Options { sigma2, alpha, replications, seed };
    let rows = py
        .detach(|| {
            kshrink::table1_preset_with(&opts)
                .into_iter()
                .map(|(name, plan)| kshrink::simulate_risk(&plan).map(|r| (name, r)))
                .collect::<kshrink::Result<Vec<_>>>()
        })
        .map_err(to_py_err)?;
    let out: Vec<_> = rows
        .into_iter()
        .map(|(name, report)| serde_json::json!({ "mean_config": name, "report": report }))
        .collect();
    to_py(py, &out)
}

#[pymodule]
pub fn kshrink_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PySample>()?;
    m.add_class::<PyEstimator>()?;
    m.add_function(wrap_pyfunction!(pooled_stats, m)?)?;
    m.add_function(wrap_pyfunction!(phi_hb, m)?)?;
    m.add_function(wrap_pyfunction!(pt_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_in_gap, m)?)?;
    m.add_function(wrap_pyfunction!(linear_bound_check, m)?)?;
    m.add_function(wrap_pyfunction!(f_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(reg_inc_beta, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(table1, m)?)?;
    Ok(())
}
