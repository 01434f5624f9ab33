//! Python bindings. Reports cross the boundary as JSON and come back as
//! plain dicts and lists.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde_json::Value;

use sigchange::curves::{
    default_basis, integrate_null_fan, integrate_transport, sample_symbolic_curve, Orientation, SymbolicCurve,
};
use sigchange::dsl::Expression as CoreExpression;
use sigchange::gap::classify;
use sigchange::geometry::{christoffel_at, locate_hypersurface, metric_at, radical_check, MetricSpec};
use sigchange::loops::{
    build_global_loop, build_local_loop, validate_certificate, FoliationAssertion, LoopCertificate, LoopParams,
};
use sigchange::suites::{run_all, SuiteOptions};
use sigchange::ErrorKind;

create_exception!(sigchange, SigchangeError, PyException);
create_exception!(sigchange, InputError, SigchangeError);
create_exception!(sigchange, NumericalError, SigchangeError);

fn err<E: Into<sigchange::Error>>(e: E) -> PyErr {
    let e: sigchange::Error = e.into();
    match e.kind() {
        ErrorKind::Input => InputError::new_err(e.to_string()),
        ErrorKind::Numerical => NumericalError::new_err(e.to_string()),
    }
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| SigchangeError::new_err(e.to_string()))?;
    from_json(py, &v)
}

fn from_json(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (v.to_string(),))?.unbind())
}

/// A parsed metric expression.
#[pyclass(name = "Expression", module = "sigchange", frozen)]
struct Expression(CoreExpression);

#[pymethods]
impl Expression {
    #[new]
    fn new(source: &str, symbols: Vec<String>) -> PyResult<Self> {
        CoreExpression::parse(source, &symbols).map(Expression).map_err(err)
    }

    fn evaluate(&self, point: Vec<f64>) -> PyResult<f64> {
        self.0.evaluate(&point).map_err(err)
    }

    /// `(value, [∂f/∂x_i])`.
    fn gradient(&self, point: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
        let d = self.0.evaluate_with_gradient(&point).map_err(err)?;
        Ok((d.value, d.partials.to_vec()))
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expression({:?})", self.0.to_string())
    }
}

/// A metric on a coordinate chart.
#[pyclass(name = "Metric", module = "sigchange", frozen)]
struct Metric(MetricSpec);

#[pymethods]
impl Metric {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        MetricSpec::from_json(text).map(Metric).map_err(err)
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        sigchange::presets::preset(name)
            .map(|p| Metric(p.spec))
            .ok_or_else(|| InputError::new_err(format!("unknown preset `{name}`")))
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    #[getter]
    fn coordinates(&self) -> Vec<String> {
        self.0.coordinates().to_vec()
    }

    /// Components, determinant, eigenvalues and signature tag at a point.
    fn metric_at(&self, py: Python<'_>, point: Vec<f64>) -> PyResult<Py<PyAny>> {
        let m = metric_at(&self.0, &point).map_err(err)?;
        let n = m.matrix.nrows();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m.matrix[(i, j)]).collect()).collect();
        from_json(
            py,
            &serde_json::json!({
                "matrix": rows,
                "det": m.det,
                "eigenvalues": m.eigenvalues,
                "signature": m.signature,
            }),
        )
    }

    /// `Γ[l][a][b]`.
    fn christoffel_at(&self, point: Vec<f64>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let c = christoffel_at(&self.0, &point).map_err(err)?;
        let n = c.dimension();
        Ok((0..n).map(|l| (0..n).map(|a| (0..n).map(|b| c.get(l, a, b)).collect()).collect()).collect())
    }

    fn locate_hypersurface(&self, a: Vec<f64>, b: Vec<f64>) -> PyResult<Vec<f64>> {
        locate_hypersurface(&self.0, &a, &b).map(|c| c.point).map_err(err)
    }

    fn radical_check(&self, py: Python<'_>, q: Vec<f64>) -> PyResult<Py<PyAny>> {
        let r = radical_check(&self.0, &q).map_err(err)?;
        to_py(py, &r)
    }
}

/// GAP classification of a symbolic curve, transported from its first
/// sample in the orthonormalized coordinate frame.
#[pyfunction]
#[pyo3(signature = (metric, parameter, interval, components, samples = 100, threshold = 1e-6))]
fn classify_curve(
    py: Python<'_>,
    metric: &Metric,
    parameter: &str,
    interval: (f64, f64),
    components: Vec<String>,
    samples: usize,
    threshold: f64,
) -> PyResult<Py<PyAny>> {
    let spec = &metric.0;
    let sources: Vec<&str> = components.iter().map(String::as_str).collect();
    let curve = SymbolicCurve::new(parameter, interval, &sources).map_err(err)?;
    let s = sample_symbolic_curve(spec, &curve, samples).map_err(err)?;
    let basis = default_basis(spec, &s.points[0]).map_err(err)?;
    let frame = integrate_transport(spec, &s, &basis, s.params[0]).map_err(err)?;
    let report = classify(spec, &s, &frame, threshold).map_err(err)?;
    to_py(py, &report)
}

/// Points where the null rays from `point` meet the locus.
#[pyfunction]
#[pyo3(signature = (metric, point, directions = 2, future = false))]
fn null_fan(metric: &Metric, point: Vec<f64>, directions: usize, future: bool) -> PyResult<Vec<Option<Vec<f64>>>> {
    let o = if future { Orientation::Future } else { Orientation::Past };
    let fan = integrate_null_fan(&metric.0, &point, directions, o).map_err(err)?;
    Ok(fan.rays.into_iter().map(|r| r.crossing).collect())
}

fn params(t0: f64, xi0: f64, cone_fraction: f64, epsilon: Option<f64>) -> LoopParams {
    LoopParams { t0, xi0, cone_fraction, epsilon, ..LoopParams::default() }
}

/// Validated loop certificate near `q ∈ ℋ`, as a dict.
#[pyfunction]
#[pyo3(signature = (metric, q, t0 = 1.0, xi0 = 1.0, cone_fraction = 0.9))]
fn local_loop(
    py: Python<'_>,
    metric: &Metric,
    q: Vec<f64>,
    t0: f64,
    xi0: f64,
    cone_fraction: f64,
) -> PyResult<Py<PyAny>> {
    let cert = build_local_loop(&metric.0, &q, &params(t0, xi0, cone_fraction, None)).map_err(err)?;
    from_json(py, &cert.to_json_value())
}

/// Validated loop certificate through `p`, as a dict.
#[pyfunction]
#[pyo3(signature = (metric, p, globally_hyperbolic, t0 = 1.0, xi0 = 1.0, cone_fraction = 0.9, epsilon = None))]
#[allow(clippy::too_many_arguments)]
fn global_loop(
    py: Python<'_>,
    metric: &Metric,
    p: Vec<f64>,
    globally_hyperbolic: bool,
    t0: f64,
    xi0: f64,
    cone_fraction: f64,
    epsilon: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let cert = build_global_loop(
        &metric.0,
        &p,
        FoliationAssertion { globally_hyperbolic },
        &params(t0, xi0, cone_fraction, epsilon),
    )
    .map_err(err)?;
    from_json(py, &cert.to_json_value())
}

/// Re-runs every validator check on a certificate given as JSON text.
#[pyfunction]
#[pyo3(signature = (metric, certificate, threshold = 1e-6))]
fn validate(py: Python<'_>, metric: &Metric, certificate: &str, threshold: f64) -> PyResult<Py<PyAny>> {
    let value: Value = serde_json::from_str(certificate).map_err(|e| InputError::new_err(e.to_string()))?;
    let cert = LoopCertificate::from_json_value(&metric.0, &value).map_err(err)?;
    to_py(py, &validate_certificate(&metric.0, &cert, threshold))
}

/// The seeded invariant suites.
#[pyfunction]
#[pyo3(signature = (seed = 0, cases = 100, inject_bad_g0 = false))]
fn check(py: Python<'_>, seed: u64, cases: usize, inject_bad_g0: bool) -> PyResult<Py<PyAny>> {
    to_py(py, &run_all(&SuiteOptions { seed, cases, inject_bad_g0 }))
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    sigchange::presets::NAMES.to_vec()
}

#[pymodule]
#[pyo3(name = "sigchange")]
fn sigchange_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("SigchangeError", py.get_type::<SigchangeError>())?;
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add_class::<Expression>()?;
    m.add_class::<Metric>()?;
    m.add_function(wrap_pyfunction!(classify_curve, m)?)?;
    m.add_function(wrap_pyfunction!(null_fan, m)?)?;
    m.add_function(wrap_pyfunction!(local_loop, m)?)?;
    m.add_function(wrap_pyfunction!(global_loop, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    Ok(())
}
