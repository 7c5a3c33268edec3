//! Python bindings. States are `State` objects; reports come back as plain
//! dicts and lists mirroring the JSON schema of the command-line tool.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use qcorr::correlations::{self, MeasureName, SearchConfig};
use qcorr::divergence::{div, DivergenceKind};
use qcorr::entropies::{self, Cut};
use qcorr::linalg::CMatrix;
use qcorr::premeasurement::{self as pm, Pvm};
use qcorr::smooth::{self, BallSpec, Which};
use qcorr::states::{self, DensityOperator, CLASS_TOL};
use qcorr::uncertainty::{self, EurRelation, GameInput};

fn err(e: qcorr::Error) -> PyErr {
    match e {
        qcorr::Error::Solver(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn value_to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match n.as_i64() {
            Some(i) if !n.is_f64() => i.into_pyobject(py)?.into_any().unbind(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for x in items {
                list.append(value_to_py(py, x)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let d = PyDict::new(py);
            for (k, x) in map {
                d.set_item(k, value_to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

fn report<T: serde::Serialize>(py: Python<'_>, r: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(r).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    value_to_py(py, &v)
}

fn to_matrix(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn from_matrix(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn kind(s: &str) -> PyResult<DivergenceKind> {
    DivergenceKind::parse(s).map_err(err)
}

fn elements(ms: Vec<Vec<Vec<Complex64>>>) -> PyResult<Vec<CMatrix>> {
    ms.into_iter().map(to_matrix).collect()
}

/// A density operator with its tensor-factor dimensions.
#[pyclass(name = "State", module = "qcorr", skip_from_py_object)]
#[derive(Clone)]
struct PyState {
    inner: DensityOperator,
}

#[pymethods]
impl PyState {
    /// Build from a square matrix (nested lists of complex numbers) and factor dims.
    #[new]
    #[pyo3(signature = (matrix, dims, normalized = true))]
    fn new(matrix: Vec<Vec<Complex64>>, dims: Vec<usize>, normalized: bool) -> PyResult<Self> {
        let m = to_matrix(matrix)?;
        let inner = if normalized { DensityOperator::new(m, &dims) } else { DensityOperator::new_subnormalized(m, &dims) };
        Ok(PyState { inner: inner.map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyState { inner: qcorr::io::parse_state(text).map_err(err)? })
    }

    /// Random state: kind is "random", "pure", "separable" or "premeasurement"
    /// (dims = [register, system] for the last).
    #[staticmethod]
    #[pyo3(signature = (dims, kind = "random", seed = 0))]
    fn random(dims: Vec<usize>, kind: &str, seed: u64) -> PyResult<Self> {
        let mut rng = states::rng_from_seed(seed);
        let n: usize = dims.iter().product();
        let inner = match (kind, dims.as_slice()) {
            ("random", _) => states::random_state(&dims, n, &mut rng),
            ("pure", _) => states::random_pure(&dims, &mut rng).density(),
            ("separable", [a, b]) => states::random_separable(*a, *b, 2 * a * b, &mut rng),
            ("premeasurement", [m, s]) if m <= s => {
                let mut ranks = vec![1usize; *m];
                ranks[0] += s - m;
                pm::random_premeasurement(*s, &ranks, *s, &mut rng).map_err(err)?.state
            }
            _ => return Err(PyValueError::new_err(format!("cannot generate '{}' with dims {:?}", kind, dims))),
        };
        Ok(PyState { inner })
    }

    fn to_json(&self) -> String {
        qcorr::io::state_to_json(&self.inner)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims.clone()
    }

    fn matrix(&self) -> Vec<Vec<Complex64>> {
        from_matrix(&self.inner.mat)
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn purity(&self) -> f64 {
        self.inner.purity()
    }

    fn reduce(&self, keep: Vec<usize>) -> PyResult<Self> {
        Ok(PyState { inner: self.inner.reduce(&keep).map_err(err)? })
    }

    fn tensor(&self, other: &PyState) -> Self {
        PyState { inner: self.inner.tensor(&other.inner) }
    }

    fn __repr__(&self) -> String {
        format!("State(dims={:?}, trace={:.6})", self.inner.dims, self.inner.trace())
    }
}

/// Premeasure a single-system state with a PVM in the standard register basis.
#[pyfunction]
fn premeasure(state: &PyState, pvm: Vec<Vec<Vec<Complex64>>>) -> PyResult<PyState> {
    let x = Pvm::new(elements(pvm)?).map_err(err)?;
    let s = pm::premeasure(&state.inner, &pm::standard_isometry(&x)).map_err(err)?;
    Ok(PyState { inner: s.state })
}

#[pyfunction]
#[pyo3(signature = (p, q, kind = "vn"))]
fn divergence(p: &PyState, q: &PyState, kind: &str) -> PyResult<f64> {
    Ok(div(self::kind(kind)?, &p.inner.mat, &q.inner.mat).map_err(err)?.to_f64())
}

/// H_K(A|B) in bits.
#[pyfunction]
#[pyo3(signature = (state, kind = "vn"))]
fn cond_entropy(state: &PyState, kind: &str) -> PyResult<f64> {
    Ok(entropies::cond_entropy(self::kind(kind)?, &state.inner, Cut::OnSecond).map_err(err)?.value)
}

#[pyfunction]
#[pyo3(signature = (state, name, kind = "vn", seed = 0))]
fn measure(py: Python<'_>, state: &PyState, name: &str, kind: &str, seed: u64) -> PyResult<Py<PyAny>> {
    let n = MeasureName::parse(name).map_err(err)?;
    let cfg = SearchConfig { seed, ..SearchConfig::default() };
    report(py, &correlations::measure(n, self::kind(kind)?, &state.inner, &cfg).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (state, kind = "vn", seed = 0))]
fn hierarchy(py: Python<'_>, state: &PyState, kind: &str, seed: u64) -> PyResult<Py<PyAny>> {
    let cfg = SearchConfig { seed, ..SearchConfig::default() };
    report(py, &correlations::hierarchy_table(&state.inner, self::kind(kind)?, &cfg).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (state, kind = "vn", tol = 1e-6))]
fn certify_collapse(py: Python<'_>, state: &PyState, kind: &str, tol: f64) -> PyResult<Py<PyAny>> {
    report(py, &correlations::certify_collapse(&state.inner, self::kind(kind)?, tol).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (state, epsilon, kind = "dmax", tol = 1e-3))]
fn certify_smooth_collapse(py: Python<'_>, state: &PyState, epsilon: f64, kind: &str, tol: f64) -> PyResult<Py<PyAny>> {
    report(py, &smooth::certify_smooth_collapse(&state.inner, epsilon, self::kind(kind)?, tol).map_err(err)?)
}

/// Smooth min ("min") or max ("max") conditional entropy over the full ε-ball.
#[pyfunction]
fn smooth_cond_entropy(py: Python<'_>, state: &PyState, which: &str, epsilon: f64) -> PyResult<Py<PyAny>> {
    let w = match which {
        "min" => Which::Min,
        "max" => Which::Max,
        _ => return Err(PyValueError::new_err("which must be 'min' or 'max'")),
    };
    report(py, &smooth::smooth_cond_entropy(w, &state.inner, &BallSpec::full(epsilon)).map_err(err)?)
}

/// Membership in CQ, QC, CC, separable (PPT) and MQ.
#[pyfunction]
fn classify(py: Python<'_>, state: &PyState) -> PyResult<Py<PyAny>> {
    let r = &state.inner;
    let d = PyDict::new(py);
    let verdicts = [
        ("cq", states::is_cq(r, CLASS_TOL)),
        ("qc", states::is_qc(r, CLASS_TOL)),
        ("cc", states::is_cc(r, CLASS_TOL)),
        ("separable", states::is_separable_small(r, CLASS_TOL)),
        ("mq", states::is_mq(r, CLASS_TOL)),
    ];
    for (name, v) in verdicts {
        d.set_item(name, v.map_err(err)?.member)?;
    }
    Ok(d.into_any().unbind())
}

#[pyfunction]
fn overlap_c(x: Vec<Vec<Vec<Complex64>>>, z: Vec<Vec<Vec<Complex64>>>) -> PyResult<f64> {
    uncertainty::overlap_c(&elements(x)?, &elements(z)?).map_err(err)
}

/// Pauli X, Y, Z eigenbases as lists of projectors.
#[pyfunction]
fn pauli_pvms() -> Vec<Vec<Vec<Vec<Complex64>>>> {
    uncertainty::pauli_pvms().iter().map(|p| p.elements.iter().map(from_matrix).collect()).collect()
}

#[pyfunction]
#[pyo3(signature = (relation, state, measurements, epsilon = 0.0))]
fn check_eur(py: Python<'_>, relation: &str, state: &PyState, measurements: Vec<Vec<Vec<Vec<Complex64>>>>, epsilon: f64) -> PyResult<Py<PyAny>> {
    let rel = EurRelation::parse(relation).map_err(err)?;
    let ms = measurements.into_iter().map(elements).collect::<PyResult<Vec<_>>>()?;
    report(py, &uncertainty::check_eur(rel, &state.inner, &ms, epsilon).map_err(err)?)
}

/// Play the distillation game. A one-factor pure state is the plain game, a
/// one-factor mixed state hands its purification to the adversary, and a
/// three-factor state is read as S ⊗ E₁ ⊗ E₂.
#[pyfunction]
#[pyo3(signature = (state, rounds = 1, strategy = None))]
fn play_game(py: Python<'_>, state: &PyState, rounds: u64, strategy: Option<Vec<Vec<Vec<Vec<Complex64>>>>>) -> PyResult<Py<PyAny>> {
    let r = &state.inner;
    let input = match r.dims.len() {
        1 if r.is_pure(1e-9) => GameInput::Pure(r.clone()),
        1 => GameInput::adversarial(r).map_err(err)?,
        _ => GameInput::Split(r.clone()),
    };
    let strat: Vec<Pvm> = match strategy {
        Some(s) => s.into_iter().map(|p| Pvm::new(elements(p)?).map_err(err)).collect::<PyResult<_>>()?,
        None => uncertainty::pauli_pvms().to_vec(),
    };
    report(py, &uncertainty::play_game(&input, &strat, rounds).map_err(err)?)
}

#[pymodule]
#[pyo3(name = "qcorr")]
fn qcorr_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(premeasure, m)?)?;
    m.add_function(wrap_pyfunction!(divergence, m)?)?;
    m.add_function(wrap_pyfunction!(cond_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(hierarchy, m)?)?;
    m.add_function(wrap_pyfunction!(certify_collapse, m)?)?;
    m.add_function(wrap_pyfunction!(certify_smooth_collapse, m)?)?;
    m.add_function(wrap_pyfunction!(smooth_cond_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(overlap_c, m)?)?;
    m.add_function(wrap_pyfunction!(pauli_pvms, m)?)?;
    m.add_function(wrap_pyfunction!(check_eur, m)?)?;
    m.add_function(wrap_pyfunction!(play_game, m)?)?;
    Ok(())
}
