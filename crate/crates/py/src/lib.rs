//! Python module `nilmix`.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use nilmix_core::equidistribution::{box_average, BoxMap};
use nilmix_core::error::Error;
use nilmix_core::estimate::McConfig;
use nilmix_core::lie::NilpotentAlgebra;
use nilmix_core::linalg::QMatrix;
use nilmix_core::nilmanifold::{Nilmanifold as CoreManifold, Point};
use nilmix_core::observables::{Observable as CoreObservable, Phase};
use nilmix_core::scalar::Rational;
use nilmix_core::spectral::{self, jordan_split};
use nilmix_core::stochastics::{
    clt_experiment, correlation, mixing_experiment, AdaptiveBudget, CltConfig, MixingConfig, OrbitEngine, WindowRule,
};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Config(_) | Error::DimensionMismatch { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(f)) => f.into_pyobject(py)?.into_any(),
            _ => py.None().into_bound(py),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn json<T: serde::Serialize>(x: &T) -> PyResult<Value> {
    serde_json::to_value(x).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn rational(num: i64, den: i64) -> PyResult<Rational> {
    if den == 0 {
        return Err(PyValueError::new_err("zero denominator"));
    }
    Ok(Rational::new(num.into(), den.into()))
}

/// Compact quotient `G/Λ` with integer Malcev coordinates as the lattice.
#[pyclass(frozen, name = "Nilmanifold")]
#[derive(Clone)]
struct Nilmanifold {
    inner: CoreManifold,
}

#[pymethods]
impl Nilmanifold {
    /// Brackets `(i, j, k, num, den)` mean `[e_i, e_j] = (num/den) e_k`, 1-based.
    #[new]
    #[pyo3(signature = (dim, brackets, metric_scale = 1.0))]
    fn new(dim: usize, brackets: Vec<(usize, usize, usize, i64, i64)>, metric_scale: f64) -> PyResult<Self> {
        let mut triples = Vec::with_capacity(brackets.len());
        for (i, j, k, p, q) in brackets {
            if i == 0 || j == 0 || k == 0 {
                return Err(PyValueError::new_err("bracket indices are 1-based"));
            }
            triples.push((i - 1, j - 1, k - 1, rational(p, q)?));
        }
        let alg = NilpotentAlgebra::from_sparse(dim, &triples).map_err(err)?;
        Ok(Nilmanifold { inner: CoreManifold::new(alg, metric_scale).map_err(err)? })
    }

    #[staticmethod]
    fn torus(dim: usize) -> Self {
        Nilmanifold { inner: CoreManifold::torus(dim) }
    }

    #[staticmethod]
    fn heisenberg() -> Self {
        Nilmanifold { inner: CoreManifold::heisenberg() }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn step(&self) -> usize {
        self.inner.algebra().step()
    }

    /// Canonical representative in `[0,1)^d` and the lattice word used.
    fn reduce(&self, coords: Vec<f64>) -> PyResult<(Vec<f64>, Vec<i64>)> {
        let (p, word) = self.inner.reduce(&coords).map_err(err)?;
        let word = word.iter().map(|w| i64::try_from(w).map_err(|_| PyValueError::new_err("lattice word overflow"))).collect::<PyResult<_>>()?;
        Ok((p.coords().to_vec(), word))
    }

    fn distance(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        let (x, y) = (Point::new(&x).map_err(err)?, Point::new(&y).map_err(err)?);
        Ok(self.inner.local_distance(&x, &y))
    }

    /// `log(exp x exp y)` in first-kind coordinates.
    fn bch(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.algebra().bch(&x, &y).map_err(err)?.to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Nilmanifold(dim={}, step={})", self.inner.dim(), self.inner.algebra().step())
    }
}

/// Lattice-preserving automorphism given by `Dα` (rows; entries int or `(num, den)`).
#[pyclass(frozen, name = "Automorphism")]
#[derive(Clone)]
struct Automorphism {
    inner: spectral::Automorphism,
}

#[derive(FromPyObject)]
enum Entry {
    Int(i64),
    Pair((i64, i64)),
}

#[pymethods]
impl Automorphism {
    #[new]
    fn new(manifold: &Nilmanifold, matrix: Vec<Vec<Entry>>) -> PyResult<Self> {
        let rows = matrix
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|e| match e {
                        Entry::Int(n) => rational(n, 1),
                        Entry::Pair((p, q)) => rational(p, q),
                    })
                    .collect::<PyResult<Vec<_>>>()
            })
            .collect::<PyResult<Vec<_>>>()?;
        let inner = spectral::Automorphism::validate(&manifold.inner, QMatrix::from_rows(rows)).map_err(err)?;
        Ok(Automorphism { inner })
    }

    #[staticmethod]
    fn cat_map() -> Self {
        Automorphism { inner: spectral::Automorphism::cat_map() }
    }

    #[staticmethod]
    fn heisenberg_cat() -> Self {
        Automorphism { inner: spectral::Automorphism::heisenberg_cat() }
    }

    #[getter]
    fn manifold(&self) -> Nilmanifold {
        Nilmanifold { inner: self.inner.manifold().clone() }
    }

    fn is_ergodic(&self) -> bool {
        self.inner.is_ergodic()
    }

    /// Blocks of the real Jordan form as dictionaries.
    fn jordan_blocks<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let split = jordan_split(&self.inner).map_err(err)?;
        to_py(py, &json(&split.blocks)?)
    }

    /// `α^n(x)` by repeated steps.
    fn apply(&self, x: Vec<f64>, n: i64) -> PyResult<Vec<f64>> {
        let engine = OrbitEngine::with_default_horizon(&self.inner);
        Ok(engine.apply(n, &Point::new(&x).map_err(err)?).map_err(err)?.coords().to_vec())
    }
}

/// Test function on a nilmanifold.
#[pyclass(frozen, name = "Observable")]
#[derive(Clone)]
struct Observable {
    inner: CoreObservable,
}

#[pymethods]
impl Observable {
    #[staticmethod]
    #[pyo3(signature = (manifold, m, phase = "cos"))]
    fn character(manifold: &Nilmanifold, m: Vec<i64>, phase: &str) -> PyResult<Self> {
        let phase = match phase {
            "cos" => Phase::Cos,
            "sin" => Phase::Sin,
            other => return Err(PyValueError::new_err(format!("phase must be 'cos' or 'sin', got {other:?}"))),
        };
        Ok(Observable { inner: CoreObservable::character(&manifold.inner, &m, phase).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (manifold, center, radius, degree = 3))]
    fn bump(manifold: &Nilmanifold, center: Vec<f64>, radius: f64, degree: u32) -> PyResult<Self> {
        let c = Point::new(&center).map_err(err)?;
        Ok(Observable { inner: CoreObservable::bump(&manifold.inner, &c, radius, degree).map_err(err)? })
    }

    /// `ψ∘α − ψ`.
    #[staticmethod]
    fn coboundary(psi: &Observable, aut: &Automorphism) -> Self {
        Observable { inner: CoreObservable::coboundary(&psi.inner, &aut.inner) }
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.eval(&Point::new(&x).map_err(err)?))
    }

    #[getter]
    fn integral(&self) -> Option<f64> {
        self.inner.integral()
    }
}

/// `∫ f0 · f1∘α^n dμ` as `(mean, se)`.
#[pyfunction]
#[pyo3(signature = (aut, f0, f1, n, samples, seed = 0, workers = 1))]
fn correlation_estimate(aut: &Automorphism, f0: &Observable, f1: &Observable, n: i64, samples: u64, seed: u64, workers: usize) -> PyResult<(f64, f64)> {
    let engine = OrbitEngine::with_default_horizon(&aut.inner);
    let e = correlation(&engine, &f0.inner, &f1.inner, n, samples, &McConfig::new(seed, workers), 0).map_err(err)?;
    Ok((e.mean, e.se))
}

/// Decay of `|C_n|` along `schedule` with a fitted exponential rate.
#[pyfunction]
#[pyo3(signature = (aut, f0, f1, schedule, initial, max, seed = 0, workers = 1))]
#[allow(clippy::too_many_arguments)]
fn mixing<'py>(
    py: Python<'py>,
    aut: &Automorphism,
    f0: &Observable,
    f1: &Observable,
    schedule: Vec<u64>,
    initial: u64,
    max: u64,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let engine = OrbitEngine::with_default_horizon(&aut.inner);
    let cfg = MixingConfig { schedule, budget: AdaptiveBudget { initial, max }, mc: McConfig::new(seed, workers) };
    let r = py.detach(|| mixing_experiment(&engine, &f0.inner, &f1.inner, &cfg)).map_err(err)?;
    to_py(py, &json(&r)?)
}

/// Green–Kubo variance and KS distances of scaled Birkhoff sums.
#[pyfunction]
#[pyo3(signature = (aut, f, schedule, paths, window = 8, gk_budget = 100_000, seed = 0, workers = 1))]
#[allow(clippy::too_many_arguments)]
fn clt<'py>(
    py: Python<'py>,
    aut: &Automorphism,
    f: &Observable,
    schedule: Vec<u64>,
    paths: u64,
    window: usize,
    gk_budget: u64,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let engine = OrbitEngine::with_default_horizon(&aut.inner);
    let cfg = CltConfig { schedule, paths, window, window_rule: WindowRule::Adaptive, gk_budget, mc: McConfig::new(seed, workers) };
    let r = py.detach(|| clt_experiment(&engine, &f.inner, &cfg)).map_err(err)?;
    to_py(py, &json(&r)?)
}

/// Average of `f` over the image of a box `v + Σ t_i w_i`, `t ∈ Π[0, T_i]`, as `(mean, se)`.
#[pyfunction]
#[pyo3(signature = (f, offset, directions, sides, samples, seed = 0, workers = 1))]
fn box_mean(f: &Observable, offset: Vec<f64>, directions: Vec<Vec<f64>>, sides: Vec<f64>, samples: u64, seed: u64, workers: usize) -> PyResult<(f64, f64)> {
    let d = f.inner.manifold().dim();
    let bx = BoxMap::new(offset, directions, sides).map_err(err)?;
    let g = Point::new(&vec![0.0; d]).map_err(err)?;
    let e = box_average(&f.inner, &bx, &vec![0.0; d], &g, samples, &McConfig::new(seed, workers), 0).map_err(err)?;
    Ok((e.mean, e.se))
}

/// `min |⟨z, w/|w|⟩| · |z|^c2` over nonzero integer `z` with `|z|_∞ ≤ zmax`.
#[pyfunction]
fn diophantine<'py>(py: Python<'py>, w: Vec<f64>, c2: f64, zmax: i64) -> PyResult<Bound<'py, PyAny>> {
    let r = spectral::diophantine_constant(&w, c2, zmax).map_err(err)?;
    to_py(py, &json(&r)?)
}

/// Runs a CLI command on a config file and returns its summary.
#[pyfunction]
#[pyo3(signature = (command, config, seed = None, workers = None, out = None))]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    config: PathBuf,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let cmd: nilmix_cli::Command = command.parse().map_err(PyValueError::new_err)?;
    let o = nilmix_cli::Overrides { seed, workers, out };
    let outcome = py.detach(|| nilmix_cli::execute(cmd, &config, &o)).map_err(err)?;
    to_py(py, &outcome.summary)
}

#[pymodule]
fn nilmix(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Nilmanifold>()?;
    m.add_class::<Automorphism>()?;
    m.add_class::<Observable>()?;
    m.add_function(wrap_pyfunction!(correlation_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(mixing, m)?)?;
    m.add_function(wrap_pyfunction!(clt, m)?)?;
    m.add_function(wrap_pyfunction!(box_mean, m)?)?;
    m.add_function(wrap_pyfunction!(diophantine, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
