//! Python bindings. Tables cross the boundary as a list of column names
//! plus a list of rows.

use std::path::PathBuf;

use frpsa_core::ann;
use frpsa_core::bootstrap;
use frpsa_core::dataset::{standardize, Dataset};
use frpsa_core::diagnostics;
use frpsa_core::effects;
use frpsa_core::model_spec::{self, ModelSpec};
use frpsa_core::pipeline::{self, Options, Stage};
use frpsa_core::pls::{self, PlsEstimate};
use frpsa_core::report::Format;
use frpsa_core::synthetic;
use frpsa_core::{Error, ErrorKind};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e.kind() {
        ErrorKind::Input => PyValueError::new_err(e.to_string()),
        ErrorKind::Numerical => PyArithmeticError::new_err(e.to_string()),
        ErrorKind::Io => PyOSError::new_err(e.to_string()),
    }
}

/// A validated model specification.
#[pyclass(name = "ModelSpec", module = "frpsa", skip_from_py_object)]
#[derive(Clone)]
struct PySpec {
    inner: ModelSpec,
}

#[pymethods]
impl PySpec {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        model_spec::parse_spec(text).map(|inner| Self { inner }).map_err(py_err)
    }

    fn to_json(&self) -> String {
        model_spec::serialize_spec(&self.inner)
    }

    fn constructs(&self) -> Vec<String> {
        self.inner.constructs.iter().map(|c| c.name.clone()).collect()
    }

    fn indicators(&self, construct: &str) -> PyResult<Vec<String>> {
        let c = self
            .inner
            .construct(construct)
            .ok_or_else(|| PyValueError::new_err(format!("unknown construct `{construct}`")))?;
        Ok(c.indicators.clone())
    }

    /// (source, target, role) triples, including implied component paths.
    fn paths(&self) -> Vec<(String, String, String)> {
        self.inner
            .paths
            .iter()
            .map(|p| (p.source.clone(), p.target.clone(), p.role.as_str().to_string()))
            .collect()
    }

    fn outcome(&self) -> PyResult<String> {
        self.inner.outcome().map_err(py_err)
    }

    fn indirect_chains(&self) -> Vec<Vec<String>> {
        effects::enumerate_indirect(&self.inner)
    }

    /// Copy with second-order constructs rewritten as repeated-indicator blocks.
    fn expand_higher_order(&self) -> PyResult<Self> {
        model_spec::expand_higher_order(&self.inner).map(|inner| Self { inner }).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelSpec({} constructs, {} paths, {} interactions)",
            self.inner.constructs.len(),
            self.inner.paths.len(),
            self.inner.interactions.len()
        )
    }
}

fn dataset(columns: Vec<String>, rows: Vec<Vec<f64>>) -> PyResult<Dataset> {
    Dataset::from_rows(columns, rows).map_err(py_err)
}

fn fit(spec: &PySpec, columns: Vec<String>, rows: Vec<Vec<f64>>) -> PyResult<(frpsa_core::dataset::StandardizedDataset, PlsEstimate)> {
    let d = dataset(columns, rows)?;
    spec.inner.check_columns(d.columns()).map_err(py_err)?;
    let s = standardize(&d).map_err(py_err)?;
    let e = pls::fit(&spec.inner, &s).map_err(py_err)?;
    Ok((s, e))
}

/// Fitted PLS model.
#[pyclass(name = "Estimate", module = "frpsa")]
struct PyEstimate {
    inner: PlsEstimate,
}

#[pymethods]
impl PyEstimate {
    #[getter]
    fn constructs(&self) -> Vec<String> {
        self.inner.constructs.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    fn score(&self, construct: &str) -> PyResult<Vec<f64>> {
        self.inner
            .score(construct)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| PyValueError::new_err(format!("no scores for `{construct}`")))
    }

    fn path(&self, source: &str, target: &str) -> Option<f64> {
        self.inner.path(source, target)
    }

    /// (source, target, role, coefficient) for every estimated path.
    fn paths(&self) -> Vec<(String, String, String, f64)> {
        self.inner
            .paths
            .iter()
            .map(|p| (p.source.clone(), p.target.clone(), p.role.as_str().to_string(), p.coefficient))
            .collect()
    }

    fn r_squared(&self, target: &str) -> PyResult<f64> {
        pls::r_squared(&self.inner, target).map_err(py_err)
    }

    fn weights(&self, construct: &str) -> PyResult<Vec<(String, f64)>> {
        let b = self.block(construct)?;
        Ok(b.indicators.iter().cloned().zip(b.weights.iter().copied()).collect())
    }

    fn loadings(&self, construct: &str) -> PyResult<Vec<(String, f64)>> {
        let b = self.block(construct)?;
        Ok(b.indicators.iter().cloned().zip(b.loadings.iter().copied()).collect())
    }
}

impl PyEstimate {
    fn block(&self, construct: &str) -> PyResult<&pls::Block> {
        self.inner
            .block(construct)
            .ok_or_else(|| PyValueError::new_err(format!("no block `{construct}`")))
    }
}

/// Fits the PLS model (with interaction terms) to raw data.
#[pyfunction]
fn estimate(spec: &PySpec, columns: Vec<String>, rows: Vec<Vec<f64>>) -> PyResult<PyEstimate> {
    let (_, inner) = fit(spec, columns, rows)?;
    Ok(PyEstimate { inner })
}

/// Reliability, validity and collinearity per construct, as dicts.
#[pyfunction]
fn measurement_report<'py>(
    py: Python<'py>,
    spec: &PySpec,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let (s, e) = fit(spec, columns, rows)?;
    let r = diagnostics::measurement_report(&e, &s).map_err(py_err)?;
    let verdicts = diagnostics::threshold_report(&r, &diagnostics::Thresholds::default());
    r.constructs
        .iter()
        .zip(verdicts)
        .map(|(c, v)| {
            let d = PyDict::new(py);
            d.set_item("construct", &c.construct)?;
            d.set_item("alpha", c.alpha)?;
            d.set_item("composite_reliability", c.composite_reliability)?;
            d.set_item("ave", c.ave)?;
            d.set_item("vif", c.vif)?;
            d.set_item("pass", v.pass)?;
            d.set_item("reasons", v.reasons)?;
            Ok(d)
        })
        .collect()
}

/// Bootstrap statistics for every path and indirect chain.
#[pyfunction]
#[pyo3(signature = (spec, columns, rows, reps = 500, seed = 1, level = 0.95))]
fn bootstrap_paths<'py>(
    py: Python<'py>,
    spec: &PySpec,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    reps: usize,
    seed: u64,
    level: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let (s, e) = fit(spec, columns, rows)?;
    let b = py
        .detach(|| bootstrap::run_bootstrap_from(&spec.inner, &s, &e, reps, seed, level))
        .map_err(py_err)?;
    b.keys
        .iter()
        .zip(&b.params)
        .filter(|(k, _)| matches!(k, bootstrap::ParamKey::Path { .. } | bootstrap::ParamKey::Indirect { .. }))
        .map(|(k, p)| {
            let d = PyDict::new(py);
            d.set_item("parameter", k.to_string())?;
            d.set_item("estimate", p.estimate)?;
            d.set_item("std_error", p.test.std_error)?;
            d.set_item("t", p.test.t)?;
            d.set_item("p", p.test.p)?;
            d.set_item("interval", p.interval)?;
            Ok(d)
        })
        .collect()
}

/// (source, target, direct, indirect, total) for every connected pair.
#[pyfunction]
fn total_effects(spec: &PySpec, columns: Vec<String>, rows: Vec<Vec<f64>>) -> PyResult<Vec<(String, String, f64, f64, f64)>> {
    let (_, e) = fit(spec, columns, rows)?;
    Ok(effects::total_effects(&spec.inner, &e)
        .into_iter()
        .map(|t| (t.source, t.target, t.direct, t.indirect, t.total))
        .collect())
}

#[pyfunction]
fn cronbach_alpha(items: Vec<Vec<f64>>) -> PyResult<f64> {
    let cols: Vec<&[f64]> = items.iter().map(Vec::as_slice).collect();
    diagnostics::cronbach_alpha(&cols).map_err(py_err)
}

#[pyfunction]
fn composite_reliability(loadings: Vec<f64>) -> PyResult<f64> {
    diagnostics::composite_reliability(&loadings).map_err(py_err)
}

#[pyfunction]
fn average_variance_extracted(loadings: Vec<f64>) -> PyResult<f64> {
    diagnostics::average_variance_extracted(&loadings).map_err(py_err)
}

/// VIF per column of `scores` (given as columns).
#[pyfunction]
fn full_collinearity_vif(names: Vec<String>, scores: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let n = scores.first().map_or(0, Vec::len);
    if scores.iter().any(|c| c.len() != n) {
        return Err(PyValueError::new_err("score columns differ in length"));
    }
    let m = DMatrix::from_fn(n, scores.len(), |i, j| scores[j][i]);
    diagnostics::full_collinearity_vif(&m, &names).map_err(py_err)
}

#[pyfunction]
fn bc_interval(resamples: Vec<f64>, estimate: f64, level: f64) -> PyResult<(f64, f64)> {
    bootstrap::bc_interval(&resamples, estimate, level).map_err(py_err)
}

/// (std_error, t or None, p)
#[pyfunction]
fn t_and_p(resamples: Vec<f64>, estimate: f64) -> PyResult<(f64, Option<f64>, f64)> {
    let t = bootstrap::t_and_p(&resamples, estimate).map_err(py_err)?;
    Ok((t.std_error, t.t, t.p))
}

#[pyfunction]
fn sigmoid(x: f64) -> f64 {
    ann::sigmoid(x)
}

/// Cross-validated network fit: per-fold results, variance explained and
/// input importances.
#[pyfunction]
#[pyo3(signature = (x, y, folds = 10, hidden = None, epochs = 2000, rate = 0.1, seed = 1))]
fn kfold_cv<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    folds: usize,
    hidden: Option<usize>,
    epochs: usize,
    rate: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let d = x.first().map_or(0, Vec::len);
    if x.len() != y.len() || x.iter().any(|r| r.len() != d) || d == 0 {
        return Err(PyValueError::new_err("x must be a non-empty rectangular list of rows matching y"));
    }
    let xm = DMatrix::from_fn(x.len(), d, |i, j| x[i][j]);
    let settings = ann::TrainSettings {
        hidden: hidden.unwrap_or_else(|| ann::default_hidden(d)),
        epochs,
        learning_rate: rate,
    };
    let names: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    let (cv, ve, sens) = py
        .detach(|| -> frpsa_core::Result<_> {
            let cv = ann::kfold_cv(&xm, &y, folds, &settings, seed)?;
            let ve = ann::variance_explained(&cv.predictions, &y)?;
            let sens = ann::sensitivity(&cv, &xm, &names, Default::default())?;
            Ok((cv, ve, sens))
        })
        .map_err(py_err)?;
    let out = PyDict::new(py);
    let fold_rows: Vec<(usize, usize, usize, f64, f64)> = cv
        .folds
        .iter()
        .map(|f| (f.fold, f.n_train, f.n_test, f.rmse_train, f.rmse_test))
        .collect();
    out.set_item("folds", fold_rows)?;
    out.set_item("rmse_test", cv.folds.iter().map(|f| f.rmse_test).collect::<Vec<_>>())?;
    out.set_item("variance_explained", ve)?;
    out.set_item("importance", sens.mean)?;
    out.set_item("normalized_importance", sens.normalized)?;
    out.set_item("predictions", cv.predictions)?;
    Ok(out)
}

/// Draws a synthetic dataset; returns (columns, rows).
#[pyfunction]
fn generate_synthetic(params_json: &str, seed: u64) -> PyResult<(Vec<String>, Vec<Vec<f64>>)> {
    let p = synthetic::parse_params(params_json).map_err(py_err)?;
    let d = synthetic::generate(&p, seed).map_err(py_err)?;
    let rows = d.values.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok((d.columns, rows))
}

/// Runs the pipeline from files and writes the report directory. Returns
/// the list of files written.
#[pyfunction]
#[pyo3(signature = (spec_path, data_path, out_dir, stage = "run", seed = None, reps = None, folds = None, skip_bootstrap = false, threads = None, format = "csv"))]
#[allow(clippy::too_many_arguments)]
fn run_frpsa(
    py: Python<'_>,
    spec_path: PathBuf,
    data_path: PathBuf,
    out_dir: PathBuf,
    stage: &str,
    seed: Option<u64>,
    reps: Option<usize>,
    folds: Option<usize>,
    skip_bootstrap: bool,
    threads: Option<usize>,
    format: &str,
) -> PyResult<Vec<String>> {
    let stage = match stage {
        "run" => Stage::Run,
        "pls" => Stage::Pls,
        "ann" => Stage::Ann,
        other => return Err(PyValueError::new_err(format!("unknown stage `{other}`"))),
    };
    let opts = Options {
        seed,
        reps,
        folds,
        skip_bootstrap,
        threads,
        format: format.parse::<Format>().map_err(py_err)?,
        ..Options::default()
    };
    py.detach(|| pipeline::run_frpsa(stage, &spec_path, &data_path, &out_dir, &opts))
        .map_err(py_err)?;
    let mut files: Vec<String> = std::fs::read_dir(&out_dir)
        .map_err(|e| PyOSError::new_err(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    Ok(files)
}

#[pymodule]
fn frpsa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySpec>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(measurement_report, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_paths, m)?)?;
    m.add_function(wrap_pyfunction!(total_effects, m)?)?;
    m.add_function(wrap_pyfunction!(cronbach_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(composite_reliability, m)?)?;
    m.add_function(wrap_pyfunction!(average_variance_extracted, m)?)?;
    m.add_function(wrap_pyfunction!(full_collinearity_vif, m)?)?;
    m.add_function(wrap_pyfunction!(bc_interval, m)?)?;
    m.add_function(wrap_pyfunction!(t_and_p, m)?)?;
    m.add_function(wrap_pyfunction!(sigmoid, m)?)?;
    m.add_function(wrap_pyfunction!(kfold_cv, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(run_frpsa, m)?)?;
    Ok(())
}
