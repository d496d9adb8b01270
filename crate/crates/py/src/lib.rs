use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tracklet_fuse::assignment;
use tracklet_fuse::eval;
use tracklet_fuse::fusion::{self, FusionParams, NumberSet};
use tracklet_fuse::io;
use tracklet_fuse::model::{DigitDetection, ImageBox, NoiseModel};
use tracklet_fuse::pipeline;
use tracklet_fuse::PipelineParams;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl ToString) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn number_set(numbers: Vec<u8>) -> PyResult<NumberSet> {
    match NumberSet::from_numbers(numbers) {
        Some(s) if !s.is_empty() => Ok(s),
        _ => Err(PyValueError::new_err("numbers must be a nonempty list within 1..=99")),
    }
}

type Verdict = (Option<u8>, f64, f64);

fn verdict(v: &fusion::NumberVerdict) -> Verdict {
    (v.outcome, v.confidence, v.total_conflict)
}

/// Dempster-Shafer evidence over jersey numbers 1..=99.
#[pyclass(name = "MassFunction", module = "tracklet_fuse", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMassFunction {
    inner: fusion::MassFunction,
}

#[pymethods]
impl PyMassFunction {
    /// `focal` is a list of `(numbers, mass)` pairs summing to one.
    #[new]
    fn new(focal: Vec<(Vec<u8>, f64)>) -> PyResult<Self> {
        let focal = focal
            .into_iter()
            .map(|(ns, m)| Ok((number_set(ns)?, m)))
            .collect::<PyResult<Vec<_>>>()?;
        let inner = fusion::MassFunction::new(focal).map_err(value_err)?;
        Ok(PyMassFunction { inner })
    }

    #[staticmethod]
    fn vacuous() -> Self {
        PyMassFunction {
            inner: fusion::MassFunction::vacuous(),
        }
    }

    /// `mass` on `numbers`, the rest on the whole frame.
    #[staticmethod]
    fn simple(numbers: Vec<u8>, mass: f64) -> PyResult<Self> {
        let inner = fusion::MassFunction::simple(number_set(numbers)?, mass).map_err(value_err)?;
        Ok(PyMassFunction { inner })
    }

    fn focal(&self) -> Vec<(Vec<u8>, f64)> {
        self.inner.focal().map(|(s, m)| (s.numbers().collect(), m)).collect()
    }

    fn mass(&self, numbers: Vec<u8>) -> PyResult<f64> {
        Ok(self.inner.mass(number_set(numbers)?))
    }

    fn belief(&self, numbers: Vec<u8>) -> PyResult<f64> {
        Ok(fusion::belief(&self.inner, number_set(numbers)?))
    }

    fn plausibility(&self, numbers: Vec<u8>) -> PyResult<f64> {
        Ok(fusion::plausibility(&self.inner, number_set(numbers)?))
    }

    /// Pignistic probabilities of the numbers with nonzero support.
    fn pignistic(&self) -> BTreeMap<u8, f64> {
        fusion::pignistic(&self.inner).iter().filter(|(_, p)| *p > 0.0).collect()
    }

    /// Dempster combination; returns `(combined, conflict)`.
    fn combine(&self, other: &PyMassFunction) -> PyResult<(PyMassFunction, f64)> {
        let (inner, k) = fusion::dempster_combine(&self.inner, &other.inner).map_err(value_err)?;
        Ok((PyMassFunction { inner }, k))
    }

    /// `(number or None, confidence, total_conflict)`.
    #[pyo3(signature = (threshold = 0.5))]
    fn decide(&self, threshold: f64) -> Verdict {
        verdict(&fusion::decide_number(&self.inner, threshold))
    }

    fn __eq__(&self, other: &PyMassFunction) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        let parts: Vec<String> = self
            .inner
            .focal()
            .map(|(s, m)| {
                if s == NumberSet::THETA {
                    format!("Θ: {m}")
                } else {
                    format!("{:?}: {m}", s.numbers().collect::<Vec<_>>())
                }
            })
            .collect();
        format!("MassFunction({})", parts.join(", "))
    }
}

/// Left fold of Dempster's rule; returns `(combined, total_conflict)`.
#[pyfunction]
fn combine_all(masses: Vec<PyRef<'_, PyMassFunction>>) -> PyResult<(PyMassFunction, f64)> {
    let ms: Vec<fusion::MassFunction> = masses.iter().map(|m| m.inner.clone()).collect();
    let (inner, k) = fusion::combine_all(&ms).map_err(value_err)?;
    Ok((PyMassFunction { inner }, k))
}

/// Evidence from one thumbnail's `(digit, x, conf)` detections and the
/// central player's box `(cx, cy, w, h)`.
#[pyfunction]
#[pyo3(signature = (digits, central_box = (128.0, 128.0, 20.0, 50.0), discount = 0.9))]
fn evidence_from_digits(digits: Vec<(u8, f64, f64)>, central_box: (f64, f64, f64, f64), discount: f64) -> PyResult<PyMassFunction> {
    if digits.iter().any(|(d, _, _)| *d > 9) {
        return Err(PyValueError::new_err("digits must be 0..=9"));
    }
    let dets: Vec<DigitDetection> = digits
        .into_iter()
        .map(|(digit, x, conf)| DigitDetection { digit, x, conf })
        .collect();
    let (cx, cy, w, h) = central_box;
    Ok(PyMassFunction {
        inner: fusion::evidence_from_thumbnail(&dets, &ImageBox { cx, cy, w, h }, discount),
    })
}

/// Fuses per-thumbnail evidence and decides: `(number or None, confidence,
/// total_conflict)`.
#[pyfunction]
#[pyo3(signature = (evidence, threshold = 0.5, discount = 0.9))]
fn identify(evidence: Vec<PyRef<'_, PyMassFunction>>, threshold: f64, discount: f64) -> PyResult<Verdict> {
    let ms: Vec<fusion::MassFunction> = evidence.iter().map(|m| m.inner.clone()).collect();
    let (_, v) = fusion::identify(&ms, &FusionParams { discount, threshold }).map_err(value_err)?;
    Ok(verdict(&v))
}

fn rectangular(cost: &[Vec<f64>]) -> PyResult<()> {
    let m = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("cost matrix rows must have equal length"));
    }
    Ok(())
}

/// Minimum-cost partial assignment. Use `float('inf')` for forbidden cells.
/// Returns `(row -> column or None, total cost)`.
#[pyfunction]
fn solve_assignment(cost: Vec<Vec<f64>>, new_track_cost: f64) -> PyResult<(Vec<Option<usize>>, f64)> {
    rectangular(&cost)?;
    let a = assignment::solve_assignment(&cost, new_track_cost);
    Ok((a.rows, a.cost))
}

/// Exhaustive reference solver for matrices up to 8x8.
#[pyfunction]
fn brute_force_assignment(cost: Vec<Vec<f64>>, new_track_cost: f64) -> PyResult<(Vec<Option<usize>>, f64)> {
    rectangular(&cost)?;
    let a = eval::brute_force_assignment(&cost, new_track_cost).map_err(value_err)?;
    Ok((a.rows, a.cost))
}

/// Monte Carlo number accuracy: `(mean or None, stderr)`.
#[pyfunction]
#[pyo3(signature = (n_thumbnails, trials, seed, noiseless = false))]
fn monte_carlo_accuracy(py: Python<'_>, n_thumbnails: usize, trials: usize, seed: u64, noiseless: bool) -> (Option<f64>, f64) {
    let noise = if noiseless { NoiseModel::off() } else { NoiseModel::default() };
    let r = py.detach(|| eval::monte_carlo_number_accuracy(&noise, n_thumbnails, trials, seed, &FusionParams::default()));
    (r.mean, r.stderr)
}

/// A simulation scenario.
#[pyclass(name = "Scenario", module = "tracklet_fuse", skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: tracklet_fuse::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn demo() -> Self {
        PyScenario {
            inner: tracklet_fuse::Scenario::demo(),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = io::load_scenario(&path).map_err(value_err)?;
        Ok(PyScenario { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = io::parse_scenario(text, std::path::Path::new("<string>")).map_err(value_err)?;
        Ok(PyScenario { inner })
    }

    fn to_toml(&self) -> String {
        io::scenario_to_toml(&self.inner)
    }

    fn digest(&self) -> String {
        io::scenario_digest(&self.inner)
    }

    /// Copy with all detector noise and frame drops turned off.
    fn noiseless(&self) -> Self {
        PyScenario {
            inner: self.inner.clone().noiseless(),
        }
    }

    #[getter]
    fn n_players(&self) -> usize {
        self.inner.n_players
    }

    #[getter]
    fn cameras(&self) -> Vec<String> {
        self.inner.cameras.iter().map(|c| c.camera_id.clone()).collect()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn duration_ms(&self) -> u64 {
        self.inner.duration.0
    }

    #[setter]
    fn set_duration_ms(&mut self, ms: u64) {
        self.inner.duration = tracklet_fuse::model::TimeStamp(ms);
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(players={}, cameras={}, duration_ms={}, seed={})",
            self.inner.n_players,
            self.inner.cameras.len(),
            self.inner.duration.0,
            self.inner.seed
        )
    }
}

/// Runs simulation, tracking, stitching and identification. Returns a dict
/// with `metrics` (name -> float or None), `verdicts` (list of `(track_id,
/// number or None, confidence, total_conflict)`), `n_thumbnails` and
/// `n_tracklets`.
#[pyfunction]
#[pyo3(signature = (scenario, params = None))]
fn run_pipeline<'py>(py: Python<'py>, scenario: &PyScenario, params: Option<PathBuf>) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    use pyo3::types::PyDict;
    let p = match params {
        Some(path) => io::load_params(&path).map_err(value_err)?,
        None => PipelineParams::default(),
    };
    let s = scenario.inner.clone();
    let (out, rows) = py
        .detach(|| -> Result<_, pipeline::PipelineError> {
            let out = pipeline::run(&s, &p)?;
            let (_, rows) = pipeline::evaluate(&out.tracks, &out.streams, &out.ground_truth, out.unresolved)?;
            Ok((out, rows))
        })
        .map_err(runtime_err)?;

    let metrics = PyDict::new(py);
    for (k, v) in rows {
        metrics.set_item(k, v.parse::<f64>().ok())?;
    }
    let verdicts: Vec<(u32, Option<u8>, f64, f64)> = out
        .verdicts()
        .into_iter()
        .map(|(id, v)| (id, v.outcome, v.confidence, v.total_conflict))
        .collect();
    let result = PyDict::new(py);
    result.set_item("metrics", metrics)?;
    result.set_item("verdicts", verdicts)?;
    result.set_item("n_thumbnails", out.streams.len())?;
    result.set_item("n_tracklets", out.tracklets.len())?;
    Ok(result)
}

#[pymodule]
#[pyo3(name = "tracklet_fuse")]
fn tracklet_fuse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMassFunction>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(combine_all, m)?)?;
    m.add_function(wrap_pyfunction!(evidence_from_digits, m)?)?;
    m.add_function(wrap_pyfunction!(identify, m)?)?;
    m.add_function(wrap_pyfunction!(solve_assignment, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_assignment, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
