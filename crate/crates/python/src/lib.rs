//! Python bindings: station tables, prepared cases, theory curves, Monte Carlo
//! runs, single-step filters and the file-based commands.

use std::path::PathBuf;

use nalgebra::DVector;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

use gsp_transient::estimators::{self, LmsState, RlsState, SignalModel};
use gsp_transient::harness::{self, CaseParams, CaseSetup, ExperimentConfig, SamplingStrategy};
use gsp_transient::io::{commands, config::Overrides, stations};
use gsp_transient::noise::build_cw;
use gsp_transient::theory::{self, Algorithm, TheoryMode};
use gsp_transient::{Error, StationTable};

fn py_err(e: Error) -> PyErr {
    let msg = format!("[{}] {e}", e.category());
    match e.category() {
        "io" => PyIOError::new_err(msg),
        "numerics" => PyRuntimeError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for gsp_transient::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Serializable value to plain Python objects through JSON.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn algorithm(name: &str) -> PyResult<Algorithm> {
    match name.to_ascii_lowercase().as_str() {
        "lms" => Ok(Algorithm::Lms),
        "rls" => Ok(Algorithm::Rls),
        _ => Err(PyValueError::new_err(format!("unknown algorithm `{name}` (lms | rls)"))),
    }
}

fn mode(name: &str) -> PyResult<TheoryMode> {
    match name {
        "paper" | "paper-literal" => Ok(TheoryMode::PaperLiteral),
        "exact" | "exact-expectation" => Ok(TheoryMode::ExactExpectation),
        _ => Err(PyValueError::new_err(format!("unknown theory mode `{name}` (paper | exact)"))),
    }
}

/// Weather-station table: ids, coordinates in degrees, one value per station.
#[pyclass(frozen, name = "Stations")]
struct PyStations {
    inner: StationTable,
}

#[pymethods]
impl PyStations {
    #[new]
    fn new(ids: Vec<String>, lat: Vec<f64>, lon: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        if lat.len() != lon.len() {
            return Err(PyValueError::new_err("lat and lon lengths differ"));
        }
        let coords = lat.into_iter().zip(lon).map(|(a, b)| [a, b]).collect();
        Ok(Self {
            inner: StationTable::new(ids, coords, values).py()?,
        })
    }

    #[staticmethod]
    fn synthetic(n: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: harness::synthetic_stations(n, seed).py()?,
        })
    }

    #[staticmethod]
    fn from_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: stations::read_stations_csv(&path).py()?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids().to_vec()
    }

    #[getter]
    fn lat(&self) -> Vec<f64> {
        self.inner.coords().iter().map(|c| c[0]).collect()
    }

    #[getter]
    fn lon(&self) -> Vec<f64> {
        self.inner.coords().iter().map(|c| c[1]).collect()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.signal().to_vec()
    }

    fn digest(&self) -> String {
        stations::dataset_digest(&self.inner)
    }
}

/// Graph, band, sampling set and true spectrum for one `(k, F, |S|)` choice.
#[pyclass(frozen, name = "Case")]
struct PyCase {
    setup: CaseSetup,
    params: CaseParams,
}

impl PyCase {
    fn model(&self, n_a: f64, n_b: f64, seed: u64) -> PyResult<SignalModel> {
        let noise = build_cw(n_a, n_b, self.setup.band.n(), seed).py()?;
        self.setup.signal_model(noise).py()
    }
}

#[pymethods]
impl PyCase {
    #[new]
    #[pyo3(signature = (stations, k, f, sample_size, strategy = "greedy", seed = 0))]
    fn new(
        py: Python<'_>,
        stations: &PyStations,
        k: usize,
        f: usize,
        sample_size: usize,
        strategy: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let strategy = match strategy {
            "greedy" => SamplingStrategy::Greedy,
            "random" => SamplingStrategy::Random,
            other => return Err(PyValueError::new_err(format!("unknown strategy `{other}`"))),
        };
        let params = CaseParams { k, f, sample_size };
        let table = stations.inner.clone();
        let setup = py.detach(|| CaseSetup::build(&table, params, strategy, seed)).py()?;
        Ok(Self { setup, params })
    }

    /// Preset graph settings by name, `"I"` or `"II"`.
    #[staticmethod]
    #[pyo3(signature = (name, stations, seed = 0))]
    fn named(py: Python<'_>, name: &str, stations: &PyStations, seed: u64) -> PyResult<Self> {
        let p = match name {
            "I" => CaseParams::CASE_I,
            "II" => CaseParams::CASE_II,
            other => return Err(PyValueError::new_err(format!("unknown case `{other}`"))),
        };
        Self::new(py, stations, p.k, p.f, p.sample_size, "greedy", seed)
    }

    #[getter]
    fn n(&self) -> usize {
        self.setup.band.n()
    }

    #[getter]
    fn f(&self) -> usize {
        self.params.f
    }

    #[getter]
    fn k(&self) -> usize {
        self.params.k
    }

    #[getter]
    fn lambda_min(&self) -> f64 {
        self.setup.lambda_min
    }

    #[getter]
    fn mu_max(&self) -> f64 {
        self.setup.mu_max
    }

    #[getter]
    fn sampling_indices(&self) -> Vec<usize> {
        self.setup.sampling.indices().to_vec()
    }

    #[getter]
    fn s_f(&self) -> Vec<f64> {
        self.setup.s_f.as_slice().to_vec()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.setup.basis.eigenvalues.as_slice().to_vec()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.setup.graph.edges()
    }

    /// Noise variances `c_w` for scenario coefficients `(n_a, n_b)`.
    #[pyo3(signature = (n_a, n_b, seed = 0))]
    fn noise_variances(&self, n_a: f64, n_b: f64, seed: u64) -> PyResult<Vec<f64>> {
        Ok(build_cw(n_a, n_b, self.setup.band.n(), seed).py()?.c_w().to_vec())
    }

    /// Both theory curves (linear units) as `{"paper": [...], "exact": [...]}`.
    #[pyo3(signature = (algorithm, param, iterations, n_a, n_b, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn theory<'py>(
        &self,
        py: Python<'py>,
        algorithm: &str,
        param: f64,
        iterations: usize,
        n_a: f64,
        n_b: f64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let model = self.model(n_a, n_b, seed)?;
        let (paper, exact) =
            harness::theory_curves(&model, self::algorithm(algorithm)?, param, iterations).py()?;
        let out = pyo3::types::PyDict::new(py);
        out.set_item("paper", paper.values)?;
        out.set_item("exact", exact.values)?;
        Ok(out.into_any())
    }

    #[pyo3(signature = (algorithm, param, n_a, n_b, mode = "exact", seed = 0))]
    fn steady_state(
        &self,
        algorithm: &str,
        param: f64,
        n_a: f64,
        n_b: f64,
        mode: &str,
        seed: u64,
    ) -> PyResult<f64> {
        let c = build_cw(n_a, n_b, self.setup.band.n(), seed).py()?;
        let (band, s) = (&self.setup.band, &self.setup.sampling);
        match self::algorithm(algorithm)? {
            Algorithm::Lms => theory::lms_steady_state(band, s, c.c_w(), param, self::mode(mode)?),
            Algorithm::Rls => theory::rls_steady_state(band, s, c.c_w(), param, self::mode(mode)?),
        }
        .py()
    }

    /// Monte Carlo run; returns mean MSD, standard errors, theory curves and deviation stats.
    #[pyo3(signature = (algorithm, param, iterations, runs, n_a, n_b, master_seed = 0, threads = None))]
    #[allow(clippy::too_many_arguments)]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        algorithm: &str,
        param: f64,
        iterations: usize,
        runs: usize,
        n_a: f64,
        n_b: f64,
        master_seed: u64,
        threads: Option<usize>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cfg = ExperimentConfig {
            case: self.params,
            n_a,
            n_b,
            algorithm: self::algorithm(algorithm)?,
            param,
            iterations,
            runs,
            master_seed,
            sampling_strategy: self.setup.strategy,
            labels: Default::default(),
        };
        let setup = &self.setup;
        let r = py.detach(|| harness::run_with_setup(&cfg, setup, threads)).py()?;
        let out = pyo3::types::PyDict::new(py);
        out.set_item("msd_mean", &r.msd_mean)?;
        out.set_item("msd_mean_db", &r.msd_mean_db)?;
        out.set_item("msd_std_err", &r.msd_std_err)?;
        out.set_item("theory_paper", &r.theory_paper.values)?;
        out.set_item("theory_exact", &r.theory_exact.values)?;
        out.set_item("deviation", to_py(py, &r.deviation)?)?;
        out.set_item("metadata", to_py(py, &r.metadata)?)?;
        Ok(out.into_any())
    }

    /// A single-trajectory filter for step-by-step use.
    #[pyo3(signature = (algorithm, param, n_a, n_b, seed = 0))]
    fn filter(&self, algorithm: &str, param: f64, n_a: f64, n_b: f64, seed: u64) -> PyResult<PyFilter> {
        let model = self.model(n_a, n_b, seed)?;
        let state = match self::algorithm(algorithm)? {
            Algorithm::Lms => FilterState::Lms(LmsState::new(&model, param).py()?),
            Algorithm::Rls => FilterState::Rls(estimators::rls_init(&model, param).py()?),
        };
        Ok(PyFilter { model, state })
    }
}

enum FilterState {
    Lms(LmsState),
    Rls(RlsState),
}

/// LMS or RLS estimator fed one noise vector per step.
#[pyclass(name = "Filter")]
struct PyFilter {
    model: SignalModel,
    state: FilterState,
}

#[pymethods]
impl PyFilter {
    /// Advances one iteration with noise `w` (length N) and returns the new MSD.
    fn step(&mut self, w: Vec<f64>) -> PyResult<f64> {
        let w = DVector::from_vec(w);
        self.state = match &self.state {
            FilterState::Lms(s) => FilterState::Lms(estimators::lms_step(s, &self.model, &w).py()?),
            FilterState::Rls(s) => FilterState::Rls(estimators::rls_step(s, &self.model, &w).py()?),
        };
        Ok(self.msd())
    }

    #[getter]
    fn s_hat(&self) -> Vec<f64> {
        self.s_hat_vec().as_slice().to_vec()
    }

    #[getter]
    fn t(&self) -> usize {
        match &self.state {
            FilterState::Lms(s) => s.t,
            FilterState::Rls(s) => s.t,
        }
    }

    #[getter]
    fn msd(&self) -> f64 {
        estimators::msd(&self.model, self.s_hat_vec())
    }
}

impl PyFilter {
    fn s_hat_vec(&self) -> &DVector<f64> {
        match &self.state {
            FilterState::Lms(s) => &s.s_hat,
            FilterState::Rls(s) => &s.s_hat,
        }
    }
}

#[pyfunction]
fn msd_db(value: f64) -> PyResult<f64> {
    estimators::msd_db(value).py()
}

fn overrides(seed: Option<u64>, runs: Option<usize>, iterations: Option<usize>) -> Overrides {
    Overrides {
        seed,
        runs,
        iterations,
    }
}

/// Runs a config file and writes the results CSV and manifest; returns the deviation stats.
#[pyfunction]
#[pyo3(signature = (config, out, seed = None, runs = None, iterations = None, threads = None, cache_dir = None))]
#[allow(clippy::too_many_arguments)]
fn run_config<'py>(
    py: Python<'py>,
    config: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    runs: Option<usize>,
    iterations: Option<usize>,
    threads: Option<usize>,
    cache_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = commands::ExecOptions { threads, cache_dir };
    let res = py
        .detach(|| commands::cmd_run(&config, overrides(seed, runs, iterations), &out, &opts))
        .py()?;
    to_py(py, &res.deviation)
}

#[pyfunction]
#[pyo3(signature = (config, out, seed = None, iterations = None, cache_dir = None))]
fn theory_config(
    py: Python<'_>,
    config: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    iterations: Option<usize>,
    cache_dir: Option<PathBuf>,
) -> PyResult<PathBuf> {
    let opts = commands::ExecOptions {
        threads: None,
        cache_dir,
    };
    py.detach(|| commands::cmd_theory(&config, overrides(seed, None, iterations), &out, &opts))
        .py()
}

#[pyfunction]
#[pyo3(signature = (results, burn_in = harness::DEFAULT_BURN_IN))]
fn compare<'py>(py: Python<'py>, results: PathBuf, burn_in: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &commands::cmd_compare(&results, burn_in).py()?)
}

#[pyfunction]
#[pyo3(signature = (stations, k, out = None, cache_dir = None))]
fn build_graph<'py>(
    py: Python<'py>,
    stations: PathBuf,
    k: usize,
    out: Option<PathBuf>,
    cache_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = commands::ExecOptions {
        threads: None,
        cache_dir,
    };
    to_py(py, &commands::cmd_build_graph(&stations, k, out.as_deref(), &opts).py()?)
}

#[pymodule]
fn gsp_transient_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStations>()?;
    m.add_class::<PyCase>()?;
    m.add_class::<PyFilter>()?;
    m.add_function(wrap_pyfunction!(msd_db, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(theory_config, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(build_graph, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
