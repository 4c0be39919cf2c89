use std::path::PathBuf;

use pyo3::exceptions::{PyNotImplementedError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use rwre_lab::cli::{self, ExperimentConfig, RunOptions, RunStatus};
use rwre_lab::oracle::{self, ExitClass, RegionDescriptor, SolverOptions};
use rwre_lab::stats::{self, BootstrapConfig, DirectionInput, Thresholds};
use rwre_lab::{cone, env, walk, Error, Lambda, SiteCoord};

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Precondition(_) | Error::Json(_) => PyValueError::new_err(e.to_string()),
        Error::Unsupported(_) => PyNotImplementedError::new_err(e.to_string()),
        Error::NonConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
    }
}

// Plain Python values cross the boundary as JSON.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| err(e.into()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn opt_from_py<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    obj.map_or_else(|| Ok(T::default()), from_py)
}

fn site(coords: Vec<i64>) -> PyResult<SiteCoord> {
    SiteCoord::new(coords).map_err(err)
}

fn lambda(text: &str) -> PyResult<Lambda> {
    text.parse().map_err(err)
}

fn targets(names: Option<Vec<String>>) -> PyResult<Vec<ExitClass>> {
    let names = names.unwrap_or_else(|| vec!["right".into()]);
    names
        .iter()
        .map(|n| serde_json::from_value(serde_json::Value::String(n.clone())).map_err(|e| PyValueError::new_err(e.to_string())))
        .collect()
}

#[pyclass(frozen, from_py_object, module = "rwre_lab")]
#[derive(Clone)]
struct EnvironmentModel(env::EnvironmentModel);

#[pymethods]
impl EnvironmentModel {
    #[staticmethod]
    fn homogeneous(probs: Vec<f64>) -> PyResult<Self> {
        env::EnvironmentModel::homogeneous(probs).map(Self).map_err(err)
    }

    #[staticmethod]
    fn mixture(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> PyResult<Self> {
        env::EnvironmentModel::mixture(atoms, weights).map(Self).map_err(err)
    }

    #[staticmethod]
    fn dirichlet(alphas: Vec<f64>) -> PyResult<Self> {
        env::EnvironmentModel::dirichlet(alphas).map(Self).map_err(err)
    }

    /// `drift` is a signed axis such as 1 or -2.
    #[staticmethod]
    fn perturbed_srw(dimension: usize, epsilon: f64, drift: i32) -> PyResult<Self> {
        let dir = env::Direction::from_signed_axis(drift, dimension).map_err(err)?;
        env::EnvironmentModel::perturbed_srw(dimension, epsilon, dir).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_dict(d: &Bound<'_, PyAny>) -> PyResult<Self> {
        let m: env::EnvironmentModel = from_py(d)?;
        m.validate().map_err(err)?;
        Ok(Self(m))
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    fn __repr__(&self) -> String {
        format!("EnvironmentModel({})", serde_json::to_string(&self.0).unwrap_or_default())
    }
}

#[pyclass(frozen, module = "rwre_lab")]
struct QuenchedEnvironment(env::QuenchedEnvironment);

#[pymethods]
impl QuenchedEnvironment {
    #[new]
    fn new(model: &EnvironmentModel, master_seed: u64) -> PyResult<Self> {
        env::QuenchedEnvironment::new(model.0.clone(), master_seed).map(Self).map_err(err)
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.0.master_seed()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    fn transition_at(&self, x: Vec<i64>) -> PyResult<Vec<f64>> {
        Ok(self.0.transition_at(&site(x)?).map_err(err)?.probs().to_vec())
    }
}

#[pyclass(frozen, from_py_object, module = "rwre_lab")]
#[derive(Clone)]
struct Trajectory(walk::Trajectory);

#[pymethods]
impl Trajectory {
    /// Steps given as signed axes: 1 is +e1, -2 is -e2.
    #[new]
    #[pyo3(signature = (dim, steps, walker_seed=0))]
    fn new(dim: usize, steps: Vec<i32>, walker_seed: u64) -> PyResult<Self> {
        walk::Trajectory::from_signed_axes(dim, walker_seed, &steps).map(Self).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn walker_seed(&self) -> u64 {
        self.0.walker_seed()
    }

    fn steps(&self) -> Vec<i32> {
        self.0.steps().iter().map(|d| d.signed_axis()).collect()
    }

    fn positions(&self) -> Vec<Vec<i64>> {
        self.0.positions().into_iter().map(|x| x.to_vec()).collect()
    }

    fn endpoint(&self) -> Vec<i64> {
        self.0.endpoint().to_vec()
    }

    fn levels(&self, l: Vec<i64>) -> Vec<i64> {
        self.0.levels(&l)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(frozen, from_py_object, module = "rwre_lab")]
#[derive(Clone)]
struct ConeSpec(cone::ConeSpec);

#[pymethods]
impl ConeSpec {
    /// `lambda_` is a rational string such as "1/2".
    #[new]
    #[pyo3(signature = (sigma, basis, l, lambda_="1"))]
    fn new(sigma: Vec<i8>, basis: Vec<Vec<i64>>, l: Vec<i64>, lambda_: &str) -> PyResult<Self> {
        cone::ConeSpec::new(sigma, basis, l, lambda(lambda_)?).map(Self).map_err(err)
    }

    fn with_lambda(&self, lambda_: &str) -> PyResult<Self> {
        self.0.with_lambda(lambda(lambda_)?).map(Self).map_err(err)
    }

    #[getter]
    fn lambda_(&self) -> String {
        self.0.lambda().to_string()
    }

    #[getter]
    fn direction(&self) -> Vec<i64> {
        self.0.direction().to_vec()
    }

    fn normals(&self) -> Vec<Vec<i64>> {
        self.0.normals().to_vec()
    }

    fn contains(&self, apex: Vec<i64>, x: Vec<i64>) -> PyResult<bool> {
        Ok(self.0.contains(&site(apex)?, &site(x)?))
    }
}

#[pyclass(frozen, from_py_object, module = "rwre_lab")]
#[derive(Clone)]
struct RenewalRecord(cone::RenewalRecord);

#[pymethods]
impl RenewalRecord {
    #[getter]
    fn times(&self) -> Vec<usize> {
        self.0.times.clone()
    }

    #[getter]
    fn positions(&self) -> Vec<Vec<i64>> {
        self.0.positions.iter().map(|x| x.to_vec()).collect()
    }

    #[getter]
    fn censored_tail(&self) -> bool {
        self.0.censored_tail
    }

    fn increments(&self) -> Vec<Vec<i64>> {
        self.0.increments().iter().map(|x| x.to_vec()).collect()
    }

    fn durations(&self) -> Vec<usize> {
        self.0.durations()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn simulate(env: &QuenchedEnvironment, walker_seed: u64, horizon: usize) -> Trajectory {
    Trajectory(walk::simulate(&env.0, walker_seed, horizon))
}

/// `sharing` is "per_walk" (a fresh environment per walk) or "shared".
#[pyfunction]
#[pyo3(signature = (model, master_seed, n_walks, horizon, sharing="per_walk"))]
fn ensemble(
    py: Python<'_>,
    model: &EnvironmentModel,
    master_seed: u64,
    n_walks: usize,
    horizon: usize,
    sharing: &str,
) -> PyResult<Vec<Trajectory>> {
    let sharing = serde_json::from_value(sharing.into()).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let ens = walk::Ensemble::new(model.0.clone(), master_seed, n_walks, horizon).map_err(err)?.with_sharing(sharing);
    let trajs = py.detach(|| ens.simulate());
    Ok(trajs.into_iter().map(Trajectory).collect())
}

#[pyfunction]
fn first_passage(traj: &Trajectory, l: Vec<i64>, s: f64) -> PyResult<Option<usize>> {
    Ok(walk::first_passage(&traj.0, &l, s).map_err(err)?.time())
}

#[pyfunction]
fn backtrack_time(traj: &Trajectory, l: Vec<i64>) -> PyResult<Option<usize>> {
    Ok(walk::backtrack_time(&traj.0, &l).map_err(err)?.time())
}

/// Returns `(side, time)` with side "left" or "right", or None.
#[pyfunction]
fn slab_exit_side(py: Python<'_>, traj: &Trajectory, normal: Vec<f64>, b: f64, width: f64) -> PyResult<Option<(Py<PyAny>, usize)>> {
    let slab = walk::Slab::new(normal, b, width).map_err(err)?;
    match walk::slab_exit_side(&traj.0, &slab).map_err(err)? {
        walk::SlabExit::Exited { side, time } => Ok(Some((to_py(py, &side)?, time))),
        walk::SlabExit::NotByHorizon => Ok(None),
    }
}

#[pyfunction]
fn cone_contains(spec: &ConeSpec, apex: Vec<i64>, x: Vec<i64>) -> PyResult<bool> {
    Ok(cone::cone_contains(&spec.0, &site(apex)?, &site(x)?))
}

#[pyfunction]
fn detect_renewals(traj: &Trajectory, spec: &ConeSpec, confirm_horizon: usize) -> PyResult<RenewalRecord> {
    cone::detect_renewals(&traj.0, &spec.0, confirm_horizon).map(RenewalRecord).map_err(err)
}

/// Returns the chosen lambda (or None) and the rate table.
#[pyfunction]
#[pyo3(signature = (trajs, base, confirm_horizon, grid_size=8, floor=cone::DEFAULT_RATE_FLOOR))]
fn lambda_scan(
    py: Python<'_>,
    trajs: Vec<Trajectory>,
    base: &ConeSpec,
    confirm_horizon: usize,
    grid_size: usize,
    floor: f64,
) -> PyResult<(Option<String>, Py<PyAny>)> {
    let trajs: Vec<_> = trajs.into_iter().map(|t| t.0).collect();
    let grid = Lambda::dyadic_grid(grid_size);
    let scan = py
        .detach(|| cone::lambda_scan(&trajs, &base.0, &grid, confirm_horizon, floor))
        .map_err(err)?;
    Ok((scan.lambda().map(|l| l.to_string()), to_py(py, &scan.table())?))
}

#[pyfunction]
#[pyo3(signature = (trajs, l, thresholds=None))]
fn classify_transience(py: Python<'_>, trajs: Vec<Trajectory>, l: Vec<f64>, thresholds: Option<&Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
    let th: Thresholds = opt_from_py(thresholds)?;
    let trajs: Vec<_> = trajs.into_iter().map(|t| t.0).collect();
    to_py(py, &stats::classify_transience(&trajs, &l, &th).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (trajs, l, thresholds=None))]
fn estimate_speed(py: Python<'_>, trajs: Vec<Trajectory>, l: Vec<f64>, thresholds: Option<&Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
    let th: Thresholds = opt_from_py(thresholds)?;
    let trajs: Vec<_> = trajs.into_iter().map(|t| t.0).collect();
    to_py(py, &stats::estimate_speed(&trajs, &l, &th).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (trajs, min_norm=0.0))]
fn estimate_direction(py: Python<'_>, trajs: Vec<Trajectory>, min_norm: f64) -> PyResult<Py<PyAny>> {
    let trajs: Vec<_> = trajs.into_iter().map(|t| t.0).collect();
    to_py(py, &stats::estimate_direction(DirectionInput::Trajectories { trajs: &trajs, min_norm }))
}

#[pyfunction]
fn estimate_direction_renewals(py: Python<'_>, records: Vec<RenewalRecord>) -> PyResult<Py<PyAny>> {
    let records: Vec<_> = records.into_iter().map(|r| r.0).collect();
    to_py(py, &stats::estimate_direction(DirectionInput::Renewals(&records)))
}

#[pyfunction]
#[pyo3(signature = (trajs, records, spec, window=None, thresholds=None, bootstrap=None))]
fn lemma5_two_sided_check(
    py: Python<'_>,
    trajs: Vec<Trajectory>,
    records: Vec<RenewalRecord>,
    spec: &ConeSpec,
    window: Option<(i64, i64)>,
    thresholds: Option<&Bound<'_, PyAny>>,
    bootstrap: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let th: Thresholds = opt_from_py(thresholds)?;
    let boot: BootstrapConfig = opt_from_py(bootstrap)?;
    let trajs: Vec<_> = trajs.into_iter().map(|t| t.0).collect();
    let records: Vec<_> = records.into_iter().map(|r| r.0).collect();
    let out = py
        .detach(|| stats::lemma5_two_sided_check(&trajs, &records, &spec.0, window, &th, &boot))
        .map_err(err)?;
    to_py(py, &out)
}

#[pyfunction]
fn independence_test(py: Python<'_>, records: Vec<RenewalRecord>) -> PyResult<Py<PyAny>> {
    let seqs: Vec<Vec<SiteCoord>> = records.into_iter().map(|r| r.0.positions).collect();
    to_py(py, &stats::independence_test(&seqs))
}

#[pyfunction]
#[pyo3(signature = (trajs, n_angles=16, thresholds=None))]
fn zero_one_scan(py: Python<'_>, trajs: Vec<Trajectory>, n_angles: usize, thresholds: Option<&Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
    let th: Thresholds = opt_from_py(thresholds)?;
    let trajs: Vec<_> = trajs.into_iter().map(|t| t.0).collect();
    to_py(py, &stats::zero_one_scan(&trajs, n_angles, &th).map_err(err)?)
}

#[pyfunction]
fn gamblers_ruin(p: f64, m: u64, n_right: u64) -> PyResult<f64> {
    if !(p > 0.0 && p < 1.0) || m == 0 || n_right == 0 {
        return Err(PyValueError::new_err("need 0 < p < 1 and barriers at distance >= 1"));
    }
    Ok(oracle::gamblers_ruin(p, m, n_right))
}

#[pyfunction]
fn solomon_1d(py: Python<'_>, model: &EnvironmentModel) -> PyResult<Py<PyAny>> {
    to_py(py, &oracle::solomon_1d(&model.0).map_err(err)?)
}

/// `region` is a dict such as `{"kind": "interval", "lo": -3, "hi": 5}`;
/// `targets` lists exit classes ("left", "right", "lateral").
#[pyfunction]
#[pyo3(signature = (env, region, start, targets=None, solver=None))]
fn exact_quenched_exit(
    py: Python<'_>,
    env: &QuenchedEnvironment,
    region: &Bound<'_, PyAny>,
    start: Vec<i64>,
    targets: Option<Vec<String>>,
    solver: Option<&Bound<'_, PyAny>>,
) -> PyResult<f64> {
    let region: RegionDescriptor = from_py(region)?;
    let opts: SolverOptions = opt_from_py(solver)?;
    let targets = self::targets(targets)?;
    let start = site(start)?;
    let env = env.0.clone();
    py.detach(|| {
        let problem = region.build(env, start)?;
        oracle::exact_quenched_exit_with(&problem, &targets, &opts).map(|s| s.probability)
    })
    .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (model, region, start, n_env, master_seed, targets=None, solver=None))]
fn annealed_exit(
    py: Python<'_>,
    model: &EnvironmentModel,
    region: &Bound<'_, PyAny>,
    start: Vec<i64>,
    n_env: usize,
    master_seed: u64,
    targets: Option<Vec<String>>,
    solver: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let region: RegionDescriptor = from_py(region)?;
    let opts: SolverOptions = opt_from_py(solver)?;
    let targets = self::targets(targets)?;
    let start = site(start)?;
    let out = py
        .detach(|| oracle::annealed_exit(&model.0, &region, start, &targets, n_env, master_seed, &opts))
        .map_err(err)?;
    to_py(py, &out)
}

/// Runs a TOML config in memory and returns its result rows.
#[pyfunction]
#[pyo3(signature = (toml_text, seed=None))]
fn execute_config(py: Python<'_>, toml_text: &str, seed: Option<u64>) -> PyResult<Py<PyAny>> {
    let cfg = ExperimentConfig::from_toml(toml_text).map_err(err)?;
    let hash = cli::config_hash(toml_text.as_bytes(), seed);
    let seed = seed.unwrap_or(cfg.master_seed);
    let report = py.detach(|| cli::execute(&cfg, seed, &hash)).map_err(err)?;
    to_py(py, &report.rows)
}

/// Same as `rwre-lab run`; returns `(status, output_dir)`.
#[pyfunction]
#[pyo3(signature = (config, out=None, seed=None, threads=1))]
fn run_config(py: Python<'_>, config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, threads: usize) -> PyResult<(String, String)> {
    let opts = RunOptions { config, out, seed, threads: threads.max(1) };
    let (status, dir) = py.detach(|| cli::run(&opts)).map_err(err)?;
    let status = match status {
        RunStatus::Ok => "ok",
        RunStatus::InsufficientData => "insufficient_data",
    };
    Ok((status.into(), dir.display().to_string()))
}

#[pymodule]
#[pyo3(name = "rwre_lab")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<EnvironmentModel>()?;
    m.add_class::<QuenchedEnvironment>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<ConeSpec>()?;
    m.add_class::<RenewalRecord>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(first_passage, m)?)?;
    m.add_function(wrap_pyfunction!(backtrack_time, m)?)?;
    m.add_function(wrap_pyfunction!(slab_exit_side, m)?)?;
    m.add_function(wrap_pyfunction!(cone_contains, m)?)?;
    m.add_function(wrap_pyfunction!(detect_renewals, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_scan, m)?)?;
    m.add_function(wrap_pyfunction!(classify_transience, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_speed, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_direction, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_direction_renewals, m)?)?;
    m.add_function(wrap_pyfunction!(lemma5_two_sided_check, m)?)?;
    m.add_function(wrap_pyfunction!(independence_test, m)?)?;
    m.add_function(wrap_pyfunction!(zero_one_scan, m)?)?;
    m.add_function(wrap_pyfunction!(gamblers_ruin, m)?)?;
    m.add_function(wrap_pyfunction!(solomon_1d, m)?)?;
    m.add_function(wrap_pyfunction!(exact_quenched_exit, m)?)?;
    m.add_function(wrap_pyfunction!(annealed_exit, m)?)?;
    m.add_function(wrap_pyfunction!(execute_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
