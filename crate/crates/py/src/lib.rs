use std::str::FromStr;

use lgmm::csv::group_row;
use lgmm::dh::{dh_sample as sample_leaf, DhFamily, DhMeasure};
use lgmm::error::Error;
use lgmm::fokker_planck::{
    mollified_delta, solve_fp_with, stability_bound, DensityGrid, FpEquation, FpOptions,
};
use lgmm::group::{
    project_state, simulate_group_ensemble, GroupOptions, Manifold, Projection, Scheme,
};
use lgmm::manifold::{h3_distance, h3_from_halfspace, HPoint, HalfSpacePoint, Su2Point};
use lgmm::noise::SeedRecord;
use lgmm::sde::{integrate_ensemble, integrate_path, SdeSystem, SystemId};
use lgmm::verify::{run_check, CheckConfig, CheckId};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn err(e: Error) -> PyErr {
    match e {
        Error::Integration { .. } | Error::SchemeFailure(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// An element `[[a, b], [−b̄, ā]]` of SU(2).
#[pyclass(name = "Su2Point", frozen, from_py_object)]
#[derive(Clone)]
struct PySu2Point(Su2Point);

#[pymethods]
impl PySu2Point {
    #[new]
    fn new(a: Complex64, b: Complex64) -> PyResult<Self> {
        Su2Point::new(a, b).map(PySu2Point).map_err(err)
    }

    #[staticmethod]
    fn normalize(a: Complex64, b: Complex64) -> PyResult<Self> {
        Su2Point::normalize(a, b).map(PySu2Point).map_err(err)
    }

    #[getter]
    fn a(&self) -> Complex64 {
        self.0.a()
    }

    #[getter]
    fn b(&self) -> Complex64 {
        self.0.b()
    }

    fn trace_angle(&self) -> f64 {
        self.0.trace_angle()
    }

    fn project_a(&self) -> (f64, f64) {
        self.0.project_a()
    }

    fn __mul__(&self, other: &PySu2Point) -> PySu2Point {
        PySu2Point(self.0.mul(&other.0))
    }

    fn __repr__(&self) -> String {
        format!("Su2Point(a={}, b={})", self.0.a(), self.0.b())
    }
}

/// A positive Hermitian matrix `[[a, b], [b̄, c]]` of unit determinant.
#[pyclass(name = "HPoint", frozen, from_py_object)]
#[derive(Clone)]
struct PyHPoint(HPoint);

#[pymethods]
impl PyHPoint {
    #[new]
    fn new(a: f64, b: Complex64, c: f64) -> PyResult<Self> {
        HPoint::new(a, b, c).map(PyHPoint).map_err(err)
    }

    #[staticmethod]
    fn from_halfspace(x1: f64, x2: f64, y: f64) -> PyResult<Self> {
        HalfSpacePoint::new(x1, x2, y)
            .map(|p| PyHPoint(h3_from_halfspace(&p)))
            .map_err(err)
    }

    #[getter]
    fn a(&self) -> f64 {
        self.0.a()
    }

    #[getter]
    fn b(&self) -> Complex64 {
        self.0.b()
    }

    #[getter]
    fn c(&self) -> f64 {
        self.0.c()
    }

    fn radial_lambda(&self) -> f64 {
        self.0.radial_lambda()
    }

    fn project_wc(&self) -> (f64, f64) {
        self.0.project_wc()
    }

    fn distance(&self, other: &PyHPoint) -> f64 {
        h3_distance(&self.0, &other.0)
    }

    fn __repr__(&self) -> String {
        format!(
            "HPoint(a={}, b={}, c={})",
            self.0.a(),
            self.0.b(),
            self.0.c()
        )
    }
}

/// Endpoints of Brownian motion on `manifold`, as coordinate rows or, with
/// `projection`, as projected rows.
#[pyfunction]
#[pyo3(signature = (manifold, t, n_steps, n_paths, seed=1, scheme=None, projection=None, renormalize=false))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    manifold: &str,
    t: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    scheme: Option<&str>,
    projection: Option<&str>,
    renormalize: bool,
) -> PyResult<Vec<Vec<f64>>> {
    let m: Manifold = parse(manifold)?;
    let s = match scheme {
        Some(s) => parse::<Scheme>(s)?,
        None => m.default_scheme(),
    };
    let proj = projection.map(parse::<Projection>).transpose()?;
    py.detach(|| {
        let states = simulate_group_ensemble(
            m,
            s,
            t,
            n_steps,
            n_paths,
            seed,
            GroupOptions { renormalize },
        )?;
        states
            .iter()
            .map(|g| proj.map_or_else(|| Ok(group_row(g)), |p| project_state(g, p)))
            .collect::<Result<Vec<_>, Error>>()
    })
    .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (system, t, n_steps, n_paths, seed=1, x0=None))]
fn sde_ensemble(
    py: Python<'_>,
    system: &str,
    t: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    x0: Option<Vec<f64>>,
) -> PyResult<Vec<Vec<f64>>> {
    let sys = SdeSystem::new(parse(system)?);
    let x0 = x0.unwrap_or_else(|| sys.natural_start()[..sys.dimension()].to_vec());
    let e = py
        .detach(|| integrate_ensemble(&sys, &x0, t, n_steps, n_paths, seed))
        .map_err(err)?;
    Ok((0..e.len()).map(|i| e.endpoint(i).to_vec()).collect())
}

/// One path as `n_steps + 1` state rows; stream `stream` of `seed`.
#[pyfunction]
#[pyo3(signature = (system, t, n_steps, seed=1, stream=0, x0=None, noise_scale=1.0))]
#[allow(clippy::too_many_arguments)]
fn sde_path(
    system: &str,
    t: f64,
    n_steps: usize,
    seed: u64,
    stream: u64,
    x0: Option<Vec<f64>>,
    noise_scale: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let id: SystemId = parse(system)?;
    let sys = SdeSystem::new(id);
    let x0 = x0.unwrap_or_else(|| sys.natural_start()[..sys.dimension()].to_vec());
    let p = integrate_path(
        &sys,
        &x0,
        t,
        n_steps,
        SeedRecord::new(seed, stream),
        noise_scale,
    )
    .map_err(err)?;
    Ok((0..p.len()).map(|k| p.state(k).to_vec()).collect())
}

/// Solves `equation` from `init` (`"delta"` or `"uniform"`) and returns the
/// grid axes, the row-major values and the solve diagnostics.
#[pyfunction]
#[pyo3(signature = (equation, nodes, t, init="delta", dt=None, eps=None, lambda_max=3.0, leakage_tolerance=1e-4))]
#[allow(clippy::too_many_arguments)]
fn fp_solve<'py>(
    py: Python<'py>,
    equation: &str,
    nodes: usize,
    t: f64,
    init: &str,
    dt: Option<f64>,
    eps: Option<f64>,
    lambda_max: f64,
    leakage_tolerance: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let eq: FpEquation = parse(equation)?;
    let domain = eq.domain(lambda_max);
    let ny = if eq.dimension() == 2 { nodes } else { 0 };
    let sol = py
        .detach(|| {
            let grid = DensityGrid::zeros(domain, nodes, ny)?;
            let p0 = match init {
                "uniform" => DensityGrid::uniform(domain, nodes, ny)?,
                "delta" => mollified_delta(
                    eq.manifold(),
                    eps.unwrap_or(5.0 * grid.hx().max(grid.hy())),
                    &grid,
                )?,
                other => return Err(Error::Config(format!("unknown init '{other}'"))),
            };
            let dt = match dt {
                Some(dt) => dt,
                None => stability_bound(eq, &grid)?.unwrap_or(1e-4),
            };
            solve_fp_with(
                eq,
                &p0,
                t,
                dt,
                FpOptions {
                    leakage_tolerance,
                    ..FpOptions::default()
                },
            )
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("xs", &sol.grid.xs)?;
    d.set_item("ys", &sol.grid.ys)?;
    d.set_item("values", &sol.grid.values)?;
    d.set_item("steps", sol.steps)?;
    d.set_item("dt", sol.dt)?;
    d.set_item("mass_drift", sol.mass_drift())?;
    d.set_item("leakage", sol.leakage)?;
    Ok(d)
}

#[pyfunction]
fn dh_support(family: &str, parameter: f64) -> PyResult<(f64, f64)> {
    Ok(DhMeasure::new(parse(family)?, parameter)
        .map_err(err)?
        .support())
}

#[pyfunction]
fn dh_density(family: &str, parameter: f64, point: f64) -> PyResult<f64> {
    Ok(DhMeasure::new(parse(family)?, parameter)
        .map_err(err)?
        .normalized_density(point))
}

#[pyfunction]
fn dh_volume(family: &str, parameter: f64) -> PyResult<f64> {
    Ok(DhMeasure::new(parse(family)?, parameter)
        .map_err(err)?
        .volume())
}

#[pyfunction]
#[pyo3(signature = (family, parameter, n, seed=1))]
fn dh_sample(family: &str, parameter: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let f: DhFamily = parse(family)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| sample_leaf(f, parameter, &mut rng))
        .collect::<Result<_, _>>()
        .map_err(err)
}

#[pyfunction]
fn check_ids() -> Vec<&'static str> {
    CheckId::ALL.iter().map(|c| c.name()).collect()
}

/// Runs a named check with its default sizes, overridden by the keywords.
#[pyfunction]
#[pyo3(signature = (check, paths=None, t=None, dt=None, seed=None, nodes=None, half_width=None, bins=None))]
#[allow(clippy::too_many_arguments)]
fn verify<'py>(
    py: Python<'py>,
    check: &str,
    paths: Option<usize>,
    t: Option<f64>,
    dt: Option<f64>,
    seed: Option<u64>,
    nodes: Option<usize>,
    half_width: Option<f64>,
    bins: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let id: CheckId = parse(check)?;
    let d = CheckConfig::defaults(id);
    let cfg = CheckConfig {
        paths: paths.unwrap_or(d.paths),
        t: t.unwrap_or(d.t),
        dt: dt.unwrap_or(d.dt),
        seed: seed.unwrap_or(d.seed),
        nodes: nodes.unwrap_or(d.nodes),
        half_width: half_width.unwrap_or(d.half_width),
        bins: bins.unwrap_or(d.bins),
        ..d
    };
    let r = py.detach(|| run_check(id, &cfg)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("name", &r.name)?;
    out.set_item("pass", r.pass)?;
    out.set_item("statistic", r.statistic)?;
    out.set_item("p_value", r.p_value)?;
    out.set_item("distance", r.distance)?;
    out.set_item("threshold", r.threshold)?;
    out.set_item("parameters", r.parameters.clone())?;
    out.set_item("labels", r.labels.clone())?;
    Ok(out)
}

#[pymodule]
fn lgmm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySu2Point>()?;
    m.add_class::<PyHPoint>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sde_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(sde_path, m)?)?;
    m.add_function(wrap_pyfunction!(fp_solve, m)?)?;
    m.add_function(wrap_pyfunction!(dh_support, m)?)?;
    m.add_function(wrap_pyfunction!(dh_density, m)?)?;
    m.add_function(wrap_pyfunction!(dh_volume, m)?)?;
    m.add_function(wrap_pyfunction!(dh_sample, m)?)?;
    m.add_function(wrap_pyfunction!(check_ids, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
