use std::path::PathBuf;

use phasect::phasediagram::{self as pd, DiagramKind, GeometryKind, GridOverrides, RateGrid, RunOptions};
use phasect::phantoms::{self, Gradient, ImageClass};
use phasect::predict::{predict_views_almt, predict_views_dt, PredictionInput};
use phasect::sensing::{self, FanbeamConfig};
use phasect::solvers::{self, ProblemKind, SolverConfig};
use phasect::theory::{self, Coords, Curve, CurveKind, PsiKind};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: phasect::Error) -> PyErr {
    match e {
        phasect::Error::InvalidArgument(_)
        | phasect::Error::DimensionMismatch { .. }
        | phasect::Error::Parse(_)
        | phasect::Error::Curve(_)
        | phasect::Error::OutsideSupport(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = phasect::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// Sparse or dense measurement matrix over a disk-shaped image.
#[pyclass(name = "SensingMatrix", frozen)]
pub struct PySensingMatrix {
    inner: sensing::SensingMatrix,
}

#[pymethods]
impl PySensingMatrix {
    #[staticmethod]
    #[pyo3(signature = (n_side, n_views, offset_deg = sensing::DEFAULT_OFFSET_DEG))]
    fn fanbeam(n_side: usize, n_views: usize, offset_deg: f64) -> PyResult<Self> {
        let cfg = FanbeamConfig {
            offset_deg,
            ..FanbeamConfig::new(n_side, n_views)
        };
        Ok(Self {
            inner: sensing::build_fanbeam(&cfg).map_err(err)?,
        })
    }

    #[staticmethod]
    fn fanbeam_random(n_side: usize, n_views: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: sensing::build_fanbeam_random(n_side, n_views, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn random_rays(n_side: usize, n_rays: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: sensing::build_random_rays(n_side, n_rays, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn gaussian(m: usize, n: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: sensing::build_gaussian(m, n, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: phasect::io::read_matrix_market(&path).map_err(err)?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        phasect::io::write_matrix_market(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id()
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.apply(&x).map_err(err)
    }

    fn apply_transpose(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.apply_transpose(&y).map_err(err)
    }

    /// Row-major dense copy.
    fn to_dense(&self) -> Vec<Vec<f64>> {
        let d = self.inner.to_dense();
        (0..d.nrows()).map(|i| d.row(i).iter().copied().collect()).collect()
    }

    fn spectral_norm(&self) -> PyResult<f64> {
        phasect::operator::spectral_norm(&self.inner, 1e-10).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("SensingMatrix({}, {}x{})", self.inner.id(), self.inner.m(), self.inner.n())
    }
}

#[pyfunction]
fn disk_pixel_count(n_side: usize) -> PyResult<usize> {
    Ok(sensing::disk_mask(n_side).map_err(err)?.n_pixels())
}

/// Draw an image of `image_class` with sparsity `s` on the `n_side` disk.
#[pyfunction]
fn phantom(image_class: &str, n_side: usize, s: usize, seed: u64) -> PyResult<Vec<f64>> {
    let mask = sensing::disk_mask(n_side).map_err(err)?;
    phantoms::generate(parse::<ImageClass>(image_class)?, &mask, s, seed).map_err(err)
}

#[pyfunction]
fn gradient_sparsity(x: Vec<f64>, n_side: usize) -> PyResult<usize> {
    let mask = sensing::disk_mask(n_side).map_err(err)?;
    Gradient::new(&mask).sparsity(&x, None).map_err(err)
}

/// Solve P1, LP or TV from data `b`. Returns a dict with the solution, its
/// objective and residual, and the iteration history.
#[pyfunction]
#[pyo3(signature = (matrix, b, problem, lambda_ = None, max_iter = None, feas_tol = None, n_side = None, reference = None, oracle = false))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    matrix: &PySensingMatrix,
    b: Vec<f64>,
    problem: &str,
    lambda_: Option<f64>,
    max_iter: Option<usize>,
    feas_tol: Option<f64>,
    n_side: Option<usize>,
    reference: Option<Vec<f64>>,
    oracle: bool,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let kind: ProblemKind = parse(problem)?;
    let base = SolverConfig::new(kind);
    let cfg = SolverConfig {
        lambda: lambda_.unwrap_or(base.lambda),
        max_iter: max_iter.unwrap_or(base.max_iter),
        feas_tol: feas_tol.unwrap_or(base.feas_tol),
        ..base
    };
    let gradient = match (kind, n_side) {
        (ProblemKind::TV, Some(n)) => Some(Gradient::new(&sensing::disk_mask(n).map_err(err)?)),
        (ProblemKind::TV, None) => return Err(PyValueError::new_err("TV needs n_side")),
        _ => None,
    };
    let a = &matrix.inner;
    let sol = py
        .detach(|| {
            if oracle {
                solvers::lp_oracle(kind, a, &b)
            } else {
                solvers::solve_cp(&cfg, a, &b, gradient.as_ref(), reference.as_deref())
            }
        })
        .map_err(err)?;
    let d = pyo3::types::PyDict::new(py);
    let history: Vec<(usize, f64, f64, Option<f64>)> = sol
        .history
        .iter()
        .map(|h| (h.iteration, h.objective, h.residual, h.image_rmse))
        .collect();
    d.set_item("x", sol.x)?;
    d.set_item("iterations_run", sol.iterations_run)?;
    d.set_item("objective", sol.primal_objective)?;
    d.set_item("residual", sol.data_residual)?;
    d.set_item("history", history)?;
    Ok(d)
}

/// `(relative_error, success)` with the strict threshold `epsilon`.
#[pyfunction]
fn check_recovery(x: Vec<f64>, x_orig: Vec<f64>, epsilon: f64) -> PyResult<(f64, bool)> {
    let r = solvers::check_recovery(&x, &x_orig, epsilon).map_err(err)?;
    Ok((r.relative_error, r.success))
}

#[pyfunction]
fn psi_l1(beta: f64) -> f64 {
    theory::psi_l1(beta)
}

#[pyfunction]
fn psi_l1_nonneg(beta: f64) -> f64 {
    theory::psi_l1_nonneg(beta)
}

/// Weak DT curve `(delta, rho)` from the fixed points of `psi`.
#[pyfunction]
#[pyo3(signature = (rho_grid, kind = "l1"))]
fn dt_curve(rho_grid: Vec<f64>, kind: &str) -> PyResult<Vec<(f64, f64)>> {
    let c = theory::dt_curve_from_psi(parse::<PsiKind>(kind)?, &rho_grid).map_err(err)?;
    Ok(c.points().to_vec())
}

fn curve(points: Vec<(f64, f64)>, coords: &str) -> PyResult<Curve> {
    Curve::new(parse::<Coords>(coords)?, points, CurveKind::Imported, "python").map_err(err)
}

#[pyfunction]
fn convert_coords(points: Vec<(f64, f64)>, source: &str, target: &str) -> PyResult<Vec<(f64, f64)>> {
    let c = theory::convert_coords(&curve(points, source)?, parse(target)?).map_err(err)?;
    Ok(c.points().to_vec())
}

/// Fractional critical view count for sparsity `s` read off `points`.
#[pyfunction]
fn predict_views(points: Vec<(f64, f64)>, coords: &str, s: f64, n: usize, rays_per_view: usize) -> PyResult<f64> {
    let c = curve(points, coords)?;
    let kind = c.coords();
    let input = PredictionInput::new(s, n, rays_per_view, c).map_err(err)?;
    let p = match kind {
        Coords::Almt => predict_views_almt(&input),
        Coords::Dt => predict_views_dt(&input),
    }
    .map_err(err)?;
    Ok(p.views_fractional)
}

/// Success-rate grid of a finished diagram.
#[pyclass(name = "RateGrid", frozen)]
pub struct PyRateGrid {
    inner: RateGrid,
}

#[pymethods]
impl PyRateGrid {
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: RateGrid::read(&path).map_err(err)?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write(&path).map_err(err)
    }

    #[getter]
    fn sparsity(&self) -> Vec<f64> {
        self.inner.sparsity.clone()
    }

    #[getter]
    fn sampling(&self) -> Vec<f64> {
        self.inner.sampling.clone()
    }

    /// Rates indexed `[sparsity level][sampling level]`.
    fn rates(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.inner.n_sparsity())
            .map(|i| (0..self.inner.n_sampling()).map(|j| self.inner.get(i, j)).collect())
            .collect()
    }

    /// Main-branch crossings of `level` as `(abscissa, ordinate)` pairs.
    #[pyo3(signature = (level = 0.5))]
    fn contour(&self, level: f64) -> PyResult<Vec<(f64, f64)>> {
        Ok(pd::extract_contour(&self.inner, level).map_err(err)?.curve.points().to_vec())
    }
}

/// Sweep a phase diagram and return `(results, rate_grid)`; `results` is a
/// list of dicts with the results.csv columns.
#[pyfunction]
#[pyo3(signature = (diagram_type, geometry, image_class, problem, n_side, sampling = None, sparsity = None, realizations = None, seed = 0, workers = 1, n_pixels = None))]
#[allow(clippy::too_many_arguments)]
fn run_diagram<'py>(
    py: Python<'py>,
    diagram_type: &str,
    geometry: &str,
    image_class: &str,
    problem: &str,
    n_side: usize,
    sampling: Option<Vec<usize>>,
    sparsity: Option<Vec<f64>>,
    realizations: Option<usize>,
    seed: u64,
    workers: usize,
    n_pixels: Option<usize>,
) -> PyResult<(Vec<Bound<'py, pyo3::types::PyDict>>, PyRateGrid)> {
    let kind: DiagramKind = parse(diagram_type)?;
    let problem: ProblemKind = parse(problem)?;
    let spec = pd::plan_grid(
        kind,
        parse::<GeometryKind>(geometry)?,
        parse(image_class)?,
        problem,
        n_side,
        GridOverrides {
            sampling_levels: sampling,
            sparsity_levels: sparsity,
            realizations,
            master_seed: Some(seed),
            n_pixels,
            solver: Some(SolverConfig::desk(problem)),
            oracle_max_vars: None,
        },
    )
    .map_err(err)?;
    let opts = RunOptions {
        workers,
        ..Default::default()
    };
    let res = py.detach(|| pd::run_diagram(&spec, &opts)).map_err(err)?;
    let rows = res
        .results
        .iter()
        .map(|r| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("diagram_kind", r.diagram_kind.as_str())?;
            d.set_item("i", r.i)?;
            d.set_item("j", r.j)?;
            d.set_item("r", r.r)?;
            d.set_item("s", r.s)?;
            d.set_item("m", r.m)?;
            d.set_item("n_views", r.n_views)?;
            d.set_item("seed", r.seed)?;
            d.set_item("relative_error", r.relative_error)?;
            d.set_item("success", r.success)?;
            d.set_item("iterations", r.iterations)?;
            d.set_item("wall_time_s", r.wall_time_s)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let grid = res
        .rates
        .ok_or_else(|| PyRuntimeError::new_err("diagram incomplete"))?;
    Ok((rows, PyRateGrid { inner: grid }))
}

#[pymodule]
fn phasect_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySensingMatrix>()?;
    m.add_class::<PyRateGrid>()?;
    m.add_function(wrap_pyfunction!(disk_pixel_count, m)?)?;
    m.add_function(wrap_pyfunction!(phantom, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_sparsity, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(check_recovery, m)?)?;
    m.add_function(wrap_pyfunction!(psi_l1, m)?)?;
    m.add_function(wrap_pyfunction!(psi_l1_nonneg, m)?)?;
    m.add_function(wrap_pyfunction!(dt_curve, m)?)?;
    m.add_function(wrap_pyfunction!(convert_coords, m)?)?;
    m.add_function(wrap_pyfunction!(predict_views, m)?)?;
    m.add_function(wrap_pyfunction!(run_diagram, m)?)?;
    Ok(())
}
