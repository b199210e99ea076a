//! Python bindings. Matrices cross the boundary as lists of rows and
//! vectors as lists of floats.

use std::path::PathBuf;

use coirlq::bench::{self, ExperimentConfig};
use coirlq::linops::{self, DifferenceOperator2d};
use coirlq::model::{self, ProblemSpec};
use coirlq::solver::{self, SolverConfig};
use coirlq::theory::{self, TheoryInputs};
use coirlq::{oracle, DenseMatrix, DenseVector, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(coirlq_py, CoirlqError, PyRuntimeError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Dimension(_) | Error::UnknownPreset(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => CoirlqError::new_err(other.to_string()),
    }
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != m) {
        return Err(PyValueError::new_err(format!(
            "row {bad} has {} entries, expected {m}",
            rows[bad].len()
        )));
    }
    Ok(DenseMatrix::from_row_iterator(n, m, rows.into_iter().flatten()))
}

fn from_matrix(m: &DenseMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_vector(v: Vec<f64>) -> DenseVector {
    DenseVector::from_vec(v)
}

/// A generated recovery instance.
#[pyclass(module = "coirlq_py")]
struct Problem {
    inner: model::Problem,
}

#[pymethods]
impl Problem {
    /// Tight-frame operator, l-cosparse signal of norm `signal_norm`
    /// (default sqrt(d)), Gaussian measurements and observation.
    #[staticmethod]
    #[pyo3(signature = (m, d, p, l, sigma=0.0, seed=0, signal_norm=None))]
    fn generate(
        m: usize,
        d: usize,
        p: usize,
        l: usize,
        sigma: f64,
        seed: u64,
        signal_norm: Option<f64>,
    ) -> PyResult<Self> {
        let spec = ProblemSpec {
            m,
            d,
            p,
            l,
            sigma,
            signal_norm: signal_norm.unwrap_or((d as f64).sqrt()),
        };
        let inner = model::Problem::generate(&spec, seed).map_err(py_err)?;
        Ok(Problem { inner })
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let inner = model::Problem::load(dir).map_err(py_err)?;
        Ok(Problem { inner })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.save(dir).map_err(py_err)
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.a)
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.as_slice().to_vec()
    }

    #[getter]
    fn omega(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.omega)
    }

    #[getter]
    fn x_true(&self) -> Vec<f64> {
        self.inner.x_true.as_slice().to_vec()
    }

    #[getter]
    fn cosupport(&self) -> Vec<usize> {
        self.inner.cosupport.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Runs the solver on this instance.
    #[pyo3(signature = (q=0.7, lam=1e-4, l=None, max_iter=1000))]
    fn solve(&self, q: f64, lam: f64, l: Option<usize>, max_iter: usize) -> PyResult<SolveResult> {
        let config = SolverConfig {
            q,
            lambda: lam,
            l: l.unwrap_or(self.inner.cosupport.len().max(1)),
            max_iter,
            ..SolverConfig::default()
        };
        let p = &self.inner;
        let result = solver::solve(&p.a, &p.y, &p.omega, &config).map_err(py_err)?;
        Ok(SolveResult::from(result))
    }

    fn __repr__(&self) -> String {
        let m = self.inner.meta();
        format!(
            "Problem(m={}, d={}, p={}, l={}, sigma={}, seed={})",
            m.m, m.d, m.p, m.l, m.sigma, m.seed
        )
    }
}

#[pyclass(module = "coirlq_py", get_all)]
struct SolveResult {
    x_hat: Vec<f64>,
    iterations: usize,
    converged: bool,
    initial_objective: f64,
    final_objective: f64,
    /// `(k, F, eps, diff_inf)` per iteration.
    trace: Vec<(usize, f64, f64, f64)>,
}

impl From<solver::SolverResult> for SolveResult {
    fn from(r: solver::SolverResult) -> Self {
        SolveResult {
            final_objective: r.final_objective(),
            x_hat: r.x_hat.as_slice().to_vec(),
            iterations: r.iterations,
            converged: r.converged,
            initial_objective: r.initial_objective,
            trace: r
                .trace
                .iter()
                .map(|t| (t.k, t.objective, t.eps, t.diff_inf))
                .collect(),
        }
    }
}

#[pymethods]
impl SolveResult {
    fn __repr__(&self) -> String {
        format!(
            "SolveResult(iterations={}, converged={}, final_objective={:e})",
            self.iterations, self.converged, self.final_objective
        )
    }
}

/// Matrix-free 2D forward-difference operator on an h x w image.
#[pyclass(module = "coirlq_py")]
struct DifferenceOperator {
    inner: DifferenceOperator2d,
}

#[pymethods]
impl DifferenceOperator {
    #[new]
    fn new(height: usize, width: usize) -> PyResult<Self> {
        let inner = linops::fd2d_operator(height, width).map_err(py_err)?;
        Ok(DifferenceOperator { inner })
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.apply(&x).map_err(py_err)
    }

    fn apply_transpose(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.apply_transpose(&z).map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (p, d, seed=0))]
fn random_tight_frame(p: usize, d: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let omega = linops::random_tight_frame(p, d, seed).map_err(py_err)?;
    Ok(from_matrix(&omega))
}

#[pyfunction]
#[pyo3(signature = (a, y, omega, q=0.7, lam=1e-4, l=1, shrink=0.5, tau=1e-8, max_iter=1000, eps0=1.0))]
#[allow(clippy::too_many_arguments)]
fn solve(
    a: Vec<Vec<f64>>,
    y: Vec<f64>,
    omega: Vec<Vec<f64>>,
    q: f64,
    lam: f64,
    l: usize,
    shrink: f64,
    tau: f64,
    max_iter: usize,
    eps0: f64,
) -> PyResult<SolveResult> {
    let config = SolverConfig {
        q,
        lambda: lam,
        l,
        shrink,
        tau,
        max_iter,
        eps0,
        ..SolverConfig::default()
    };
    let (a, omega) = (to_matrix(a)?, to_matrix(omega)?);
    let result = solver::solve(&a, &to_vector(y), &omega, &config).map_err(py_err)?;
    Ok(result.into())
}

/// Global minimizer of |Omega x|_q^q subject to |y - A x| <= noise_bound.
#[pyfunction]
#[pyo3(signature = (a, y, omega, q, noise_bound=0.0, l_min=1))]
fn brute_force_lq<'py>(
    py: Python<'py>,
    a: Vec<Vec<f64>>,
    y: Vec<f64>,
    omega: Vec<Vec<f64>>,
    q: f64,
    noise_bound: f64,
    l_min: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let (a, omega) = (to_matrix(a)?, to_matrix(omega)?);
    let r = oracle::brute_force_lq(&a, &to_vector(y), &omega, q, noise_bound, l_min)
        .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("x_star", r.x_star)?;
    out.set_item("objective", r.objective)?;
    out.set_item("cosupport", r.cosupport)?;
    out.set_item("residual", r.residual)?;
    out.set_item("feasible", r.feasible)?;
    Ok(out)
}

#[pyfunction]
fn analysis_lq(omega: Vec<Vec<f64>>, x: Vec<f64>, q: f64) -> PyResult<f64> {
    Ok(solver::analysis_lq(&to_matrix(omega)?, &to_vector(x), q))
}

#[pyfunction]
fn relative_error(x_hat: Vec<f64>, x_true: Vec<f64>) -> PyResult<f64> {
    model::relative_error(&to_vector(x_hat), &to_vector(x_true)).map_err(py_err)
}

/// `(C1, C2)` of the recovery error bound.
#[pyfunction]
#[pyo3(signature = (delta_rho_s, delta_rho1_s, rho, q, kappa=1.0, s=1, sigma_min=1.0))]
fn theorem1_constants(
    delta_rho_s: f64,
    delta_rho1_s: f64,
    rho: f64,
    q: f64,
    kappa: f64,
    s: u64,
    sigma_min: f64,
) -> PyResult<(f64, f64)> {
    let c = theory::theorem1_constants(&TheoryInputs {
        delta_rho_s,
        delta_rho1_s,
        kappa,
        block_ratio: rho,
        q,
        s,
        sigma_min,
    })
    .map_err(py_err)?;
    Ok((c.c1, c.c2))
}

#[pyfunction]
#[pyo3(signature = (delta_rho_s, delta_rho1_s, rho, q, kappa=1.0))]
fn check_condition(delta_rho_s: f64, delta_rho1_s: f64, rho: f64, q: f64, kappa: f64) -> PyResult<bool> {
    theory::check_condition(&TheoryInputs {
        delta_rho_s,
        delta_rho1_s,
        kappa,
        block_ratio: rho,
        q,
        s: 1,
        sigma_min: 1.0,
    })
    .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (q, rho, kappa=1.0))]
fn strong_threshold(q: f64, rho: f64, kappa: f64) -> PyResult<f64> {
    theory::strong_threshold(kappa, q, rho).map_err(py_err)
}

/// `(S_q, rho_q)` with `(rho_q + 1) S_q = (rho_1 + 1) S_1`.
#[pyfunction]
fn sq_from_s1(s1: u64, rho1: f64, q: f64) -> PyResult<(u64, f64)> {
    let lvl = theory::sq_from_s1(s1, rho1, q).map_err(py_err)?;
    Ok((lvl.s_q, lvl.rho_q()))
}

/// `(q, rho, threshold)` for the smallest feasible grid q, or None.
#[pyfunction]
#[pyo3(signature = (delta, kappa=1.0))]
fn min_feasible_q(delta: f64, kappa: f64) -> PyResult<Option<(f64, f64, f64)>> {
    let found = theory::min_feasible_q(delta, kappa, &theory::default_q_grid(), &theory::default_rho_grid())
        .map_err(py_err)?;
    Ok(found.map(|f| (f.q, f.rho, f.threshold)))
}

#[pyfunction]
#[pyo3(signature = (delta, f0, noise=0.0))]
fn theorem3_bound(delta: f64, f0: f64, noise: f64) -> PyResult<f64> {
    theory::theorem3_bound(delta, f0, noise).map_err(py_err)
}

/// Named experiment configuration as a JSON string.
#[pyfunction]
fn preset(name: &str) -> PyResult<String> {
    let config = bench::preset(name).map_err(py_err)?;
    serde_json::to_string(&config).map_err(|e| CoirlqError::new_err(e.to_string()))
}

/// Runs a success-rate grid from a JSON config and returns the CSV text.
#[pyfunction]
fn phase_grid(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let config: ExperimentConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let cells = py
        .detach(|| bench::phase_grid(&config))
        .map_err(py_err)?;
    bench::format_csv(&cells).map_err(py_err)
}

#[pymodule]
pub fn coirlq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CoirlqError", m.py().get_type::<CoirlqError>())?;
    m.add_class::<Problem>()?;
    m.add_class::<SolveResult>()?;
    m.add_class::<DifferenceOperator>()?;
    m.add_function(wrap_pyfunction!(random_tight_frame, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_lq, m)?)?;
    m.add_function(wrap_pyfunction!(analysis_lq, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(theorem1_constants, m)?)?;
    m.add_function(wrap_pyfunction!(check_condition, m)?)?;
    m.add_function(wrap_pyfunction!(strong_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(sq_from_s1, m)?)?;
    m.add_function(wrap_pyfunction!(min_feasible_q, m)?)?;
    m.add_function(wrap_pyfunction!(theorem3_bound, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(phase_grid, m)?)?;
    Ok(())
}
