//! Iteratively reweighted lq-analysis minimization (CoIRLq).
//!
//! Minimizes `1/2 |y - A x|^2 + lambda * sum_i |omega_i x|^q` by alternating
//! three closed-form steps on the smoothed surrogate
//!
//! ```text
//! F(x, eps) = 1/2 |y - A x|^2 + lambda * sum_i (|omega_i x|^alpha + eps^alpha)^(q/alpha)
//! ```
//!
//! 1. weights `eta_i = (|omega_i x|^alpha + eps^alpha)^(q/alpha - 1)`,
//! 2. the weighted least-squares step in `x` (alpha = 2),
//! 3. `eps <- min(eps, shrink * r_l(Omega x))`, where `r_l` is the `l`-th
//!    smallest analysis magnitude.
//!
//! Every iteration does not increase `F`, which the trace records.

use nalgebra::linalg::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{DenseMatrix, DenseVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub q: f64,
    pub alpha: f64,
    pub lambda: f64,
    /// Target cosparsity used by the smoothing update.
    pub l: usize,
    /// Factor in `(0, 1)` applied to the `l`-th smallest coefficient.
    pub shrink: f64,
    /// Stopping tolerance on `|x_{k+1} - x_k|_inf`.
    pub tau: f64,
    pub eps0: f64,
    /// Smoothing values at or below this are treated as zero.
    pub eps_floor: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            q: 0.7,
            alpha: 2.0,
            lambda: 1e-4,
            l: 1,
            shrink: 0.5,
            tau: 1e-8,
            eps0: 1.0,
            eps_floor: 1e-12,
            max_iter: 1000,
        }
    }
}

impl SolverConfig {
    pub fn with_cosparsity(l: usize) -> Self {
        Self {
            l,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.q > 0.0 && self.q <= 1.0) {
            return bad(format!("q must lie in (0, 1], got {}", self.q));
        }
        if !(self.alpha >= 1.0) {
            return bad(format!("alpha must be >= 1, got {}", self.alpha));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad(format!("shrink must lie in (0, 1), got {}", self.shrink));
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.eps0 > 0.0) || !(self.eps_floor >= 0.0) {
            return bad(format!(
                "need eps0 > 0 and eps_floor >= 0, got {} and {}",
                self.eps0, self.eps_floor
            ));
        }
        if self.l == 0 || self.max_iter == 0 {
            return bad("l and max_iter must be positive".into());
        }
        Ok(())
    }
}

/// `eta_i = (|z_i|^alpha + eps^alpha)^(q/alpha - 1)`.
pub fn weight_update(z: &DenseVector, eps: f64, q: f64, alpha: f64) -> Result<DenseVector> {
    if !(q > 0.0 && q <= 1.0) || !(alpha >= 1.0) || !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "weight update needs q in (0,1], alpha >= 1, eps >= 0; got q={q} alpha={alpha} eps={eps}"
        )));
    }
    let exponent = q / alpha - 1.0;
    let eps_pow = eps.powf(alpha);
    let mut eta = DenseVector::zeros(z.len());
    for (i, zi) in z.iter().enumerate() {
        let base = zi.abs().powf(alpha) + eps_pow;
        if base == 0.0 {
            return Err(Error::InfiniteWeight { index: i });
        }
        let w = base.powf(exponent);
        if !w.is_finite() {
            return Err(Error::InfiniteWeight { index: i });
        }
        eta[i] = w;
    }
    Ok(eta)
}

fn check_shapes(a: &DenseMatrix, y: &DenseVector, omega: &DenseMatrix) -> Result<()> {
    if a.nrows() != y.len() || a.ncols() != omega.ncols() || a.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "A is {}x{}, y has length {}, Omega is {}x{}",
            a.nrows(),
            a.ncols(),
            y.len(),
            omega.nrows(),
            omega.ncols()
        )));
    }
    Ok(())
}

/// Solves the alpha = 2 weighted step
/// `min_x 1/2 |y - A x|^2 + (lambda q / 2) sum_i eta_i (omega_i x)^2`,
/// i.e. `(A^T A + lambda q Omega^T diag(eta) Omega) x = A^T y`.
///
/// The primary route is a Householder QR of the stacked least-squares system
/// `[sqrt(lambda q eta) Omega; A] x ~ [0; y]` with the heaviest rows first,
/// which stays accurate when some weights are ~1e15. If the triangular factor
/// is numerically singular the normal equations are factored by Cholesky
/// instead, with one ridge-regularized retry.
pub fn x_update(
    a: &DenseMatrix,
    y: &DenseVector,
    omega: &DenseMatrix,
    eta: &DenseVector,
    lambda: f64,
    q: f64,
) -> Result<DenseVector> {
    check_shapes(a, y, omega)?;
    if eta.len() != omega.nrows() {
        return Err(Error::Dimension(format!(
            "{} weights for {} analysis rows",
            eta.len(),
            omega.nrows()
        )));
    }
    if eta.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument("weights must be finite and >= 0".into()));
    }
    if let Some(x) = stacked_qr_solve(a, y, omega, eta, lambda * q) {
        return Ok(x);
    }
    normal_equations_solve(a, y, omega, eta, lambda * q)
}

fn stacked_qr_solve(
    a: &DenseMatrix,
    y: &DenseVector,
    omega: &DenseMatrix,
    eta: &DenseVector,
    scale: f64,
) -> Option<DenseVector> {
    let (m, d) = a.shape();
    let p = omega.nrows();
    if p + m < d {
        return None;
    }
    let sqrt_w: Vec<f64> = eta.iter().map(|e| (scale * e).sqrt()).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| sqrt_w[j].total_cmp(&sqrt_w[i]));

    let mut stacked = DenseMatrix::zeros(p + m, d);
    for (r, &i) in order.iter().enumerate() {
        let mut row = stacked.row_mut(r);
        row.copy_from(&omega.row(i));
        row *= sqrt_w[i];
    }
    stacked.rows_mut(p, m).copy_from(a);
    let mut rhs = DenseVector::zeros(p + m);
    rhs.rows_mut(p, m).copy_from(y);

    let qr = stacked.qr();
    let r = qr.r();
    let diag_max = r.diagonal().amax();
    if !(diag_max > 0.0) || r.diagonal().iter().any(|v| v.abs() <= diag_max * 1e-14) {
        return None;
    }
    qr.q_tr_mul(&mut rhs);
    let c = rhs.rows(0, d).into_owned();
    r.solve_upper_triangular(&c)
}

fn normal_equations_solve(
    a: &DenseMatrix,
    y: &DenseVector,
    omega: &DenseMatrix,
    eta: &DenseVector,
    scale: f64,
) -> Result<DenseVector> {
    let d = a.ncols();
    let mut weighted = omega.clone();
    for (mut row, w) in weighted.row_iter_mut().zip(eta.iter()) {
        row *= scale * w;
    }
    let system = a.transpose() * a + omega.transpose() * weighted;
    let rhs = a.transpose() * y;
    if let Some(chol) = system.clone().cholesky() {
        return Ok(chol.solve(&rhs));
    }
    let ridge = 1e-12 * system.trace() / d as f64;
    let mut regularized = system.clone();
    for i in 0..d {
        regularized[(i, i)] += ridge;
    }
    if ridge > 0.0 {
        if let Some(chol) = regularized.cholesky() {
            log::debug!("normal equations needed a ridge of {ridge:e}");
            return Ok(chol.solve(&rhs));
        }
    }
    let min_eigenvalue = SymmetricEigen::new(system).eigenvalues.min();
    Err(Error::LinearSolve { min_eigenvalue })
}

/// `min(eps_prev, shrink * r_l)` with `r_l` the `l`-th smallest `|z_i|`
/// (1-based); results at or below `eps_floor` snap to exactly zero.
pub fn epsilon_update(
    z: &DenseVector,
    eps_prev: f64,
    shrink: f64,
    l: usize,
    eps_floor: f64,
) -> Result<f64> {
    if l == 0 || l > z.len() {
        return Err(Error::InvalidArgument(format!(
            "cosparsity l = {l} out of range 1..={}",
            z.len()
        )));
    }
    let mut mags: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    let (_, r_l, _) = mags.select_nth_unstable_by(l - 1, f64::total_cmp);
    let eps = eps_prev.min(shrink * *r_l);
    Ok(if eps <= eps_floor { 0.0 } else { eps })
}

/// Closed form of the smoothed surrogate,
/// `1/2 |y - A x|^2 + lambda * sum_i (|omega_i x|^alpha + eps^alpha)^(q/alpha)`.
/// At `eps = 0` this is the lq-analysis objective itself.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    x: &DenseVector,
    eps: f64,
    a: &DenseMatrix,
    y: &DenseVector,
    omega: &DenseMatrix,
    lambda: f64,
    q: f64,
    alpha: f64,
) -> f64 {
    let residual = y - a * x;
    let z = omega * x;
    let eps_pow = eps.powf(alpha);
    let penalty: f64 = z
        .iter()
        .map(|v| (v.abs().powf(alpha) + eps_pow).powf(q / alpha))
        .sum();
    0.5 * residual.norm_squared() + lambda * penalty
}

/// The variational objective for a fixed weight vector:
/// `1/2 |y - A x|^2 + (lambda q / alpha) sum_i [eta_i (|omega_i x|^alpha + eps^alpha)
///  + ((alpha - q) / q) eta_i^(-q / (alpha - q))]`.
/// Minimizing over `eta` recovers [`objective`].
#[allow(clippy::too_many_arguments)]
pub fn surrogate(
    x: &DenseVector,
    eta: &DenseVector,
    eps: f64,
    a: &DenseMatrix,
    y: &DenseVector,
    omega: &DenseMatrix,
    lambda: f64,
    q: f64,
    alpha: f64,
) -> f64 {
    let residual = y - a * x;
    let z = omega * x;
    let eps_pow = eps.powf(alpha);
    let inner: f64 = z
        .iter()
        .zip(eta.iter())
        .map(|(v, w)| {
            w * (v.abs().powf(alpha) + eps_pow) + (alpha - q) / q * w.powf(-q / (alpha - q))
        })
        .sum();
    0.5 * residual.norm_squared() + lambda * q / alpha * inner
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: DenseVector,
    /// Weights used to produce `x` (empty before the first step).
    pub eta: DenseVector,
    pub eps: f64,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub k: usize,
    /// `F(x_k, max(eps_k, eps_floor))`.
    pub objective: f64,
    pub eps: f64,
    pub diff_inf: f64,
    /// Set when the objective rose by more than `1e-9 * (1 + F_prev)`.
    pub descent_violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub x_hat: DenseVector,
    pub iterations: usize,
    pub converged: bool,
    /// `F(x_0, eps_0)` before the first iteration.
    pub initial_objective: f64,
    pub trace: Vec<TraceEntry>,
}

impl SolverResult {
    pub fn final_objective(&self) -> f64 {
        self.trace
            .last()
            .map_or(self.initial_objective, |t| t.objective)
    }

    pub fn descent_violations(&self) -> usize {
        self.trace.iter().filter(|t| t.descent_violation).count()
    }
}

/// A configured problem; `step` is a pure function of the state.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    a: &'a DenseMatrix,
    y: &'a DenseVector,
    omega: &'a DenseMatrix,
    config: SolverConfig,
}

impl<'a> Solver<'a> {
    pub fn new(
        a: &'a DenseMatrix,
        y: &'a DenseVector,
        omega: &'a DenseMatrix,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        if config.alpha != 2.0 {
            return Err(Error::InvalidArgument(format!(
                "the weighted step is implemented for alpha = 2 only, got {}",
                config.alpha
            )));
        }
        check_shapes(a, y, omega)?;
        if config.l > omega.nrows() {
            return Err(Error::InvalidArgument(format!(
                "cosparsity l = {} exceeds p = {}",
                config.l,
                omega.nrows()
            )));
        }
        Ok(Self { a, y, omega, config })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Smoothing actually used by the weights: `eps` clamped at the floor.
    fn effective_eps(&self, eps: f64) -> f64 {
        eps.max(self.config.eps_floor)
    }

    pub fn objective_at(&self, x: &DenseVector, eps: f64) -> f64 {
        let c = &self.config;
        objective(
            x,
            self.effective_eps(eps),
            self.a,
            self.y,
            self.omega,
            c.lambda,
            c.q,
            c.alpha,
        )
    }

    /// Minimum-norm solution of `A x = y` and `eps = eps0`.
    pub fn initial_state(&self) -> SolverState {
        let (m, d) = self.a.shape();
        let svd = self.a.clone().svd(true, true);
        let cutoff = m.max(d) as f64 * f64::EPSILON * svd.singular_values.max();
        let x = svd
            .solve(self.y, cutoff)
            .expect("both SVD factors were requested");
        SolverState {
            x,
            eta: DenseVector::zeros(0),
            eps: self.config.eps0,
            k: 0,
        }
    }

    pub fn step(&self, state: &SolverState) -> Result<SolverState> {
        let c = &self.config;
        let z = self.omega * &state.x;
        let eta = weight_update(&z, self.effective_eps(state.eps), c.q, c.alpha)?;
        let x = x_update(self.a, self.y, self.omega, &eta, c.lambda, c.q)?;
        let z_new = self.omega * &x;
        let eps = epsilon_update(&z_new, state.eps, c.shrink, c.l, c.eps_floor)?;
        Ok(SolverState {
            x,
            eta,
            eps,
            k: state.k + 1,
        })
    }

    pub fn run(&self) -> Result<SolverResult> {
        let c = self.config;
        let mut state = self.initial_state();
        let initial_objective = self.objective_at(&state.x, state.eps);
        let mut f_prev = initial_objective;
        let mut trace = Vec::new();
        let mut converged = false;

        while state.k < c.max_iter {
            let next = self.step(&state)?;
            let diff_inf = (&next.x - &state.x).amax();
            let f = self.objective_at(&next.x, next.eps);
            let descent_violation = f > f_prev + 1e-9 * (1.0 + f_prev);
            if descent_violation {
                log::warn!(
                    "objective increased at iteration {}: {f_prev:e} -> {f:e}",
                    next.k
                );
            }
            trace.push(TraceEntry {
                k: next.k,
                objective: f,
                eps: next.eps,
                diff_inf,
                descent_violation,
            });
            f_prev = f;
            state = next;
            if diff_inf <= c.tau && state.eps == 0.0 {
                converged = true;
                break;
            }
        }

        Ok(SolverResult {
            x_hat: state.x,
            iterations: state.k,
            converged,
            initial_objective,
            trace,
        })
    }
}

/// Runs CoIRLq from the minimum-norm interpolant until both the iterate
/// change drops to `tau` and the smoothing reaches zero, or `max_iter`.
pub fn solve(
    a: &DenseMatrix,
    y: &DenseVector,
    omega: &DenseMatrix,
    config: &SolverConfig,
) -> Result<SolverResult> {
    Solver::new(a, y, omega, *config)?.run()
}

/// `sum_i |omega_i x|^q`.
pub fn analysis_lq(omega: &DenseMatrix, x: &DenseVector, q: f64) -> f64 {
    (omega * x).iter().map(|v| v.abs().powf(q)).sum()
}
