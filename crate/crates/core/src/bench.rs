//! Seeded recovery experiments: single trials, success-rate grids over
//! measurement count and cosparsity, CSV output and named presets.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{relative_error, Problem, ProblemSpec, RecoveryMetrics, SUCCESS_THRESHOLD};
use crate::rng::derive_seed;
use crate::solver::{solve, SolverConfig, SolverResult};

/// Attempts per trial before an infeasible cosparsity counts as a skip.
pub const MAX_ATTEMPTS: u64 = 8;

pub const CSV_HEADER: [&str; 10] = [
    "q",
    "m",
    "l",
    "sigma",
    "trials",
    "skips",
    "successes",
    "success_rate",
    "mean_rel_err",
    "mean_iters",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub d: usize,
    pub p: usize,
    pub m_values: Vec<usize>,
    pub l_values: Vec<usize>,
    pub q_values: Vec<f64>,
    pub sigma: f64,
    pub trials: usize,
    pub base_seed: u64,
    /// Template for every solve; `q` and `l` are overwritten per cell.
    pub solver: SolverConfig,
    /// When non-empty, each cell runs every lambda here and keeps the one
    /// with the smallest mean relative error.
    pub lambda_grid: Vec<f64>,
    pub success_threshold: f64,
    /// Norm of the generated signals; `None` means `sqrt(d)`.
    pub signal_norm: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 120,
            p: 144,
            m_values: vec![80],
            l_values: vec![99],
            q_values: vec![0.7],
            sigma: 0.0,
            trials: 50,
            base_seed: 0,
            solver: SolverConfig::default(),
            lambda_grid: Vec::new(),
            success_threshold: SUCCESS_THRESHOLD,
            signal_norm: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.d == 0 || self.p < self.d {
            return bad(format!("need 1 <= d <= p, got d={} p={}", self.d, self.p));
        }
        if self.m_values.is_empty() || self.l_values.is_empty() || self.q_values.is_empty() {
            return bad("m_values, l_values and q_values must be non-empty".into());
        }
        if let Some(m) = self.m_values.iter().find(|&&m| m == 0 || m > self.d) {
            return bad(format!("every m must satisfy 1 <= m <= d = {}, got {m}", self.d));
        }
        if let Some(l) = self.l_values.iter().find(|&&l| l == 0 || l > self.p) {
            return bad(format!("every l must satisfy 1 <= l <= p = {}, got {l}", self.p));
        }
        if let Some(q) = self.q_values.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
            return bad(format!("every q must lie in (0, 1], got {q}"));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if !(self.sigma >= 0.0) || !(self.success_threshold > 0.0) {
            return bad("need sigma >= 0 and success_threshold > 0".into());
        }
        if self.lambda_grid.iter().any(|l| !(*l > 0.0)) {
            return bad("lambda grid entries must be positive".into());
        }
        if self.signal_norm.is_some_and(|n| !(n > 0.0)) {
            return bad("signal_norm must be positive".into());
        }
        Ok(())
    }

    pub fn signal_norm(&self) -> f64 {
        self.signal_norm.unwrap_or((self.d as f64).sqrt())
    }

    fn lambdas(&self) -> Vec<f64> {
        if self.lambda_grid.is_empty() {
            vec![self.solver.lambda]
        } else {
            self.lambda_grid.clone()
        }
    }

    /// Cells in `(q, m, l)` order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut q_values = self.q_values.clone();
        q_values.sort_by(f64::total_cmp);
        let mut m_values = self.m_values.clone();
        m_values.sort_unstable();
        let mut l_values = self.l_values.clone();
        l_values.sort_unstable();
        let mut cells = Vec::new();
        for &q in &q_values {
            for &m in &m_values {
                for &l in &l_values {
                    cells.push(Cell {
                        q,
                        m,
                        l,
                        sigma: self.sigma,
                    });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub q: f64,
    pub m: usize,
    pub l: usize,
    pub sigma: f64,
}

/// Seed of trial `trial` for instances of shape `(d, p, m, l, sigma)`.
///
/// `q` is deliberately not part of the key: cells that differ only in `q`
/// solve the same instances, so their success rates are paired.
pub fn trial_seed(base_seed: u64, d: usize, p: usize, cell: &Cell, trial: usize) -> u64 {
    let key = [
        d as u64,
        p as u64,
        cell.m as u64,
        cell.l as u64,
        cell.sigma.to_bits(),
        trial as u64,
    ];
    base_seed ^ key.iter().fold(0x5EED_u64, |h, &k| derive_seed(h, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub d: usize,
    pub p: usize,
    pub m: usize,
    pub l: usize,
    pub q: f64,
    pub sigma: f64,
    pub signal_norm: f64,
    pub success_threshold: f64,
}

#[derive(Debug, Clone)]
pub enum TrialOutcome {
    Completed {
        metrics: RecoveryMetrics,
        result: SolverResult,
        /// Seed the instance was finally generated from.
        seed: u64,
    },
    Skipped,
}

impl TrialOutcome {
    pub fn metrics(&self) -> Option<&RecoveryMetrics> {
        match self {
            TrialOutcome::Completed { metrics, .. } => Some(metrics),
            TrialOutcome::Skipped => None,
        }
    }
}

/// Generates one instance from `seed`, solves it and scores the result.
/// An infeasible cosparsity is retried with derived seeds; after
/// `MAX_ATTEMPTS` failures the trial is skipped.
pub fn run_trial(params: &TrialParams, seed: u64, template: &SolverConfig) -> Result<TrialOutcome> {
    let spec = ProblemSpec {
        m: params.m,
        d: params.d,
        p: params.p,
        l: params.l,
        sigma: params.sigma,
        signal_norm: params.signal_norm,
    };
    let config = SolverConfig {
        q: params.q,
        l: params.l,
        ..*template
    };
    for attempt in 0..MAX_ATTEMPTS {
        let instance_seed = if attempt == 0 {
            seed
        } else {
            derive_seed(seed, 0xA77E_0000 + attempt)
        };
        let problem = match Problem::generate(&spec, instance_seed) {
            Ok(p) => p,
            Err(Error::InfeasibleCosparsity { .. }) => continue,
            Err(e) => return Err(e),
        };
        let result = solve(&problem.a, &problem.y, &problem.omega, &config)?;
        let err = relative_error(&result.x_hat, &problem.x_true)?;
        let metrics = RecoveryMetrics::new(err, params.success_threshold, result.iterations);
        return Ok(TrialOutcome::Completed {
            metrics,
            result,
            seed: instance_seed,
        });
    }
    Ok(TrialOutcome::Skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub q: f64,
    pub m: usize,
    pub l: usize,
    pub sigma: f64,
    /// Completed trials (the success-rate denominator).
    pub trials: usize,
    pub skips: usize,
    pub successes: usize,
    pub mean_relative_error: f64,
    pub mean_iterations: f64,
}

impl CellResult {
    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    pub fn aggregate(cell: &Cell, records: &[TrialRecord]) -> CellResult {
        let done: Vec<&TrialRecord> = records.iter().filter(|r| !r.skipped).collect();
        let n = done.len();
        let mean = |f: &dyn Fn(&TrialRecord) -> f64| {
            if n == 0 {
                f64::NAN
            } else {
                done.iter().map(|r| f(r)).sum::<f64>() / n as f64
            }
        };
        CellResult {
            q: cell.q,
            m: cell.m,
            l: cell.l,
            sigma: cell.sigma,
            trials: n,
            skips: records.len() - n,
            successes: done.iter().filter(|r| r.success).count(),
            mean_relative_error: mean(&|r| r.relative_error),
            mean_iterations: mean(&|r| r.iterations as f64),
        }
    }
}

/// Per-trial log line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub skipped: bool,
    pub relative_error: f64,
    pub success: bool,
    pub iterations: usize,
    pub converged: bool,
}

impl TrialRecord {
    fn from_outcome(trial: usize, seed: u64, outcome: &TrialOutcome) -> Self {
        match outcome {
            TrialOutcome::Completed {
                metrics,
                result,
                seed,
            } => TrialRecord {
                trial,
                seed: *seed,
                skipped: false,
                relative_error: metrics.relative_error,
                success: metrics.success,
                iterations: metrics.iterations,
                converged: result.converged,
            },
            TrialOutcome::Skipped => TrialRecord {
                trial,
                seed,
                skipped: true,
                relative_error: f64::NAN,
                success: false,
                iterations: 0,
                converged: false,
            },
        }
    }
}

/// One cell with the lambda it was scored at and its trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub result: CellResult,
    pub lambda: f64,
    pub records: Vec<TrialRecord>,
}

/// Runs every `(cell, lambda, trial)` job, in parallel when a rayon pool is
/// available, and reduces deterministically by cell and trial index.
pub fn phase_grid_detailed(config: &ExperimentConfig) -> Result<Vec<CellRun>> {
    config.validate()?;
    let cells = config.cells();
    let lambdas = config.lambdas();
    let norm = config.signal_norm();

    let jobs: Vec<(usize, usize, usize)> = (0..cells.len())
        .flat_map(|c| {
            (0..lambdas.len()).flat_map(move |li| (0..config.trials).map(move |t| (c, li, t)))
        })
        .collect();

    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(c, li, t)| {
            let cell = &cells[c];
            let params = TrialParams {
                d: config.d,
                p: config.p,
                m: cell.m,
                l: cell.l,
                q: cell.q,
                sigma: cell.sigma,
                signal_norm: norm,
                success_threshold: config.success_threshold,
            };
            let template = SolverConfig {
                lambda: lambdas[li],
                ..config.solver
            };
            let seed = trial_seed(config.base_seed, config.d, config.p, cell, t);
            let outcome = run_trial(&params, seed, &template)?;
            Ok(TrialRecord::from_outcome(t, seed, &outcome))
        })
        .collect::<Result<_>>()?;

    let per_cell = lambdas.len() * config.trials;
    let mut runs = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let block = &records[c * per_cell..(c + 1) * per_cell];
        let mut best: Option<CellRun> = None;
        for (li, &lambda) in lambdas.iter().enumerate() {
            let recs = &block[li * config.trials..(li + 1) * config.trials];
            let result = CellResult::aggregate(cell, recs);
            let better = match &best {
                None => true,
                Some(b) => result.mean_relative_error < b.result.mean_relative_error,
            };
            if better {
                best = Some(CellRun {
                    result,
                    lambda,
                    records: recs.to_vec(),
                });
            }
        }
        let best = best.expect("at least one lambda");
        if lambdas.len() > 1 {
            log::info!(
                "q={} m={} l={}: selected lambda {:e} (mean rel err {:e})",
                cell.q,
                cell.m,
                cell.l,
                best.lambda,
                best.result.mean_relative_error
            );
        }
        runs.push(best);
    }
    Ok(runs)
}

pub fn phase_grid(config: &ExperimentConfig) -> Result<Vec<CellResult>> {
    Ok(phase_grid_detailed(config)?
        .into_iter()
        .map(|r| r.result)
        .collect())
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn sorted(results: &[CellResult]) -> Vec<CellResult> {
    let mut rows = results.to_vec();
    rows.sort_by(|a, b| {
        a.q.total_cmp(&b.q)
            .then(a.m.cmp(&b.m))
            .then(a.l.cmp(&b.l))
    });
    rows
}

fn write_csv<W: std::io::Write>(results: &[CellResult], sink: W) -> Result<()> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in sorted(results) {
        w.write_record([
            sci(r.q),
            r.m.to_string(),
            r.l.to_string(),
            sci(r.sigma),
            r.trials.to_string(),
            r.skips.to_string(),
            r.successes.to_string(),
            sci(r.success_rate()),
            sci(r.mean_relative_error),
            sci(r.mean_iterations),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

pub fn format_csv(results: &[CellResult]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(results, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is ASCII"))
}

/// Writes the summary CSV, rows sorted by `(q, m, l)`.
pub fn emit_csv(results: &[CellResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format_csv(results)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    q: f64,
    m: usize,
    l: usize,
    sigma: f64,
    trials: usize,
    skips: usize,
    successes: usize,
    #[allow(dead_code)]
    success_rate: f64,
    mean_rel_err: f64,
    mean_iters: f64,
}

pub fn parse_csv(text: &str) -> Result<Vec<CellResult>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Csv(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Csv(format!("unexpected header {header:?}")));
    }
    reader
        .deserialize::<CsvRow>()
        .map(|row| {
            let r = row.map_err(|e| Error::Csv(e.to_string()))?;
            Ok(CellResult {
                q: r.q,
                m: r.m,
                l: r.l,
                sigma: r.sigma,
                trials: r.trials,
                skips: r.skips,
                successes: r.successes,
                mean_relative_error: r.mean_rel_err,
                mean_iterations: r.mean_iters,
            })
        })
        .collect()
}

pub const PRESETS: [&str; 5] = ["figure1", "figure2-m", "figure2-l", "figure3-m", "figure3-l"];

/// Parameter sets of the published simulation studies at desk scale
/// (50 trials per cell).
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let noiseless = SolverConfig {
        lambda: 1e-4,
        ..SolverConfig::default()
    };
    let base = ExperimentConfig {
        d: 120,
        p: 144,
        trials: 50,
        solver: noiseless,
        ..ExperimentConfig::default()
    };
    let q_sweep = vec![0.5, 0.7, 1.0];
    let m_sweep: Vec<usize> = (60..=110).step_by(10).collect();
    let l_sweep: Vec<usize> = (80..=115).step_by(5).collect();
    let noisy_lambdas = vec![1e-4, 1e-3, 1e-2];
    let config = match name {
        "figure1" => ExperimentConfig {
            m_values: vec![80],
            l_values: vec![99],
            q_values: vec![0.7],
            ..base
        },
        "figure2-m" => ExperimentConfig {
            m_values: m_sweep,
            l_values: vec![99],
            q_values: q_sweep,
            ..base
        },
        "figure2-l" => ExperimentConfig {
            m_values: vec![90],
            l_values: l_sweep,
            q_values: q_sweep,
            ..base
        },
        "figure3-m" => ExperimentConfig {
            m_values: m_sweep,
            l_values: vec![99],
            q_values: q_sweep,
            sigma: 0.01,
            lambda_grid: noisy_lambdas,
            ..base
        },
        "figure3-l" => ExperimentConfig {
            m_values: vec![90],
            l_values: l_sweep,
            q_values: q_sweep,
            sigma: 0.01,
            lambda_grid: noisy_lambdas,
            ..base
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(config)
}
