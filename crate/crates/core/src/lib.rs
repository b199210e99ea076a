//! Cosparse signal recovery by iteratively reweighted lq-analysis
//! minimization (CoIRLq), with a brute-force oracle for tiny problems,
//! closed-form recovery-bound constants and a seeded experiment harness.
//!
//! ```
//! use coirlq::{Problem, ProblemSpec, SolverConfig, solve, relative_error};
//!
//! let spec = ProblemSpec { m: 20, d: 20, p: 24, l: 10, sigma: 0.0, signal_norm: 4.0 };
//! let problem = Problem::generate(&spec, 7).unwrap();
//! let config = SolverConfig { lambda: 1e-6, ..SolverConfig::with_cosparsity(10) };
//! let result = solve(&problem.a, &problem.y, &problem.omega, &config).unwrap();
//! assert!(relative_error(&result.x_hat, &problem.x_true).unwrap() < 1e-4);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod io;
pub mod linops;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod solver;
pub mod theory;

pub use bench::{phase_grid, preset, CellResult, ExperimentConfig};
pub use error::{Error, Result};
pub use linops::{fd2d_operator, random_tight_frame, DenseMatrix, DenseVector, DifferenceOperator2d};
pub use model::{gen_cosparse_signal, relative_error, Problem, ProblemSpec};
pub use oracle::{brute_force_lq, OracleResult};
pub use solver::{solve, Solver, SolverConfig, SolverResult};
