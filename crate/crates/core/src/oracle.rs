//! Exhaustive global solver for tiny lq-analysis problems
//! `min |Omega x|_q^q  s.t.  |y - A x|_2 <= noise_bound`.
//!
//! Cosparse vectors live in a union of subspaces `null(Omega_Lambda)`; the
//! oracle visits every cosupport `Lambda` with `|Lambda| >= l_min`, fits the
//! observation inside that subspace by least squares, and keeps the feasible
//! fit with the smallest lq value.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{select_rows, DenseMatrix, DenseVector};
use crate::model::null_space;

pub const MAX_ROWS: usize = 24;
pub const MAX_FREE_ROWS: usize = 8;

/// Absolute slack on the residual constraint.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

const BATCH: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub x_star: Vec<f64>,
    /// `|Omega x*|_q^q`; infinite when nothing is feasible.
    pub objective: f64,
    pub cosupport: Vec<usize>,
    pub residual: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone)]
struct Candidate {
    x: DenseVector,
    objective: f64,
    residual: f64,
    cosupport: Vec<usize>,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        let tol = 1e-12 * (1.0 + other.objective.abs());
        if self.objective < other.objective - tol {
            return true;
        }
        if self.objective > other.objective + tol {
            return false;
        }
        match self.cosupport.len().cmp(&other.cosupport.len()) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.cosupport < other.cosupport,
        }
    }
}

fn fit_subspace(
    a: &DenseMatrix,
    y: &DenseVector,
    omega: &DenseMatrix,
    q: f64,
    cosupport: Vec<usize>,
) -> Candidate {
    let d = a.ncols();
    let (basis, _) = null_space(&select_rows(omega, &cosupport));
    let x = if basis.ncols() == 0 {
        DenseVector::zeros(d)
    } else {
        let b = a * &basis;
        let (rows, cols) = b.shape();
        let svd = b.svd(true, true);
        let cutoff = rows.max(cols) as f64 * f64::EPSILON * svd.singular_values.max();
        let coeffs = svd.solve(y, cutoff).expect("both SVD factors were requested");
        &basis * coeffs
    };
    let residual = (y - a * &x).norm();
    let z = omega * &x;
    // rows in the cosupport are exactly zero on the subspace
    let mut in_lambda = vec![false; omega.nrows()];
    for &j in &cosupport {
        in_lambda[j] = true;
    }
    let objective = z
        .iter()
        .zip(&in_lambda)
        .filter(|(_, skip)| !**skip)
        .map(|(v, _)| v.abs().powf(q))
        .sum();
    Candidate {
        x,
        objective,
        residual,
        cosupport,
    }
}

/// Global minimizer of `|Omega x|_q^q` over `|y - A x|_2 <= noise_bound`,
/// restricted to cosupports of size at least `l_min`.
///
/// Ties in the objective go to the larger cosupport, then to the
/// lexicographically smaller one.
pub fn brute_force_lq(
    a: &DenseMatrix,
    y: &DenseVector,
    omega: &DenseMatrix,
    q: f64,
    noise_bound: f64,
    l_min: usize,
) -> Result<OracleResult> {
    let (p, d) = omega.shape();
    if a.ncols() != d || a.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "A is {}x{}, y has length {}, Omega is {p}x{d}",
            a.nrows(),
            a.ncols(),
            y.len()
        )));
    }
    if !(q > 0.0 && q <= 1.0) || !(noise_bound >= 0.0) || l_min == 0 {
        return Err(Error::InvalidArgument(format!(
            "need q in (0,1], noise_bound >= 0, l_min >= 1; got {q}, {noise_bound}, {l_min}"
        )));
    }
    if p > MAX_ROWS || l_min > p || p - l_min > MAX_FREE_ROWS {
        return Err(Error::CombinatorialGuard { p, l_min });
    }

    let mut best: Option<Candidate> = None;
    for size in (l_min..=p).rev() {
        for batch in &(0..p).combinations(size).chunks(BATCH) {
            let subsets: Vec<Vec<usize>> = batch.collect();
            // collect keeps enumeration order, so the reduction is deterministic
            let fits: Vec<Candidate> = subsets
                .into_par_iter()
                .map(|lambda| fit_subspace(a, y, omega, q, lambda))
                .filter(|c| c.residual <= noise_bound + FEASIBILITY_SLACK)
                .collect();
            for c in fits {
                if best.as_ref().is_none_or(|b| c.beats(b)) {
                    best = Some(c);
                }
            }
        }
    }

    Ok(match best {
        Some(c) => OracleResult {
            x_star: c.x.as_slice().to_vec(),
            objective: c.objective,
            cosupport: c.cosupport,
            residual: c.residual,
            feasible: true,
        },
        None => OracleResult {
            x_star: vec![0.0; d],
            objective: f64::INFINITY,
            cosupport: Vec::new(),
            residual: f64::INFINITY,
            feasible: false,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Problem, ProblemSpec};
    use crate::solver::analysis_lq;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_example() {
        let id = DenseMatrix::identity(2, 2);
        let y = DenseVector::from_vec(vec![5.0, 0.0]);
        for q in [0.3, 0.7, 1.0] {
            let r = brute_force_lq(&id, &y, &id, q, 0.0, 1).unwrap();
            assert!(r.feasible);
            assert_eq!(r.cosupport, vec![1]);
            assert_abs_diff_eq!(r.x_star[0], 5.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.x_star[1], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.objective, 5f64.powf(q), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_observation() {
        let pr = tiny(0);
        let y = DenseVector::zeros(pr.a.nrows());
        let r = brute_force_lq(&pr.a, &y, &pr.omega, 0.7, 0.0, 6).unwrap();
        assert!(r.feasible);
        assert_eq!(r.objective, 0.0);
        assert!(r.x_star.iter().all(|v| *v == 0.0));
        assert_eq!(r.cosupport, (0..8).collect::<Vec<_>>());
    }

    fn tiny(seed: u64) -> Problem {
        let spec = ProblemSpec {
            m: 5,
            d: 6,
            p: 8,
            l: 4,
            sigma: 0.0,
            signal_norm: 1.0,
        };
        Problem::generate(&spec, seed).unwrap()
    }

    #[test]
    fn recovers_generated_signal() {
        // two-dimensional subspaces, five measurements: A is injective on
        // the union of any two of them
        for seed in 0..6 {
            let pr = tiny(seed);
            let r = brute_force_lq(&pr.a, &pr.y, &pr.omega, 0.5, 0.0, 4).unwrap();
            assert!(r.feasible);
            let x = DenseVector::from_vec(r.x_star.clone());
            assert!((&x - &pr.x_true).amax() < 1e-8, "seed {seed}");
            assert_eq!(r.cosupport, pr.cosupport);
        }
    }

    #[test]
    fn guard_and_argument_errors() {
        let big = DenseMatrix::identity(25, 25);
        let y = DenseVector::zeros(25);
        assert!(matches!(
            brute_force_lq(&big, &y, &big, 1.0, 0.0, 20),
            Err(Error::CombinatorialGuard { p: 25, .. })
        ));
        let pr = tiny(0);
        assert!(matches!(
            brute_force_lq(&pr.a, &pr.y, &pr.omega, 1.0, 0.0, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            brute_force_lq(&pr.a, &pr.y, &pr.omega, 1.0, 0.0, 9),
            Err(Error::CombinatorialGuard { .. })
        ));
        let short = DenseVector::zeros(3);
        assert!(brute_force_lq(&pr.a, &short, &pr.omega, 1.0, 0.0, 4).is_err());
    }

    #[test]
    fn infeasible_when_bound_too_tight() {
        let pr = tiny(1);
        // only the full cosupport is allowed, giving x = 0, residual |y| > 0
        let r = brute_force_lq(&pr.a, &pr.y, &pr.omega, 1.0, 0.0, 8).unwrap();
        assert!(!r.feasible);
        assert!(r.objective.is_infinite());
    }

    #[test]
    fn larger_noise_bound_never_hurts() {
        for seed in 0..4 {
            let pr = tiny(seed);
            let mut prev = f64::INFINITY;
            for bound in [0.0, 0.05, 0.2, 0.6, 2.0] {
                let r = brute_force_lq(&pr.a, &pr.y, &pr.omega, 0.7, bound, 2).unwrap();
                assert!(r.objective <= prev);
                prev = r.objective;
            }
        }
    }

    #[test]
    fn beats_feasible_points() {
        // every exactly-feasible point of the noiseless problem is
        // x_true + t * n with n spanning null(A)
        for seed in 0..4 {
            let pr = tiny(seed);
            let r = brute_force_lq(&pr.a, &pr.y, &pr.omega, 0.7, 0.0, 1).unwrap();
            let (null_a, _) = null_space(&pr.a);
            for t in [-2.0, -0.3, 0.1, 0.7, 5.0] {
                let x = &pr.x_true + null_a.column(0) * t;
                assert!(r.objective <= analysis_lq(&pr.omega, &x, 0.7) + 1e-12);
            }
        }
    }

    #[test]
    fn tie_break_prefers_larger_then_lexicographic() {
        let mk = |obj: f64, cos: Vec<usize>| Candidate {
            x: DenseVector::zeros(1),
            objective: obj,
            residual: 0.0,
            cosupport: cos,
        };
        assert!(mk(1.0, vec![0, 1]).beats(&mk(1.0, vec![2])));
        assert!(mk(1.0, vec![0, 2]).beats(&mk(1.0, vec![1, 2])));
        assert!(mk(0.5, vec![3]).beats(&mk(1.0, vec![0, 1])));
        assert!(!mk(1.0, vec![1, 2]).beats(&mk(1.0, vec![0, 2])));
    }
}
