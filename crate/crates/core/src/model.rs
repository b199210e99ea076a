//! Cosparse problem instances `y = A x + sigma * e` and recovery metrics.

use std::fs;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::linops::{self, select_rows, DenseMatrix, DenseVector};
use crate::rng;

/// Relative singular-value cutoff used to decide numerical rank.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Recovery is declared successful at or below this relative error.
pub const SUCCESS_THRESHOLD: f64 = 1e-4;

/// Orthonormal basis (as columns) of the null space of `m`, together with
/// the numerical rank. Singular values at or below `RANK_CUTOFF * sigma_max`
/// count as zero.
pub fn null_space(m: &DenseMatrix) -> (DenseMatrix, usize) {
    let (rows, d) = m.shape();
    if rows == 0 {
        return (DenseMatrix::identity(d, d), 0);
    }
    // pad to at least d rows so the SVD returns a full d x d right factor
    let padded = if rows < d {
        let mut p = DenseMatrix::zeros(d, d);
        p.rows_mut(0, rows).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sigma_max = svd.singular_values.max();
    let cutoff = RANK_CUTOFF * sigma_max;
    let null_rows: Vec<usize> = (0..d)
        .filter(|&i| sigma_max == 0.0 || svd.singular_values[i] <= cutoff)
        .collect();
    let rank = d - null_rows.len();
    let basis = DenseMatrix::from_fn(d, null_rows.len(), |i, j| v_t[(null_rows[j], i)]);
    (basis, rank)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosparseSignal {
    pub x: DenseVector,
    /// Sorted row indices `Lambda` the signal is orthogonal to.
    pub cosupport: Vec<usize>,
}

/// Draws a uniformly random `l`-subset `Lambda` of the rows of `omega` and a
/// random unit-norm element of `null(Omega_Lambda)`.
pub fn gen_cosparse_signal(omega: &DenseMatrix, l: usize, seed: u64) -> Result<CosparseSignal> {
    let (p, d) = omega.shape();
    if l == 0 || l > p {
        return Err(Error::InvalidArgument(format!(
            "cosparsity must satisfy 1 <= l <= p = {p}, got {l}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut lambda = index::sample(&mut rng, p, l).into_vec();
    lambda.sort_unstable();
    let (basis, rank) = null_space(&select_rows(omega, &lambda));
    if basis.ncols() == 0 {
        return Err(Error::InfeasibleCosparsity { l, rank, d });
    }
    let coeffs = rng::normal_vector(&mut rng, basis.ncols());
    let mut x = &basis * coeffs;
    x /= x.norm();
    Ok(CosparseSignal {
        x,
        cosupport: lambda,
    })
}

/// `m x d` Gaussian matrix with every column scaled to unit norm.
pub fn gaussian_measurement(m: usize, d: usize, seed: u64) -> Result<DenseMatrix> {
    if m == 0 || d == 0 {
        return Err(Error::Dimension(format!(
            "measurement matrix needs m, d >= 1, got {m} x {d}"
        )));
    }
    let mut a = rng::normal_matrix(&mut rng::seeded(seed), m, d);
    for mut col in a.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }
    Ok(a)
}

/// `y = A x + sigma * e` with `e` standard normal. `sigma = 0` returns `A x`.
pub fn observe(a: &DenseMatrix, x: &DenseVector, sigma: f64, seed: u64) -> Result<DenseVector> {
    if a.ncols() != x.len() {
        return Err(Error::Dimension(format!(
            "A has {} columns, x has length {}",
            a.ncols(),
            x.len()
        )));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {sigma}")));
    }
    let clean = a * x;
    if sigma == 0.0 {
        return Ok(clean);
    }
    let noise = rng::normal_vector(&mut rng::seeded(seed), a.nrows());
    Ok(clean + noise * sigma)
}

/// `|x_hat - x_true|_2 / |x_true|_2`.
pub fn relative_error(x_hat: &DenseVector, x_true: &DenseVector) -> Result<f64> {
    if x_hat.len() != x_true.len() {
        return Err(Error::Dimension(format!(
            "lengths differ: {} vs {}",
            x_hat.len(),
            x_true.len()
        )));
    }
    let denom = x_true.norm();
    if denom == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok((x_hat - x_true).norm() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub relative_error: f64,
    pub success: bool,
    pub iterations: usize,
}

impl RecoveryMetrics {
    pub fn new(relative_error: f64, threshold: f64, iterations: usize) -> Self {
        Self {
            relative_error,
            success: relative_error <= threshold,
            iterations,
        }
    }
}

/// Shape and noise of a generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub m: usize,
    pub d: usize,
    pub p: usize,
    pub l: usize,
    pub sigma: f64,
    /// Euclidean norm of the generated signal.
    pub signal_norm: f64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let ProblemSpec { m, d, p, l, .. } = *self;
        if m == 0 || d == 0 || p < d || l == 0 || l > p {
            return Err(Error::InvalidArgument(format!(
                "need m >= 1, 1 <= d <= p, 1 <= l <= p; got m={m} d={d} p={p} l={l}"
            )));
        }
        if !(self.sigma >= 0.0) || !(self.signal_norm > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need sigma >= 0 and signal_norm > 0; got {} and {}",
                self.sigma, self.signal_norm
            )));
        }
        Ok(())
    }
}

/// Metadata stored next to a persisted problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub m: usize,
    pub d: usize,
    pub p: usize,
    pub l: usize,
    pub sigma: f64,
    pub seed: u64,
    pub cosupport: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub a: DenseMatrix,
    pub y: DenseVector,
    pub omega: DenseMatrix,
    pub x_true: DenseVector,
    pub cosupport: Vec<usize>,
    pub sigma: f64,
    pub seed: u64,
}

// stream tags for the independent components of one instance
const TAG_OPERATOR: u64 = 1;
const TAG_SIGNAL: u64 = 2;
const TAG_MEASUREMENT: u64 = 3;
const TAG_NOISE: u64 = 4;

impl Problem {
    /// Random tight frame, `l`-cosparse signal scaled to `spec.signal_norm`,
    /// column-normalized Gaussian `A`, and the (possibly noisy) observation.
    pub fn generate(spec: &ProblemSpec, seed: u64) -> Result<Problem> {
        spec.validate()?;
        let omega = linops::random_tight_frame(spec.p, spec.d, rng::derive_seed(seed, TAG_OPERATOR))?;
        let signal = gen_cosparse_signal(&omega, spec.l, rng::derive_seed(seed, TAG_SIGNAL))?;
        let x_true = signal.x * spec.signal_norm;
        let a = gaussian_measurement(spec.m, spec.d, rng::derive_seed(seed, TAG_MEASUREMENT))?;
        let y = observe(&a, &x_true, spec.sigma, rng::derive_seed(seed, TAG_NOISE))?;
        Ok(Problem {
            a,
            y,
            omega,
            x_true,
            cosupport: signal.cosupport,
            sigma: spec.sigma,
            seed,
        })
    }

    pub fn meta(&self) -> ProblemMeta {
        ProblemMeta {
            m: self.a.nrows(),
            d: self.a.ncols(),
            p: self.omega.nrows(),
            l: self.cosupport.len(),
            sigma: self.sigma,
            seed: self.seed,
            cosupport: self.cosupport.clone(),
        }
    }

    /// Writes `A.txt`, `y.txt`, `omega.txt`, `x_true.txt` and `meta.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::write_matrix(&self.a, dir.join("A.txt"))?;
        io::write_vector(&self.y, dir.join("y.txt"))?;
        io::write_matrix(&self.omega, dir.join("omega.txt"))?;
        io::write_vector(&self.x_true, dir.join("x_true.txt"))?;
        let meta = serde_json::to_string_pretty(&self.meta())?;
        let path = dir.join("meta.json");
        fs::write(&path, meta + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Problem> {
        let dir = dir.as_ref();
        let path = dir.join("meta.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: ProblemMeta = serde_json::from_str(&text)?;
        let problem = Problem {
            a: io::read_matrix(dir.join("A.txt"))?,
            y: io::read_vector(dir.join("y.txt"))?,
            omega: io::read_matrix(dir.join("omega.txt"))?,
            x_true: io::read_vector(dir.join("x_true.txt"))?,
            cosupport: meta.cosupport,
            sigma: meta.sigma,
            seed: meta.seed,
        };
        let (m, d) = problem.a.shape();
        if problem.y.len() != m || problem.omega.ncols() != d || problem.x_true.len() != d {
            return Err(Error::Dimension(format!(
                "inconsistent problem files in {}",
                dir.display()
            )));
        }
        Ok(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_operator_signal() {
        let omega = DenseMatrix::identity(4, 4);
        for seed in 0..10 {
            let s = gen_cosparse_signal(&omega, 3, seed).unwrap();
            assert_eq!(s.x.iter().filter(|v| **v == 0.0).count(), 3);
            assert_abs_diff_eq!(s.x.norm(), 1.0, epsilon = 1e-15);
            for &j in &s.cosupport {
                assert_eq!(s.x[j], 0.0);
            }
        }
    }

    #[test]
    fn full_difference_cosupport_gives_constant() {
        let omega = linops::fd2d_operator(2, 2).unwrap().to_dense();
        let s = gen_cosparse_signal(&omega, 4, 3).unwrap();
        assert_abs_diff_eq!(s.x.norm(), 1.0, epsilon = 1e-12);
        for v in s.x.iter() {
            assert_abs_diff_eq!(v.abs(), 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(*v, s.x[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn tight_frame_signal_cosparsity() {
        let omega = linops::random_tight_frame(144, 120, 21).unwrap();
        let s = gen_cosparse_signal(&omega, 99, 22).unwrap();
        assert_abs_diff_eq!(s.x.norm(), 1.0, epsilon = 1e-12);
        let z = &omega * &s.x;
        let near_zero = z.iter().filter(|v| v.abs() <= 1e-10).count();
        assert!(near_zero >= 99);
        for &j in &s.cosupport {
            assert!(z[j].abs() <= 1e-10);
        }
    }

    #[test]
    fn infeasible_cosparsity() {
        let omega = linops::random_tight_frame(8, 6, 1).unwrap();
        let err = gen_cosparse_signal(&omega, 6, 2).unwrap_err();
        assert!(matches!(err, Error::InfeasibleCosparsity { l: 6, rank: 6, d: 6 }), "{err}");
        assert!(gen_cosparse_signal(&omega, 0, 2).is_err());
        assert!(gen_cosparse_signal(&omega, 9, 2).is_err());
    }

    #[test]
    fn null_space_of_empty_and_zero() {
        let (b, rank) = null_space(&DenseMatrix::zeros(0, 3));
        assert_eq!((b.ncols(), rank), (3, 0));
        let (b, rank) = null_space(&DenseMatrix::zeros(2, 3));
        assert_eq!((b.ncols(), rank), (3, 0));
    }

    #[test]
    fn measurement_columns_unit_norm() {
        for (m, d, seed) in [(1, 1, 0), (5, 3, 1), (80, 120, 2)] {
            let a = gaussian_measurement(m, d, seed).unwrap();
            for col in a.column_iter() {
                assert_abs_diff_eq!(col.norm(), 1.0, epsilon = 1e-12);
            }
        }
        let a = gaussian_measurement(1, 1, 9).unwrap();
        assert_abs_diff_eq!(a[(0, 0)].abs(), 1.0, epsilon = 1e-15);
        assert!(gaussian_measurement(0, 3, 0).is_err());
    }

    #[test]
    fn distinct_seeds_distinct_matrices() {
        let a = gaussian_measurement(80, 120, 1).unwrap();
        let b = gaussian_measurement(80, 120, 2).unwrap();
        assert!((a - b).amax() > 0.0);
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let a = DenseMatrix::identity(2, 2);
        let x = DenseVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(observe(&a, &x, 0.0, 5).unwrap(), x);
        let a = gaussian_measurement(7, 4, 3).unwrap();
        let x = DenseVector::from_vec(vec![1.0, -2.0, 0.5, 0.0]);
        assert_eq!(observe(&a, &x, 0.0, 5).unwrap(), &a * &x);
        assert!(observe(&a, &DenseVector::zeros(3), 0.0, 0).is_err());
        assert!(observe(&a, &x, -1.0, 0).is_err());
    }

    #[test]
    fn noise_magnitude_concentrates() {
        // E|e|_2 for e ~ N(0, sigma^2 I_90) is about sigma * sqrt(90)
        let a = gaussian_measurement(90, 10, 0).unwrap();
        let x = DenseVector::from_element(10, 0.3);
        let clean = &a * &x;
        let mean: f64 = (0..100u64)
            .map(|s| (observe(&a, &x, 0.01, s).unwrap() - &clean).norm())
            .sum::<f64>()
            / 100.0;
        let expected = 0.01 * 90f64.sqrt();
        assert!((mean - expected).abs() <= 0.5 * expected, "{mean} vs {expected}");
        assert!((mean - expected).abs() <= 0.05 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn relative_error_cases() {
        let t = DenseVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(relative_error(&t, &t).unwrap(), 0.0);
        assert_abs_diff_eq!(relative_error(&(&t * 2.0), &t).unwrap(), 1.0, epsilon = 1e-15);
        let h = DenseVector::from_vec(vec![3.0, 0.0]);
        assert_abs_diff_eq!(relative_error(&h, &t).unwrap(), 0.8, epsilon = 1e-15);
        assert!(matches!(
            relative_error(&t, &DenseVector::zeros(2)),
            Err(Error::ZeroSignal)
        ));
        assert!(relative_error(&t, &DenseVector::zeros(3)).is_err());
    }

    #[test]
    fn success_flag_follows_threshold() {
        assert!(RecoveryMetrics::new(1e-4, SUCCESS_THRESHOLD, 3).success);
        assert!(!RecoveryMetrics::new(1.0001e-4, SUCCESS_THRESHOLD, 3).success);
    }

    fn spec(sigma: f64) -> ProblemSpec {
        ProblemSpec {
            m: 30,
            d: 40,
            p: 48,
            l: 33,
            sigma,
            signal_norm: 1.0,
        }
    }

    #[test]
    fn generated_problem_invariants() {
        for seed in 0..5 {
            let pr = Problem::generate(&spec(0.0), seed).unwrap();
            assert_eq!(pr.a.shape(), (30, 40));
            assert_eq!(pr.omega.shape(), (48, 40));
            let resid = (&pr.y - &pr.a * &pr.x_true).norm();
            assert!(resid <= 1e-10 * (1.0 + pr.y.norm()));
            let z = &pr.omega * &pr.x_true;
            let tol = linops::default_zero_tol(&z).max(1e-10);
            assert!(linops::cosupport(&pr.omega, &pr.x_true, tol).unwrap().len() >= 33);
            for &j in &pr.cosupport {
                assert!(z[j].abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = Problem::generate(&spec(0.01), 77).unwrap();
        let b = Problem::generate(&spec(0.01), 77).unwrap();
        assert_eq!(a, b);
        let c = Problem::generate(&spec(0.01), 78).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pr = Problem::generate(&spec(0.01), 5).unwrap();
        pr.save(dir.path()).unwrap();
        assert_eq!(Problem::load(dir.path()).unwrap(), pr);
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
        assert_eq!(meta["m"], 30);
        assert_eq!(meta["p"], 48);
        assert_eq!(meta["seed"], 5);
    }
}
