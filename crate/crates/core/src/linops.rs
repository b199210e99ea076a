//! Analysis operators: random tight frames, 2D finite differences, cosupport
//! detection and singular-value summaries.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type DenseMatrix = DMatrix<f64>;
pub type DenseVector = DVector<f64>;

/// Extreme singular values of an operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpectrum {
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// `sigma_max / sigma_min`, or `f64::INFINITY` when `sigma_min` is zero.
    pub kappa: f64,
}

impl OperatorSpectrum {
    pub fn is_rank_deficient(&self) -> bool {
        self.kappa.is_infinite()
    }
}

/// Random `p x d` operator with orthonormal columns, so `Omega^T Omega = I_d`.
///
/// Built from the thin QR factor of an i.i.d. Gaussian matrix.
pub fn random_tight_frame(p: usize, d: usize, seed: u64) -> Result<DenseMatrix> {
    if d == 0 || p < d {
        return Err(Error::Dimension(format!(
            "tight frame needs p >= d >= 1, got p = {p}, d = {d}"
        )));
    }
    let gaussian = rng::normal_matrix(&mut rng::seeded(seed), p, d);
    Ok(gaussian.qr().q())
}

/// Matrix-free 2D forward-difference operator on an `height x width` image
/// flattened in row-major order.
///
/// Rows are ordered horizontal differences first (`x[i, j+1] - x[i, j]` in
/// row-major scan order), then vertical differences (`x[i+1, j] - x[i, j]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DifferenceOperator2d {
    height: usize,
    width: usize,
}

pub fn fd2d_operator(height: usize, width: usize) -> Result<DifferenceOperator2d> {
    DifferenceOperator2d::new(height, width)
}

impl DifferenceOperator2d {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || height * width < 2 {
            return Err(Error::InvalidArgument(format!(
                "a {height}x{width} image has no adjacent pixel pairs"
            )));
        }
        Ok(Self { height, width })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn horizontal_rows(&self) -> usize {
        self.height * (self.width - 1)
    }

    /// Number of differences, `h(w-1) + w(h-1)`.
    pub fn rows(&self) -> usize {
        self.horizontal_rows() + self.width * (self.height - 1)
    }

    pub fn cols(&self) -> usize {
        self.height * self.width
    }

    /// `(minus, plus)` pixel indices of row `r`: the row computes
    /// `x[plus] - x[minus]`.
    pub fn row_support(&self, r: usize) -> (usize, usize) {
        assert!(r < self.rows(), "row {r} out of range");
        let h_rows = self.horizontal_rows();
        if r < h_rows {
            let i = r / (self.width - 1);
            let j = r % (self.width - 1);
            let base = i * self.width + j;
            (base, base + 1)
        } else {
            let v = r - h_rows;
            (v, v + self.width)
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols() {
            return Err(Error::Dimension(format!(
                "difference operator expects {} pixels, got {}",
                self.cols(),
                x.len()
            )));
        }
        Ok((0..self.rows())
            .map(|r| {
                let (minus, plus) = self.row_support(r);
                x[plus] - x[minus]
            })
            .collect())
    }

    pub fn apply_transpose(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.rows() {
            return Err(Error::Dimension(format!(
                "adjoint expects {} coefficients, got {}",
                self.rows(),
                z.len()
            )));
        }
        let mut out = vec![0.0; self.cols()];
        for (r, &v) in z.iter().enumerate() {
            let (minus, plus) = self.row_support(r);
            out[plus] += v;
            out[minus] -= v;
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows(), self.cols());
        for r in 0..self.rows() {
            let (minus, plus) = self.row_support(r);
            m[(r, plus)] = 1.0;
            m[(r, minus)] = -1.0;
        }
        m
    }
}

/// Default zero tolerance for analysis coefficients `z = Omega x`:
/// `1e-12 * (1 + |z|_inf)`.
pub fn default_zero_tol(z: &DenseVector) -> f64 {
    1e-12 * (1.0 + z.amax())
}

/// Indices `j` with `|<omega_j, x>| <= tol`.
pub fn cosupport(omega: &DenseMatrix, x: &DenseVector, tol: f64) -> Result<Vec<usize>> {
    if omega.ncols() != x.len() {
        return Err(Error::Dimension(format!(
            "operator has {} columns, signal has length {}",
            omega.ncols(),
            x.len()
        )));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be >= 0, got {tol}")));
    }
    let z = omega * x;
    Ok(z.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= tol)
        .map(|(j, _)| j)
        .collect())
}

/// Singular values below `max(p, d) * eps * sigma_max` are treated as zero,
/// as is the missing `d`-th singular value when `p < d`.
pub fn spectrum(omega: &DenseMatrix) -> OperatorSpectrum {
    let (p, d) = omega.shape();
    if p == 0 || d == 0 {
        return OperatorSpectrum {
            sigma_max: 0.0,
            sigma_min: 0.0,
            kappa: f64::INFINITY,
        };
    }
    let sv = omega.singular_values();
    let sigma_max = sv.max();
    let cutoff = p.max(d) as f64 * f64::EPSILON * sigma_max;
    let mut sigma_min = if p < d { 0.0 } else { sv.min() };
    if sigma_min <= cutoff {
        sigma_min = 0.0;
    }
    let kappa = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    OperatorSpectrum {
        sigma_max,
        sigma_min,
        kappa,
    }
}

/// Rows of `m` selected by `rows`, in the given order.
pub fn select_rows(m: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}
