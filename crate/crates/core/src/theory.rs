//! Recovery-condition calculators for lq-analysis minimization.
//!
//! All functions are pure formula evaluators. RIP constants are inputs;
//! certifying them for a concrete matrix is not attempted.
//!
//! Most quantities depend on `(kappa, q, rho)` only through
//! `s = kappa^-q * rho^(1 - q/2)` and `t = s - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    /// `delta_{rho S}`.
    pub delta_rho_s: f64,
    /// `delta_{(rho + 1) S}`.
    pub delta_rho1_s: f64,
    pub kappa: f64,
    /// Block ratio `rho >= 2`.
    pub block_ratio: f64,
    pub q: f64,
    pub s: u64,
    pub sigma_min: f64,
}

impl TheoryInputs {
    pub fn validate(&self) -> Result<()> {
        let delta_ok = |d: f64| (0.0..1.0).contains(&d);
        if !delta_ok(self.delta_rho_s) || !delta_ok(self.delta_rho1_s) {
            return Err(Error::InvalidArgument(format!(
                "RIP constants must lie in [0, 1), got {} and {}",
                self.delta_rho_s, self.delta_rho1_s
            )));
        }
        check_shape_params(self.kappa, self.q, self.block_ratio)?;
        if self.s == 0 || !(self.sigma_min > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need S >= 1 and sigma_min > 0, got {} and {}",
                self.s, self.sigma_min
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
}

fn check_shape_params(kappa: f64, q: f64, rho: f64) -> Result<()> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidArgument(format!("kappa must be finite and >= 1, got {kappa}")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!("q must lie in (0, 1], got {q}")));
    }
    if !(rho >= 2.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("block ratio must be >= 2, got {rho}")));
    }
    Ok(())
}

/// `s = kappa^-q * rho^(1 - q/2)`.
fn frame_ratio(kappa: f64, q: f64, rho: f64) -> f64 {
    kappa.powf(-q) * rho.powf(1.0 - q / 2.0)
}

/// `t = kappa^-q * rho^(1 - q/2) - 1`, required positive.
pub fn condition_base(kappa: f64, q: f64, rho: f64) -> Result<f64> {
    check_shape_params(kappa, q, rho)?;
    let t = frame_ratio(kappa, q, rho) - 1.0;
    if t <= 0.0 {
        return Err(Error::ConditionNumberHypothesis { t });
    }
    Ok(t)
}

/// `delta_{rho S} + t^(2/q) delta_{(rho+1) S} < t^(2/q) - 1`.
///
/// Holding this forces `t > 1`, which is the condition-number hypothesis
/// `kappa < rho^(1/q - 1/2) / 2^(1/q)`.
pub fn check_condition(inputs: &TheoryInputs) -> Result<bool> {
    inputs.validate()?;
    let q = inputs.q;
    let t = condition_base(inputs.kappa, q, inputs.block_ratio)?;
    let tp = t.powf(2.0 / q);
    Ok(inputs.delta_rho_s + tp * inputs.delta_rho1_s < tp - 1.0)
}

/// Right-hand side of the sufficient condition
/// `delta_{(rho+1) S} < (t^(2/q) - 1) / (t^(2/q) + 1)`.
pub fn strong_threshold(kappa: f64, q: f64, block_ratio: f64) -> Result<f64> {
    let t = condition_base(kappa, q, block_ratio)?;
    let tp = t.powf(2.0 / q);
    if tp.is_infinite() {
        return Ok(1.0);
    }
    Ok((tp - 1.0) / (tp + 1.0))
}

/// Error-bound constants
///
/// ```text
/// C1 = 1 / [(1 - d1)^(q/2) (1 - u) - u (1 + d0)^(q/2)]
/// C2 = 2 sigma_min^-q rho^(q/2 - 1) / (1 - u) * [C1 (1 + d0)^(q/2) + 1]
/// ```
///
/// with `u = kappa^q rho^(q/2 - 1) = 1/s`, `d0 = delta_{rho S}` and
/// `d1 = delta_{(rho+1) S}`. Evaluated through `s` and `t = s - 1`, which is
/// algebraically identical and exact on integer-friendly inputs.
pub fn theorem1_constants(inputs: &TheoryInputs) -> Result<BoundConstants> {
    inputs.validate()?;
    let q = inputs.q;
    let s = frame_ratio(inputs.kappa, q, inputs.block_ratio);
    let t = s - 1.0;
    let lower = (1.0 - inputs.delta_rho1_s).powf(q / 2.0);
    let upper = (1.0 + inputs.delta_rho_s).powf(q / 2.0);
    // denominator of C1 times s
    let scaled = lower * t - upper;
    if !(scaled > 0.0) {
        return Err(Error::BoundInapplicable {
            denominator: scaled / s,
        });
    }
    let c1 = s / scaled;
    // rho^(q/2-1) / (1 - u) = kappa^-q / t
    let c2 = 2.0 * inputs.sigma_min.powf(-q) * inputs.kappa.powf(-q) / t * (c1 * upper + 1.0);
    Ok(BoundConstants { c1, c2 })
}

/// Result of relating the `q = 1` sparsity level to a smaller `q`.
///
/// `rho_q` is kept as the exact fraction `rho_num / rho_den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityLevel {
    pub s_q: u64,
    pub rho_num: u64,
    pub rho_den: u64,
    /// `(rho_1 + 1) S_1`, preserved by construction.
    pub block: u64,
}

impl SparsityLevel {
    pub fn rho_q(&self) -> f64 {
        self.rho_num as f64 / self.rho_den as f64
    }

    /// `(rho_q + 1) * S_q`, computed exactly.
    pub fn block_product(&self) -> u64 {
        (self.rho_num + self.rho_den) * self.s_q / self.rho_den
    }
}

/// `S_q = floor((rho1 + 1) / (rho1^(1/(2-q)) + 1)) * S_1` and
/// `rho_q = (rho1 + 1) S_1 / S_q - 1`.
pub fn sq_from_s1(s1: u64, rho1: f64, q: f64) -> Result<SparsityLevel> {
    if s1 == 0 || !(rho1 >= 2.0) || !rho1.is_finite() || !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need S1 >= 1, rho1 >= 2, q in (0,1]; got {s1}, {rho1}, {q}"
        )));
    }
    let block_f = (rho1 + 1.0) * s1 as f64;
    let block = block_f.round();
    if (block_f - block).abs() > 1e-9 * block {
        return Err(Error::InvalidArgument(format!(
            "(rho1 + 1) * S1 = {block_f} must be an integer"
        )));
    }
    let block = block as u64;
    let factor = ((rho1 + 1.0) / (rho1.powf(1.0 / (2.0 - q)) + 1.0)).floor() as u64;
    let s_q = factor * s1;
    if s_q == 0 {
        return Err(Error::NoValidSq);
    }
    let (num, den) = reduce(block - s_q, s_q);
    Ok(SparsityLevel {
        s_q,
        rho_num: num,
        rho_den: den,
        block,
    })
}

fn reduce(num: u64, den: u64) -> (u64, u64) {
    let g = gcd(num, den);
    (num / g, den / g)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn default_q_grid() -> Vec<f64> {
    (1..=20).rev().map(|i| i as f64 * 0.05).collect()
}

pub fn default_rho_grid() -> Vec<f64> {
    (2..=100).map(|r| r as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleQ {
    pub q: f64,
    pub rho: f64,
    pub threshold: f64,
}

/// Smallest `q` on the grid for which some `rho` on its grid gives
/// `strong_threshold(kappa, q, rho) > delta`, with the first witnessing `rho`.
pub fn min_feasible_q(
    delta: f64,
    kappa: f64,
    q_grid: &[f64],
    rho_grid: &[f64],
) -> Result<Option<FeasibleQ>> {
    if q_grid.is_empty() || rho_grid.is_empty() {
        return Err(Error::InvalidArgument("grids must be non-empty".into()));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta must lie in [0, 1), got {delta}")));
    }
    let mut best: Option<FeasibleQ> = None;
    for &q in q_grid {
        if best.is_some_and(|b| b.q <= q) {
            continue;
        }
        for &rho in rho_grid {
            match strong_threshold(kappa, q, rho) {
                Ok(threshold) if threshold > delta => {
                    best = Some(FeasibleQ { q, rho, threshold });
                    break;
                }
                Ok(_) | Err(Error::ConditionNumberHypothesis { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(best)
}

/// `(sqrt(2 F0) + noise) / sqrt(1 - delta)`, where `F0 = F(x0, eps0)` is the
/// solver's starting objective (see [`initial_objective`]).
pub fn theorem3_bound(delta_2l_p: f64, f0: f64, noise: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta_2l_p) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in [0, 1), got {delta_2l_p}"
        )));
    }
    if !(f0 >= 0.0) || !(noise >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "F0 and noise must be >= 0, got {f0} and {noise}"
        )));
    }
    Ok(((2.0 * f0).sqrt() + noise) / (1.0 - delta_2l_p).sqrt())
}

/// `F(x0, eps0) = lambda * sum_i (|z_i|^alpha + eps0^alpha)^(q/alpha)` for an
/// interpolating start (`A x0 = y`) with analysis coefficients `z = Omega x0`.
pub fn initial_objective(lambda: f64, z: &[f64], eps0: f64, q: f64, alpha: f64) -> f64 {
    let e = eps0.powf(alpha);
    lambda
        * z.iter()
            .map(|v| (v.abs().powf(alpha) + e).powf(q / alpha))
            .sum::<f64>()
}
