//! Comparison with the same LED array without a lens.
//!
//! Without the lens every LED reaches user `k` with the same gain `g~_k`, so
//! the channel is rank one and the best strategy serves only the strongest
//! user with all LEDs in phase.

use nalgebra::DMatrix;

use super::beams::beam_allocation_greedy;
use super::{sum_rate_cov, Covariance, CovarianceSet, PowerBudget};
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};

fn best_user(tilde_g: &[f64]) -> Result<usize> {
    if tilde_g.is_empty() {
        return Err(Error::Domain("no users".into()));
    }
    let mut best = 0;
    for (k, g) in tilde_g.iter().enumerate() {
        if *g > tilde_g[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Index of the served user and the optimal lens-free rate in bits:
/// `1/2 log2(1 + gamma M^2 g~^2 P)` (total) or `1/2 log2(1 + gamma M^4 g~^2 p)`
/// (per LED).
pub fn no_lens_rate(tilde_g: &[f64], m: usize, budget: PowerBudget, gamma: f64) -> Result<(usize, f64)> {
    let k = best_user(tilde_g)?;
    let g2 = tilde_g[k] * tilde_g[k];
    let m2 = (m * m) as f64;
    let snr = match budget {
        PowerBudget::Total(p) => gamma * m2 * g2 * p,
        PowerBudget::PerLed(p) => gamma * m2 * m2 * g2 * p,
    };
    Ok((k, 0.5 * snr.log2_1p()))
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

/// Optimal lens-free covariances and rate.
///
/// The served user gets `c 1 1^T` with `c = P / M^2` (trace `P`) or `c = p`
/// (every LED at `p`); everyone else gets nothing.
pub fn no_lens_optimum(tilde_g: &[f64], m: usize, budget: PowerBudget, gamma: f64) -> Result<(CovarianceSet, f64)> {
    let (best, rate) = no_lens_rate(tilde_g, m, budget, gamma)?;
    let n = m * m;
    let c = match budget {
        PowerBudget::Total(p) => p / n as f64,
        PowerBudget::PerLed(p) => p,
    };
    let q = (0..tilde_g.len())
        .map(|k| {
            if k == best {
                Covariance::Dense(DMatrix::from_element(n, n, c))
            } else {
                Covariance::zeros_diagonal(n)
            }
        })
        .collect();
    Ok((CovarianceSet { q, budget }, rate))
}

/// Greedy beam-domain rate against the lens-free optimum at one array size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioPoint {
    pub m: usize,
    pub bdma_rate: f64,
    pub no_lens_rate: f64,
    pub ratio: f64,
}

/// `R_BDMA / R~`: the numerator is the greedy beam allocation evaluated with
/// the exact covariance rate, the denominator the lens-free optimum.
pub fn rate_ratio(
    with_lens: &ChannelMatrix,
    without_lens: &ChannelMatrix,
    m: usize,
    budget: PowerBudget,
    b_max: usize,
    gamma: f64,
) -> Result<RatioPoint> {
    let rdiag = with_lens.h.map(|v| v * v);
    let alloc = beam_allocation_greedy(&rdiag, budget, b_max, gamma)?;
    let cov = alloc.covariances(with_lens.h.ncols(), budget);
    let bdma_rate = sum_rate_cov(&with_lens.h, &cov, gamma);
    let (_, no_lens) = no_lens_rate(&without_lens.g, m, budget, gamma)?;
    Ok(RatioPoint {
        m,
        bdma_rate,
        no_lens_rate: no_lens,
        ratio: bdma_rate / no_lens,
    })
}
