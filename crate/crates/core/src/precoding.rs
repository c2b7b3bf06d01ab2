//! Linear precoders, SINR and the sum-rate bounds for IM/DD channels.
//!
//! The noise variance is fixed at 1; a physical noise level is absorbed by
//! scaling the channel. Rates are reported in bits per channel use.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Rate coefficient of the uniform-input lower bound, `6 / (pi e)`.
pub const GAMMA_LB: f64 = 6.0 / (PI * E);
/// Rate coefficient of the upper bound.
pub const GAMMA_UB: f64 = 1.0;

/// Coefficient `gamma` in `1/2 log2(1 + gamma SINR)`, between the lower- and
/// upper-bound values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCoefficient(f64);

impl RateCoefficient {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(GAMMA_LB - 1e-15..=GAMMA_UB).contains(&gamma) {
            return Err(Error::Domain(format!(
                "rate coefficient {gamma} outside [6/(pi e), 1]"
            )));
        }
        Ok(RateCoefficient(gamma))
    }

    pub fn lower() -> Self {
        RateCoefficient(GAMMA_LB)
    }

    pub fn upper() -> Self {
        RateCoefficient(GAMMA_UB)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for RateCoefficient {
    fn default() -> Self {
        Self::lower()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Mrt,
    Rzf,
}

/// Precoding matrix `W` (`M^2 x K`, column `k` serves user `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub w: DMatrix<f64>,
    pub scheme: Scheme,
    /// Regularization, zero for MRT.
    pub alpha: f64,
    /// Power normalization applied to the unnormalized precoder.
    pub beta: f64,
}

impl PrecoderSet {
    /// `sum_k ||w_k||^2`.
    pub fn total_power(&self) -> f64 {
        self.w.norm_squared()
    }

    /// Largest per-LED power `max_m sum_k w_mk^2`.
    pub fn max_led_power(&self) -> f64 {
        self.w.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max)
    }
}

/// Maximum ratio transmission: `w_k = sqrt(beta) h_k`, `beta = P / sum ||h_k||^2`.
pub fn mrt(h: &DMatrix<f64>, power: f64) -> Result<PrecoderSet> {
    let norm2 = h.norm_squared();
    if norm2 == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let beta = power / norm2;
    Ok(PrecoderSet {
        w: h.transpose() * beta.sqrt(),
        scheme: Scheme::Mrt,
        alpha: 0.0,
        beta,
    })
}

/// Regularized zero-forcing: `w_k = sqrt(beta) (H^T H + alpha I)^-1 h_k`.
///
/// Evaluated through the `K x K` form `H^T (H H^T + alpha I)^-1`.
pub fn rzf(h: &DMatrix<f64>, power: f64, alpha: f64) -> Result<PrecoderSet> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("RZF regularization must be positive, got {alpha}")));
    }
    if h.norm_squared() == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let k = h.nrows();
    let gram = h * h.transpose() + DMatrix::identity(k, k) * alpha;
    let inv = gram.cholesky().ok_or(Error::SingularSystem)?.inverse();
    let raw = h.transpose() * inv;
    let norm2 = raw.norm_squared();
    if !(norm2 > 0.0 && norm2.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let beta = power / norm2;
    Ok(PrecoderSet {
        w: raw * beta.sqrt(),
        scheme: Scheme::Rzf,
        alpha,
        beta,
    })
}

/// `SINR_k = (h_k . w_k)^2 / (1 + sum_{k' != k} (h_k . w_k')^2)`.
pub fn sinr(h: &DMatrix<f64>, w: &DMatrix<f64>) -> Vec<f64> {
    let g = h * w;
    (0..g.nrows())
        .map(|k| {
            let row = g.row(k);
            let signal = row[k] * row[k];
            signal / (1.0 + row.norm_squared() - signal)
        })
        .collect()
}

/// Interference-to-signal power ratio at every user.
pub fn interference_to_signal(h: &DMatrix<f64>, w: &DMatrix<f64>) -> Vec<f64> {
    let g = h * w;
    (0..g.nrows())
        .map(|k| {
            let row = g.row(k);
            let signal = row[k] * row[k];
            (row.norm_squared() - signal) / signal
        })
        .collect()
}

/// Sum rates at both bounds and at a chosen coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub sinr: Vec<f64>,
    pub r_lb: f64,
    pub r_ub: f64,
    pub r_sum: f64,
}

/// `1/2 sum_k log2(1 + gamma SINR_k)`.
pub fn sum_rate(sinr: &[f64], gamma: f64) -> f64 {
    0.5 * sinr.iter().map(|s| (gamma * s).ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}

pub fn rates(sinr: &[f64], gamma: RateCoefficient) -> RateReport {
    RateReport {
        sinr: sinr.to_vec(),
        r_lb: sum_rate(sinr, GAMMA_LB),
        r_ub: sum_rate(sinr, GAMMA_UB),
        r_sum: sum_rate(sinr, gamma.value()),
    }
}

/// Large-array MRT and RZF sum rates (bits) from the gains `g_k`:
/// `1/2 sum log2(gamma P M^4 g_k^4 / sum g^2)` and
/// `1/2 sum log2(gamma P M^4 / sum g^-2)`.
pub fn asymptotic_linear_rates(g: &[f64], m: usize, power: f64, gamma: f64) -> Result<(f64, f64)> {
    if g.is_empty() || g.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain("asymptotic rates need every gain positive".into()));
    }
    let m4 = (m as f64).powi(4);
    let sum_sq: f64 = g.iter().map(|x| x * x).sum();
    let sum_inv_sq: f64 = g.iter().map(|x| 1.0 / (x * x)).sum();
    let half_log2 = |x: f64| 0.5 * x.log2();
    let mrt = g.iter().map(|x| half_log2(gamma * power * m4 * x.powi(4) / sum_sq)).sum();
    let rzf = g.len() as f64 * half_log2(gamma * power * m4 / sum_inv_sq);
    Ok((mrt, rzf))
}

/// Uniformly rescales `W` so the most loaded LED carries exactly `p`.
pub fn scale_to_per_led(pre: &PrecoderSet, p: f64) -> Result<PrecoderSet> {
    let peak = pre.max_led_power();
    if peak == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let s = p / peak;
    Ok(PrecoderSet {
        w: &pre.w * s.sqrt(),
        beta: pre.beta * s,
        ..pre.clone()
    })
}

/// Angle between two vectors.
pub fn principal_angle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}
