//! Water-filling over the users' dominant beams.

use crate::error::{Error, Result};

/// Power per user on its dominant beam and the water level.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFillResult {
    pub levels: Vec<f64>,
    /// Lagrange multiplier; the water level is `1 / nu`.
    pub nu: f64,
    /// Large-array sum rate in bits, `1/2 sum log2(1 + gamma M^4 g_k^2 level_k)`.
    pub rate: f64,
}

/// `level_k = (1/nu - 1/(gamma M^4 g_k^2))^+` with `sum level_k = P`.
///
/// The water level is found exactly by sorting the floors: with the `j`
/// lowest floors active it equals `(P + sum of those floors) / j`.
pub fn waterfill_total(g: &[f64], m: usize, power: f64, gamma: f64) -> Result<WaterFillResult> {
    if g.is_empty() || g.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Domain("water-filling needs positive finite gains".into()));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::Domain(format!("power must be positive, got {power}")));
    }
    let m4 = (m as f64).powi(4);
    let snr: Vec<f64> = g.iter().map(|x| gamma * m4 * x * x).collect();
    let floors: Vec<f64> = snr.iter().map(|s| 1.0 / s).collect();
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| floors[a].total_cmp(&floors[b]));

    let mut water = power + floors[order[0]];
    let mut cum = 0.0;
    for (j, &idx) in order.iter().enumerate() {
        cum += floors[idx];
        let candidate = (power + cum) / (j + 1) as f64;
        if candidate > floors[idx] {
            water = candidate;
        } else {
            break;
        }
    }
    let levels: Vec<f64> = floors.iter().map(|f| (water - f).max(0.0)).collect();
    let rate = levels
        .iter()
        .zip(&snr)
        .map(|(l, s)| 0.5 * (s * l).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2;
    Ok(WaterFillResult {
        levels,
        nu: 1.0 / water,
        rate,
    })
}
