//! First-order optimality check for a covariance set.
//!
//! At a stationary point of the rate `F` there are multipliers `D`
//! (`eta I` for a total budget, `diag(mu)` for per-LED budgets) and PSD
//! matrices `A_k = D - grad_k F` with `tr(A_k Q_k) = 0`. The multipliers are
//! reconstructed from the stationarity equation traced against `Q_k`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::cccp::{project_unit, rate_gradient, CccpOptions, Kind};
use super::{CovarianceSet, PowerBudget};

/// Residuals of the KKT system.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// `eta` (one entry) or `mu_m` per LED, in nats per unit power.
    pub multipliers: Vec<f64>,
    /// `sum_k tr(D Q_k)`, the scale for the slackness residual.
    pub trace_scale: f64,
    /// `|tr(A_k Q_k)|` per user.
    pub comp_slack_abs: Vec<f64>,
    /// `max_k |tr(A_k Q_k)| / trace_scale` (absolute when the scale is zero).
    pub comp_slack: f64,
    /// Smallest eigenvalue over all `A_k`, relative to the largest multiplier.
    pub min_dual_eigenvalue: f64,
    /// `|X - Proj(X + grad)|` with `X = Q / level` and the gradient scaled
    /// by the level.
    pub stationarity: f64,
}

/// Reconstructs the multipliers for `q` and reports the residuals.
pub fn kkt_residual(h: &DMatrix<f64>, q: &CovarianceSet, gamma: f64) -> KktReport {
    let dense: Vec<DMatrix<f64>> = q.q.iter().map(|c| c.to_dense()).collect();
    let grad = rate_gradient(h, &dense, gamma);
    let n = h.ncols();
    let k = dense.len();

    let d_diag: Vec<f64> = match q.budget {
        PowerBudget::Total(_) => {
            let num: f64 = grad.iter().zip(&dense).map(|(g, q)| g.dot(q)).sum();
            let den: f64 = dense.iter().map(|q| q.trace()).sum();
            let eta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
            vec![eta; n]
        }
        PowerBudget::PerLed(_) => (0..n)
            .map(|m| {
                let num: f64 = grad.iter().zip(&dense).map(|(g, q)| (g * q)[(m, m)]).sum();
                let den: f64 = dense.iter().map(|q| q[(m, m)]).sum();
                if den > 0.0 {
                    (num / den).max(0.0)
                } else {
                    0.0
                }
            })
            .collect(),
    };
    let multipliers = match q.budget {
        PowerBudget::Total(_) => vec![d_diag.first().copied().unwrap_or(0.0)],
        PowerBudget::PerLed(_) => d_diag.clone(),
    };

    let trace_scale: f64 = dense
        .iter()
        .map(|q| (0..n).map(|m| d_diag[m] * q[(m, m)]).sum::<f64>())
        .sum();
    let mut comp_slack_abs = Vec::with_capacity(k);
    let mut min_eig = f64::INFINITY;
    for (g, qk) in grad.iter().zip(&dense) {
        let mut a = -g.clone();
        for m in 0..n {
            a[(m, m)] += d_diag[m];
        }
        comp_slack_abs.push(a.dot(qk).abs());
        min_eig = min_eig.min(SymmetricEigen::new(a).eigenvalues.min());
    }
    let top = d_diag.iter().copied().fold(0.0, f64::max);
    let worst = comp_slack_abs.iter().copied().fold(0.0, f64::max);
    let comp_slack = if trace_scale > 0.0 { worst / trace_scale } else { worst };

    let level = q.budget.level();
    let kind = match q.budget {
        PowerBudget::Total(_) => Kind::Total,
        PowerBudget::PerLed(_) => Kind::PerLed,
    };
    let x: Vec<DMatrix<f64>> = dense.iter().map(|q| q / level).collect();
    let stepped: Vec<DMatrix<f64>> = x.iter().zip(&grad).map(|(x, g)| x + g * level).collect();
    let opts = CccpOptions {
        dykstra_iters: 2000,
        dykstra_tol: 1e-14,
        ..CccpOptions::default()
    };
    let projected = project_unit(kind, &stepped, &opts);
    let stationarity = x
        .iter()
        .zip(&projected)
        .map(|(a, b)| (a - b).norm_squared())
        .sum::<f64>()
        .sqrt();

    KktReport {
        multipliers,
        trace_scale,
        comp_slack_abs,
        comp_slack,
        min_dual_eigenvalue: if top > 0.0 { min_eig / top } else { min_eig },
        stationarity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::Covariance;

    #[test]
    fn single_user_optimum_satisfies_kkt() {
        let h = DMatrix::from_row_slice(1, 3, &[0.5, 1.0, 0.2]);
        let p = 4.0;
        let hv = h.row(0).transpose();
        let q = CovarianceSet {
            q: vec![Covariance::Dense(&hv * hv.transpose() * (p / h.norm_squared()))],
            budget: PowerBudget::Total(p),
        };
        let r = kkt_residual(&h, &q, 0.9);
        assert!(r.comp_slack <= 1e-12);
        assert!(r.min_dual_eigenvalue >= -1e-12);
        assert!(r.stationarity <= 1e-9);
        let s = 1.0 + 0.9 * p * h.norm_squared();
        assert!((r.multipliers[0] - 0.5 * 0.9 * h.norm_squared() / s).abs() < 1e-14);
    }

    #[test]
    fn zero_covariance_branch() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let q = CovarianceSet {
            q: vec![Covariance::Dense(DMatrix::zeros(2, 2)), Covariance::Dense(DMatrix::zeros(2, 2))],
            budget: PowerBudget::Total(1.0),
        };
        let r = kkt_residual(&h, &q, 1.0);
        assert_eq!(r.multipliers, vec![0.0]);
        assert_eq!(r.comp_slack, 0.0);
        assert!(r.stationarity > 0.0);
    }
}
