//! Sum-rate maximization over transmit covariances.
//!
//! Full covariance designs come from the convex-concave procedure in
//! [`cccp`]; beam-domain designs (diagonal, one user per beam) come from
//! [`waterfill`] and [`beams`]; [`ratio`] compares them with a lens-free
//! array.

pub mod beams;
pub mod cccp;
pub mod kkt;
pub mod projection;
pub mod ratio;
pub mod waterfill;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub use beams::{
    asymptotic_design, asymptotic_per_led, asymptotic_total, beam_domain_design, beam_allocation_greedy, beam_allocation_objective,
    orthogonality_check, resolve_collisions, BeamAllocation, OrthogonalityReport,
};
pub use cccp::{cccp, convex_subproblem, CccpOptions, CccpResult, SubproblemResult};
pub use kkt::{kkt_residual, KktReport};
pub use projection::{project_per_led, project_per_led_newton, project_psd, project_total};
pub use ratio::{no_lens_optimum, no_lens_rate, rate_ratio, RatioPoint};
pub use waterfill::{waterfill_total, WaterFillResult};

/// Power constraint on the transmit covariances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerBudget {
    /// `sum_k tr(Q_k) <= P`.
    Total(f64),
    /// `sum_k [Q_k]_mm <= p` for every LED `m`.
    PerLed(f64),
}

impl PowerBudget {
    pub fn new_total(power: f64) -> Result<Self> {
        check_power(power)?;
        Ok(PowerBudget::Total(power))
    }

    pub fn new_per_led(power: f64) -> Result<Self> {
        check_power(power)?;
        Ok(PowerBudget::PerLed(power))
    }

    /// Budget value (`P` or `p`).
    pub fn level(&self) -> f64 {
        match *self {
            PowerBudget::Total(p) | PowerBudget::PerLed(p) => p,
        }
    }

    /// DC bias `b = sqrt(p K)` that keeps `K` streams nonnegative under a
    /// per-LED budget.
    pub fn bias(&self, users: usize) -> Option<f64> {
        match *self {
            PowerBudget::PerLed(p) => Some((p * users as f64).sqrt()),
            PowerBudget::Total(_) => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PowerBudget::Total(_) => "total",
            PowerBudget::PerLed(_) => "per-led",
        }
    }
}

fn check_power(power: f64) -> Result<()> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::Domain(format!("power budget must be positive, got {power}")));
    }
    Ok(())
}

/// Transmit covariance of one user.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Dense(DMatrix<f64>),
    /// Beam-domain allocation: independent signals on each LED.
    Diagonal(DVector<f64>),
}

impl Covariance {
    pub fn zeros_diagonal(n: usize) -> Self {
        Covariance::Diagonal(DVector::zeros(n))
    }

    pub fn dim(&self) -> usize {
        match self {
            Covariance::Dense(q) => q.nrows(),
            Covariance::Diagonal(d) => d.len(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Covariance::Dense(q) => q.trace(),
            Covariance::Diagonal(d) => d.sum(),
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        match self {
            Covariance::Dense(q) => q.diagonal(),
            Covariance::Diagonal(d) => d.clone(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Covariance::Dense(q) => q.clone(),
            Covariance::Diagonal(d) => DMatrix::from_diagonal(d),
        }
    }

    /// `h^T Q h` for every row `h` of `h_mat`.
    pub fn quadratic_forms(&self, h_mat: &DMatrix<f64>) -> DVector<f64> {
        match self {
            Covariance::Dense(q) => {
                let qh = q * h_mat.transpose();
                DVector::from_iterator(
                    h_mat.nrows(),
                    (0..h_mat.nrows()).map(|i| h_mat.row(i).transpose().dot(&qh.column(i))),
                )
            }
            Covariance::Diagonal(d) => DVector::from_iterator(
                h_mat.nrows(),
                h_mat.row_iter().map(|r| r.iter().zip(d.iter()).map(|(h, q)| h * h * q).sum()),
            ),
        }
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = match self {
            Covariance::Dense(q) => SymmetricEigen::new(q.clone()).eigenvalues.iter().copied().collect(),
            Covariance::Diagonal(d) => d.iter().copied().collect(),
        };
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }
}

/// Covariances of all users and the budget they were designed for.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub q: Vec<Covariance>,
    pub budget: PowerBudget,
}

impl CovarianceSet {
    pub fn users(&self) -> usize {
        self.q.len()
    }

    pub fn total_trace(&self) -> f64 {
        self.q.iter().map(Covariance::trace).sum()
    }

    /// `sum_k [Q_k]_mm` per LED.
    pub fn led_loads(&self) -> DVector<f64> {
        let n = self.q.first().map_or(0, Covariance::dim);
        self.q.iter().fold(DVector::zeros(n), |acc, q| acc + q.diagonal())
    }

    /// Largest relative budget excess (`<= 0` when feasible).
    pub fn budget_excess(&self) -> f64 {
        match self.budget {
            PowerBudget::Total(p) => self.total_trace() / p - 1.0,
            PowerBudget::PerLed(p) => self.led_loads().iter().fold(f64::NEG_INFINITY, |m, v| m.max(v / p - 1.0)),
        }
    }

    /// Most negative eigenvalue over all users, divided by the budget level.
    pub fn min_relative_eigenvalue(&self) -> f64 {
        let level = self.budget.level();
        self.q
            .iter()
            .map(|q| q.eigenvalues().last().copied().unwrap_or(0.0) / level)
            .fold(f64::INFINITY, f64::min)
    }

    /// `t[(i, k)] = h_i^T Q_k h_i`.
    pub fn cross_gains(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(h.nrows(), self.q.len());
        for (k, q) in self.q.iter().enumerate() {
            t.set_column(k, &q.quadratic_forms(h));
        }
        t
    }
}

/// `1/2 sum_k ln(1 + gamma t_kk / (1 + sum_{k' != k} t_kk'))` from the cross
/// gains `t[(i, k)] = h_i^T Q_k h_i`.
pub(crate) fn rate_nats(t: &DMatrix<f64>, gamma: f64) -> f64 {
    (0..t.nrows())
        .map(|i| {
            let own = t[(i, i)];
            let interference = t.row(i).sum() - own;
            0.5 * (gamma * own / (1.0 + interference)).ln_1p()
        })
        .sum()
}

/// Sum rate in bits per channel use:
/// `1/2 sum_k log2(1 + gamma tr(R_k Q_k) / (1 + tr(R_k sum_{k' != k} Q_k')))`.
pub fn sum_rate_cov(h: &DMatrix<f64>, q: &CovarianceSet, gamma: f64) -> f64 {
    rate_nats(&q.cross_gains(h), gamma) / std::f64::consts::LN_2
}

/// Large-array sum rate of a covariance set, in bits: each user only sees its
/// dominant beam with gain `M^2 g_k`.
pub fn asymptotic_sum_rate(g: &[f64], dominant: &[usize], m: usize, q: &CovarianceSet, gamma: f64) -> f64 {
    let m4 = (m as f64).powi(4);
    let diags: Vec<DVector<f64>> = q.q.iter().map(Covariance::diagonal).collect();
    let nats: f64 = (0..g.len())
        .map(|k| {
            let b = dominant[k];
            let gain = m4 * g[k] * g[k];
            let own = diags[k][b];
            let other: f64 = diags.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, d)| d[b]).sum();
            0.5 * (gamma * gain * own / (1.0 + gain * other)).ln_1p()
        })
        .sum();
    nats / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precoding::{mrt, rates, sinr, RateCoefficient};

    #[test]
    fn zero_covariance_has_zero_rate() {
        let h = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.5, 0.0, 1.0]);
        let q = CovarianceSet {
            q: vec![Covariance::zeros_diagonal(3), Covariance::Dense(DMatrix::zeros(3, 3))],
            budget: PowerBudget::Total(1.0),
        };
        assert_eq!(sum_rate_cov(&h, &q, 0.8), 0.0);
    }

    #[test]
    fn single_user_rank_one() {
        let h = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 2.0]);
        let p = 3.0;
        let hv = h.row(0).transpose();
        let q = CovarianceSet {
            q: vec![Covariance::Dense(&hv * hv.transpose() * (p / 9.0))],
            budget: PowerBudget::Total(p),
        };
        let expected = 0.5 * (1.0 + 0.9 * p * 9.0f64).log2();
        assert!((sum_rate_cov(&h, &q, 0.9) - expected).abs() < 1e-12);
    }

    #[test]
    fn matches_precoder_pipeline() {
        let h = DMatrix::from_row_slice(2, 3, &[1.0, 0.3, 0.0, 0.2, 1.0, 0.5]);
        let pre = mrt(&h, 4.0).unwrap();
        let q = CovarianceSet {
            q: (0..2)
                .map(|k| {
                    let w = pre.w.column(k).into_owned();
                    Covariance::Dense(&w * w.transpose())
                })
                .collect(),
            budget: PowerBudget::Total(4.0),
        };
        let gamma = RateCoefficient::lower();
        let report = rates(&sinr(&h, &pre.w), gamma);
        assert!((sum_rate_cov(&h, &q, gamma.value()) - report.r_sum).abs() < 1e-12);
    }

    #[test]
    fn diagonal_and_dense_agree() {
        let h = DMatrix::from_row_slice(2, 3, &[1.0, 0.3, 0.0, 0.2, 1.0, 0.5]);
        let d0 = DVector::from_row_slice(&[0.5, 0.0, 0.2]);
        let d1 = DVector::from_row_slice(&[0.0, 0.7, 0.1]);
        let diag = CovarianceSet {
            q: vec![Covariance::Diagonal(d0.clone()), Covariance::Diagonal(d1.clone())],
            budget: PowerBudget::PerLed(1.0),
        };
        let dense = CovarianceSet {
            q: vec![
                Covariance::Dense(DMatrix::from_diagonal(&d0)),
                Covariance::Dense(DMatrix::from_diagonal(&d1)),
            ],
            budget: PowerBudget::PerLed(1.0),
        };
        assert!((sum_rate_cov(&h, &diag, 1.0) - sum_rate_cov(&h, &dense, 1.0)).abs() < 1e-14);
        assert!((diag.led_loads() - DVector::from_row_slice(&[0.5, 0.7, 0.3])).norm() < 1e-15);
        assert!(diag.budget_excess() < 0.0);
    }

    #[test]
    fn budget_helpers() {
        assert!(PowerBudget::new_total(0.0).is_err());
        let b = PowerBudget::new_per_led(2.0).unwrap();
        assert!((b.bias(8).unwrap() - 4.0).abs() < 1e-15);
        assert_eq!(PowerBudget::Total(1.0).bias(3), None);
        assert_eq!(b.label(), "per-led");
    }
}
