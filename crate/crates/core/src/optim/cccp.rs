//! Convex-concave procedure for the sum-rate d.c. programs.
//!
//! With `t_ik = h_i^T Q_k h_i`, `R_i = 1 + sum_{k != i} t_ik` and
//! `S_i = R_i + gamma t_ii`, the rate (in nats) is `F = f - g` with
//! `f = 1/2 sum ln S_i` and `g = 1/2 sum ln R_i`, both concave. Each outer
//! step replaces `g` by its tangent at the current point and maximizes the
//! resulting concave minorant by projected gradient ascent, so the rate never
//! decreases.
//!
//! Two exact reductions keep the inner problems small. Under a total budget
//! every covariance can be compressed onto the span of the channel rows
//! without changing any `t_ik` or increasing any trace. Under per-LED budgets
//! the same holds for the coordinate block of LEDs that reach some user.
//! Covariances are also normalized by the budget level so the inner solver
//! works on a unit budget.

use nalgebra::DMatrix;

use super::projection::{project_per_led, project_per_led_newton, project_total};
use super::kkt::kkt_residual;
use super::{Covariance, CovarianceSet, PowerBudget};
use crate::error::{Error, Result};

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CccpOptions {
    pub max_outer: usize,
    /// Stop once the rate improves by less than this fraction.
    pub outer_tol: f64,
    pub max_inner: usize,
    /// Projected-gradient norm target relative to `1 + |gradient at start|`.
    pub inner_tol: f64,
    /// Dykstra cycle cap for the per-LED projection.
    pub dykstra_iters: usize,
    pub dykstra_tol: f64,
    /// Fraction of the budget used by the initial MRT point, in `(0, 1]`.
    pub init_scale: f64,
    /// Evaluate the KKT residuals at every iterate (costs one extra
    /// eigendecomposition per user and step).
    pub record_residuals: bool,
}

impl Default for CccpOptions {
    fn default() -> Self {
        CccpOptions {
            max_outer: 100,
            outer_tol: 1e-12,
            max_inner: 500,
            inner_tol: 1e-12,
            dykstra_iters: 50,
            dykstra_tol: 1e-9,
            init_scale: 1.0,
            record_residuals: false,
        }
    }
}

impl CccpOptions {
    fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0 && self.inner_tol > 0.0 && self.dykstra_tol > 0.0) {
            return Err(Error::Domain("solver tolerances must be positive".into()));
        }
        if !(self.init_scale > 0.0 && self.init_scale <= 1.0) {
            return Err(Error::Domain(format!("init scale {} outside (0, 1]", self.init_scale)));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::Domain("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a CCCP run.
#[derive(Debug, Clone, PartialEq)]
pub struct CccpResult {
    pub q: CovarianceSet,
    /// Rate in bits after the initial point and after every outer step.
    pub trace: Vec<f64>,
    /// `false` when `max_outer` was hit before the tolerance was met; the
    /// returned point is still the best iterate.
    pub converged: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// `(stationarity, comp_slack)` aligned with `trace`; empty unless
    /// `record_residuals` was set.
    pub residuals: Vec<(f64, f64)>,
}

impl CccpResult {
    pub fn rate(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial point")
    }

    /// `iteration,objective,stationarity,comp_slack`, one row per trace entry;
    /// the residual columns are empty when they were not recorded.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,objective,stationarity,comp_slack\n");
        for (i, obj) in self.trace.iter().enumerate() {
            match self.residuals.get(i) {
                Some((st, cs)) => s.push_str(&format!("{i},{obj:.8e},{st:.8e},{cs:.8e}\n")),
                None => s.push_str(&format!("{i},{obj:.8e},,\n")),
            }
        }
        s
    }
}

/// Outcome of one convex subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemResult {
    pub q: CovarianceSet,
    pub converged: bool,
    pub iterations: usize,
}

/// `t[(i, k)] = h_i^T Q_k h_i`.
pub fn cross_gains(h: &DMatrix<f64>, q: &[DMatrix<f64>]) -> DMatrix<f64> {
    let k = h.nrows();
    let mut t = DMatrix::zeros(k, q.len());
    for (col, qk) in q.iter().enumerate() {
        let qh = qk * h.transpose();
        for i in 0..k {
            t[(i, col)] = h.row(i).transpose().dot(&qh.column(i));
        }
    }
    t
}

fn interference(t: &DMatrix<f64>) -> Vec<f64> {
    (0..t.nrows()).map(|i| 1.0 + t.row(i).sum() - t[(i, i)]).collect()
}

/// `(f, g)` in nats.
pub fn dc_parts(h: &DMatrix<f64>, q: &[DMatrix<f64>], gamma: f64) -> (f64, f64) {
    let t = cross_gains(h, q);
    parts_from(&t, gamma)
}

fn parts_from(t: &DMatrix<f64>, gamma: f64) -> (f64, f64) {
    let r = interference(t);
    let f = r.iter().enumerate().map(|(i, ri)| 0.5 * (ri + gamma * t[(i, i)]).ln()).sum();
    let g = r.iter().map(|ri| 0.5 * ri.ln()).sum();
    (f, g)
}

/// `sum_i w_i h_i h_i^T`.
fn weighted_gram(h: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled = h.clone();
    for (i, wi) in w.iter().enumerate() {
        scaled.row_mut(i).scale_mut(*wi);
    }
    h.transpose() * scaled
}

/// Gradient of `g` with respect to every `Q_k`:
/// `1/2 sum_{i != k} h_i h_i^T / R_i`.
pub fn interference_gradient(h: &DMatrix<f64>, q: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let t = cross_gains(h, q);
    gradient_g(h, &t)
}

fn gradient_g(h: &DMatrix<f64>, t: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let r = interference(t);
    (0..t.ncols())
        .map(|k| {
            let w: Vec<f64> = (0..r.len()).map(|i| if i == k { 0.0 } else { 0.5 / r[i] }).collect();
            weighted_gram(h, &w)
        })
        .collect()
}

/// Gradient of `f` with respect to every `Q_k`:
/// `1/2 sum_i a_ik h_i h_i^T / S_i` with `a_kk = gamma`, else 1.
fn gradient_f(h: &DMatrix<f64>, t: &DMatrix<f64>, gamma: f64) -> Vec<DMatrix<f64>> {
    let r = interference(t);
    let s: Vec<f64> = (0..r.len()).map(|i| r[i] + gamma * t[(i, i)]).collect();
    (0..t.ncols())
        .map(|k| {
            let w: Vec<f64> = (0..s.len()).map(|i| if i == k { gamma } else { 1.0 } * 0.5 / s[i]).collect();
            weighted_gram(h, &w)
        })
        .collect()
}

/// Gradient of the rate `F = f - g` (nats) with respect to every `Q_k`.
pub fn rate_gradient(h: &DMatrix<f64>, q: &[DMatrix<f64>], gamma: f64) -> Vec<DMatrix<f64>> {
    let t = cross_gains(h, q);
    let gf = gradient_f(h, &t, gamma);
    let gg = gradient_g(h, &t);
    gf.into_iter().zip(gg).map(|(a, b)| a - b).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Total,
    PerLed,
}

impl Kind {
    fn of(budget: &PowerBudget) -> Self {
        match budget {
            PowerBudget::Total(_) => Kind::Total,
            PowerBudget::PerLed(_) => Kind::PerLed,
        }
    }
}

const NEWTON_ITERS: usize = 100;
const NEWTON_TOL: f64 = 1e-12;

/// Unit-budget projection; per-LED budgets fall back to Dykstra if the exact
/// dual method stalls.
pub(crate) fn project_unit(kind: Kind, y: &[DMatrix<f64>], opts: &CccpOptions) -> Vec<DMatrix<f64>> {
    match kind {
        Kind::Total => project_total(y, 1.0),
        Kind::PerLed => project_per_led_newton(y, 1.0, NEWTON_ITERS, NEWTON_TOL)
            .unwrap_or_else(|| project_per_led(y, 1.0, opts.dykstra_iters, opts.dykstra_tol)),
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn diff(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn axpy(x: &[DMatrix<f64>], s: f64, d: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    x.iter().zip(d).map(|(x, d)| x + d * s).collect()
}

/// Unit-budget problem on normalized channels.
struct Problem<'a> {
    h: DMatrix<f64>,
    gamma: f64,
    kind: Kind,
    opts: &'a CccpOptions,
}

impl Problem<'_> {
    fn project(&self, y: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        project_unit(self.kind, y, self.opts)
    }

    /// Subproblem value `f(X) - <L, X>` and its gradient.
    fn eval(&self, x: &[DMatrix<f64>], lin: &[DMatrix<f64>]) -> (f64, Vec<DMatrix<f64>>) {
        let t = cross_gains(&self.h, x);
        let (f, _) = parts_from(&t, self.gamma);
        let value = f - inner(lin, x);
        let grad = gradient_f(&self.h, &t, self.gamma)
            .into_iter()
            .zip(lin)
            .map(|(g, l)| g - l)
            .collect();
        (value, grad)
    }

    fn rate_nats(&self, x: &[DMatrix<f64>]) -> f64 {
        let (f, g) = dc_parts(&self.h, x, self.gamma);
        f - g
    }

    /// Projected gradient ascent with Barzilai-Borwein steps and Armijo
    /// backtracking along the projection arc.
    fn solve(&self, lin: &[DMatrix<f64>], start: Vec<DMatrix<f64>>) -> (Vec<DMatrix<f64>>, bool, usize) {
        const ARMIJO: f64 = 1e-4;
        let mut x = start;
        let (mut value, mut grad) = self.eval(&x, lin);
        let target = self.opts.inner_tol * (1.0 + norm(&grad));
        let mut step = 1.0;
        for it in 0..self.opts.max_inner {
            let unit = self.project(&axpy(&x, 1.0, &grad));
            if norm(&diff(&x, &unit)) <= target {
                return (x, true, it);
            }
            let (next, next_value, next_grad) = loop {
                let cand = if step == 1.0 { unit.clone() } else { self.project(&axpy(&x, step, &grad)) };
                let (v, g) = self.eval(&cand, lin);
                let rise = inner(&grad, &diff(&cand, &x));
                if v >= value + ARMIJO * rise {
                    break (cand, v, g);
                }
                step *= 0.5;
                if step < 1e-20 {
                    return (x, false, it);
                }
            };
            let s = diff(&next, &x);
            let y = diff(&next_grad, &grad);
            let sy = inner(&s, &y);
            let ss = inner(&s, &s);
            step = if sy < 0.0 && ss > 0.0 { (ss / -sy).clamp(1e-12, 1e12) } else { (step * 2.0).min(1e12) };
            x = next;
            value = next_value;
            grad = next_grad;
        }
        (x, false, self.opts.max_inner)
    }

    /// Scaled MRT starting point.
    fn initial(&self, scale: f64) -> Vec<DMatrix<f64>> {
        let n = self.h.ncols();
        let active = self.h.row_iter().filter(|r| r.norm_squared() > 0.0).count().max(1) as f64;
        let mut x: Vec<DMatrix<f64>> = self
            .h
            .row_iter()
            .map(|r| {
                let v = r.transpose();
                let nn = v.norm_squared();
                if nn == 0.0 {
                    DMatrix::zeros(n, n)
                } else {
                    match self.kind {
                        Kind::Total => &v * v.transpose() / (nn * active),
                        Kind::PerLed => &v * v.transpose(),
                    }
                }
            })
            .collect();
        if self.kind == Kind::PerLed {
            let peak = (0..n).map(|m| x.iter().map(|q| q[(m, m)]).sum::<f64>()).fold(0.0, f64::max);
            if peak > 0.0 {
                for q in &mut x {
                    *q /= peak;
                }
            }
        }
        for q in &mut x {
            *q *= scale;
        }
        x
    }
}

/// Orthonormal coordinates that carry every optimal covariance.
fn reduction(h: &DMatrix<f64>, kind: Kind) -> DMatrix<f64> {
    let n = h.ncols();
    match kind {
        Kind::PerLed => {
            let support: Vec<usize> = (0..n).filter(|&m| h.column(m).iter().any(|v| *v != 0.0)).collect();
            let mut u = DMatrix::zeros(n, support.len());
            for (j, &m) in support.iter().enumerate() {
                u[(m, j)] = 1.0;
            }
            u
        }
        Kind::Total => {
            let svd = h.transpose().svd(true, false);
            let u = svd.u.expect("left singular vectors requested");
            let top = svd.singular_values.max();
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&j| svd.singular_values[j] > 1e-12 * top)
                .collect();
            u.select_columns(&keep)
        }
    }
}

fn check_channel(h: &DMatrix<f64>) -> Result<()> {
    if h.nrows() == 0 || h.norm_squared() == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("channel has non-finite entries".into()));
    }
    Ok(())
}

/// Maximizes `f(Q) - sum_k tr(L_k Q_k)` over the budget set, starting from the
/// scaled MRT point. Works in the coordinates it is given.
pub fn convex_subproblem(
    linear: &[DMatrix<f64>],
    h: &DMatrix<f64>,
    budget: PowerBudget,
    gamma: f64,
    opts: &CccpOptions,
) -> Result<SubproblemResult> {
    opts.validate()?;
    check_channel(h)?;
    if linear.len() != h.nrows() || linear.iter().any(|l| l.shape() != (h.ncols(), h.ncols())) {
        return Err(Error::Domain("linear terms must be one n x n matrix per user".into()));
    }
    let level = budget.level();
    let problem = Problem {
        h: h * level.sqrt(),
        gamma,
        kind: Kind::of(&budget),
        opts,
    };
    let lin: Vec<DMatrix<f64>> = linear.iter().map(|l| l * level).collect();
    let start = problem.initial(opts.init_scale);
    let (x, converged, iterations) = problem.solve(&lin, start);
    Ok(SubproblemResult {
        q: CovarianceSet {
            q: x.into_iter().map(|xk| Covariance::Dense(xk * level)).collect(),
            budget,
        },
        converged,
        iterations,
    })
}

/// Runs CCCP from the scaled MRT point until the relative rate improvement
/// drops below `outer_tol` or `max_outer` steps have been taken.
pub fn cccp(h: &DMatrix<f64>, budget: PowerBudget, gamma: f64, opts: &CccpOptions) -> Result<CccpResult> {
    opts.validate()?;
    check_channel(h)?;
    let kind = Kind::of(&budget);
    let level = budget.level();
    let basis = reduction(h, kind);
    let problem = Problem {
        h: h * &basis * level.sqrt(),
        gamma,
        kind,
        opts,
    };
    let mut x = problem.initial(opts.init_scale);
    let mut rate = problem.rate_nats(&x);
    let mut trace = vec![rate / std::f64::consts::LN_2];
    let lift = |x: &[DMatrix<f64>]| CovarianceSet {
        q: x.iter()
            .map(|xk| Covariance::Dense(&basis * xk * basis.transpose() * level))
            .collect(),
        budget,
    };
    let mut residuals = Vec::new();
    let mut record = |x: &[DMatrix<f64>]| {
        if opts.record_residuals {
            let r = kkt_residual(h, &lift(x), gamma);
            residuals.push((r.stationarity, r.comp_slack));
        }
    };
    record(&x);
    let mut converged = false;
    let mut outer = 0;
    let mut inner_total = 0;
    while outer < opts.max_outer {
        outer += 1;
        let lin = interference_gradient(&problem.h, &x);
        let (next, _, its) = problem.solve(&lin, x.clone());
        inner_total += its;
        let next_rate = problem.rate_nats(&next);
        let gain = next_rate - rate;
        if next_rate >= rate {
            x = next;
            rate = next_rate;
        }
        trace.push(rate / std::f64::consts::LN_2);
        record(&x);
        if gain <= opts.outer_tol * rate.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(CccpResult {
        q: lift(&x),
        trace,
        converged,
        outer_iterations: outer,
        inner_iterations: inner_total,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::sum_rate_cov;

    fn opts() -> CccpOptions {
        CccpOptions::default()
    }

    #[test]
    fn single_user_total_optimum() {
        let h = DMatrix::from_row_slice(1, 4, &[0.3, 0.0, 1.2, 0.5]);
        let (p, gamma) = (5.0, 0.8);
        let res = cccp(&h, PowerBudget::Total(p), gamma, &opts()).unwrap();
        let hn2 = h.norm_squared();
        let expected = 0.5 * (1.0 + gamma * p * hn2).log2();
        assert!((res.rate() - expected).abs() < 1e-6 * expected);
        let hv = h.row(0).transpose();
        let q_star = &hv * hv.transpose() * (p / hn2);
        assert!((res.q.q[0].to_dense() - q_star).norm() < 1e-6 * p);
        assert!(res.converged);
    }

    #[test]
    fn trace_is_monotone_and_feasible() {
        let h = DMatrix::from_row_slice(3, 4, &[1.0, 0.4, 0.0, 0.1, 0.2, 1.0, 0.3, 0.0, 0.0, 0.5, 0.9, 0.6]);
        for budget in [PowerBudget::Total(10.0), PowerBudget::PerLed(3.0)] {
            let res = cccp(&h, budget, 0.7026, &opts()).unwrap();
            for w in res.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{:?}", res.trace);
            }
            assert!(res.q.budget_excess() <= 1e-9);
            assert!(res.q.min_relative_eigenvalue() >= -1e-9);
            assert!((sum_rate_cov(&h, &res.q, 0.7026) - res.rate()).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = DMatrix::from_row_slice(2, 3, &[1.0, 0.4, 0.2, 0.1, 0.8, 0.5]);
        let q = vec![
            DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.2]),
            DMatrix::from_row_slice(3, 3, &[0.2, 0.0, 0.1, 0.0, 0.4, 0.0, 0.1, 0.0, 0.6]),
        ];
        let grad = interference_gradient(&h, &q);
        let eps = 1e-6;
        for k in 0..2 {
            for (a, b) in [(0, 0), (0, 2), (1, 2)] {
                let mut d = DMatrix::zeros(3, 3);
                d[(a, b)] += 0.5;
                d[(b, a)] += 0.5;
                let mut plus = q.clone();
                plus[k] += &d * eps;
                let mut minus = q.clone();
                minus[k] -= &d * eps;
                let fd = (dc_parts(&h, &plus, 0.9).1 - dc_parts(&h, &minus, 0.9).1) / (2.0 * eps);
                let an = grad[k].dot(&d);
                if an.abs() > 1e-12 {
                    assert!(((fd - an) / an).abs() < 1e-6, "k {k} ({a},{b}): {fd} vs {an}");
                } else {
                    assert!(fd.abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn subproblem_single_user_closed_form() {
        let h = DMatrix::from_row_slice(1, 2, &[0.6, 0.8]);
        let res = convex_subproblem(&[DMatrix::zeros(2, 2)], &h, PowerBudget::Total(2.0), 1.0, &opts()).unwrap();
        let hv = h.row(0).transpose();
        assert!((res.q.q[0].to_dense() - &hv * hv.transpose() * 2.0).norm() < 1e-6);
        assert!(res.converged);
    }

    #[test]
    fn rejects_degenerate_input() {
        let h = DMatrix::zeros(2, 3);
        assert!(matches!(cccp(&h, PowerBudget::Total(1.0), 1.0, &opts()), Err(Error::DegenerateChannel)));
        let bad = CccpOptions { outer_tol: 0.0, ..opts() };
        let h = DMatrix::from_element(1, 1, 1.0);
        assert!(cccp(&h, PowerBudget::Total(1.0), 1.0, &bad).is_err());
    }
}
