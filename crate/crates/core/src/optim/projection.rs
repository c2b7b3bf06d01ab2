//! Euclidean projections onto the feasible covariance sets.
//!
//! Both sets are intersections with the product of PSD cones. The total
//! budget set has an exact projection through a common shift of all
//! eigenvalues; the per-LED set is handled by Dykstra's alternating
//! projections.

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenvalues below this fraction of the largest one are set to zero.
pub const EIG_CLIP: f64 = 1e-12;

fn symmetric_eigen(q: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let sym = (q + q.transpose()) * 0.5;
    SymmetricEigen::new(sym)
}

fn rebuild(eig: &SymmetricEigen<f64, nalgebra::Dyn>, values: &[f64]) -> DMatrix<f64> {
    let n = values.len();
    let mut out = DMatrix::zeros(n, n);
    for (j, &v) in values.iter().enumerate() {
        if v > 0.0 {
            let u = eig.eigenvectors.column(j);
            out.ger(v, &u, &u, 1.0);
        }
    }
    out
}

fn clip_small(values: &mut [f64]) {
    let top = values.iter().copied().fold(0.0, f64::max);
    for v in values.iter_mut() {
        if *v < EIG_CLIP * top {
            *v = 0.0;
        }
    }
}

/// Nearest PSD matrix (negative and negligible eigenvalues removed).
pub fn project_psd(q: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetric_eigen(q);
    let mut values: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    clip_small(&mut values);
    rebuild(&eig, &values)
}

/// Exact projection onto `{Q_k PSD, sum_k tr(Q_k) <= level}`.
///
/// All eigenvalues of all users are shifted down by a common `tau >= 0` and
/// clipped at zero, `tau` chosen so the traces sum to `level`.
pub fn project_total(qs: &[DMatrix<f64>], level: f64) -> Vec<DMatrix<f64>> {
    let eigs: Vec<_> = qs.iter().map(symmetric_eigen).collect();
    let positive: Vec<f64> = eigs
        .iter()
        .flat_map(|e| e.eigenvalues.iter().copied())
        .filter(|v| *v > 0.0)
        .collect();
    let tau = simplex_shift(&positive, level);
    eigs.iter()
        .map(|e| {
            let mut values: Vec<f64> = e.eigenvalues.iter().map(|v| (v - tau).max(0.0)).collect();
            clip_small(&mut values);
            rebuild(e, &values)
        })
        .collect()
}

/// Smallest `tau >= 0` with `sum (v - tau)^+ <= level`.
fn simplex_shift(values: &[f64], level: f64) -> f64 {
    if values.iter().sum::<f64>() <= level {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - level) / (j + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    tau
}

/// Projection onto `{sum_k [Q_k]_mm <= level for all m}` (diagonal
/// halfspaces only).
fn project_diag(qs: &mut [DMatrix<f64>], level: f64) {
    let Some(first) = qs.first() else { return };
    let n = first.nrows();
    let k = qs.len() as f64;
    for m in 0..n {
        let load: f64 = qs.iter().map(|q| q[(m, m)]).sum();
        if load > level {
            let cut = (load - level) / k;
            for q in qs.iter_mut() {
                q[(m, m)] -= cut;
            }
        }
    }
}

fn max_load(qs: &[DMatrix<f64>]) -> f64 {
    let n = qs.first().map_or(0, |q| q.nrows());
    (0..n).map(|m| qs.iter().map(|q| q[(m, m)]).sum::<f64>()).fold(0.0, f64::max)
}

/// Projection onto `{Q_k PSD, sum_k [Q_k]_mm <= level}` by Dykstra's method.
///
/// Returns early when the PSD projection already meets the LED budgets (it is
/// then the exact projection). After `max_cycles` cycles or once the iterates
/// settle within `tol`, the result is pushed onto the PSD cone and scaled down
/// uniformly if any LED is still over budget, so the output is always
/// feasible.
pub fn project_per_led(qs: &[DMatrix<f64>], level: f64, max_cycles: usize, tol: f64) -> Vec<DMatrix<f64>> {
    let psd: Vec<DMatrix<f64>> = qs.iter().map(project_psd).collect();
    if max_load(&psd) <= level {
        return psd;
    }
    let mut x: Vec<DMatrix<f64>> = qs.to_vec();
    let mut p: Vec<DMatrix<f64>> = qs.iter().map(|q| DMatrix::zeros(q.nrows(), q.ncols())).collect();
    let mut r = p.clone();
    for _ in 0..max_cycles {
        let y: Vec<DMatrix<f64>> = x.iter().zip(&p).map(|(x, p)| project_psd(&(x + p))).collect();
        for ((pk, xk), yk) in p.iter_mut().zip(&x).zip(&y) {
            *pk += xk - yk;
        }
        let mut z: Vec<DMatrix<f64>> = y.iter().zip(&r).map(|(y, r)| y + r).collect();
        project_diag(&mut z, level);
        let mut change = 0.0;
        let mut size = 0.0;
        for (((rk, yk), zk), xk) in r.iter_mut().zip(&y).zip(&z).zip(&x) {
            *rk += yk - zk;
            change += (zk - xk).norm_squared();
            size += zk.norm_squared();
        }
        x = z;
        if change.sqrt() <= tol * (1.0 + size.sqrt()) {
            break;
        }
    }
    let mut out: Vec<DMatrix<f64>> = x.iter().map(project_psd).collect();
    let peak = max_load(&out);
    if peak > level {
        let s = level / peak;
        for q in &mut out {
            *q *= s;
        }
    }
    out
}

/// Eigen-decompositions of `Y_k - diag(mu)` for the per-LED dual.
struct DualPoint {
    eigs: Vec<SymmetricEigen<f64, nalgebra::Dyn>>,
    value: f64,
    grad: Vec<f64>,
}

fn dual_point(ys: &[DMatrix<f64>], mu: &[f64], level: f64) -> DualPoint {
    let n = mu.len();
    let mut grad = vec![-level; n];
    let mut value = -level * mu.iter().sum::<f64>();
    let mu2: f64 = mu.iter().map(|m| m * m).sum();
    let eigs = ys
        .iter()
        .map(|y| {
            let mut z = y.clone();
            for (j, m) in mu.iter().enumerate() {
                z[(j, j)] -= m;
                value += y[(j, j)] * m;
            }
            value -= 0.5 * mu2;
            let eig = SymmetricEigen::new(z);
            for (a, &l) in eig.eigenvalues.iter().enumerate() {
                if l > 0.0 {
                    let u = eig.eigenvectors.column(a);
                    for (g, ui) in grad.iter_mut().zip(u.iter()) {
                        *g += l * ui * ui;
                    }
                } else {
                    value += 0.5 * l * l;
                }
            }
            eig
        })
        .collect();
    DualPoint { eigs, value, grad }
}

/// Jacobian of `mu -> sum_k diag(Proj_psd(Y_k - diag(mu)))`, negated, on the
/// coordinates in `free`.
fn dual_curvature(point: &DualPoint, free: &[usize]) -> DMatrix<f64> {
    let f = free.len();
    let mut out = DMatrix::zeros(f, f);
    for eig in &point.eigs {
        let l = &eig.eigenvalues;
        let n = l.len();
        let scale = l.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let omega = DMatrix::from_fn(n, n, |a, b| {
            let (x, y) = (l[a], l[b]);
            if (x - y).abs() > 1e-14 * scale {
                (x.max(0.0) - y.max(0.0)) / (x - y)
            } else if x + y > 0.0 {
                1.0
            } else {
                0.0
            }
        });
        let u = &eig.eigenvectors;
        for (p, &i) in free.iter().enumerate() {
            for (q, &j) in free.iter().enumerate().skip(p) {
                let w = nalgebra::DVector::from_fn(n, |a, _| u[(i, a)] * u[(j, a)]);
                let v = w.dot(&(&omega * &w));
                out[(p, q)] += v;
                if p != q {
                    out[(q, p)] += v;
                }
            }
        }
    }
    out
}

/// Exact projection onto `{Q_k PSD, sum_k [Q_k]_mm <= level}` through the
/// dual over the LED multipliers `mu >= 0`, solved by a projected
/// semismooth Newton method.
///
/// Stops once every load is within `tol` times the input magnitude of its
/// budget (or below it with a zero multiplier). Returns `None` if that does
/// not happen within `max_iter` steps.
/// Any loads left above `level` by round-off are removed by a uniform
/// scale-down.
pub fn project_per_led_newton(qs: &[DMatrix<f64>], level: f64, max_iter: usize, tol: f64) -> Option<Vec<DMatrix<f64>>> {
    let psd: Vec<DMatrix<f64>> = qs.iter().map(project_psd).collect();
    if max_load(&psd) <= level {
        return Some(psd);
    }
    let ys: Vec<DMatrix<f64>> = qs.iter().map(|q| (q + q.transpose()) * 0.5).collect();
    let n = ys[0].nrows();
    let k = ys.len() as f64;
    // loads are sums of K eigen-expansions, so round-off scales with the input
    let scale = level + ys.iter().map(|y| y.amax()).sum::<f64>();
    let mut mu = vec![0.0; n];
    let mut point = dual_point(&ys, &mu, level);
    let mut done = false;
    for _ in 0..max_iter {
        let residual = mu
            .iter()
            .zip(&point.grad)
            .map(|(m, g)| if *m > 0.0 { g.abs() } else { g.max(0.0) })
            .fold(0.0, f64::max);
        if residual <= tol * scale {
            done = true;
            break;
        }
        let free: Vec<usize> = (0..n).filter(|&j| mu[j] > 0.0 || point.grad[j] > 0.0).collect();
        let mut curv = dual_curvature(&point, &free);
        let ridge = 1e-12 * curv.diagonal().max().max(1.0);
        for p in 0..free.len() {
            curv[(p, p)] += ridge;
        }
        let rhs = nalgebra::DVector::from_iterator(free.len(), free.iter().map(|&j| point.grad[j]));
        let dir = curv.cholesky().map(|c| c.solve(&rhs));
        let mut step = 1.0;
        let mut next = None;
        if let Some(dir) = dir {
            while step > 1e-10 {
                let mut cand = mu.clone();
                for (p, &j) in free.iter().enumerate() {
                    cand[j] = (mu[j] + step * dir[p]).max(0.0);
                }
                let trial = dual_point(&ys, &cand, level);
                let rise: f64 = (0..n).map(|j| point.grad[j] * (cand[j] - mu[j])).sum();
                if trial.value >= point.value + 1e-4 * rise && rise > 0.0 {
                    next = Some((cand, trial));
                    break;
                }
                step *= 0.5;
            }
        }
        let (cand, trial) = next.unwrap_or_else(|| {
            // gradient step with the Lipschitz constant of the dual gradient
            let cand: Vec<f64> = (0..n).map(|j| (mu[j] + point.grad[j] / k).max(0.0)).collect();
            let trial = dual_point(&ys, &cand, level);
            (cand, trial)
        });
        mu = cand;
        point = trial;
    }
    if !done {
        return None;
    }
    let mut out: Vec<DMatrix<f64>> = point
        .eigs
        .iter()
        .map(|e| {
            let mut values: Vec<f64> = e.eigenvalues.iter().map(|v| v.max(0.0)).collect();
            clip_small(&mut values);
            rebuild(e, &values)
        })
        .collect();
    let peak = max_load(&out);
    if peak > level {
        let s = level / peak;
        for q in &mut out {
            *q *= s;
        }
    }
    Some(out)
}
