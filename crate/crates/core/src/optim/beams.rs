//! Beam-domain (BDMA) designs: diagonal covariances where every LED beam
//! carries at most one user's signal.

use nalgebra::{DMatrix, DVector};

use super::waterfill::{waterfill_total, WaterFillResult};
use super::{Covariance, CovarianceSet, PowerBudget};
use crate::channel::UserGeometry;
use crate::error::{Error, Result};

fn check_distinct(dominant: &[usize]) -> Result<()> {
    for (second, b) in dominant.iter().enumerate() {
        if let Some(first) = dominant[..second].iter().position(|a| a == b) {
            return Err(Error::DominantBeamCollision { beam: *b, first, second });
        }
    }
    Ok(())
}

/// Gives each contested dominant beam to the strongest user (largest `g`,
/// then smallest index). Returns each user's beam, if any, and the number of
/// users left without one.
pub fn resolve_collisions(dominant: &[usize], g: &[f64]) -> (Vec<Option<usize>>, usize) {
    let mut out: Vec<Option<usize>> = vec![None; dominant.len()];
    let mut dropped = 0;
    for k in 0..dominant.len() {
        let beam = dominant[k];
        let winner = (0..dominant.len())
            .filter(|&j| dominant[j] == beam)
            .fold(k, |best, j| if g[j] > g[best] || (g[j] == g[best] && j < best) { j } else { best });
        if winner == k {
            out[k] = Some(beam);
        } else {
            dropped += 1;
        }
    }
    (out, dropped)
}

/// Diagonal design with `powers[k]` on the assigned beam of each user.
pub fn beam_domain_design(n: usize, assignment: &[Option<usize>], powers: &[f64], budget: PowerBudget) -> CovarianceSet {
    let q = assignment
        .iter()
        .zip(powers)
        .map(|(beam, &p)| {
            let mut d = DVector::zeros(n);
            if let Some(b) = beam {
                d[*b] = p;
            }
            Covariance::Diagonal(d)
        })
        .collect();
    CovarianceSet { q, budget }
}

/// Large-array design under a total budget: water-filled power on each
/// user's dominant beam.
pub fn asymptotic_total(
    geo: &[UserGeometry],
    g: &[f64],
    m: usize,
    power: f64,
    gamma: f64,
) -> Result<(CovarianceSet, WaterFillResult)> {
    let dominant: Vec<usize> = geo.iter().map(|x| x.dominant).collect();
    check_distinct(&dominant)?;
    let wf = waterfill_total(g, m, power, gamma)?;
    let assignment: Vec<Option<usize>> = dominant.into_iter().map(Some).collect();
    let n = geo.first().map_or(0, |x| x.psi.len());
    Ok((beam_domain_design(n, &assignment, &wf.levels, PowerBudget::Total(power)), wf))
}

/// Large-array design under per-LED budgets: each user's dominant beam at
/// full power `p`. Returns the design and its large-array rate in bits,
/// `1/2 sum log2(1 + gamma M^4 g_k^2 p)`.
pub fn asymptotic_per_led(geo: &[UserGeometry], g: &[f64], m: usize, p: f64, gamma: f64) -> Result<(CovarianceSet, f64)> {
    let dominant: Vec<usize> = geo.iter().map(|x| x.dominant).collect();
    check_distinct(&dominant)?;
    let assignment: Vec<Option<usize>> = dominant.into_iter().map(Some).collect();
    let n = geo.first().map_or(0, |x| x.psi.len());
    let m4 = (m as f64).powi(4);
    let rate = g.iter().map(|x| 0.5 * (gamma * m4 * x * x * p).ln_1p()).sum::<f64>() / std::f64::consts::LN_2;
    Ok((beam_domain_design(n, &assignment, &vec![p; geo.len()], PowerBudget::PerLed(p)), rate))
}

/// Large-array design that tolerates shared dominant beams: contested beams
/// go to the strongest user (see [`resolve_collisions`]), the others are not
/// served. The total budget is water-filled over the served users; per-LED
/// budgets put `p` on every served beam. Returns the design and the number of
/// users left unserved.
pub fn asymptotic_design(
    dominant: &[usize],
    g: &[f64],
    n: usize,
    m: usize,
    budget: PowerBudget,
    gamma: f64,
) -> Result<(CovarianceSet, usize)> {
    let (assignment, dropped) = resolve_collisions(dominant, g);
    let served: Vec<usize> = (0..dominant.len()).filter(|&k| assignment[k].is_some()).collect();
    let mut powers = vec![0.0; dominant.len()];
    match budget {
        PowerBudget::Total(p) => {
            let gs: Vec<f64> = served.iter().map(|&k| g[k]).collect();
            let wf = waterfill_total(&gs, m, p, gamma)?;
            for (&k, level) in served.iter().zip(wf.levels) {
                powers[k] = level;
            }
        }
        PowerBudget::PerLed(p) => {
            for &k in &served {
                powers[k] = p;
            }
        }
    }
    Ok((beam_domain_design(n, &assignment, &powers, budget), dropped))
}

/// Beam masks with equal power `eta` on every selected beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamAllocation {
    /// Selected beams per user, in selection order.
    pub beams: Vec<Vec<usize>>,
    pub eta: f64,
    pub b_max: usize,
    /// Objective in bits.
    pub objective: f64,
}

impl BeamAllocation {
    pub fn covariances(&self, n: usize, budget: PowerBudget) -> CovarianceSet {
        let q = self
            .beams
            .iter()
            .map(|bs| {
                let mut d = DVector::zeros(n);
                for &b in bs {
                    d[b] = self.eta;
                }
                Covariance::Diagonal(d)
            })
            .collect();
        CovarianceSet { q, budget }
    }
}

/// Incrementally maintained received powers for a mask assignment.
struct MaskState<'a> {
    rdiag: &'a DMatrix<f64>,
    /// `sum_{m in B_k} [R_k]_mm`.
    own: Vec<f64>,
    /// `sum_j sum_{m in B_j} [R_k]_mm`.
    total: Vec<f64>,
    count: usize,
}

impl<'a> MaskState<'a> {
    fn new(rdiag: &'a DMatrix<f64>) -> Self {
        let k = rdiag.nrows();
        MaskState {
            rdiag,
            own: vec![0.0; k],
            total: vec![0.0; k],
            count: 0,
        }
    }

    fn toggle(&mut self, user: usize, beam: usize, sign: f64) {
        for k in 0..self.total.len() {
            self.total[k] += sign * self.rdiag[(k, beam)];
        }
        self.own[user] += sign * self.rdiag[(user, beam)];
        if sign > 0.0 {
            self.count += 1;
        } else {
            self.count -= 1;
        }
    }

    fn eta(&self, budget: PowerBudget) -> f64 {
        match budget {
            PowerBudget::Total(p) if self.count > 0 => p / self.count as f64,
            PowerBudget::Total(_) => 0.0,
            PowerBudget::PerLed(p) => p,
        }
    }

    fn objective_nats(&self, eta: f64, gamma: f64) -> f64 {
        self.own
            .iter()
            .zip(&self.total)
            .map(|(&own, &tot)| {
                let interf = eta * (tot - own).max(0.0);
                0.5 * ((1.0 + interf + gamma * eta * own).ln() - (1.0 + interf).ln())
            })
            .sum()
    }
}

/// Objective of a mask assignment with power `eta` per beam, in bits.
pub fn beam_allocation_objective(rdiag: &DMatrix<f64>, beams: &[Vec<usize>], eta: f64, gamma: f64) -> f64 {
    let mut state = MaskState::new(rdiag);
    for (k, bs) in beams.iter().enumerate() {
        for &b in bs {
            state.toggle(k, b, 1.0);
        }
    }
    state.objective_nats(eta, gamma) / std::f64::consts::LN_2
}

/// Greedy beam allocation.
///
/// Users are visited in index order. Each user tries its beams from the
/// strongest down (ties: lower index first), skipping beams already owned by
/// someone else. A beam is kept only if the overall objective strictly
/// improves; the first rejected beam is removed and the user is done. At most
/// `b_max` beams are kept per user. Under a total budget `eta = P / (number
/// of selected beams)`; under per-LED budgets `eta = p`.
pub fn beam_allocation_greedy(rdiag: &DMatrix<f64>, budget: PowerBudget, b_max: usize, gamma: f64) -> Result<BeamAllocation> {
    if b_max == 0 {
        return Err(Error::Domain("beam budget must be at least 1".into()));
    }
    let (k, n) = rdiag.shape();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut beams: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut state = MaskState::new(rdiag);
    let mut best = 0.0;
    for user in 0..k {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| rdiag[(user, b)].total_cmp(&rdiag[(user, a)]));
        for beam in order {
            if beams[user].len() >= b_max {
                break;
            }
            if owner[beam].is_some() {
                continue;
            }
            state.toggle(user, beam, 1.0);
            let value = state.objective_nats(state.eta(budget), gamma);
            if value > best {
                best = value;
                owner[beam] = Some(user);
                beams[user].push(beam);
            } else {
                state.toggle(user, beam, -1.0);
                break;
            }
        }
    }
    Ok(BeamAllocation {
        beams,
        eta: state.eta(budget),
        b_max,
        objective: best / std::f64::consts::LN_2,
    })
}

/// Result of the pairwise orthogonality test on diagonal allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityReport {
    pub orthogonal: bool,
    /// Largest `[L_k1]_mm [L_k2]_mm` over user pairs and beams.
    pub max_violation: f64,
    /// A beam shared by two users, `(beam, k1, k2)`.
    pub shared: Option<(usize, usize, usize)>,
}

/// `L_k1 L_k2 = 0` for every pair of users, to `1e-12 scale^2`.
pub fn orthogonality_check(allocations: &CovarianceSet) -> OrthogonalityReport {
    let diags: Vec<DVector<f64>> = allocations.q.iter().map(Covariance::diagonal).collect();
    let scale = diags.iter().flat_map(|d| d.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale * scale;
    let mut max_violation = 0.0f64;
    let mut shared = None;
    for a in 0..diags.len() {
        for b in a + 1..diags.len() {
            for (m, (x, y)) in diags[a].iter().zip(diags[b].iter()).enumerate() {
                let v = (x * y).abs();
                if v > max_violation {
                    max_violation = v;
                    if v > tol {
                        shared = Some((m, a, b));
                    }
                }
            }
        }
    }
    OrthogonalityReport {
        orthogonal: max_violation <= tol,
        max_violation,
        shared,
    }
}
