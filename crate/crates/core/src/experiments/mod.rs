//! Monte Carlo experiments: user drops, per-scheme sum rates over an SNR
//! axis, array-size sweeps and CSV output.
//!
//! Each realization draws its users from its own ChaCha8 stream (seed from
//! the config, stream = realization index), so results do not depend on the
//! number of worker threads or on completion order.

mod config;
mod report;

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{
    builtin, builtin_scenarios, default_snr_db, small_area, wide_area, Constraint, GammaChoice, Omega, Placement,
    ScenarioConfig, SchemeKind,
};
pub use report::{parse_rates_csv, Metadata, RateRow, RatioRow, RunReport, RATES_HEADER, RATIOS_HEADER};

use crate::channel::{channel_matrix, channel_no_lens, ChannelMatrix, Deployment, LedArraySpec, UserTerminal};
use crate::error::{Error, Result};
use crate::optim::{
    asymptotic_design, beam_allocation_greedy, cccp, no_lens_rate, sum_rate_cov, CccpOptions, PowerBudget,
};
use crate::precoding::{mrt, rzf, scale_to_per_led, sinr, sum_rate};

/// User positions on the floor for one realization.
pub fn drop_users(cfg: &ScenarioConfig, realization: usize) -> Vec<Vector3<f64>> {
    match cfg.placement {
        Placement::Random { seed, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(realization as u64);
            let [w, l, _] = cfg.room;
            (0..cfg.k)
                .map(|_| {
                    let x = rng.random_range(-w / 2.0..w / 2.0);
                    let y = rng.random_range(-l / 2.0..l / 2.0);
                    Vector3::new(x, y, 0.0)
                })
                .collect()
        }
        Placement::Uniform { origin, step } => {
            let side = (cfg.k as f64).sqrt().round() as usize;
            let mut out = Vec::with_capacity(cfg.k);
            for i in 0..side {
                for j in 0..side {
                    out.push(Vector3::new(origin + step * i as f64, origin + step * j as f64, 0.0));
                }
            }
            out
        }
    }
}

/// Deployment for one realization on a prepared array.
pub fn deployment(cfg: &ScenarioConfig, array: &LedArraySpec, realization: usize) -> Deployment {
    Deployment {
        array: array.clone(),
        bs_position: Vector3::new(0.0, 0.0, cfg.room[2]),
        users: drop_users(cfg, realization)
            .into_iter()
            .map(|p| UserTerminal::new(p, cfg.area))
            .collect(),
    }
}

/// Channels with and without the lens for one realization.
pub struct Channels {
    pub lens: ChannelMatrix,
    pub no_lens: ChannelMatrix,
}

pub fn channels(cfg: &ScenarioConfig, array: &LedArraySpec, realization: usize) -> Result<Channels> {
    let dep = deployment(cfg, array, realization);
    Ok(Channels {
        lens: channel_matrix(&dep)?,
        no_lens: channel_no_lens(&dep)?,
    })
}

/// Power budget in units of the noise variance: `P = 10^(snr/10)` for the
/// total budget and `p = P / M^2` per LED. Since the SNR is `P / sigma^2`,
/// the noise variance itself drops out of every rate.
pub fn budget_at(constraint: Constraint, snr_db: f64, m: usize) -> PowerBudget {
    let p = 10f64.powf(snr_db / 10.0);
    match constraint {
        Constraint::Total => PowerBudget::Total(p),
        Constraint::PerLed => PowerBudget::PerLed(p / (m * m) as f64),
    }
}

/// CCCP settings used by the experiment runner.
pub fn experiment_cccp_options() -> CccpOptions {
    CccpOptions {
        outer_tol: 1e-9,
        ..CccpOptions::default()
    }
}

/// Sum rate (bits) of one scheme on one channel realization.
pub fn scheme_rate(
    scheme: SchemeKind,
    ch: &Channels,
    m: usize,
    budget: PowerBudget,
    gamma: f64,
    b_max: usize,
) -> Result<f64> {
    let h: &DMatrix<f64> = &ch.lens.h;
    let degenerate = h.norm_squared() == 0.0;
    match scheme {
        SchemeKind::NoLens => no_lens_rate(&ch.no_lens.g, m, budget, gamma).map(|(_, r)| r),
        _ if degenerate => Ok(0.0),
        SchemeKind::Mrt | SchemeKind::Rzf => {
            let total = match budget {
                PowerBudget::Total(p) => p,
                PowerBudget::PerLed(p) => p * (m * m) as f64,
            };
            let pre = if scheme == SchemeKind::Mrt {
                mrt(h, total)?
            } else {
                rzf(h, total, h.nrows() as f64 / total)?
            };
            let pre = match budget {
                PowerBudget::Total(_) => pre,
                PowerBudget::PerLed(p) => scale_to_per_led(&pre, p)?,
            };
            Ok(sum_rate(&sinr(h, &pre.w), gamma))
        }
        SchemeKind::Cccp => Ok(cccp(h, budget, gamma, &experiment_cccp_options())?.rate()),
        SchemeKind::BdmaBa => {
            let alloc = beam_allocation_greedy(&h.map(|v| v * v), budget, b_max, gamma)?;
            Ok(sum_rate_cov(h, &alloc.covariances(h.ncols(), budget), gamma))
        }
        SchemeKind::BdmaAd => {
            let (cov, _) = asymptotic_design(&ch.lens.dominant_beams(), &ch.lens.g, h.ncols(), m, budget, gamma)?;
            Ok(sum_rate_cov(h, &cov, gamma))
        }
    }
}

fn check_scale(cfg: &ScenarioConfig, schemes: &[SchemeKind], m: usize) -> Result<()> {
    if schemes.contains(&SchemeKind::Cccp) && (m > cfg.cccp_max_m || cfg.k > cfg.cccp_max_k) {
        return Err(Error::Scale(format!(
            "cccp is limited to M <= {} and K <= {} (requested M = {m}, K = {}); drop it from the scheme list or raise cccp_max_m / cccp_max_k",
            cfg.cccp_max_m, cfg.cccp_max_k, cfg.k
        )));
    }
    Ok(())
}

/// Rates indexed `[constraint][snr][scheme]` for every realization at side `m`.
fn simulate(cfg: &ScenarioConfig, schemes: &[SchemeKind], m: usize) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    let array = cfg.layout(m)?;
    let gamma = cfg.gamma.coefficient()?.value();
    (0..cfg.realizations())
        .into_par_iter()
        .map(|r| {
            let ch = channels(cfg, &array, r)?;
            cfg.budget
                .iter()
                .map(|&c| {
                    cfg.snr_db
                        .iter()
                        .map(|&snr| {
                            let budget = budget_at(c, snr, m);
                            schemes
                                .iter()
                                .map(|&s| scheme_rate(s, &ch, m, budget, gamma, cfg.b_max))
                                .collect::<Result<Vec<f64>>>()
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Median; the mean of the two middle values for even counts.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn rate_rows(cfg: &ScenarioConfig, schemes: &[SchemeKind], m: usize, sims: &[Vec<Vec<Vec<f64>>>]) -> Vec<RateRow> {
    let mut rows = Vec::new();
    for (ci, &c) in cfg.budget.iter().enumerate() {
        for (si, &snr) in cfg.snr_db.iter().enumerate() {
            for (ki, &s) in schemes.iter().enumerate() {
                let vals: Vec<f64> = sims.iter().map(|r| r[ci][si][ki]).collect();
                let (mean, std) = mean_std(&vals);
                rows.push(RateRow {
                    scheme: s,
                    constraint: c,
                    snr_db: snr,
                    m,
                    k: cfg.k,
                    mean_rate_bits: mean,
                    std_rate_bits: std,
                    realizations: vals.len(),
                });
            }
        }
    }
    rows
}

/// Runs every configured scheme at every SNR and budget, averaging over the
/// realizations.
pub fn run(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    check_scale(cfg, &cfg.schemes, cfg.m)?;
    let sims = simulate(cfg, &cfg.schemes, cfg.m)?;
    Ok(RunReport {
        rates: rate_rows(cfg, &cfg.schemes, cfg.m, &sims),
        ratios: Vec::new(),
        meta: Metadata::of(cfg),
    })
}

/// Re-lays the array out at every side in `m_list` (same illumination angle,
/// same drops) and reports the BDMA and lens-free rates plus the median,
/// over drops, of the BDMA-BA to lens-free rate ratio.
pub fn sweep_m(cfg: &ScenarioConfig, m_list: &[usize]) -> Result<RunReport> {
    cfg.validate()?;
    if m_list.is_empty() || m_list.windows(2).any(|w| w[1] <= w[0]) || m_list.contains(&0) {
        return Err(Error::Config("M list must be nonempty, positive and strictly ascending".into()));
    }
    let schemes = [SchemeKind::BdmaAd, SchemeKind::BdmaBa, SchemeKind::NoLens];
    let mut rates = Vec::new();
    let mut ratios = Vec::new();
    for &m in m_list {
        let sims = simulate(cfg, &schemes, m)?;
        rates.extend(rate_rows(cfg, &schemes, m, &sims));
        for (ci, &c) in cfg.budget.iter().enumerate() {
            for (si, &snr) in cfg.snr_db.iter().enumerate() {
                let ba: Vec<f64> = sims.iter().map(|r| r[ci][si][1] / r[ci][si][2]).collect();
                let ad: Vec<f64> = sims.iter().map(|r| r[ci][si][0] / r[ci][si][2]).collect();
                ratios.push(RatioRow {
                    constraint: c,
                    snr_db: snr,
                    m,
                    k: cfg.k,
                    median_ratio_ba: median(&ba),
                    median_ratio_ad: median(&ad),
                    realizations: ba.len(),
                });
            }
        }
    }
    Ok(RunReport {
        rates,
        ratios,
        meta: Metadata::of(cfg),
    })
}
