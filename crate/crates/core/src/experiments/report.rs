//! Run reports and their CSV form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::config::{Constraint, ScenarioConfig, SchemeKind};
use crate::error::{Error, Result};

pub const RATES_HEADER: &str = "scheme,constraint,snr_db,m,k,mean_rate_bits,std_rate_bits,realizations";
pub const RATIOS_HEADER: &str = "constraint,snr_db,m,k,median_ratio_ba,median_ratio_ad,realizations";

/// Mean and sample standard deviation of one scheme's sum rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub scheme: SchemeKind,
    pub constraint: Constraint,
    pub snr_db: f64,
    pub m: usize,
    pub k: usize,
    pub mean_rate_bits: f64,
    pub std_rate_bits: f64,
    pub realizations: usize,
}

/// Median over drops of the BDMA to lens-free rate ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub constraint: Constraint,
    pub snr_db: f64,
    pub m: usize,
    pub k: usize,
    pub median_ratio_ba: f64,
    pub median_ratio_ad: f64,
    pub realizations: usize,
}

/// Provenance of a report; holds no timestamps so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub scenario: String,
    /// SHA-256 of the canonical config text.
    pub config_hash: String,
    pub seed: u64,
    pub realizations: usize,
    pub version: String,
}

impl Metadata {
    pub fn of(cfg: &ScenarioConfig) -> Self {
        let digest = Sha256::digest(cfg.to_config_string().as_bytes());
        Metadata {
            scenario: cfg.name.clone(),
            config_hash: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed: cfg.seed(),
            realizations: cfg.realizations(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "scenario = {}\nconfig_sha256 = {}\nseed = {}\nrealizations = {}\nversion = {}\n",
            self.scenario, self.config_hash, self.seed, self.realizations, self.version
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rates: Vec<RateRow>,
    pub ratios: Vec<RatioRow>,
    pub meta: Metadata,
}

/// Nine significant digits.
fn num(v: f64) -> String {
    format!("{v:.8e}")
}

impl RunReport {
    /// Mean rate of one cell, if present.
    pub fn mean(&self, scheme: SchemeKind, constraint: Constraint, snr_db: f64) -> Option<f64> {
        self.rates
            .iter()
            .find(|r| r.scheme == scheme && r.constraint == constraint && r.snr_db == snr_db)
            .map(|r| r.mean_rate_bits)
    }

    pub fn rates_csv(&self) -> String {
        let mut s = String::from(RATES_HEADER);
        s.push('\n');
        for r in &self.rates {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.scheme.label(),
                r.constraint.label(),
                r.snr_db,
                r.m,
                r.k,
                num(r.mean_rate_bits),
                num(r.std_rate_bits),
                r.realizations
            );
        }
        s
    }

    pub fn ratios_csv(&self) -> String {
        let mut s = String::from(RATIOS_HEADER);
        s.push('\n');
        for r in &self.ratios {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.constraint.label(),
                r.snr_db,
                r.m,
                r.k,
                num(r.median_ratio_ba),
                num(r.median_ratio_ad),
                r.realizations
            );
        }
        s
    }

    /// Writes `rates.csv`, `metadata.txt` and, for array sweeps, `ratios.csv`
    /// into `dir`, creating it if needed.
    pub fn emit(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&dir.join("rates.csv"), &self.rates_csv())?;
        if !self.ratios.is_empty() {
            write(&dir.join("ratios.csv"), &self.ratios_csv())?;
        }
        write(&dir.join("metadata.txt"), &self.meta.to_text())
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads back the rate table written by [`RunReport::rates_csv`].
pub fn parse_rates_csv(text: &str) -> Result<Vec<RateRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(RATES_HEADER) {
        return Err(Error::Config("rates CSV: unexpected header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Config(format!("rates CSV line {}: '{line}'", i + 2));
            if f.len() != 8 {
                return Err(bad());
            }
            let float = |s: &str| s.parse::<f64>().map_err(|_| bad());
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
            Ok(RateRow {
                scheme: f[0].parse()?,
                constraint: f[1].parse()?,
                snr_db: float(f[2])?,
                m: int(f[3])?,
                k: int(f[4])?,
                mean_rate_bits: float(f[5])?,
                std_rate_bits: float(f[6])?,
                realizations: int(f[7])?,
            })
        })
        .collect()
}
