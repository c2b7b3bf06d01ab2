use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;

use lens_mimo::channel::{intensity_map, lattice};
use lens_mimo::experiments::{
    budget_at, builtin, channels, experiment_cccp_options, run, scheme_rate, sweep_m, Constraint, ScenarioConfig,
    SchemeKind,
};
use lens_mimo::optim::{cccp, CccpOptions, PowerBudget};
use lens_mimo::precoding::{mrt, rates, rzf, scale_to_per_led, sinr};
use lens_mimo::{Error, Result};

#[derive(Parser)]
#[command(name = "lens-mimo", version, about = "Beam-domain optical MIMO with a transmit lens")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Channel matrix of one drop, with dominant beams and lens-free gains.
    Channel {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        realization: usize,
    },
    /// Received intensity over the floor.
    IntensityMap {
        #[command(flatten)]
        common: Common,
        /// Lattice points per side.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long)]
        no_lens: bool,
    },
    /// MRT and RZF rate bounds on one drop.
    Precode {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        realization: usize,
    },
    /// Covariance design on one drop; writes CCCP traces with `--out`.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        realization: usize,
    },
    /// Monte Carlo rates over the SNR axis.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Rates and lens/no-lens ratios over array sizes.
    SweepM {
        #[command(flatten)]
        common: Common,
        /// Comma-separated array sides; defaults to the config's `m_list`.
        #[arg(long)]
        m_list: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario used when no file is given.
    #[arg(long, default_value = "small_area")]
    scenario: String,
    /// Output directory; results go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated scheme list.
    #[arg(long)]
    scheme: Option<String>,
    /// `total`, `per-led` or a comma-separated list.
    #[arg(long)]
    constraint: Option<String>,
    /// `lb`, `ub` or a value in [6/(pi e), 1].
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    realizations: Option<usize>,
    /// SNR list in dB (`a,b,...` or `start:stop:step`).
    #[arg(long)]
    snr_db: Option<String>,
}

impl Common {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::from_file(path)?,
            None => builtin(&self.scenario)?,
        };
        if let Some(seed) = self.seed {
            cfg.set_seed(seed)?;
        }
        if let Some(n) = self.realizations {
            cfg.set_realizations(n)?;
        }
        for (key, value) in [
            ("schemes", &self.scheme),
            ("budget", &self.constraint),
            ("gamma", &self.gamma),
            ("snr_db", &self.snr_db),
        ] {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn emit(&self, name: &str, text: &str) -> Result<()> {
        match &self.out {
            Some(dir) => write_file(dir, name, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, text))
        .map_err(|source| Error::Io { path, source })
}

fn channel(common: &Common, realization: usize) -> Result<()> {
    let cfg = common.config()?;
    let array = cfg.layout(cfg.m)?;
    let ch = channels(&cfg, &array, realization)?;
    let dominant = ch.lens.dominant_beams();
    let mut s = String::from("user,dominant_beam,asymptotic_gain,no_lens_gain");
    for j in 0..ch.lens.h.ncols() {
        let _ = write!(s, ",h_{j}");
    }
    s.push('\n');
    for k in 0..ch.lens.users() {
        let _ = write!(s, "{k},{},{:.8e},{:.8e}", dominant[k], ch.lens.g[k], ch.no_lens.g[k]);
        for v in ch.lens.h.row(k).iter() {
            let _ = write!(s, ",{v:.8e}");
        }
        s.push('\n');
    }
    common.emit("channel.csv", &s)
}

fn intensity(common: &Common, grid: usize, no_lens: bool) -> Result<()> {
    let cfg = common.config()?;
    let array = cfg.layout(cfg.m)?;
    let [w, l, height] = cfg.room;
    let map = intensity_map(
        &array,
        &Vector3::new(0.0, 0.0, height),
        cfg.area,
        &lattice(w / 2.0, grid),
        &lattice(l / 2.0, grid),
        !no_lens,
    )?;
    common.emit("intensity.csv", &map.to_csv())
}

fn precode(common: &Common, realization: usize) -> Result<()> {
    let cfg = common.config()?;
    let array = cfg.layout(cfg.m)?;
    let ch = channels(&cfg, &array, realization)?;
    let gamma = cfg.gamma.coefficient()?;
    let h = &ch.lens.h;
    let mut s = String::from("scheme,constraint,snr_db,r_lb,r_sum,r_ub\n");
    for &c in &cfg.budget {
        for &snr in &cfg.snr_db {
            let total = budget_at(Constraint::Total, snr, cfg.m).level();
            for (label, pre) in [("mrt", mrt(h, total)?), ("rzf", rzf(h, total, h.nrows() as f64 / total)?)] {
                let pre = match budget_at(c, snr, cfg.m) {
                    PowerBudget::PerLed(p) => scale_to_per_led(&pre, p)?,
                    _ => pre,
                };
                let r = rates(&sinr(h, &pre.w), gamma);
                let _ = writeln!(s, "{label},{},{snr},{:.8e},{:.8e},{:.8e}", c.label(), r.r_lb, r.r_sum, r.r_ub);
            }
        }
    }
    common.emit("precode.csv", &s)
}

fn optimize(common: &Common, realization: usize) -> Result<()> {
    let cfg = common.config()?;
    let schemes: Vec<SchemeKind> = cfg.schemes.iter().copied().filter(|s| !matches!(s, SchemeKind::Mrt | SchemeKind::Rzf)).collect();
    if schemes.contains(&SchemeKind::Cccp) && (cfg.m > cfg.cccp_max_m || cfg.k > cfg.cccp_max_k) {
        return Err(Error::Scale(format!(
            "cccp is limited to M <= {} and K <= {}",
            cfg.cccp_max_m, cfg.cccp_max_k
        )));
    }
    let array = cfg.layout(cfg.m)?;
    let ch = channels(&cfg, &array, realization)?;
    let gamma = cfg.gamma.coefficient()?.value();
    let mut s = String::from("scheme,constraint,snr_db,rate_bits\n");
    for &c in &cfg.budget {
        for &snr in &cfg.snr_db {
            let budget = budget_at(c, snr, cfg.m);
            for &scheme in &schemes {
                let rate = if scheme == SchemeKind::Cccp {
                    let opts = CccpOptions {
                        record_residuals: common.out.is_some(),
                        ..experiment_cccp_options()
                    };
                    let res = cccp(&ch.lens.h, budget, gamma, &opts)?;
                    if let Some(dir) = &common.out {
                        write_file(dir, &format!("cccp_trace_{}_{snr}.csv", c.label()), &res.trace_csv())?;
                    }
                    res.rate()
                } else {
                    scheme_rate(scheme, &ch, cfg.m, budget, gamma, cfg.b_max)?
                };
                let _ = writeln!(s, "{},{},{snr},{rate:.8e}", scheme.label(), c.label());
            }
        }
    }
    common.emit("optimize.csv", &s)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Channel { common, realization } => channel(&common, realization),
        Command::IntensityMap { common, grid, no_lens } => intensity(&common, grid, no_lens),
        Command::Precode { common, realization } => precode(&common, realization),
        Command::Optimize { common, realization } => optimize(&common, realization),
        Command::Run { common } => {
            let report = run(&common.config()?)?;
            match &common.out {
                Some(dir) => report.emit(dir),
                None => common.emit("rates.csv", &report.rates_csv()),
            }
        }
        Command::SweepM { common, m_list } => {
            let mut cfg = common.config()?;
            if let Some(list) = m_list {
                cfg.set("m_list", &list)?;
            }
            let report = sweep_m(&cfg, &cfg.m_list)?;
            match &common.out {
                Some(dir) => report.emit(dir),
                None => {
                    print!("{}", report.rates_csv());
                    print!("{}", report.ratios_csv());
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Scale(_) => 3,
                _ => 1,
            })
        }
    }
}
