//! Scenario configuration and its `key = value` file format.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::channel::{array_layout, LedArraySpec};
use crate::error::{Error, Result};
use crate::optics::{EmitterModel, LensSpec};
use crate::precoding::{RateCoefficient, GAMMA_LB, GAMMA_UB};

/// Full illumination angle of the beam fan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Omega {
    /// Cover the room diagonal from the ceiling: `2 atan(diag / 2 / height)`.
    Auto,
    Degrees(f64),
}

/// How user terminals are placed on the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    /// Uniform over the floor, one independent drop per realization.
    Random { seed: u64, realizations: usize },
    /// Square grid `origin + step * i` on both axes; needs `K` to be a square.
    Uniform { origin: f64, step: f64 },
}

/// Power constraint family; its level follows from the SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    Total,
    PerLed,
}

impl Constraint {
    pub fn label(self) -> &'static str {
        match self {
            Constraint::Total => "total",
            Constraint::PerLed => "per-led",
        }
    }
}

impl FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "total" => Ok(Constraint::Total),
            "per-led" | "perled" | "per_led" => Ok(Constraint::PerLed),
            other => Err(Error::Config(format!("unknown constraint '{other}' (expected total or per-led)"))),
        }
    }
}

/// Transmission schemes compared by [`crate::experiments::run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Mrt,
    Rzf,
    Cccp,
    BdmaBa,
    BdmaAd,
    NoLens,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::Mrt,
        SchemeKind::Rzf,
        SchemeKind::Cccp,
        SchemeKind::BdmaBa,
        SchemeKind::BdmaAd,
        SchemeKind::NoLens,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::Mrt => "mrt",
            SchemeKind::Rzf => "rzf",
            SchemeKind::Cccp => "cccp",
            SchemeKind::BdmaBa => "bdma-ba",
            SchemeKind::BdmaAd => "bdma-ad",
            SchemeKind::NoLens => "no-lens",
        }
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

/// Rate coefficient selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    Lower,
    Upper,
    Value(f64),
}

impl GammaChoice {
    pub fn coefficient(self) -> Result<RateCoefficient> {
        match self {
            GammaChoice::Lower => Ok(RateCoefficient::lower()),
            GammaChoice::Upper => Ok(RateCoefficient::upper()),
            GammaChoice::Value(v) => RateCoefficient::new(v).map_err(|e| Error::Config(e.to_string())),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            GammaChoice::Lower => GAMMA_LB,
            GammaChoice::Upper => GAMMA_UB,
            GammaChoice::Value(v) => v,
        }
    }
}

impl FromStr for GammaChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lb" => Ok(GammaChoice::Lower),
            "ub" => Ok(GammaChoice::Upper),
            other => {
                let v = parse_f64("gamma", other)?;
                let choice = GammaChoice::Value(v);
                choice.coefficient()?;
                Ok(choice)
            }
        }
    }
}

/// One simulated scenario. Angles are in degrees, lengths in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    /// Width, depth and height; the base station hangs at the ceiling centre.
    pub room: [f64; 3],
    pub m: usize,
    pub d: f64,
    /// Semi-angle of half intensity.
    pub phi_c: f64,
    /// Limited emission angle; `None` uses `min(2 phi_c, 90)`.
    pub phi: Option<f64>,
    pub n: f64,
    pub radius: f64,
    pub z_p: f64,
    pub omega: Omega,
    pub k: usize,
    pub placement: Placement,
    pub area: f64,
    pub t_lens: f64,
    pub sigma2: f64,
    pub budget: Vec<Constraint>,
    pub snr_db: Vec<f64>,
    pub gamma: GammaChoice,
    pub schemes: Vec<SchemeKind>,
    pub b_max: usize,
    /// Array sizes for `sweep-m`.
    pub m_list: Vec<usize>,
    pub cccp_max_m: usize,
    pub cccp_max_k: usize,
}

/// Default SNR axis: 50 to 110 dB in 5 dB steps.
pub fn default_snr_db() -> Vec<f64> {
    (0..=12).map(|i| 50.0 + 5.0 * i as f64).collect()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "custom".into(),
            room: [5.0, 5.0, 3.0],
            m: 12,
            d: 0.01,
            phi_c: 30.0,
            phi: None,
            n: 1.5,
            radius: 0.1,
            z_p: 0.0,
            omega: Omega::Auto,
            k: 20,
            placement: Placement::Random {
                seed: 1,
                realizations: 100,
            },
            area: 1e-4,
            t_lens: 1.0,
            sigma2: 1.0,
            budget: vec![Constraint::Total, Constraint::PerLed],
            snr_db: default_snr_db(),
            gamma: GammaChoice::Lower,
            schemes: SchemeKind::ALL.to_vec(),
            b_max: 4,
            m_list: vec![8, 16, 32, 48],
            cccp_max_m: 16,
            cccp_max_k: 32,
        }
    }
}

const KEYS: [&str; 25] = [
    "name", "room", "m", "d", "phi_c", "phi", "n", "radius", "z_p", "omega", "k", "placement", "seed",
    "realizations", "area", "t_lens", "sigma2", "budget", "snr_db", "gamma", "schemes", "b_max", "m_list",
    "cccp_max_m", "cccp_max_k",
];

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Config(format!("{key}: '{v}' is not a finite number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("{key}: '{v}' is not a nonnegative integer")))
}

fn parse_list<T>(v: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect()
}

/// `a, b, c` or an inclusive range `start:stop:step`.
fn parse_snr(v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() == 3 {
        let (a, b, s) = (parse_f64("snr_db", parts[0])?, parse_f64("snr_db", parts[1])?, parse_f64("snr_db", parts[2])?);
        if !(s > 0.0) || b < a {
            return Err(Error::Config(format!("snr_db: bad range '{v}'")));
        }
        let count = ((b - a) / s + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| a + s * i as f64).collect());
    }
    parse_list(v, |s| parse_f64("snr_db", s))
}

impl ScenarioConfig {
    /// Reads a config file; see [`ScenarioConfig::parse`].
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment;
    /// unknown or repeated keys are errors. A `base = small_area` (or
    /// `wide_area`) first line starts from a built-in scenario instead.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!("line {}: key '{key}' repeated", lineno + 1)));
            }
            if key == "base" {
                if !seen.is_empty() {
                    return Err(Error::Config("'base' must come before every other key".into()));
                }
                cfg = match value {
                    "small_area" => small_area(),
                    "wide_area" => wide_area(),
                    other => return Err(Error::Config(format!("unknown base scenario '{other}'"))),
                };
            } else {
                cfg.set(key, value).map_err(|e| match e {
                    Error::Config(msg) => Error::Config(format!("line {}: {msg}", lineno + 1)),
                    other => other,
                })?;
            }
            seen.push(key.to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "name" => self.name = value.to_string(),
            "room" => {
                let v = parse_list(value, |s| parse_f64("room", s))?;
                if v.len() != 3 {
                    return Err(Error::Config("room: expected width, depth, height".into()));
                }
                self.room = [v[0], v[1], v[2]];
            }
            "m" => self.m = parse_usize(key, value)?,
            "d" => self.d = parse_f64(key, value)?,
            "phi_c" => self.phi_c = parse_f64(key, value)?,
            "phi" => self.phi = if value == "auto" { None } else { Some(parse_f64(key, value)?) },
            "n" => self.n = parse_f64(key, value)?,
            "radius" => self.radius = parse_f64(key, value)?,
            "z_p" => self.z_p = parse_f64(key, value)?,
            "omega" => self.omega = if value == "auto" { Omega::Auto } else { Omega::Degrees(parse_f64(key, value)?) },
            "k" => self.k = parse_usize(key, value)?,
            "placement" => {
                self.placement = match value {
                    "random" => match self.placement {
                        p @ Placement::Random { .. } => p,
                        Placement::Uniform { .. } => Placement::Random {
                            seed: 1,
                            realizations: 100,
                        },
                    },
                    _ => {
                        let rest = value
                            .strip_prefix("uniform")
                            .ok_or_else(|| Error::Config(format!("placement: expected 'random' or 'uniform <origin> <step>', got '{value}'")))?;
                        let nums: Vec<f64> = rest
                            .split([' ', ','])
                            .filter(|s| !s.is_empty())
                            .map(|s| parse_f64("placement", s))
                            .collect::<Result<_>>()?;
                        if nums.len() != 2 {
                            return Err(Error::Config("placement: uniform needs an origin and a step".into()));
                        }
                        Placement::Uniform {
                            origin: nums[0],
                            step: nums[1],
                        }
                    }
                }
            }
            "seed" => self.set_seed(value.parse().map_err(|_| Error::Config(format!("seed: '{value}' is not a u64")))?)?,
            "realizations" => self.set_realizations(parse_usize(key, value)?)?,
            "area" => self.area = parse_f64(key, value)?,
            "t_lens" => self.t_lens = parse_f64(key, value)?,
            "sigma2" => self.sigma2 = parse_f64(key, value)?,
            "budget" => {
                self.budget = if value == "both" {
                    vec![Constraint::Total, Constraint::PerLed]
                } else {
                    parse_list(value, Constraint::from_str)?
                }
            }
            "snr_db" => self.snr_db = parse_snr(value)?,
            "gamma" => self.gamma = value.parse()?,
            "schemes" => self.schemes = parse_list(value, SchemeKind::from_str)?,
            "b_max" => self.b_max = parse_usize(key, value)?,
            "m_list" => self.m_list = parse_list(value, |s| parse_usize("m_list", s))?,
            "cccp_max_m" => self.cccp_max_m = parse_usize(key, value)?,
            "cccp_max_k" => self.cccp_max_k = parse_usize(key, value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key '{other}' (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) -> Result<()> {
        match &mut self.placement {
            Placement::Random { seed: s, .. } => {
                *s = seed;
                Ok(())
            }
            Placement::Uniform { .. } => Err(Error::Config("seed set for a uniform placement".into())),
        }
    }

    pub fn set_realizations(&mut self, n: usize) -> Result<()> {
        match &mut self.placement {
            Placement::Random { realizations, .. } => {
                *realizations = n;
                Ok(())
            }
            Placement::Uniform { .. } => Err(Error::Config("realizations set for a uniform placement".into())),
        }
    }

    pub fn seed(&self) -> u64 {
        match self.placement {
            Placement::Random { seed, .. } => seed,
            Placement::Uniform { .. } => 0,
        }
    }

    pub fn realizations(&self) -> usize {
        match self.placement {
            Placement::Random { realizations, .. } => realizations,
            Placement::Uniform { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.room.iter().any(|v| !(*v > 0.0)) {
            return bad(format!("room dimensions must be positive, got {:?}", self.room));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.realizations() == 0 {
            return bad("realizations must be at least 1".into());
        }
        if self.snr_db.is_empty() {
            return bad("snr_db list is empty".into());
        }
        if self.budget.is_empty() {
            return bad("budget list is empty".into());
        }
        if !(self.area > 0.0) || !(self.t_lens > 0.0 && self.t_lens <= 1.0) || !(self.sigma2 > 0.0) {
            return bad("area and sigma2 must be positive and t_lens in (0, 1]".into());
        }
        if self.b_max == 0 {
            return bad("b_max must be at least 1".into());
        }
        if !(self.phi_c > 0.0 && self.phi_c < 90.0) {
            return bad(format!("phi_c {} outside (0, 90)", self.phi_c));
        }
        if let Placement::Uniform { step, .. } = self.placement {
            let side = (self.k as f64).sqrt().round() as usize;
            if side * side != self.k {
                return bad(format!("uniform placement needs a square user count, got {}", self.k));
            }
            if !(step > 0.0) {
                return bad("uniform placement step must be positive".into());
            }
        }
        if self.m_list.windows(2).any(|w| w[1] <= w[0]) || self.m_list.contains(&0) {
            return bad("m_list must be positive and strictly ascending".into());
        }
        Ok(())
    }

    /// Illumination angle in radians.
    pub fn omega_rad(&self) -> f64 {
        match self.omega {
            Omega::Auto => {
                let [w, l, h] = self.room;
                2.0 * ((w * w + l * l).sqrt() / 2.0 / h).atan()
            }
            Omega::Degrees(v) => v.to_radians(),
        }
    }

    pub fn emitter(&self) -> Result<EmitterModel> {
        let mut e = EmitterModel::new(self.phi_c.to_radians())?;
        if let Some(phi) = self.phi {
            e = e.with_limited_angle(phi.to_radians())?;
        }
        e.with_lens_gain(self.t_lens)
    }

    /// Array layout at side `m`.
    pub fn layout(&self, m: usize) -> Result<LedArraySpec> {
        let lens = LensSpec::general(self.n, self.radius, self.z_p).map_err(|e| Error::Config(e.to_string()))?;
        let emitter = self.emitter().map_err(|e| Error::Config(e.to_string()))?;
        array_layout(m, self.d, self.omega_rad(), emitter, lens)
    }

    /// Canonical text form; [`ScenarioConfig::parse`] reads it back.
    pub fn to_config_string(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("name", self.name.clone());
        line("room", join(self.room.iter().map(|v| v.to_string()).collect()));
        line("m", self.m.to_string());
        line("d", self.d.to_string());
        line("phi_c", self.phi_c.to_string());
        line("phi", self.phi.map_or("auto".into(), |v| v.to_string()));
        line("n", self.n.to_string());
        line("radius", self.radius.to_string());
        line("z_p", self.z_p.to_string());
        line(
            "omega",
            match self.omega {
                Omega::Auto => "auto".into(),
                Omega::Degrees(v) => v.to_string(),
            },
        );
        line("k", self.k.to_string());
        match self.placement {
            Placement::Random { seed, realizations } => {
                line("placement", "random".into());
                line("seed", seed.to_string());
                line("realizations", realizations.to_string());
            }
            Placement::Uniform { origin, step } => line("placement", format!("uniform {origin} {step}")),
        }
        line("area", self.area.to_string());
        line("t_lens", self.t_lens.to_string());
        line("sigma2", self.sigma2.to_string());
        line("budget", join(self.budget.iter().map(|c| c.label().to_string()).collect()));
        line("snr_db", join(self.snr_db.iter().map(|v| v.to_string()).collect()));
        line(
            "gamma",
            match self.gamma {
                GammaChoice::Lower => "lb".into(),
                GammaChoice::Upper => "ub".into(),
                GammaChoice::Value(v) => v.to_string(),
            },
        );
        line("schemes", join(self.schemes.iter().map(|k| k.label().to_string()).collect()));
        line("b_max", self.b_max.to_string());
        line("m_list", join(self.m_list.iter().map(|v| v.to_string()).collect()));
        line("cccp_max_m", self.cccp_max_m.to_string());
        line("cccp_max_k", self.cccp_max_k.to_string());
        s
    }
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_config_string())
    }
}

/// 5 x 5 x 3 m meeting room, 12 x 12 LEDs, 20 users dropped at random.
pub fn small_area() -> ScenarioConfig {
    ScenarioConfig {
        name: "small_area".into(),
        ..ScenarioConfig::default()
    }
}

/// 16 x 16 m area under an 8 m ceiling, 80 x 80 LEDs, 22 x 22 user grid.
pub fn wide_area() -> ScenarioConfig {
    ScenarioConfig {
        name: "wide_area".into(),
        room: [16.0, 16.0, 8.0],
        m: 80,
        k: 484,
        placement: Placement::Uniform {
            origin: -7.6,
            step: 0.69,
        },
        schemes: vec![SchemeKind::BdmaBa, SchemeKind::BdmaAd, SchemeKind::NoLens],
        m_list: vec![20, 40, 60, 80],
        ..ScenarioConfig::default()
    }
}

/// The two built-in scenarios.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    vec![small_area(), wide_area()]
}

/// Looks a built-in scenario up by name.
pub fn builtin(name: &str) -> Result<ScenarioConfig> {
    builtin_scenarios()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::Config(format!("unknown scenario '{name}' (expected small_area or wide_area)")))
}
