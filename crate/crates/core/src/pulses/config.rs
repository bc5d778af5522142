//! Sectioned plain-text configuration (TOML) for an experiment: trap, initial state, pulses and
//! run settings.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Deserialize;

use super::{Preset, Protocol};
use crate::error::{Error, Result};
use crate::fc::LambDicke;
use crate::levels::{Dims, Level};
use crate::quadrature::DipolePattern;
use crate::rates::{Pulse, RateMode, TrapConfig, DEFAULT_MEMORY_BUDGET};

/// Default number of Monte Carlo trajectories.
pub const DEFAULT_TRAJECTORIES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 1;

/// Propagation engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RunMode {
    /// Deterministic rate equation.
    #[default]
    Master,
    /// Quantum-jump Monte Carlo.
    Mc,
}

impl std::str::FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "master" => Ok(RunMode::Master),
            "mc" => Ok(RunMode::Mc),
            other => Err(Error::Config(format!(
                "unknown run mode `{other}` (expected master or mc)"
            ))),
        }
    }
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunMode::Master => "master",
            RunMode::Mc => "mc",
        })
    }
}

/// `[run]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cycles: usize,
    pub mode: RunMode,
    pub trajectories: usize,
    pub seed: u64,
    pub targets: Vec<Level>,
    pub rate_mode: RateMode,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: Option<String>,
    pub trap: TrapConfig,
    pub thermal_mean: f64,
    pub protocol: Protocol,
    pub run: RunConfig,
}

impl Experiment {
    pub fn from_preset(p: &Preset) -> Self {
        Experiment {
            name: Some(p.name.to_string()),
            trap: p.trap.clone(),
            thermal_mean: p.thermal_mean,
            protocol: p.protocol.clone(),
            run: RunConfig {
                cycles: p.protocol.cycles,
                mode: RunMode::Master,
                trajectories: DEFAULT_TRAJECTORIES,
                seed: DEFAULT_SEED,
                targets: p.targets.clone(),
                rate_mode: RateMode::Resonant,
            },
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    trap: RawTrap,
    init: RawInit,
    #[serde(default)]
    pulse: Vec<RawPulse>,
    run: RawRun,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrap {
    eta: f64,
    gamma_over_omega: Option<f64>,
    dims: usize,
    n_max: Option<usize>,
    dipole: Option<String>,
    quad_theta: Option<usize>,
    quad_phi: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInit {
    thermal_mean: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawPulse {
    s: f64,
    duration_tau0: Option<f64>,
    A_re: Option<f64>,
    A_im: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    cycles: usize,
    mode: Option<String>,
    trajectories: Option<usize>,
    seed: Option<u64>,
    target: Option<RawTargets>,
    rate_mode: Option<String>,
}

/// `target = [1, 1]` names one level, `target = [[0, 1], [1, 1]]` several.
#[derive(Deserialize)]
#[serde(untagged)]
enum RawTargets {
    One(Vec<usize>),
    Many(Vec<Vec<usize>>),
}

fn key_error(key: &str, e: Error) -> Error {
    Error::Config(format!("`{key}`: {e}"))
}

/// Parses a configuration; error messages name the offending key or line.
pub fn parse_config(text: &str) -> Result<Experiment> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let dims = Dims::from_count(raw.trap.dims).map_err(|e| key_error("trap.dims", e))?;
    let mut trap = TrapConfig::new(0.0, dims)?;
    trap.eta = LambDicke::new(raw.trap.eta).map_err(|e| key_error("trap.eta", e))?;
    if let Some(g) = raw.trap.gamma_over_omega {
        trap.gamma_over_omega = g;
    }
    if let Some(n) = raw.trap.n_max {
        trap.n_max = n;
    }
    if let Some(d) = raw.trap.dipole {
        trap.dipole = d
            .parse::<DipolePattern>()
            .map_err(|e| key_error("trap.dipole", e))?;
    }
    if let Some(q) = raw.trap.quad_theta {
        trap.quad_theta = q;
    }
    if let Some(q) = raw.trap.quad_phi {
        trap.quad_phi = q;
    }
    trap.memory_budget = DEFAULT_MEMORY_BUDGET;
    let pulses = raw
        .pulse
        .iter()
        .map(|p| Pulse {
            s: p.s,
            duration: p.duration_tau0.unwrap_or(1.0),
            amplitude_ratio: Complex64::new(p.A_re.unwrap_or(1.0), p.A_im.unwrap_or(0.0)),
        })
        .collect();
    let protocol = Protocol::new(pulses, raw.run.cycles).map_err(|e| key_error("pulse/run", e))?;
    let protocol = match &raw.name {
        Some(n) => protocol.with_name(n.clone()),
        None => protocol,
    };
    if !(raw.init.thermal_mean.is_finite() && raw.init.thermal_mean >= 0.0) {
        return Err(Error::Config(format!(
            "`init.thermal_mean`: must be nonnegative, got {}",
            raw.init.thermal_mean
        )));
    }
    let components = match raw.run.target {
        Some(RawTargets::One(c)) => vec![c],
        Some(RawTargets::Many(cs)) => cs,
        None => Vec::new(),
    };
    let mut targets = Vec::with_capacity(components.len());
    for c in &components {
        let level = Level::from_components(c).map_err(|e| key_error("run.target", e))?;
        if level.dims() != dims {
            return Err(Error::Config(format!(
                "`run.target`: level {level} does not match dims = {}",
                dims.count()
            )));
        }
        targets.push(level);
    }
    let mode = match raw.run.mode {
        Some(m) => m.parse().map_err(|e| key_error("run.mode", e))?,
        None => RunMode::Master,
    };
    let rate_mode = match raw.run.rate_mode {
        Some(m) => m.parse().map_err(|e| key_error("run.rate_mode", e))?,
        None => RateMode::Resonant,
    };
    Ok(Experiment {
        name: raw.name,
        trap,
        thermal_mean: raw.init.thermal_mean,
        protocol,
        run: RunConfig {
            cycles: raw.run.cycles,
            mode,
            trajectories: raw.run.trajectories.unwrap_or(DEFAULT_TRAJECTORIES),
            seed: raw.run.seed.unwrap_or(DEFAULT_SEED),
            targets,
            rate_mode,
        },
    })
}

fn number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:?}")
    }
}

/// Writes a configuration with every default materialised; parsing it back and exporting again
/// reproduces the same bytes.
pub fn export_config(exp: &Experiment) -> String {
    let t = &exp.trap;
    let mut out = String::new();
    if let Some(name) = &exp.name {
        let _ = writeln!(out, "name = {name:?}\n");
    }
    let _ = writeln!(out, "[trap]");
    let _ = writeln!(out, "eta = {:?}", t.eta());
    let _ = writeln!(out, "gamma_over_omega = {:?}", t.gamma_over_omega);
    let _ = writeln!(out, "dims = {}", t.dims.count());
    let _ = writeln!(out, "n_max = {}", t.n_max);
    let _ = writeln!(out, "dipole = \"{}\"", t.dipole);
    let _ = writeln!(out, "quad_theta = {}", t.quad_theta);
    let _ = writeln!(out, "quad_phi = {}", t.quad_phi);
    let _ = writeln!(out, "\n[init]");
    let _ = writeln!(out, "thermal_mean = {:?}", exp.thermal_mean);
    for p in &exp.protocol.pulses {
        let _ = writeln!(out, "\n[[pulse]]");
        let _ = writeln!(out, "s = {}", number(p.s));
        let _ = writeln!(out, "duration_tau0 = {:?}", p.duration);
        let _ = writeln!(out, "A_re = {:?}", p.amplitude_ratio.re);
        let _ = writeln!(out, "A_im = {:?}", p.amplitude_ratio.im);
    }
    let r = &exp.run;
    let _ = writeln!(out, "\n[run]");
    let _ = writeln!(out, "cycles = {}", r.cycles);
    let _ = writeln!(out, "mode = \"{}\"", r.mode);
    let _ = writeln!(out, "trajectories = {}", r.trajectories);
    let _ = writeln!(out, "seed = {}", r.seed);
    let lists: Vec<String> = r
        .targets
        .iter()
        .map(|t| {
            let comps: Vec<String> = t.components().iter().map(|c| c.to_string()).collect();
            format!("[{}]", comps.join(", "))
        })
        .collect();
    match lists.len() {
        0 => {}
        1 => {
            let _ = writeln!(out, "target = {}", lists[0]);
        }
        _ => {
            let _ = writeln!(out, "target = [{}]", lists.join(", "));
        }
    }
    let _ = writeln!(out, "rate_mode = \"{}\"", r.rate_mode);
    out
}
