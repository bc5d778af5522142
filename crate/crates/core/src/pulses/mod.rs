//! Pulse protocols: data model, regime validation, dark-state protocol design, the preset library
//! and the plain-text configuration format.

mod config;
mod design;
mod presets;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fc::fc_reduced;
use crate::levels::{Dims, Level};
use crate::rates::{Pulse, RateMode, TrapConfig};

pub use config::{export_config, parse_config, Experiment, RunConfig, RunMode};
pub use design::{design_excited_protocol, DesignStyle};
pub use presets::{preset, preset_list, Preset, PRESET_NAMES};

/// Relative deviation of `η` probed by the dark-state sensitivity note.
pub const DARK_SENSITIVITY: f64 = 1e-3;

/// An ordered pulse sequence repeated for a number of cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub name: Option<String>,
    pub pulses: Vec<Pulse>,
    pub cycles: usize,
}

impl Protocol {
    pub fn new(pulses: Vec<Pulse>, cycles: usize) -> Result<Self> {
        if pulses.is_empty() {
            return Err(Error::Domain("a protocol needs at least one pulse".into()));
        }
        if let Some(p) = pulses
            .iter()
            .find(|p| !(p.duration > 0.0 && p.duration.is_finite()))
        {
            return Err(Error::Domain(format!(
                "pulse durations must be positive, got {}",
                p.duration
            )));
        }
        if cycles == 0 {
            return Err(Error::Domain("cycles must be positive".into()));
        }
        Ok(Protocol {
            name: None,
            pulses,
            cycles,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Duration of one cycle in units of `τ₀`.
    pub fn cycle_duration(&self) -> f64 {
        self.pulses.iter().map(|p| p.duration).sum()
    }
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub rule: &'static str,
    pub message: String,
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.rule, self.message)
    }
}

/// Outcome of [`validate_protocol`]; a protocol is runnable iff `errors` is empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
    /// Informational results such as the dark-state sensitivity.
    pub notes: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_runnable(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_warning(&self, rule: &str) -> bool {
        self.warnings.iter().any(|f| f.rule == rule)
    }

    fn error(&mut self, rule: &'static str, message: String) {
        self.errors.push(Finding { rule, message });
    }

    fn warn(&mut self, rule: &'static str, message: String) {
        self.warnings.push(Finding { rule, message });
    }
}

/// Resonant empty rate of one level under one pulse with integer detuning.
pub fn level_empty_rate(eta: f64, pulse: &Pulse, level: Level) -> Result<f64> {
    let s = pulse.require_integer()?;
    let f = |m: usize| -> f64 {
        let l = m as i64 + s;
        if l < 0 {
            0.0
        } else {
            fc_reduced(eta, m, l as usize)
        }
    };
    Ok(match level {
        Level::One(m) => f(m).powi(2),
        Level::Two(mx, my) => {
            let (fx, fy) = (f(mx), f(my));
            let a = pulse.amplitude_ratio;
            if s == 0 {
                (fx + a * fy).norm_sqr()
            } else {
                fx * fx + a.norm_sqr() * fy * fy
            }
        }
    })
}

/// Checks a protocol against the strong-confinement and cooling-mechanism rules.
///
/// For every target that some pulse keeps dark, a note reports the target's empty rate when `η`
/// is off by `±0.1%`.
pub fn validate_protocol(
    protocol: &Protocol,
    trap: &TrapConfig,
    mode: RateMode,
    targets: &[Level],
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let eta = trap.eta();
    let d = trap.dims.count() as i64;
    let h = trap.eta.rounded_recoil();

    if protocol.pulses.is_empty() {
        report.error("empty_protocol", "the protocol has no pulses".into());
    }
    if protocol.cycles == 0 {
        report.error("zero_cycles", "cycles must be positive".into());
    }
    for (i, p) in protocol.pulses.iter().enumerate() {
        if !(p.duration > 0.0 && p.duration.is_finite()) {
            report.error(
                "non_positive_duration",
                format!("pulse {} has duration {}", i + 1, p.duration),
            );
        }
        if mode == RateMode::Resonant && p.detuning_index().is_none() {
            report.error(
                "non_integer_detuning",
                format!(
                    "pulse {} has s = {}; resonant rates need an integer detuning (use full mode)",
                    i + 1,
                    p.s
                ),
            );
        }
    }
    if !(trap.gamma_over_omega > 0.0 && trap.gamma_over_omega < 1.0) {
        let msg = format!(
            "gamma/omega = {} leaves the strong-confinement regime (needs gamma < omega)",
            trap.gamma_over_omega
        );
        if trap.allow_weak_confinement && trap.gamma_over_omega > 0.0 {
            report.warn("weak_confinement", msg);
        } else {
            report.error("weak_confinement", msg);
        }
    }

    let expected = -d * h;
    let near = |p: &Pulse| (p.s - expected as f64).abs() <= 1.0;
    if !protocol.pulses.iter().any(near) {
        report.warn(
            "confinement_missing",
            format!(
                "no confinement pulse near s = {expected} (-D * round(eta^2) for D = {d}, eta = {eta})"
            ),
        );
    }
    if trap.dims == Dims::One {
        let mut distinct: Vec<f64> = protocol
            .pulses
            .iter()
            .filter(|p| near(p))
            .map(|p| p.s)
            .collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 2 {
            report.warn(
                "single_confinement",
                format!(
                    "1D protocols need two slightly detuned confinement pulses near s = {expected} \
                     so that levels one leaves untouched are emptied by the other"
                ),
            );
        }
    }
    if trap.dims == Dims::Two && eta > 4.0 {
        for (i, p) in protocol.pulses.iter().enumerate() {
            if p.s == 0.0 && p.amplitude_ratio != Complex64::new(0.0, 0.0) {
                report.warn(
                    "interference_regime",
                    format!(
                        "pulse {} relies on s = 0 interference at eta = {eta} > 4, where all \
                         diagonal Franck-Condon factors are negligible and the mechanism fails",
                        i + 1
                    ),
                );
            }
        }
    }

    if mode == RateMode::Resonant {
        for &target in targets {
            if target.dims() != trap.dims {
                continue;
            }
            for (i, p) in protocol.pulses.iter().enumerate() {
                let Ok(rate) = level_empty_rate(eta, p, target) else {
                    continue;
                };
                if rate >= 1e-12 {
                    continue;
                }
                let lo = level_empty_rate(eta * (1.0 - DARK_SENSITIVITY), p, target).unwrap_or(0.0);
                let hi = level_empty_rate(eta * (1.0 + DARK_SENSITIVITY), p, target).unwrap_or(0.0);
                if lo.max(hi) < 1e-12 {
                    // No final level below the target: dark at every eta.
                    continue;
                }
                report.notes.push(Finding {
                    rule: "dark_sensitivity",
                    message: format!(
                        "target {target} is dark under pulse {} (rate {rate:.3e}); at eta -0.1% the \
                         rate is {lo:.3e}, at +0.1% it is {hi:.3e}",
                        i + 1
                    ),
                });
            }
        }
    }
    report
}
