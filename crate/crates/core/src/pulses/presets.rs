//! Published pulse sequences.

use num_complex::Complex64;

use super::Protocol;
use crate::error::{Error, Result};
use crate::levels::{Dims, Level};
use crate::rates::{Pulse, TrapConfig};

pub const PRESET_NAMES: [&str; 9] = [
    "fig2",
    "fig3",
    "fig4",
    "fig5_A_minus",
    "fig5_A_plus",
    "fig6_solid",
    "fig6_dashed",
    "fig7",
    "fig7_caption_variant",
];

const CYCLES_1D: usize = 200;
const CYCLES_2D: usize = 300;
const THERMAL_MEAN: f64 = 6.0;
/// `η` of the second excited-state dark condition, quoted to four digits.
const ETA_LEVEL_TWO: f64 = 3.065;

/// A named configuration: trap, protocol, initial thermal mean and the level it prepares.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub trap: TrapConfig,
    pub protocol: Protocol,
    pub thermal_mean: f64,
    pub targets: Vec<Level>,
}

fn pulses(detunings: &[i64], a: f64) -> Vec<Pulse> {
    detunings
        .iter()
        .map(|&s| Pulse::new(s, 1.0).with_ratio(Complex64::new(a, 0.0)))
        .collect()
}

fn build(
    name: &'static str,
    description: &'static str,
    eta: f64,
    dims: Dims,
    pulses: Vec<Pulse>,
    target: Level,
) -> Result<Preset> {
    let cycles = match dims {
        Dims::One => CYCLES_1D,
        Dims::Two => CYCLES_2D,
    };
    Ok(Preset {
        name,
        description,
        trap: TrapConfig::new(eta, dims)?,
        protocol: Protocol::new(pulses, cycles)?.with_name(name),
        thermal_mean: THERMAL_MEAN,
        targets: vec![target],
    })
}

fn interference_dark(last: i64) -> Vec<Pulse> {
    let mut p = pulses(&[-18, -9, -4, 0, -19, -10, -5, last], -1.0);
    p[3] = Pulse::new(0, 4.0).with_ratio(Complex64::new(0.125, 0.0));
    p
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<Preset> {
    let d2 = [-18, -9, -4, 0, -19, -10, -5, -1];
    match name {
        "fig2" => build(
            "fig2",
            "1D ground-state cooling, eta = 3",
            3.0,
            Dims::One,
            pulses(&[-9, 0, -10, -1], 1.0),
            Level::One(0),
        ),
        "fig3" => build(
            "fig3",
            "1D confinement into n = 1 via the s = 8 Franck-Condon dark state, eta = 3",
            3.0,
            Dims::One,
            pulses(&[-9, 8, -10, -3], 1.0),
            Level::One(1),
        ),
        "fig4" => build(
            "fig4",
            "1D confinement into n = 2 via the s = 11 Franck-Condon dark state, eta = 3.065",
            ETA_LEVEL_TWO,
            Dims::One,
            pulses(&[-9, 11, -10, -5], 1.0),
            Level::One(2),
        ),
        "fig5_A_minus" => build(
            "fig5_A_minus",
            "2D ground-state cooling with interfering lasers, A = -1, eta = 3",
            3.0,
            Dims::Two,
            pulses(&d2, -1.0),
            Level::Two(0, 0),
        ),
        "fig5_A_plus" => build(
            "fig5_A_plus",
            "2D ground-state cooling without the interference dark state, A = +1, eta = 3",
            3.0,
            Dims::Two,
            pulses(&d2, 1.0),
            Level::Two(0, 0),
        ),
        "fig6_solid" => build(
            "fig6_solid",
            "2D confinement into (1,1) via the s = 8 Franck-Condon dark state, eta = 3",
            3.0,
            Dims::Two,
            pulses(&[-18, -9, -4, 8, -19, -10, -5, -3], 1.0),
            Level::Two(1, 1),
        ),
        "fig6_dashed" => build(
            "fig6_dashed",
            "2D confinement into (2,2) via the s = 11 Franck-Condon dark state, eta = 3.065",
            ETA_LEVEL_TWO,
            Dims::Two,
            pulses(&[-18, -9, -4, 11, -19, -10, -5], 1.0),
            Level::Two(2, 2),
        ),
        "fig7" => build(
            "fig7",
            "2D confinement into (0,1) via the A = 1/8 interference dark state, last pulse s = -2",
            3.0,
            Dims::Two,
            interference_dark(-2),
            Level::Two(0, 1),
        ),
        "fig7_caption_variant" => build(
            "fig7_caption_variant",
            "as fig7 with the last pulse at s = -1",
            3.0,
            Dims::Two,
            interference_dark(-1),
            Level::Two(0, 1),
        ),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// `(name, description)` of every preset.
pub fn preset_list() -> Vec<(&'static str, &'static str)> {
    PRESET_NAMES
        .iter()
        .map(|n| {
            let p = preset(n).expect("listed presets exist");
            (p.name, p.description)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_parameters() {
        assert_eq!(preset("fig2").unwrap().protocol.pulses[0].s, -9.0);
        let fig7 = preset("fig7").unwrap();
        assert_eq!(
            fig7.protocol.pulses[3].amplitude_ratio,
            Complex64::new(0.125, 0.0)
        );
        assert_eq!(fig7.protocol.pulses[7].s, -2.0);
        assert_eq!(
            preset("fig7_caption_variant").unwrap().protocol.pulses[7].s,
            -1.0
        );
        assert_eq!(preset("fig6_dashed").unwrap().protocol.pulses.len(), 7);
        assert_eq!(preset("fig4").unwrap().trap.eta(), 3.065);
        let minus = preset("fig5_A_minus").unwrap();
        assert!(minus
            .protocol
            .pulses
            .iter()
            .all(|p| p.amplitude_ratio == Complex64::new(-1.0, 0.0)));
        assert_eq!(minus.trap.n_max, 40);
        assert_eq!(preset("fig3").unwrap().trap.n_max, 120);
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
        assert_eq!(preset_list().len(), 9);
    }
}
