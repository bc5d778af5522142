//! Assembly of cooling protocols that prepare an excited trap level.

use num_complex::Complex64;

use super::{level_empty_rate, Protocol};
use crate::error::{Error, Result};
use crate::fc::{dark_eta_for_level, dark_ratio_a};
use crate::levels::{Dims, Level};
use crate::rates::{Pulse, TrapConfig};

/// Largest empty rate an auxiliary pulse may leave on the target.
pub const AUX_TARGET_LIMIT: f64 = 1e-6;
/// Relative distance between `η` and a dark-condition root accepted as a match.
pub const DARK_ROOT_TOLERANCE: f64 = 1e-3;

/// Which kind of dark state keeps the target populated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignStyle {
    /// A detuning at which the target's Franck–Condon factor vanishes.
    FranckCondon,
    /// A 2D `s = 0` pulse whose amplitude ratio cancels the target's absorption.
    Interference,
}

/// Smallest `s ≥ 0` whose dark condition for level `m` matches `eta`, and the closest root seen.
fn franck_condon_detuning(m: usize, eta: f64, s_max: i64) -> Result<(Option<i64>, Option<f64>)> {
    let mut best: Option<(f64, i64)> = None;
    let mut nearest: Option<f64> = None;
    for s in 0..=s_max {
        for root in dark_eta_for_level(m, s)? {
            let dev = (root / eta - 1.0).abs();
            if nearest.is_none_or(|n| (n / eta - 1.0).abs() > dev) {
                nearest = Some(root);
            }
            if dev <= DARK_ROOT_TOLERANCE && best.is_none_or(|(d, _)| dev < d) {
                best = Some((dev, s));
            }
        }
    }
    Ok((best.map(|(_, s)| s), nearest))
}

fn dark_pulse(target: Level, trap: &TrapConfig, style: DesignStyle, s_max: i64) -> Result<Pulse> {
    let eta = trap.eta();
    match (style, target) {
        (DesignStyle::Interference, Level::Two(mx, my)) => {
            let a = dark_ratio_a(eta, (mx, my))?;
            let duration = (0.5 / a.norm()).max(1.0);
            Ok(Pulse::new(0, duration).with_ratio(a))
        }
        (DesignStyle::Interference, Level::One(_)) => Err(Error::Domain(
            "interference dark states need two laser directions (2D trap)".into(),
        )),
        (DesignStyle::FranckCondon, level) => {
            let (x, y) = level.axes();
            let m = x.max(y);
            if m == 0 {
                return Err(Error::Domain(
                    "the ground level needs no Franck-Condon dark pulse".into(),
                ));
            }
            let (s, nearest) = franck_condon_detuning(m, eta, s_max)?;
            let no_dark = || Error::NoDarkCondition {
                level: level.to_string(),
                eta,
                nearest,
            };
            let s = s.ok_or_else(no_dark)?;
            let pulse = Pulse::new(s, 1.0);
            if level_empty_rate(eta, &pulse, level)? > AUX_TARGET_LIMIT {
                return Err(no_dark());
            }
            Ok(pulse)
        }
    }
}

/// Builds confinement, pseudo-confinement (2D), dark and auxiliary pulses for `target`.
///
/// Pulse order: confinement, pseudo-confinement pair, dark pulse, the same confinement set one
/// step redder, auxiliary pulse.
pub fn design_excited_protocol(
    target: Level,
    trap: &TrapConfig,
    style: DesignStyle,
) -> Result<Protocol> {
    if target.dims() != trap.dims {
        return Err(Error::DimensionMismatch {
            expected: trap.dims.count(),
            found: target.dims().count(),
        });
    }
    trap.basis().index(target)?;
    let eta = trap.eta();
    let h = trap.eta.rounded_recoil();
    let d = trap.dims.count() as i64;
    let scan = 2 * h + 5;
    let dark = dark_pulse(target, trap, style, scan)?;
    let other_ratio = match style {
        DesignStyle::FranckCondon => Complex64::new(1.0, 0.0),
        DesignStyle::Interference => Complex64::new(-1.0, 0.0),
    };
    let with = |s: i64| Pulse::new(s, 1.0).with_ratio(other_ratio);

    let mut first = vec![with(-d * h)];
    let mut second = vec![with(-d * h - 1)];
    if trap.dims == Dims::Two {
        first.extend([with(-h), with(-(h / 2))]);
        second.extend([with(-h - 1), with(-(h / 2) - 1)]);
    }
    let mut pulses = first;
    pulses.push(dark);
    pulses.extend(second);

    let neighbours: Vec<Level> = match trap.dims {
        Dims::One => (0..=h as usize).map(Level::One).collect::<Vec<_>>(),
        Dims::Two => (0..=h as usize)
            .flat_map(|x| (0..=h as usize).map(move |y| Level::Two(x, y)))
            .collect(),
    }
    .into_iter()
    .filter(|&l| l != target && trap.basis().index(l).is_ok())
    .collect();
    let coverage = |extra: &Pulse| -> Result<f64> {
        let mut weakest = f64::INFINITY;
        for &n in &neighbours {
            let mut best = level_empty_rate(eta, extra, n)?;
            for p in &pulses {
                best = best.max(level_empty_rate(eta, p, n)?);
            }
            weakest = weakest.min(best);
        }
        Ok(weakest)
    };
    let mut aux: Option<(f64, Pulse)> = None;
    let mut candidates: Vec<i64> = (-scan..=scan).collect();
    candidates.sort_by_key(|s| (s.abs(), *s));
    for s in candidates {
        if pulses.iter().any(|p| p.s == s as f64) {
            continue;
        }
        let p = with(s);
        if level_empty_rate(eta, &p, target)? > AUX_TARGET_LIMIT {
            continue;
        }
        let score = coverage(&p)?;
        if aux.as_ref().is_none_or(|(b, _)| score > *b) {
            aux = Some((score, p));
        }
    }
    if let Some((_, p)) = aux {
        pulses.push(p);
    }
    let cycles = match trap.dims {
        Dims::One => 200,
        Dims::Two => 300,
    };
    Ok(Protocol::new(pulses, cycles)?.with_name(format!(
        "designed_{}",
        target
            .components()
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("_")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_designs() {
        let trap = TrapConfig::new(3.0, Dims::One).unwrap();
        let p = design_excited_protocol(Level::One(1), &trap, DesignStyle::FranckCondon).unwrap();
        let s: Vec<f64> = p.pulses.iter().map(|p| p.s).collect();
        assert_eq!(&s[..3], &[-9.0, 8.0, -10.0]);
        assert_eq!(s.len(), 4);

        let trap = TrapConfig::new(3.065, Dims::One).unwrap();
        let p = design_excited_protocol(Level::One(2), &trap, DesignStyle::FranckCondon).unwrap();
        assert_eq!(p.pulses[1].s, 11.0);
    }

    #[test]
    fn interference_design() {
        let trap = TrapConfig::new(3.0, Dims::Two).unwrap();
        let p =
            design_excited_protocol(Level::Two(0, 1), &trap, DesignStyle::Interference).unwrap();
        let dark = p.pulses[3];
        assert_eq!(dark.s, 0.0);
        assert!((dark.amplitude_ratio - Complex64::new(0.125, 0.0)).norm() < 1e-12);
        let s: Vec<f64> = p.pulses[..7].iter().map(|p| p.s).collect();
        assert_eq!(s, vec![-18.0, -9.0, -4.0, 0.0, -19.0, -10.0, -5.0]);
    }

    #[test]
    fn no_dark_condition_reports_nearest() {
        let trap = TrapConfig::new(2.9, Dims::One).unwrap();
        match design_excited_protocol(Level::One(1), &trap, DesignStyle::FranckCondon) {
            Err(Error::NoDarkCondition {
                nearest: Some(n), ..
            }) => {
                assert!((n - 3.0).abs() < 1e-12 || (n - 8f64.sqrt()).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
        assert!(design_excited_protocol(
            Level::One(1),
            &TrapConfig::new(3.0, Dims::One).unwrap(),
            DesignStyle::Interference
        )
        .is_err());
    }
}
