//! Population dynamics over trap levels: initial states, observables, deterministic rate-equation
//! propagation and quantum-jump Monte Carlo.

mod monte_carlo;
mod propagate;

use std::io::Write;

use crate::error::{Error, Result};
use crate::format::format_float;
use crate::levels::{Basis, Dims, Level};
use crate::rates::TrapConfig;

pub use monte_carlo::{
    mc_ensemble, mc_trajectory, trajectory_rng, Jump, JumpProtocol, McEnsembleResult, McSample,
    Trajectory,
};
pub use propagate::{
    expm_generator, propagate_pulse, run_protocol, Propagator, RunOptions, Sample, TimeSeries,
};

/// Entries above this negative value are rounding noise and are clamped to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-15;
/// Thermal tail mass beyond the truncation that triggers a warning.
pub const THERMAL_TAIL_WARNING: f64 = 1e-6;

/// Populations over a truncated basis plus the probability lost past the truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    basis: Basis,
    probs: Vec<f64>,
    leak: f64,
}

impl Distribution {
    pub fn new(basis: Basis, probs: Vec<f64>, leak: f64) -> Result<Self> {
        if probs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: probs.len(),
            });
        }
        if probs
            .iter()
            .any(|p| !p.is_finite() || *p < -NEGATIVE_TOLERANCE)
            || leak < 0.0
        {
            return Err(Error::Domain("probabilities must be nonnegative".into()));
        }
        let mut d = Distribution { basis, probs, leak };
        d.clamp();
        Ok(d)
    }

    /// All mass on one level.
    pub fn point(basis: Basis, level: Level) -> Result<Self> {
        let idx = basis.index(level)?;
        let mut probs = vec![0.0; basis.len()];
        probs[idx] = 1.0;
        Ok(Distribution {
            basis,
            probs,
            leak: 0.0,
        })
    }

    pub(crate) fn from_parts(basis: Basis, probs: Vec<f64>, leak: f64) -> Self {
        let mut d = Distribution { basis, probs, leak };
        d.clamp();
        d
    }

    fn clamp(&mut self) {
        for p in &mut self.probs {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dims(&self) -> Dims {
        self.basis.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    /// `Σ probs + leak`; 1 up to rounding.
    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.leak
    }

    pub fn prob(&self, level: Level) -> Result<f64> {
        Ok(self.probs[self.basis.index(level)?])
    }

    /// Writes the populations, one level per row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match self.basis.dims {
            Dims::One => writeln!(w, "n,prob")?,
            Dims::Two => {
                writeln!(w, "# row-major in (nx, ny)")?;
                writeln!(w, "nx,ny,prob")?
            }
        }
        for (i, p) in self.probs.iter().enumerate() {
            writeln!(w, "{},{}", self.basis.level(i), format_float(*p))?;
        }
        writeln!(w, "# leak,{}", format_float(self.leak))?;
        Ok(())
    }
}

/// Observables recorded at a sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Occupation of each requested target; the first is the primary one.
    pub p_targets: Vec<f64>,
    pub mean_nx: f64,
    pub mean_ny: f64,
    pub mean_n: f64,
    /// Probability held inside the basis; `in_basis + leak` is conserved.
    pub in_basis: f64,
    pub leak: f64,
}

impl Snapshot {
    pub fn p_target(&self) -> f64 {
        self.p_targets.first().copied().unwrap_or(f64::NAN)
    }
}

/// Occupations of the targets, mean quantum numbers and leak.
pub fn observables(dist: &Distribution, targets: &[Level]) -> Result<Snapshot> {
    let idx: Vec<usize> = targets
        .iter()
        .map(|&t| dist.basis.index(t))
        .collect::<Result<_>>()?;
    let (mut nx, mut ny, mut total) = (0.0, 0.0, 0.0);
    for (i, &p) in dist.probs.iter().enumerate() {
        let (x, y) = dist.basis.level(i).axes();
        nx += p * x as f64;
        ny += p * y as f64;
        total += p;
    }
    Ok(Snapshot {
        p_targets: idx.iter().map(|&i| dist.probs[i]).collect(),
        mean_nx: nx,
        mean_ny: ny,
        mean_n: nx + ny,
        in_basis: total,
        leak: dist.leak,
    })
}

fn geometric(mean: f64, n_max: usize) -> Vec<f64> {
    let q = mean / (mean + 1.0);
    let mut p: Vec<f64> = (0..=n_max).map(|n| q.powi(n as i32)).collect();
    let norm: f64 = p.iter().sum();
    for v in &mut p {
        *v /= norm;
    }
    let tail = q.powi(n_max as i32 + 1);
    if tail > THERMAL_TAIL_WARNING {
        log::warn!(
            "thermal tail beyond n_max = {n_max} holds {tail:.3e} of the mass at mean {mean}; \
             renormalised into the basis"
        );
    }
    p
}

/// Thermal state of total mean `mean_n`: geometric in 1D, a product of two geometrics of mean
/// `mean_n / 2` in 2D. Truncated and renormalised, with zero leak.
pub fn thermal_distribution(mean_n: f64, trap: &TrapConfig) -> Result<Distribution> {
    if !(mean_n.is_finite() && mean_n >= 0.0) {
        return Err(Error::Domain(format!(
            "thermal mean must be nonnegative, got {mean_n}"
        )));
    }
    let basis = trap.basis();
    let probs = match trap.dims {
        Dims::One => geometric(mean_n, trap.n_max),
        Dims::Two => {
            let g = geometric(mean_n / 2.0, trap.n_max);
            g.iter()
                .flat_map(|&px| g.iter().map(move |&py| px * py))
                .collect()
        }
    };
    Ok(Distribution {
        basis,
        probs,
        leak: 0.0,
    })
}
