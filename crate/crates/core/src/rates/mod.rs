//! Transition-rate matrices `Γ_{n←m}` and empty rates `Γ_m` for 1D and 2D traps.
//!
//! All rates are in units of `Γ₀ = Ω²/2γ`. A [`RateMatrix`] stores the generator of the rate
//! equation: off-diagonal entries are the rates, the diagonal holds `-Γ_m - leak_m` where
//! `leak_m` is the flux into levels beyond the truncation.

mod builder;

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fc::{fc_reduced, LambDicke};
use crate::format::format_float;
use crate::levels::{Basis, Dims, Level};
use crate::quadrature::DipolePattern;

pub use builder::{ProjectedNode, RateBuilder, RateColumn};

/// Default per-axis truncation of 1D traps.
pub const DEFAULT_N_MAX_1D: usize = 120;
/// Default per-axis truncation of 2D traps (1681 states).
pub const DEFAULT_N_MAX_2D: usize = 40;
/// Default `(quad_theta, quad_phi)` in 1D. The 1D rule integrates over the x direction cosine
/// with `quad_theta` points; `quad_phi` is kept for the file format only.
pub const DEFAULT_QUAD_1D: (usize, usize) = (128, 256);
/// Default sphere grid in 2D.
pub const DEFAULT_QUAD_2D: (usize, usize) = (72, 144);
/// Largest dense matrix (in bytes) the builder will allocate by default.
pub const DEFAULT_MEMORY_BUDGET: usize = 2 << 30;

/// Which intermediate excited levels enter the transition amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// Only the resonant intermediate level `l = m + s`.
    #[default]
    Resonant,
    /// Coherent sum over all intermediate levels with their Lorentzian weights.
    Full,
}

impl std::str::FromStr for RateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resonant" => Ok(RateMode::Resonant),
            "full" => Ok(RateMode::Full),
            other => Err(Error::Config(format!(
                "unknown rate mode `{other}` (expected resonant or full)"
            ))),
        }
    }
}

impl std::fmt::Display for RateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RateMode::Resonant => "resonant",
            RateMode::Full => "full",
        })
    }
}

/// Physical and numerical description of the trap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub eta: LambDicke,
    /// Effective linewidth `γ` in units of the trap frequency `ω`.
    pub gamma_over_omega: f64,
    pub dims: Dims,
    /// Per-axis truncation index.
    pub n_max: usize,
    pub dipole: DipolePattern,
    pub quad_theta: usize,
    pub quad_phi: usize,
    /// Accept `γ/ω ≥ 1` (outside the strong-confinement regime).
    #[serde(default)]
    pub allow_weak_confinement: bool,
    #[serde(default = "default_budget")]
    pub memory_budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_MEMORY_BUDGET
}

impl TrapConfig {
    pub fn new(eta: f64, dims: Dims) -> Result<Self> {
        Ok(TrapConfig {
            eta: LambDicke::new(eta)?,
            gamma_over_omega: 0.01,
            dims,
            n_max: match dims {
                Dims::One => DEFAULT_N_MAX_1D,
                Dims::Two => DEFAULT_N_MAX_2D,
            },
            dipole: DipolePattern::Isotropic,
            quad_theta: match dims {
                Dims::One => DEFAULT_QUAD_1D.0,
                Dims::Two => DEFAULT_QUAD_2D.0,
            },
            quad_phi: match dims {
                Dims::One => DEFAULT_QUAD_1D.1,
                Dims::Two => DEFAULT_QUAD_2D.1,
            },
            allow_weak_confinement: false,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        })
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_gamma(mut self, gamma_over_omega: f64) -> Self {
        self.gamma_over_omega = gamma_over_omega;
        self
    }

    pub fn with_quadrature(mut self, quad_theta: usize, quad_phi: usize) -> Self {
        self.quad_theta = quad_theta;
        self.quad_phi = quad_phi;
        self
    }

    pub fn with_dipole(mut self, dipole: DipolePattern) -> Self {
        self.dipole = dipole;
        self
    }

    pub fn eta(&self) -> f64 {
        self.eta.value()
    }

    pub fn basis(&self) -> Basis {
        Basis::new(self.dims, self.n_max)
    }

    /// Strong-confinement check: `γ < ω` unless explicitly overridden.
    pub fn check_regime(&self) -> Result<()> {
        if !(self.gamma_over_omega.is_finite() && self.gamma_over_omega > 0.0) {
            return Err(Error::Domain(format!(
                "gamma_over_omega must be positive, got {}",
                self.gamma_over_omega
            )));
        }
        if self.gamma_over_omega >= 1.0 && !self.allow_weak_confinement {
            return Err(Error::WeakConfinement(self.gamma_over_omega));
        }
        Ok(())
    }

    /// Smallest per-axis truncation that comfortably holds a thermal state of the given mean
    /// plus the recoil spread: `⌈2η² + n̄ + 6√n̄⌉`.
    pub fn recommended_n_max(&self, thermal_mean: f64) -> usize {
        (2.0 * self.eta.recoil() + thermal_mean + 6.0 * thermal_mean.sqrt()).ceil() as usize
    }
}

/// One laser pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Detuning `δ = s ω`.
    pub s: f64,
    /// Duration in units of `τ₀ = 2γ/Ω²`.
    pub duration: f64,
    /// Ratio `A` of the y-laser amplitude to the x-laser amplitude (2D only).
    pub amplitude_ratio: Complex64,
}

impl Pulse {
    pub fn new(s: i64, duration: f64) -> Self {
        Pulse {
            s: s as f64,
            duration,
            amplitude_ratio: Complex64::new(1.0, 0.0),
        }
    }

    pub fn with_ratio(mut self, a: Complex64) -> Self {
        self.amplitude_ratio = a;
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    /// `s` when it is an integer.
    pub fn detuning_index(&self) -> Option<i64> {
        (self.s.fract() == 0.0 && self.s.is_finite()).then_some(self.s as i64)
    }

    pub(crate) fn require_integer(&self) -> Result<i64> {
        self.detuning_index()
            .ok_or(Error::NonIntegerDetuning(self.s))
    }
}

/// Generator of the rate equation for one pulse.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    pub(crate) basis: Basis,
    pub(crate) mode: RateMode,
    pub(crate) trap: TrapConfig,
    pub(crate) pulse: Pulse,
    /// `[n, m]`: `Γ_{n←m}` off the diagonal, `-Γ_m - leak_m` on it.
    pub(crate) generator: DMatrix<f64>,
    pub(crate) leak: Vec<f64>,
    pub(crate) self_rate: Vec<f64>,
}

impl RateMatrix {
    /// Builds from explicit off-diagonal rates `rates[n][m]` (diagonal ignored) with no leak.
    ///
    /// Intended for hand-made generators in tests and toy models.
    pub fn from_rates(basis: Basis, rates: &DMatrix<f64>) -> Result<Self> {
        let n = basis.len();
        if rates.nrows() != n || rates.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rates.nrows(),
            });
        }
        let mut generator = rates.clone();
        for m in 0..n {
            generator[(m, m)] = 0.0;
            let out: f64 = generator.column(m).iter().sum();
            generator[(m, m)] = -out;
        }
        let mut trap = TrapConfig::new(0.0, basis.dims)?;
        trap.n_max = basis.n_max;
        Ok(RateMatrix {
            basis,
            mode: RateMode::Resonant,
            trap,
            pulse: Pulse::new(0, 1.0),
            generator,
            leak: vec![0.0; n],
            self_rate: vec![0.0; n],
        })
    }

    pub(crate) fn from_columns(
        basis: Basis,
        mode: RateMode,
        trap: TrapConfig,
        pulse: Pulse,
        columns: Vec<RateColumn>,
    ) -> Self {
        let n = basis.len();
        let mut generator = DMatrix::<f64>::zeros(n, n);
        let mut leak = vec![0.0; n];
        let mut self_rate = vec![0.0; n];
        for (m, col) in columns.into_iter().enumerate() {
            let mut out = 0.0;
            for (k, &r) in col.rates.iter().enumerate() {
                if k == m {
                    self_rate[m] = r;
                } else {
                    generator[(k, m)] = r;
                    out += r;
                }
            }
            leak[m] = col.leak;
            generator[(m, m)] = -(out + col.leak);
        }
        RateMatrix {
            basis,
            mode,
            trap,
            pulse,
            generator,
            leak,
            self_rate,
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn states(&self) -> usize {
        self.basis.len()
    }

    pub fn mode(&self) -> RateMode {
        self.mode
    }

    pub fn trap(&self) -> &TrapConfig {
        &self.trap
    }

    pub fn pulse(&self) -> &Pulse {
        &self.pulse
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// `Γ_{n←m}`; for `n == m` the rate of emission back into the starting level.
    pub fn rate(&self, n: usize, m: usize) -> f64 {
        if n == m {
            self.self_rate[m]
        } else {
            self.generator[(n, m)]
        }
    }

    /// Rate of leaving level `m`, including the flux out of the truncated basis.
    pub fn empty_rate(&self, m: usize) -> f64 {
        -self.generator[(m, m)]
    }

    pub fn leak(&self, m: usize) -> f64 {
        self.leak[m]
    }

    pub fn leaks(&self) -> &[f64] {
        &self.leak
    }

    /// Total absorption-emission rate out of `m`, counting returns to `m` itself.
    pub fn total_outflow(&self, m: usize) -> f64 {
        self.empty_rate(m) + self.self_rate[m]
    }

    /// Sum of `Γ_{n←m}` over all levels inside the basis, `n == m` included.
    pub fn in_basis_outflow(&self, m: usize) -> f64 {
        self.total_outflow(m) - self.leak[m]
    }

    /// Sum of generator column `m`: minus the leak flux.
    pub fn column_sum(&self, m: usize) -> f64 {
        self.generator.column(m).iter().sum()
    }

    /// Writes every nonzero off-diagonal rate in long format.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match self.basis.dims {
            Dims::One => {
                writeln!(w, "# transition rates Gamma(n <- m) in units of Gamma0")?;
                writeln!(w, "n,m,gamma_over_Gamma0")?;
            }
            Dims::Two => {
                writeln!(
                    w,
                    "# transition rates Gamma(nx,ny <- mx,my) in units of Gamma0; \
                     flattened index = nx*{} + ny (row-major in (mx, my))",
                    self.basis.per_axis()
                )?;
                writeln!(w, "nx,ny,mx,my,gamma_over_Gamma0")?;
            }
        }
        for m in 0..self.states() {
            for n in 0..self.states() {
                let r = self.rate(n, m);
                if n == m || r == 0.0 {
                    continue;
                }
                match (self.basis.level(n), self.basis.level(m)) {
                    (Level::Two(nx, ny), Level::Two(mx, my)) => {
                        writeln!(w, "{nx},{ny},{mx},{my},{}", format_float(r))?
                    }
                    (dst, src) => writeln!(w, "{dst},{src},{}", format_float(r))?,
                }
            }
        }
        Ok(())
    }
}

/// 1D empty rates `Γ_m = |<m+s|e^{ikx}|m>|²` (zero when `m + s < 0`) for `m = 0..=n_max`.
pub fn empty_rates_1d(trap: &TrapConfig, s: i64) -> Result<Vec<f64>> {
    if trap.dims != Dims::One {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: trap.dims.count(),
        });
    }
    let eta = trap.eta();
    Ok((0..=trap.n_max)
        .map(|m| {
            let l = m as i64 + s;
            if l < 0 {
                0.0
            } else {
                fc_reduced(eta, m, l as usize).powi(2)
            }
        })
        .collect())
}

/// 2D empty rates, `result[m_x][m_y]`:
/// `|F_x|² + |A|²|F_y|² + (A + A*) F_x F_y δ_{s,0}`.
pub fn empty_rates_2d(trap: &TrapConfig, pulse: &Pulse) -> Result<Vec<Vec<f64>>> {
    if trap.dims != Dims::Two {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: trap.dims.count(),
        });
    }
    let s = pulse.require_integer()?;
    let eta = trap.eta();
    let a = pulse.amplitude_ratio;
    let factor = |m: usize| -> f64 {
        let l = m as i64 + s;
        if l < 0 {
            0.0
        } else {
            fc_reduced(eta, m, l as usize)
        }
    };
    let f: Vec<f64> = (0..=trap.n_max).map(factor).collect();
    Ok(f.iter()
        .map(|&fx| {
            f.iter()
                .map(|&fy| {
                    if s == 0 {
                        // Diagonal factors are real: the interference form is exact.
                        (fx + a * fy).norm_sqr()
                    } else {
                        fx * fx + a.norm_sqr() * fy * fy
                    }
                })
                .collect()
        })
        .collect())
}

/// Writes a 1D empty-rate vector or a flattened 2D empty-rate table.
pub fn write_empty_rates_csv<W: Write>(mut w: W, basis: Basis, rates: &[f64]) -> Result<()> {
    if rates.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: rates.len(),
        });
    }
    match basis.dims {
        Dims::One => {
            writeln!(w, "# empty rates Gamma_m in units of Gamma0")?;
            writeln!(w, "m,gamma_over_Gamma0")?;
        }
        Dims::Two => {
            writeln!(
                w,
                "# empty rates Gamma_(mx,my) in units of Gamma0; rows are row-major in (mx, my), \
                 flattened index = mx*{} + my",
                basis.per_axis()
            )?;
            writeln!(w, "mx,my,gamma_over_Gamma0")?;
        }
    }
    for (i, r) in rates.iter().enumerate() {
        writeln!(w, "{},{}", basis.level(i), format_float(*r))?;
    }
    Ok(())
}

/// Convenience: full build of a rate matrix.
pub fn rate_matrix(trap: &TrapConfig, pulse: &Pulse, mode: RateMode) -> Result<RateMatrix> {
    RateBuilder::new(trap, pulse, mode)?.build()
}

/// 1D rate matrix.
pub fn rate_matrix_1d(trap: &TrapConfig, pulse: &Pulse, mode: RateMode) -> Result<RateMatrix> {
    if trap.dims != Dims::One {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: trap.dims.count(),
        });
    }
    rate_matrix(trap, pulse, mode)
}

/// 2D rate matrix over the flattened `(n_x, n_y)` basis.
pub fn rate_matrix_2d(trap: &TrapConfig, pulse: &Pulse, mode: RateMode) -> Result<RateMatrix> {
    if trap.dims != Dims::Two {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: trap.dims.count(),
        });
    }
    rate_matrix(trap, pulse, mode)
}
