//! Dynamical laser cooling of a trapped atom beyond the Lamb-Dicke regime.
//!
//! Franck–Condon factors and dark-state design ([`fc`]), transition rates ([`rates`]),
//! rate-equation dynamics and Monte Carlo ([`dynamics`]), and pulse protocols ([`pulses`]).

pub mod dynamics;
pub mod error;
pub mod fc;
pub mod format;
pub mod levels;
pub mod pulses;
pub mod quadrature;
pub mod rates;

pub use dynamics::{
    mc_ensemble, mc_trajectory, observables, propagate_pulse, run_protocol, thermal_distribution,
    Distribution, JumpProtocol, McEnsembleResult, RunOptions, Snapshot, TimeSeries,
};
pub use error::{Error, Result};
pub use fc::{
    dark_eta_for_level, dark_ratio_a, fc_factor, fc_reduced, fc_row, laguerre_assoc, DarkDesign,
    FcAmplitude, FcMatrix, LambDicke,
};
pub use levels::{Basis, Dims, Level};
pub use pulses::{
    design_excited_protocol, export_config, parse_config, preset, validate_protocol, DesignStyle,
    Experiment, Preset, Protocol, ValidationReport,
};
pub use quadrature::{angular_quadrature, dipole_pattern, AngularQuadrature, DipolePattern};
pub use rates::{
    empty_rates_1d, empty_rates_2d, rate_matrix, Pulse, RateBuilder, RateMatrix, RateMode,
    TrapConfig,
};
