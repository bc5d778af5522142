//! Deterministic propagation of the rate equation.
//!
//! The generator is augmented with an absorbing leak state, uniformized to a nonnegative matrix
//! and exponentiated by a truncated Taylor series (Paterson–Stockmeyer evaluation) followed by
//! squaring. Every step is a product of nonnegative matrices, so populations stay nonnegative
//! and column sums stay 1 up to rounding.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::{observables, Distribution, Snapshot};
use crate::error::{Error, Result};
use crate::format::format_float;
use crate::levels::{Dims, Level};
use crate::pulses::Protocol;
use crate::rates::{rate_matrix, RateMatrix, RateMode, TrapConfig};

/// Truncation target for the Taylor remainder.
const TAYLOR_TOLERANCE: f64 = 1e-18;
const MAX_TAYLOR_DEGREE: usize = 30;

fn taylor_degree(theta: f64) -> usize {
    let mut term = 1.0;
    for k in 1..=MAX_TAYLOR_DEGREE {
        term *= theta / k as f64;
        if term < TAYLOR_TOLERANCE {
            return k - 1;
        }
    }
    MAX_TAYLOR_DEGREE
}

/// `Σ_{k ≤ degree} B^k / k!` by Paterson–Stockmeyer.
fn taylor_polynomial(b: &DMatrix<f64>, degree: usize) -> DMatrix<f64> {
    let n = b.nrows();
    let coeff: Vec<f64> = (0..=degree)
        .scan(1.0, |c, k| {
            if k > 0 {
                *c /= k as f64;
            }
            Some(*c)
        })
        .collect();
    if degree == 0 {
        return DMatrix::identity(n, n);
    }
    let s = (degree as f64).sqrt().ceil().max(1.0) as usize;
    let mut powers = vec![DMatrix::identity(n, n), b.clone()];
    for k in 2..=s {
        let next = &powers[k - 1] * b;
        powers.push(next);
    }
    let block = |i: usize| -> DMatrix<f64> {
        let mut q = DMatrix::<f64>::zeros(n, n);
        for j in 0..s {
            let k = i * s + j;
            if k > degree {
                break;
            }
            q.zip_apply(&powers[j], |a, b| *a += coeff[k] * b);
        }
        q
    };
    let r = degree / s;
    let mut acc = block(r);
    let mut tmp = DMatrix::<f64>::zeros(n, n);
    for i in (0..r).rev() {
        tmp.gemm(1.0, &acc, &powers[s], 0.0);
        std::mem::swap(&mut acc, &mut tmp);
        acc += block(i);
    }
    acc
}

/// `exp(G d)` for a generator `G` with nonnegative off-diagonal entries and zero column sums.
pub fn expm_generator(generator: &DMatrix<f64>, duration: f64) -> Result<DMatrix<f64>> {
    let n = generator.nrows();
    if generator.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: generator.ncols(),
        });
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::Domain(format!(
            "duration must be finite and nonnegative, got {duration}"
        )));
    }
    let lambda = (0..n).map(|i| -generator[(i, i)]).fold(0.0, f64::max);
    if lambda == 0.0 || duration == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let total = lambda * duration;
    let squarings = if total > 1.0 {
        total.log2().ceil() as u32
    } else {
        0
    };
    let tau = duration / 2f64.powi(squarings as i32);
    let theta = lambda * tau;
    let mut b = generator * tau;
    for i in 0..n {
        b[(i, i)] += theta;
        if b[(i, i)] < 0.0 {
            b[(i, i)] = 0.0;
        }
    }
    let mut p = taylor_polynomial(&b, taylor_degree(theta));
    p *= (-theta).exp();
    let mut tmp = DMatrix::<f64>::zeros(n, n);
    for _ in 0..squarings {
        tmp.gemm(1.0, &p, &p, 0.0);
        std::mem::swap(&mut p, &mut tmp);
    }
    Ok(p)
}

/// Transfer map of one pulse: in-basis block and the per-column probability of leaking.
#[derive(Debug, Clone)]
pub struct Propagator {
    transfer: DMatrix<f64>,
    leak: DVector<f64>,
    duration: f64,
}

impl Propagator {
    pub fn new(rates: &RateMatrix, duration: f64) -> Result<Self> {
        let n = rates.states();
        let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(rates.generator());
        for m in 0..n {
            aug[(n, m)] = rates.leak(m);
        }
        let full = expm_generator(&aug, duration)?;
        Ok(Propagator {
            transfer: full.view((0, 0), (n, n)).into_owned(),
            leak: DVector::from_iterator(n, full.view((n, 0), (1, n)).iter().copied()),
            duration,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn transfer(&self) -> &DMatrix<f64> {
        &self.transfer
    }

    pub fn apply(&self, dist: &Distribution) -> Result<Distribution> {
        let n = self.transfer.nrows();
        if dist.probs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: dist.probs.len(),
            });
        }
        let p = DVector::from_column_slice(&dist.probs);
        let next = &self.transfer * &p;
        let leaked = self.leak.dot(&p);
        Ok(Distribution::from_parts(
            dist.basis,
            next.as_slice().to_vec(),
            dist.leak + leaked,
        ))
    }
}

/// `exp(G d) p`, with the flux out of the basis added to the leak.
pub fn propagate_pulse(
    dist: &Distribution,
    rates: &RateMatrix,
    duration: f64,
) -> Result<Distribution> {
    if rates.basis() != dist.basis() {
        return Err(Error::DimensionMismatch {
            expected: rates.states(),
            found: dist.probs().len(),
        });
    }
    Propagator::new(rates, duration)?.apply(dist)
}

/// Options for [`run_protocol`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Levels whose occupation is recorded; empty means the ground level.
    pub targets: Vec<Level>,
    /// Stop once the primary occupation changes by less than this over a whole cycle.
    pub early_stop: Option<f64>,
    /// Override for the protocol's cycle count.
    pub cycles: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            targets: Vec::new(),
            early_stop: Some(1e-6),
            cycles: None,
        }
    }
}

impl RunOptions {
    pub(crate) fn resolved_targets(&self, dims: Dims) -> Vec<Level> {
        if self.targets.is_empty() {
            vec![match dims {
                Dims::One => Level::One(0),
                Dims::Two => Level::Two(0, 0),
            }]
        } else {
            self.targets.clone()
        }
    }
}

/// One recorded point. `cycle` and `pulse` are 1-based; the initial sample is `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub cycle: usize,
    pub pulse: usize,
    pub time: f64,
    pub snapshot: Snapshot,
}

/// Observables at every pulse boundary, plus the final distribution.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub targets: Vec<Level>,
    pub samples: Vec<Sample>,
    pub final_distribution: Distribution,
}

pub(crate) const TIMESERIES_HEADER: &str =
    "cycle,pulse,t_tau0,p_target,mean_nx,mean_ny,mean_n,leak";

impl TimeSeries {
    pub fn last(&self) -> &Sample {
        self.samples
            .last()
            .expect("a time series always holds the initial sample")
    }

    /// Samples taken at the end of each cycle, starting with the initial one.
    pub fn cycle_ends(&self) -> Vec<&Sample> {
        let per_cycle = self.samples.iter().map(|s| s.pulse).max().unwrap_or(0);
        self.samples
            .iter()
            .filter(|s| s.pulse == 0 || s.pulse == per_cycle)
            .collect()
    }

    /// First cycle whose end reaches `threshold` in the primary target.
    pub fn first_cycle_reaching(&self, threshold: f64) -> Option<usize> {
        self.cycle_ends()
            .into_iter()
            .find(|s| s.snapshot.p_target() > threshold)
            .map(|s| s.cycle)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TIMESERIES_HEADER}")?;
        for s in &self.samples {
            let o = &s.snapshot;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.cycle,
                s.pulse,
                format_float(s.time),
                format_float(o.p_target()),
                format_float(o.mean_nx),
                format_float(o.mean_ny),
                format_float(o.mean_n),
                format_float(o.leak)
            )?;
        }
        Ok(())
    }
}

fn bits(x: f64) -> u64 {
    x.to_bits()
}

/// Runs the protocol deterministically, building each distinct rate matrix and propagator once.
pub fn run_protocol(
    init: &Distribution,
    protocol: &Protocol,
    trap: &TrapConfig,
    mode: RateMode,
    options: &RunOptions,
) -> Result<TimeSeries> {
    if trap.basis() != init.basis() {
        return Err(Error::DimensionMismatch {
            expected: trap.basis().len(),
            found: init.probs().len(),
        });
    }
    let targets = options.resolved_targets(trap.dims);
    let cycles = options.cycles.unwrap_or(protocol.cycles);
    let mut rate_cache: HashMap<(u64, u64, u64), RateMatrix> = HashMap::new();
    let mut props: Vec<Propagator> = Vec::with_capacity(protocol.pulses.len());
    let mut prop_index: HashMap<(u64, u64, u64, u64), usize> = HashMap::new();
    let mut schedule = Vec::with_capacity(protocol.pulses.len());
    for pulse in &protocol.pulses {
        let a = pulse.amplitude_ratio;
        let key = (bits(pulse.s), bits(a.re), bits(a.im));
        let pkey = (key.0, key.1, key.2, bits(pulse.duration));
        if let Some(&i) = prop_index.get(&pkey) {
            schedule.push(i);
            continue;
        }
        if !rate_cache.contains_key(&key) {
            let clock = std::time::Instant::now();
            rate_cache.insert(key, rate_matrix(trap, pulse, mode)?);
            log::info!(
                "rates for s = {}, A = {} built in {:.2?}",
                pulse.s,
                a,
                clock.elapsed()
            );
        }
        let clock = std::time::Instant::now();
        props.push(Propagator::new(&rate_cache[&key], pulse.duration)?);
        log::info!("propagator for duration {} built in {:.2?}", pulse.duration, clock.elapsed());
        prop_index.insert(pkey, props.len() - 1);
        schedule.push(props.len() - 1);
    }
    drop(rate_cache);

    let mut dist = init.clone();
    let mut time = 0.0;
    let mut samples = vec![Sample {
        cycle: 0,
        pulse: 0,
        time,
        snapshot: observables(&dist, &targets)?,
    }];
    if schedule.is_empty() {
        return Ok(TimeSeries {
            targets,
            samples,
            final_distribution: dist,
        });
    }
    let mut previous = samples[0].snapshot.p_target();
    for cycle in 1..=cycles {
        for (k, &pi) in schedule.iter().enumerate() {
            dist = props[pi].apply(&dist)?;
            time += protocol.pulses[k].duration;
            samples.push(Sample {
                cycle,
                pulse: k + 1,
                time,
                snapshot: observables(&dist, &targets)?,
            });
        }
        let current = samples.last().map_or(previous, |s| s.snapshot.p_target());
        if let Some(tol) = options.early_stop {
            if (current - previous).abs() < tol {
                log::info!("converged after {cycle} cycles");
                break;
            }
        }
        previous = current;
    }
    Ok(TimeSeries {
        targets,
        samples,
        final_distribution: dist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levels::Basis;

    fn ladder(n_max: usize) -> RateMatrix {
        let basis = Basis::new(Dims::One, n_max);
        let n = basis.len();
        let mut r = DMatrix::zeros(n, n);
        for m in 1..n {
            r[(m - 1, m)] = 1.0;
        }
        RateMatrix::from_rates(basis, &r).unwrap()
    }

    #[test]
    fn zero_generator_is_identity() {
        let basis = Basis::new(Dims::One, 3);
        let rm = RateMatrix::from_rates(basis, &DMatrix::zeros(4, 4)).unwrap();
        let d = Distribution::new(basis, vec![0.1, 0.2, 0.3, 0.4], 0.0).unwrap();
        assert_eq!(propagate_pulse(&d, &rm, 5.0).unwrap(), d);
    }

    #[test]
    fn two_level_decay() {
        let basis = Basis::new(Dims::One, 1);
        let mut r = DMatrix::zeros(2, 2);
        r[(0, 1)] = 1.0;
        let rm = RateMatrix::from_rates(basis, &r).unwrap();
        let d = Distribution::new(basis, vec![0.0, 1.0], 0.0).unwrap();
        let out = propagate_pulse(&d, &rm, 1.0).unwrap();
        assert!((out.probs()[1] - (-1f64).exp()).abs() < 1e-15);
        assert!((out.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ladder_drains_to_ground() {
        let rm = ladder(6);
        let d = Distribution::point(rm.basis(), Level::One(6)).unwrap();
        let out = propagate_pulse(&d, &rm, 200.0).unwrap();
        assert!((out.probs()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn semigroup() {
        let rm = ladder(10);
        let d = Distribution::point(rm.basis(), Level::One(10)).unwrap();
        let whole = propagate_pulse(&d, &rm, 3.7).unwrap();
        let half = propagate_pulse(&d, &rm, 1.85).unwrap();
        let twice = propagate_pulse(&half, &rm, 1.85).unwrap();
        for (a, b) in whole.probs().iter().zip(twice.probs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn taylor_degree_is_adaptive() {
        assert_eq!(taylor_degree(0.0), 0);
        assert!(taylor_degree(1.0) <= 20);
        assert!(taylor_degree(1e-3) < 6);
    }
}
