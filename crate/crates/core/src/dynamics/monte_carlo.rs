//! Quantum-jump Monte Carlo: the rate equation unravelled as a continuous-time jump process.

use std::collections::HashMap;
use std::io::Write;
use std::sync::OnceLock;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use super::Distribution;
use crate::error::{Error, Result};
use crate::format::format_float;
use crate::levels::{Basis, Level};
use crate::pulses::Protocol;
use crate::rates::{RateBuilder, RateColumn, RateMatrix, RateMode, TrapConfig};

/// RNG stream of trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Exit rate and destination sampler of one level under one pulse.
#[derive(Debug, Clone)]
struct JumpColumn {
    exit: f64,
    targets: Vec<usize>,
    cumulative: Vec<f64>,
}

impl JumpColumn {
    fn from_column(m: usize, col: &RateColumn) -> Self {
        let mut targets = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (n, &r) in col.rates.iter().enumerate() {
            if n != m && r > 0.0 {
                acc += r;
                targets.push(n);
                cumulative.push(acc);
            }
        }
        JumpColumn {
            exit: acc + col.leak,
            targets,
            cumulative,
        }
    }

    /// Destination for a uniform draw in `[0, exit)`; `None` is the leak.
    fn destination(&self, x: f64) -> Option<usize> {
        let i = self.cumulative.partition_point(|&c| c <= x);
        self.targets.get(i).copied()
    }
}

enum ColumnSource {
    Builder(Box<RateBuilder>),
    Matrix(RateMatrix),
}

impl ColumnSource {
    fn column(&self, m: usize) -> Result<RateColumn> {
        match self {
            ColumnSource::Builder(b) => b.column(m),
            ColumnSource::Matrix(rm) => Ok(RateColumn {
                rates: (0..rm.states()).map(|n| rm.rate(n, m)).collect(),
                leak: rm.leak(m),
            }),
        }
    }
}

/// A protocol compiled for jump sampling: rate columns are computed on first visit and cached.
pub struct JumpProtocol {
    basis: Basis,
    schedule: Vec<(usize, f64)>,
    sources: Vec<ColumnSource>,
    columns: Vec<Vec<OnceLock<JumpColumn>>>,
}

impl std::fmt::Debug for JumpProtocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JumpProtocol")
            .field("basis", &self.basis)
            .field("schedule", &self.schedule)
            .finish()
    }
}

impl JumpProtocol {
    pub fn new(protocol: &Protocol, trap: &TrapConfig, mode: RateMode) -> Result<Self> {
        let mut index: HashMap<(u64, u64, u64), usize> = HashMap::new();
        let mut sources = Vec::new();
        let mut schedule = Vec::new();
        for p in &protocol.pulses {
            let key = (
                p.s.to_bits(),
                p.amplitude_ratio.re.to_bits(),
                p.amplitude_ratio.im.to_bits(),
            );
            let i = match index.get(&key) {
                Some(&i) => i,
                None => {
                    sources.push(ColumnSource::Builder(Box::new(RateBuilder::new(
                        trap, p, mode,
                    )?)));
                    index.insert(key, sources.len() - 1);
                    sources.len() - 1
                }
            };
            schedule.push((i, p.duration));
        }
        Ok(Self::assemble(trap.basis(), schedule, sources))
    }

    /// One cycle made of explicit rate matrices and durations.
    pub fn from_rate_matrices(pulses: Vec<(RateMatrix, f64)>) -> Result<Self> {
        let basis = pulses
            .first()
            .map(|(rm, _)| rm.basis())
            .ok_or_else(|| Error::Domain("a jump protocol needs at least one pulse".into()))?;
        let mut schedule = Vec::new();
        let mut sources = Vec::new();
        for (i, (rm, d)) in pulses.into_iter().enumerate() {
            if rm.basis() != basis {
                return Err(Error::DimensionMismatch {
                    expected: basis.len(),
                    found: rm.states(),
                });
            }
            schedule.push((i, d));
            sources.push(ColumnSource::Matrix(rm));
        }
        Ok(Self::assemble(basis, schedule, sources))
    }

    fn assemble(basis: Basis, schedule: Vec<(usize, f64)>, sources: Vec<ColumnSource>) -> Self {
        let columns = sources
            .iter()
            .map(|_| (0..basis.len()).map(|_| OnceLock::new()).collect())
            .collect();
        JumpProtocol {
            basis,
            schedule,
            sources,
            columns,
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn pulses_per_cycle(&self) -> usize {
        self.schedule.len()
    }

    fn column(&self, source: usize, m: usize) -> Result<&JumpColumn> {
        if let Some(c) = self.columns[source][m].get() {
            return Ok(c);
        }
        let col = self.sources[source].column(m)?;
        Ok(self.columns[source][m].get_or_init(|| JumpColumn::from_column(m, &col)))
    }
}

/// A single jump; `to == None` is a jump out of the truncated basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub from: usize,
    pub to: Option<usize>,
}

/// One sampled history.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: usize,
    pub jumps: Vec<Jump>,
    /// Level at every pulse boundary, starting with the initial one; `None` once leaked.
    pub boundary_levels: Vec<Option<usize>>,
    pub leaked: bool,
}

impl Trajectory {
    pub fn final_level(&self) -> Option<usize> {
        self.boundary_levels.last().copied().flatten()
    }
}

fn simulate<R: Rng>(
    jp: &JumpProtocol,
    initial: usize,
    cycles: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut level = initial;
    let mut time = 0.0;
    let mut jumps = Vec::new();
    let mut boundary_levels = Vec::with_capacity(1 + cycles * jp.schedule.len());
    boundary_levels.push(Some(level));
    for _ in 0..cycles {
        for &(source, duration) in &jp.schedule {
            let mut elapsed = 0.0;
            loop {
                let col = jp.column(source, level)?;
                if col.exit <= 0.0 {
                    break;
                }
                let wait: f64 = rng.sample::<f64, _>(Exp1) / col.exit;
                if elapsed + wait >= duration {
                    break;
                }
                elapsed += wait;
                let x = rng.random::<f64>() * col.exit;
                let to = col.destination(x);
                jumps.push(Jump {
                    time: time + elapsed,
                    from: level,
                    to,
                });
                match to {
                    Some(n) => level = n,
                    None => {
                        let total = 1 + cycles * jp.schedule.len();
                        boundary_levels.resize(total, None);
                        return Ok(Trajectory {
                            initial,
                            jumps,
                            boundary_levels,
                            leaked: true,
                        });
                    }
                }
            }
            time += duration;
            boundary_levels.push(Some(level));
        }
    }
    Ok(Trajectory {
        initial,
        jumps,
        boundary_levels,
        leaked: false,
    })
}

/// Samples one trajectory from `initial` over `cycles` cycles.
pub fn mc_trajectory<R: Rng>(
    jp: &JumpProtocol,
    initial: Level,
    cycles: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let idx = jp.basis.index(initial)?;
    simulate(jp, idx, cycles, rng)
}

/// Ensemble estimate at one pulse boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct McSample {
    pub cycle: usize,
    pub pulse: usize,
    pub time: f64,
    pub p_targets: Vec<f64>,
    /// Binomial standard error `√(p(1−p)/n)` of each target occupation.
    pub p_stderr: Vec<f64>,
    pub mean_nx: f64,
    pub mean_ny: f64,
    pub mean_n: f64,
    /// Sample standard error of the total quantum number.
    pub mean_n_stderr: f64,
    pub leak: f64,
}

/// Aggregated Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct McEnsembleResult {
    pub n_traj: usize,
    pub seed: u64,
    pub targets: Vec<Level>,
    pub samples: Vec<McSample>,
    pub total_jumps: u64,
    pub min_jumps: u64,
    pub max_jumps: u64,
    pub leaked_trajectories: u64,
}

#[derive(Clone)]
struct Accumulator {
    width: usize,
    counts: Vec<u64>,
    total_jumps: u64,
    min_jumps: u64,
    max_jumps: u64,
    leaked: u64,
}

impl Accumulator {
    fn new(samples: usize, targets: usize) -> Self {
        let width = targets + 4;
        Accumulator {
            width,
            counts: vec![0; samples * width],
            total_jumps: 0,
            min_jumps: u64::MAX,
            max_jumps: 0,
            leaked: 0,
        }
    }

    fn add(&mut self, basis: Basis, targets: &[usize], t: &Trajectory) {
        let k = targets.len();
        for (i, lvl) in t.boundary_levels.iter().enumerate() {
            let row = &mut self.counts[i * self.width..(i + 1) * self.width];
            match *lvl {
                Some(m) => {
                    for (j, &tg) in targets.iter().enumerate() {
                        row[j] += u64::from(m == tg);
                    }
                    let (x, y) = basis.level(m).axes();
                    let n = (x + y) as u64;
                    row[k] += x as u64;
                    row[k + 1] += y as u64;
                    row[k + 2] += n * n;
                }
                None => row[k + 3] += 1,
            }
        }
        let j = t.jumps.len() as u64;
        self.total_jumps += j;
        self.min_jumps = self.min_jumps.min(j);
        self.max_jumps = self.max_jumps.max(j);
        self.leaked += u64::from(t.leaked);
    }

    fn merge(mut self, other: Accumulator) -> Accumulator {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.total_jumps += other.total_jumps;
        self.min_jumps = self.min_jumps.min(other.min_jumps);
        self.max_jumps = self.max_jumps.max(other.max_jumps);
        self.leaked += other.leaked;
        self
    }
}

/// Runs `n_traj` trajectories from initial levels drawn from `init`.
///
/// Trajectory `i` uses [`trajectory_rng`]`(seed, i)` both for its initial level and its jumps, and
/// all sums are integer, so the result does not depend on the worker count.
pub fn mc_ensemble(
    jp: &JumpProtocol,
    init: &Distribution,
    n_traj: usize,
    cycles: usize,
    seed: u64,
    targets: &[Level],
) -> Result<McEnsembleResult> {
    if n_traj == 0 {
        return Err(Error::Domain("at least one trajectory is required".into()));
    }
    if init.basis() != jp.basis {
        return Err(Error::DimensionMismatch {
            expected: jp.basis.len(),
            found: init.probs().len(),
        });
    }
    let target_idx: Vec<usize> = targets
        .iter()
        .map(|&t| jp.basis.index(t))
        .collect::<Result<_>>()?;
    let initial = WeightedIndex::new(init.probs())
        .map_err(|e| Error::Domain(format!("initial distribution cannot be sampled: {e}")))?;
    let per_cycle = jp.schedule.len();
    let n_samples = 1 + cycles * per_cycle;
    let basis = jp.basis;
    let acc = (0..n_traj as u64)
        .into_par_iter()
        .try_fold(
            || Accumulator::new(n_samples, target_idx.len()),
            |mut acc, i| -> Result<Accumulator> {
                let mut rng = trajectory_rng(seed, i);
                let start = initial.sample(&mut rng);
                let t = simulate(jp, start, cycles, &mut rng)?;
                acc.add(basis, &target_idx, &t);
                Ok(acc)
            },
        )
        .try_reduce(
            || Accumulator::new(n_samples, target_idx.len()),
            |a, b| Ok(a.merge(b)),
        )?;

    let n = n_traj as f64;
    let k = target_idx.len();
    let mut time = 0.0;
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let (cycle, pulse) = if i == 0 {
            (0, 0)
        } else {
            ((i - 1) / per_cycle + 1, (i - 1) % per_cycle + 1)
        };
        if i > 0 {
            time += jp.schedule[pulse - 1].1;
        }
        let row = &acc.counts[i * acc.width..(i + 1) * acc.width];
        let p_targets: Vec<f64> = row[..k].iter().map(|&c| c as f64 / n).collect();
        let p_stderr = p_targets
            .iter()
            .map(|p| (p * (1.0 - p) / n).sqrt())
            .collect();
        let mean_nx = row[k] as f64 / n;
        let mean_ny = row[k + 1] as f64 / n;
        let mean_n = mean_nx + mean_ny;
        let var = if n_traj > 1 {
            ((row[k + 2] as f64 - n * mean_n * mean_n) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        samples.push(McSample {
            cycle,
            pulse,
            time,
            p_targets,
            p_stderr,
            mean_nx,
            mean_ny,
            mean_n,
            mean_n_stderr: (var / n).sqrt(),
            leak: row[k + 3] as f64 / n,
        });
    }
    Ok(McEnsembleResult {
        n_traj,
        seed,
        targets: targets.to_vec(),
        samples,
        total_jumps: acc.total_jumps,
        min_jumps: acc.min_jumps,
        max_jumps: acc.max_jumps,
        leaked_trajectories: acc.leaked,
    })
}

impl McEnsembleResult {
    /// Same columns as the deterministic time series.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", super::propagate::TIMESERIES_HEADER)?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.cycle,
                s.pulse,
                format_float(s.time),
                format_float(s.p_targets.first().copied().unwrap_or(f64::NAN)),
                format_float(s.mean_nx),
                format_float(s.mean_ny),
                format_float(s.mean_n),
                format_float(s.leak)
            )?;
        }
        Ok(())
    }

    /// Standard errors of the primary occupation and of the mean quantum number.
    pub fn write_stderr_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cycle,pulse,t_tau0,p_target_stderr,mean_n_stderr")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{}",
                s.cycle,
                s.pulse,
                format_float(s.time),
                format_float(s.p_stderr.first().copied().unwrap_or(f64::NAN)),
                format_float(s.mean_n_stderr)
            )?;
        }
        Ok(())
    }
}
