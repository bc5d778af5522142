//! Subcommand implementations and the mapping from library errors to exit codes.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use dyncool::dynamics::RunOptions;
use dyncool::format::format_float;
use dyncool::pulses::{preset_list, RunMode};
use dyncool::rates::write_empty_rates_csv;
use dyncool::{
    dark_eta_for_level, dark_ratio_a, empty_rates_1d, empty_rates_2d, export_config, mc_ensemble,
    parse_config, preset, rate_matrix, run_protocol, thermal_distribution, validate_protocol,
    Dims, Error, Experiment, JumpProtocol, Level, RateMode,
};
use serde::Serialize;

use crate::plot::{line_plot, Series};
use crate::{DarkCommand, PresetsCommand, RatesArgs, RunArgs, Source};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DOMAIN: u8 = 3;
pub const EXIT_RESOURCE: u8 = 4;

/// A failed command: message for stderr and the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn domain(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_DOMAIN,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure {
            code: EXIT_RESOURCE,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::UnknownPreset(_) | Error::UnknownPattern(_) => EXIT_USAGE,
            Error::Resource { .. } | Error::Io(_) => EXIT_RESOURCE,
            _ => EXIT_DOMAIN,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load(source: &Source) -> Result<Experiment, Failure> {
    match (&source.preset, &source.config) {
        (Some(name), _) => Ok(Experiment::from_preset(&preset(name)?)),
        (None, Some(path)) => {
            let text = if path.as_os_str() == "-" {
                let mut s = String::new();
                io::stdin()
                    .read_to_string(&mut s)
                    .map_err(|e| Failure::usage(format!("reading standard input: {e}")))?;
                s
            } else {
                fs::read_to_string(path)
                    .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
            };
            parse_config(&text).map_err(|e| {
                let mut f = Failure::from(e);
                f.message = format!("{}: {}", path.display(), f.message);
                f
            })
        }
        (None, None) => Err(Failure::usage("either --preset or --config is required")),
    }
}

fn parse_rate_mode(text: &Option<String>, default: RateMode) -> Result<RateMode, Failure> {
    match text {
        Some(t) => t
            .parse()
            .map_err(|e: Error| Failure::usage(format!("--rate-mode: {e}"))),
        None => Ok(default),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> CmdResult {
    w.flush().map_err(|e| Failure::io(path, e))
}

/// Sink that is either a file or standard output.
fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Serialize)]
struct Artifact {
    kind: &'static str,
    path: String,
}

#[derive(Serialize)]
struct Summary {
    samples: usize,
    final_time_tau0: f64,
    final_p_target: Vec<f64>,
    final_mean_n: f64,
    final_leak: f64,
}

#[derive(Serialize)]
struct RunManifest {
    library_version: &'static str,
    source: String,
    mode: String,
    rate_mode: String,
    seed: u64,
    trajectories: Option<usize>,
    cycles: usize,
    targets: Vec<String>,
    threads: Option<usize>,
    started_unix_seconds: u64,
    wall_clock_seconds: f64,
    resolved_config_path: String,
    resolved_config: String,
    artifacts: Vec<Artifact>,
    summary: Summary,
}

/// Per-target occupation against time in units of cycles, for plotting.
struct Curves {
    x: Vec<f64>,
    y: Vec<Vec<f64>>,
}

pub fn run(args: &RunArgs, threads: Option<usize>) -> CmdResult {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let mut exp = load(&args.source)?;

    if let Some(m) = &args.mode {
        exp.run.mode = m
            .parse()
            .map_err(|e: Error| Failure::usage(format!("--mode: {e}")))?;
    }
    if let Some(n) = args.trajectories {
        if n == 0 {
            return Err(Failure::usage("--trajectories must be positive"));
        }
        exp.run.trajectories = n;
    }
    if let Some(s) = args.seed {
        exp.run.seed = s;
    }
    if let Some(c) = args.cycles {
        if c == 0 {
            return Err(Failure::usage("--cycles must be positive"));
        }
        exp.run.cycles = c;
        exp.protocol.cycles = c;
    }
    exp.run.rate_mode = parse_rate_mode(&args.rate_mode, exp.run.rate_mode)?;
    if !args.targets.is_empty() {
        exp.run.targets = args
            .targets
            .iter()
            .map(|t| {
                t.parse::<Level>()
                    .map_err(|e| Failure::usage(format!("--target {t}: {e}")))
            })
            .collect::<Result<_, _>>()?;
    }
    if exp.run.targets.is_empty() {
        exp.run.targets = vec![match exp.trap.dims {
            Dims::One => Level::One(0),
            Dims::Two => Level::Two(0, 0),
        }];
    }
    let basis = exp.trap.basis();
    for &t in &exp.run.targets {
        if t.dims() != exp.trap.dims {
            return Err(Failure::usage(format!(
                "target {t} does not match a {}D trap",
                exp.trap.dims.count()
            )));
        }
        basis.index(t)?;
    }

    let report = validate_protocol(&exp.protocol, &exp.trap, exp.run.rate_mode, &exp.run.targets);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for n in &report.notes {
        eprintln!("note: {n}");
    }
    if !report.is_runnable() {
        let msgs: Vec<String> = report.errors.iter().map(|e| e.to_string()).collect();
        return Err(Failure::domain(format!(
            "protocol validation failed:\n  {}",
            msgs.join("\n  ")
        )));
    }
    let recommended = exp.trap.recommended_n_max(exp.thermal_mean);
    if recommended > exp.trap.n_max {
        eprintln!(
            "warning: n_max = {} is below the recommended {recommended} for thermal mean {}",
            exp.trap.n_max, exp.thermal_mean
        );
    }

    let out_dir = &args.out_dir;
    fs::create_dir_all(out_dir).map_err(|e| Failure::io(out_dir, e))?;
    let mut artifacts = Vec::new();
    let init = thermal_distribution(exp.thermal_mean, &exp.trap)?;
    let cycle_duration = exp.protocol.cycle_duration();
    let series_path = out_dir.join("timeseries.csv");

    let (summary, curves) = match exp.run.mode {
        RunMode::Master => {
            let options = RunOptions {
                targets: exp.run.targets.clone(),
                early_stop: None,
                cycles: Some(exp.run.cycles),
            };
            let ts = run_protocol(&init, &exp.protocol, &exp.trap, exp.run.rate_mode, &options)?;
            let mut w = create(&series_path)?;
            ts.write_csv(&mut w)?;
            finish(&series_path, w)?;
            artifacts.push(Artifact {
                kind: "timeseries",
                path: series_path.display().to_string(),
            });
            if args.distribution {
                let path = out_dir.join("distribution_final.csv");
                let mut w = create(&path)?;
                ts.final_distribution.write_csv(&mut w)?;
                finish(&path, w)?;
                artifacts.push(Artifact {
                    kind: "distribution_final",
                    path: path.display().to_string(),
                });
            }
            let last = ts.last();
            let summary = Summary {
                samples: ts.samples.len(),
                final_time_tau0: last.time,
                final_p_target: last.snapshot.p_targets.clone(),
                final_mean_n: last.snapshot.mean_n,
                final_leak: last.snapshot.leak,
            };
            let curves = Curves {
                x: ts.samples.iter().map(|s| s.time / cycle_duration).collect(),
                y: (0..exp.run.targets.len())
                    .map(|j| ts.samples.iter().map(|s| s.snapshot.p_targets[j]).collect())
                    .collect(),
            };
            (summary, curves)
        }
        RunMode::Mc => {
            if args.distribution {
                eprintln!("warning: --distribution applies to master mode only; ignored");
            }
            let jp = JumpProtocol::new(&exp.protocol, &exp.trap, exp.run.rate_mode)?;
            let res = mc_ensemble(
                &jp,
                &init,
                exp.run.trajectories,
                exp.run.cycles,
                exp.run.seed,
                &exp.run.targets,
            )?;
            let mut w = create(&series_path)?;
            res.write_csv(&mut w)?;
            finish(&series_path, w)?;
            artifacts.push(Artifact {
                kind: "timeseries",
                path: series_path.display().to_string(),
            });
            let path = out_dir.join("mc_stderr.csv");
            let mut w = create(&path)?;
            res.write_stderr_csv(&mut w)?;
            finish(&path, w)?;
            artifacts.push(Artifact {
                kind: "mc_stderr",
                path: path.display().to_string(),
            });
            let last = res.samples.last().expect("ensembles hold the initial sample");
            let summary = Summary {
                samples: res.samples.len(),
                final_time_tau0: last.time,
                final_p_target: last.p_targets.clone(),
                final_mean_n: last.mean_n,
                final_leak: last.leak,
            };
            let curves = Curves {
                x: res.samples.iter().map(|s| s.time / cycle_duration).collect(),
                y: (0..exp.run.targets.len())
                    .map(|j| res.samples.iter().map(|s| s.p_targets[j]).collect())
                    .collect(),
            };
            (summary, curves)
        }
    };

    if args.plot {
        let series: Vec<Series> = exp
            .run
            .targets
            .iter()
            .zip(&curves.y)
            .map(|(t, ys)| Series {
                label: format!("P({t})"),
                points: curves.x.iter().copied().zip(ys.iter().copied()).collect(),
            })
            .collect();
        let title = format!(
            "{} ({} mode)",
            exp.name.as_deref().unwrap_or("protocol"),
            exp.run.mode
        );
        let svg = line_plot(&title, "cycles", "occupation", &series);
        let path = out_dir.join("plot.svg");
        fs::write(&path, svg).map_err(|e| Failure::io(&path, e))?;
        artifacts.push(Artifact {
            kind: "plot",
            path: path.display().to_string(),
        });
    }

    let resolved = export_config(&exp);
    let cfg_path = out_dir.join("resolved.cfg");
    fs::write(&cfg_path, &resolved).map_err(|e| Failure::io(&cfg_path, e))?;
    artifacts.push(Artifact {
        kind: "resolved_config",
        path: cfg_path.display().to_string(),
    });

    let source = match (&args.source.preset, &args.source.config) {
        (Some(p), _) => format!("preset:{p}"),
        (None, Some(c)) => format!("config:{}", c.display()),
        (None, None) => unreachable!("load rejects a missing source"),
    };
    let manifest = RunManifest {
        library_version: env!("CARGO_PKG_VERSION"),
        source,
        mode: exp.run.mode.to_string(),
        rate_mode: exp.run.rate_mode.to_string(),
        seed: exp.run.seed,
        trajectories: (exp.run.mode == RunMode::Mc).then_some(exp.run.trajectories),
        cycles: exp.run.cycles,
        targets: exp.run.targets.iter().map(|t| t.to_string()).collect(),
        threads,
        started_unix_seconds: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        resolved_config_path: cfg_path.display().to_string(),
        resolved_config: resolved,
        artifacts,
        summary,
    };
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Failure::domain(format!("manifest: {e}")))?;
    fs::write(&path, json + "\n").map_err(|e| Failure::io(&path, e))?;

    let primary = manifest.summary.final_p_target.first().copied().unwrap_or(0.0);
    println!(
        "{}: P({}) = {} after {} cycles; outputs in {}",
        manifest.source,
        exp.run.targets[0],
        format_float(primary),
        exp.run.cycles,
        out_dir.display()
    );
    Ok(())
}

pub fn rates(args: &RatesArgs) -> CmdResult {
    let exp = load(&args.source)?;
    let mode = parse_rate_mode(&args.rate_mode, exp.run.rate_mode)?;
    let n_pulses = exp.protocol.pulses.len();
    let pulse = exp.protocol.pulses.get(args.pulse).ok_or_else(|| {
        Failure::usage(format!(
            "pulse index {} is out of range (the protocol has {n_pulses} pulses, indexed from 0)",
            args.pulse
        ))
    })?;
    let basis = exp.trap.basis();
    let mut w = open_output(&args.out)?;
    if args.matrix {
        rate_matrix(&exp.trap, pulse, mode)?.write_csv(&mut w)?;
    } else {
        let empty = match (mode, exp.trap.dims) {
            (RateMode::Resonant, Dims::One) => {
                let s = pulse
                    .detuning_index()
                    .ok_or(Error::NonIntegerDetuning(pulse.s))?;
                empty_rates_1d(&exp.trap, s)?
            }
            (RateMode::Resonant, Dims::Two) => {
                empty_rates_2d(&exp.trap, pulse)?.into_iter().flatten().collect()
            }
            (RateMode::Full, _) => {
                let rm = rate_matrix(&exp.trap, pulse, mode)?;
                (0..rm.states()).map(|m| rm.total_outflow(m)).collect()
            }
        };
        write_empty_rates_csv(&mut w, basis, &empty)?;
    }
    w.flush()
        .map_err(|e| Failure::usage(format!("writing rates: {e}")))?;
    Ok(())
}

fn format_complex(re: f64, im: f64) -> String {
    let sign = if im.is_sign_negative() && im != 0.0 {
        "-"
    } else {
        "+"
    };
    format!("{}{sign}{}i", format_float(re), format_float(im.abs()))
}

pub fn dark(cmd: &DarkCommand) -> CmdResult {
    match cmd {
        DarkCommand::Level { m, s } => {
            let roots = dark_eta_for_level(*m, *s)?;
            let text: Vec<String> = roots.iter().map(|r| format!("{r:.12}")).collect();
            println!("{}", text.join(", "));
        }
        DarkCommand::Ratio { eta, target } => {
            let level: Level = target
                .parse()
                .map_err(|e| Failure::usage(format!("--target {target}: {e}")))?;
            let Level::Two(mx, my) = level else {
                return Err(Failure::usage(format!(
                    "--target {target}: the amplitude ratio needs a 2D level `mx,my`"
                )));
            };
            let a = dark_ratio_a(*eta, (mx, my))?;
            println!("{}", format_complex(a.re, a.im));
        }
    }
    Ok(())
}

pub fn presets(cmd: &PresetsCommand) -> CmdResult {
    match cmd {
        PresetsCommand::List => {
            for (name, description) in preset_list() {
                println!("{name:<22}{description}");
            }
        }
        PresetsCommand::Export { name, out } => {
            let text = export_config(&Experiment::from_preset(&preset(name)?));
            let mut w = open_output(out)?;
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| Failure::usage(format!("writing preset: {e}")))?;
        }
    }
    Ok(())
}
