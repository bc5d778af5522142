mod common;

use dyncool::dynamics::{expm_generator, trajectory_rng, Propagator};
use dyncool::{
    mc_ensemble, mc_trajectory, observables, preset, propagate_pulse, rate_matrix, run_protocol,
    thermal_distribution, Basis, Dims, Distribution, JumpProtocol, Level, Pulse, RateMatrix,
    RateMode, RunOptions, TrapConfig,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn random_rates(n: usize, seed: u64, scale: f64) -> DMatrix<f64> {
    use rand::Rng;
    let mut rng = trajectory_rng(seed, 0);
    DMatrix::from_fn(n, n, |i, j| {
        if i == j || rng.random::<f64>() < 0.6 {
            0.0
        } else {
            scale * rng.random::<f64>()
        }
    })
}

fn generator_of(rates: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = rates.clone();
    for j in 0..g.ncols() {
        let out: f64 = rates.column(j).sum();
        g[(j, j)] -= out;
    }
    g
}

#[test]
fn propagator_matches_pade_oracle_on_physical_rates() {
    let trap = TrapConfig::new(3.0, Dims::One).unwrap().with_n_max(59);
    for (s, d) in [(-9, 1.0), (-9, 10.0), (8, 3.0), (0, 25.0)] {
        let rm = rate_matrix(&trap, &Pulse::new(s, d), RateMode::Resonant).unwrap();
        let n = rm.states();
        let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(rm.generator());
        for m in 0..n {
            aug[(n, m)] = rm.leak(m);
        }
        let oracle = common::expm_pade13(&(&aug * d));
        let ours = expm_generator(&aug, d).unwrap();
        let diff = (&ours - &oracle).amax();
        assert!(diff < 1e-9, "s {s} d {d}: {diff}");
        let p = Propagator::new(&rm, d).unwrap();
        let block = oracle.view((0, 0), (n, n)).into_owned();
        assert!((p.transfer() - block).amax() < 1e-9);
    }
}

#[test]
fn propagator_matches_pade_oracle_on_random_generators() {
    for seed in 0..6 {
        let scale = [0.01, 0.3, 2.0][seed as usize % 3];
        let g = generator_of(&random_rates(60, seed, scale));
        for d in [0.5, 4.0] {
            let diff = (expm_generator(&g, d).unwrap() - common::expm_pade13(&(&g * d))).amax();
            assert!(diff < 1e-9, "seed {seed} d {d}: {diff}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn propagation_conserves_probability(seed in 0u64..1000, scale in 0.01f64..5.0, d in 0.0f64..20.0) {
        let basis = Basis::new(Dims::One, 19);
        let rm = RateMatrix::from_rates(basis, &random_rates(20, seed, scale)).unwrap();
        let init = Distribution::new(basis, vec![0.05; 20], 0.0).unwrap();
        let out = propagate_pulse(&init, &rm, d).unwrap();
        prop_assert!(out.probs().iter().all(|&p| p >= 0.0));
        prop_assert!((out.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transfer_columns_are_stochastic(seed in 0u64..1000, scale in 0.01f64..5.0, d in 0.0f64..20.0) {
        let basis = Basis::new(Dims::One, 14);
        let rm = RateMatrix::from_rates(basis, &random_rates(15, seed, scale)).unwrap();
        let p = Propagator::new(&rm, d).unwrap();
        for j in 0..15 {
            let col = p.transfer().column(j);
            prop_assert!(col.iter().all(|&v| v >= 0.0));
            prop_assert!((col.sum() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn presets_conserve_probability_with_leak() {
    for name in ["fig2", "fig3", "fig4"] {
        let p = preset(name).unwrap();
        let init = thermal_distribution(p.thermal_mean, &p.trap).unwrap();
        let options = RunOptions {
            targets: p.targets.clone(),
            early_stop: None,
            cycles: Some(50),
        };
        let ts = run_protocol(&init, &p.protocol, &p.trap, RateMode::Resonant, &options).unwrap();
        for s in &ts.samples {
            let total = s.snapshot.in_basis + s.snapshot.leak;
            assert!((total - 1.0).abs() < 1e-9, "{name} cycle {}: {total}", s.cycle);
        }
    }
}

#[test]
fn jump_sampling_reproduces_exponential_decay() {
    let basis = Basis::new(Dims::One, 1);
    let mut r = DMatrix::zeros(2, 2);
    r[(0, 1)] = 1.0;
    let rm = RateMatrix::from_rates(basis, &r).unwrap();
    let jp = JumpProtocol::from_rate_matrices(vec![(rm, 1.0)]).unwrap();
    let init = Distribution::point(basis, Level::One(1)).unwrap();
    let n = 20_000;
    let res = mc_ensemble(&jp, &init, n, 1, 11, &[Level::One(1)]).unwrap();
    let p = (-1f64).exp();
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let got = res.samples[1].p_targets[0];
    assert!((got - p).abs() < 4.0 * se, "{got} vs {p}");
}

#[test]
fn ensemble_matches_propagation_on_small_protocol() {
    let trap = TrapConfig::new(3.0, Dims::One).unwrap().with_n_max(40);
    let pulses = [Pulse::new(-9, 1.0), Pulse::new(-1, 1.0)];
    let rms: Vec<(RateMatrix, f64)> = pulses
        .iter()
        .map(|p| (rate_matrix(&trap, p, RateMode::Resonant).unwrap(), p.duration))
        .collect();
    let jp = JumpProtocol::from_rate_matrices(rms.clone()).unwrap();
    let init = thermal_distribution(4.0, &trap).unwrap();
    let n = 5000;
    let cycles = 20;
    let res = mc_ensemble(&jp, &init, n, cycles, 3, &[Level::One(0)]).unwrap();
    let mut dist = init.clone();
    let mut k = 0;
    for _ in 0..cycles {
        for (rm, d) in &rms {
            dist = propagate_pulse(&dist, rm, *d).unwrap();
            k += 1;
            let det = observables(&dist, &[Level::One(0)]).unwrap();
            let mc = &res.samples[k];
            let p = det.p_target();
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
            assert!((mc.p_targets[0] - p).abs() < 4.0 * se, "sample {k}");
            assert!((mc.mean_n - det.mean_n).abs() < 4.0 * mc.mean_n_stderr + 1e-12);
        }
    }
}

#[test]
fn trajectories_depend_only_on_seed_and_index() {
    let p = preset("fig2").unwrap();
    let jp = JumpProtocol::new(&p.protocol, &p.trap, RateMode::Resonant).unwrap();
    let a = mc_trajectory(&jp, Level::One(12), 30, &mut trajectory_rng(7, 3)).unwrap();
    let b = mc_trajectory(&jp, Level::One(12), 30, &mut trajectory_rng(7, 3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.boundary_levels.len(), 1 + 30 * jp.pulses_per_cycle());

    let init = thermal_distribution(p.thermal_mean, &p.trap).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_ensemble(&jp, &init, 300, 20, 5, &[Level::One(0)]).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn ensemble_errors_are_unbiased_across_seeds() {
    let trap = TrapConfig::new(3.0, Dims::One).unwrap().with_n_max(40);
    let pulses = [Pulse::new(-9, 1.0), Pulse::new(-1, 1.0)];
    let rms: Vec<(RateMatrix, f64)> = pulses
        .iter()
        .map(|p| (rate_matrix(&trap, p, RateMode::Resonant).unwrap(), p.duration))
        .collect();
    let jp = JumpProtocol::from_rate_matrices(rms.clone()).unwrap();
    let init = thermal_distribution(4.0, &trap).unwrap();
    let cycles = 10;
    let mut dist = init.clone();
    for _ in 0..cycles {
        for (rm, d) in &rms {
            dist = propagate_pulse(&dist, rm, *d).unwrap();
        }
    }
    let det = observables(&dist, &[Level::One(0)]).unwrap();
    let p = det.p_target();
    let n = 2000;
    let seeds = 60;
    let zs: Vec<(f64, f64)> = (0..seeds)
        .map(|seed| {
            let res = mc_ensemble(&jp, &init, n, cycles, seed, &[Level::One(0)]).unwrap();
            let mc = res.samples.last().unwrap();
            let zp = (mc.p_targets[0] - p) / (p * (1.0 - p) / n as f64).sqrt();
            let zn = (mc.mean_n - det.mean_n) / mc.mean_n_stderr;
            (zp, zn)
        })
        .collect();
    for pick in [|z: &(f64, f64)| z.0, |z: &(f64, f64)| z.1] {
        let v: Vec<f64> = zs.iter().map(pick).collect();
        let mean = v.iter().sum::<f64>() / seeds as f64;
        let sd = (v.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64).sqrt();
        assert!(mean.abs() < 4.0 / (seeds as f64).sqrt(), "mean z {mean}");
        assert!((0.6..1.5).contains(&sd), "sd z {sd}");
    }
}
