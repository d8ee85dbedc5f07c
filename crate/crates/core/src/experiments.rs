//! Scenario presets and ensemble experiments.
//!
//! A desk-scale scenario keeps every probability and distribution of its
//! full-scale counterpart and shrinks only the population, the mean degree and
//! the step budget (measured in units of `N/p`).

use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    self, convergence_check, fmt_real, histogram, l1_distance, mean_and_sd, mean_histogram,
    AnalysisError, ConvergenceReport, OpinionHistogram, TimedHistogram,
};
use crate::config::RunConfig;
use crate::distributions::DistributionSpec;
use crate::dynamics::{DynamicsError, DynamicsOptions, ModelParams, Simulation};
use crate::rng::seeded_rng;

pub const PRESET_NAMES: [&str; 10] = [
    "ex1-uniform",
    "ex1-powerlaw",
    "ex2-powerlaw",
    "fig5-swap-a",
    "fig5-swap-b",
    "fig1-a",
    "fig1-b",
    "fig1-c",
    "fig1-d",
    "nonoise-baseline",
];

pub const DESK_N: u32 = 1000;
pub const DESK_K_AVG: f64 = 10.0;
/// Desk runs last this many multiples of `N/p`.
pub const DESK_TIMESCALES: u64 = 5;
/// Desk step budget for scenarios without mutation.
pub const DESK_NO_NOISE_STEPS: u64 = 500_000;
pub const DEFAULT_SEED_COUNT: u64 = 10;
/// Snapshots per `N/p` interval in generated schedules.
pub const SAMPLES_PER_TIMESCALE: u64 = 10;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown preset {name:?}; expected one of {}", PRESET_NAMES.join(", "))]
    UnknownPreset { name: String },
    #[error("scenarios {a:?} and {b:?} differ in {field}")]
    MismatchedScenarios {
        a: String,
        b: String,
        field: &'static str,
    },
    #[error("need at least {needed} seeds, got {got}")]
    TooFewSeeds { needed: usize, got: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(format!("unknown scale {other:?}; expected desk or full")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: ModelParams,
    pub total_steps: u64,
    pub snapshot_schedule: Vec<u64>,
    pub seeds: Vec<u64>,
    pub scale: Scale,
}

impl Scenario {
    pub fn with_initial(mut self, initial: DistributionSpec) -> Self {
        self.params.initial = initial;
        self
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }

    /// Run configuration for one seed of this scenario.
    pub fn run_config(&self, seed: u64) -> RunConfig {
        let mut c = RunConfig::new(self.params.clone(), self.total_steps);
        c.snapshot_schedule = self.snapshot_schedule.clone();
        c.seed = seed;
        c
    }
}

fn ex1_params(initial: DistributionSpec, basal: DistributionSpec) -> ModelParams {
    ModelParams {
        n: 10_000,
        k_avg: 20.0,
        d: 0.25,
        mu: 0.5,
        w: 0.5,
        p: 0.1,
        initial,
        basal,
    }
}

fn fig1_params(d: f64, p: f64) -> ModelParams {
    ModelParams {
        n: 1000,
        k_avg: 10.0,
        d,
        mu: 0.5,
        w: 0.5,
        p,
        initial: DistributionSpec::Uniform,
        basal: DistributionSpec::Uniform,
    }
}

/// Steps `0, every, 2*every, ...` up to and including `total`.
pub fn uniform_schedule(total: u64, every: u64) -> Vec<u64> {
    let every = every.max(1);
    let mut s: Vec<u64> = (0..=total / every).map(|i| i * every).collect();
    if *s.last().expect("non-empty") != total {
        s.push(total);
    }
    s
}

fn timescale_steps(params: &ModelParams, multiples: u64) -> u64 {
    let n_over_p = params.mutation_timescale().expect("p > 0");
    (multiples as f64 * n_over_p).round() as u64
}

/// Full-scale preset.
pub fn preset(name: &str) -> Result<Scenario, ExperimentError> {
    let uniform = DistributionSpec::Uniform;
    let power = DistributionSpec::power_law();
    let ex1_schedule = vec![0, 50_000, 150_000, 1_500_000];
    let (params, total_steps, snapshot_schedule) = match name {
        "ex1-uniform" => (ex1_params(uniform, uniform), 1_500_000, ex1_schedule),
        "ex1-powerlaw" => (ex1_params(power, uniform), 1_500_000, ex1_schedule),
        "ex2-powerlaw" => {
            let mut p = ex1_params(power, uniform);
            p.d = 0.1;
            p.p = 0.001;
            (
                p,
                30_000_000,
                vec![0, 100_000, 500_000, 2_000_000, 10_000_000, 30_000_000],
            )
        }
        "fig5-swap-a" => (ex1_params(power, uniform), 1_500_000, ex1_schedule),
        "fig5-swap-b" => (ex1_params(uniform, power), 1_500_000, ex1_schedule),
        "fig1-a" | "fig1-b" | "fig1-c" | "fig1-d" => {
            let p = match name {
                "fig1-a" => fig1_params(0.25, 0.1),
                "fig1-b" => fig1_params(0.25, 0.01),
                "fig1-c" => fig1_params(0.25, 0.001),
                _ => fig1_params(0.1, 0.001),
            };
            let total = timescale_steps(&p, 2 * DESK_TIMESCALES);
            let every = timescale_steps(&p, 1);
            (p, total, uniform_schedule(total, every))
        }
        "nonoise-baseline" => {
            let mut p = ex1_params(uniform, uniform);
            p.p = 0.0;
            (p, 1_500_000, ex1_schedule)
        }
        other => return Err(ExperimentError::UnknownPreset { name: other.to_string() }),
    };
    Ok(Scenario {
        name: name.to_string(),
        params,
        total_steps,
        snapshot_schedule,
        seeds: (0..DEFAULT_SEED_COUNT).collect(),
        scale: Scale::Full,
    })
}

/// Preset at the requested scale.
pub fn preset_at(name: &str, scale: Scale) -> Result<Scenario, ExperimentError> {
    let full = preset(name)?;
    Ok(match scale {
        Scale::Full => full,
        Scale::Desk => desk(full),
    })
}

/// Shrinks a scenario to desk scale: `N = 1000`, `k = 10`, `5 N/p` steps and a
/// snapshot every `N/(10p)` steps.
pub fn desk(mut s: Scenario) -> Scenario {
    s.params.n = DESK_N;
    s.params.k_avg = DESK_K_AVG;
    s.total_steps = match s.params.mutation_timescale() {
        Some(_) => timescale_steps(&s.params, DESK_TIMESCALES),
        None => DESK_NO_NOISE_STEPS,
    };
    s.snapshot_schedule = uniform_schedule(s.total_steps, sample_spacing(&s.params, s.total_steps));
    s.scale = Scale::Desk;
    s
}

/// Spacing of the steady-state samples: `N/(10p)`, or a fiftieth of the run
/// without mutation.
pub fn sample_spacing(params: &ModelParams, total_steps: u64) -> u64 {
    match params.mutation_timescale() {
        Some(t) => ((t / SAMPLES_PER_TIMESCALE as f64).round() as u64).max(1),
        None => (total_steps / (5 * SAMPLES_PER_TIMESCALE)).max(1),
    }
}

/// How a single run is sampled and reduced to a steady-state histogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateProtocol {
    pub bins: usize,
    /// Steps between histogram samples.
    pub sample_spacing: u64,
    /// Every `detector_stride`-th sample feeds the convergence detector.
    pub detector_stride: usize,
    pub threshold: f64,
    pub window: usize,
    /// Samples averaged into the steady-state histogram.
    pub average_over: usize,
}

impl SteadyStateProtocol {
    /// Samples every `N/(10p)` steps, runs the detector on snapshots `N/p` apart,
    /// averages 10 samples.
    pub fn for_params(params: &ModelParams, total_steps: u64) -> Self {
        SteadyStateProtocol {
            bins: analysis::DEFAULT_BINS,
            sample_spacing: sample_spacing(params, total_steps),
            detector_stride: SAMPLES_PER_TIMESCALE as usize,
            threshold: analysis::DEFAULT_CONVERGENCE_THRESHOLD,
            window: analysis::DEFAULT_CONVERGENCE_WINDOW,
            average_over: 10,
        }
    }
}

/// Outcome of one seeded run reduced by a [`SteadyStateProtocol`].
#[derive(Debug, Clone)]
pub struct SteadyStateRun {
    pub seed: u64,
    /// Time-averaged steady-state histogram.
    pub steady: OpinionHistogram,
    pub convergence: ConvergenceReport,
    /// Steps of the samples that were averaged.
    pub averaged_steps: Vec<u64>,
    pub samples: Vec<TimedHistogram>,
    pub initial_mean: f64,
    pub final_mean: f64,
    pub final_opinions: Vec<f64>,
    pub final_bridges: usize,
    pub steps_run: u64,
}

/// Runs one seed for `total_steps`, sampling histograms every
/// `protocol.sample_spacing` steps.
///
/// If the detector fires at step `T`, the steady state is the mean of the
/// `average_over` samples following `T` (the run is extended past
/// `total_steps` when needed). Otherwise it is the mean of the last
/// `average_over` samples up to `total_steps`.
pub fn steady_state(
    params: &ModelParams,
    options: DynamicsOptions,
    total_steps: u64,
    seed: u64,
    protocol: &SteadyStateProtocol,
) -> Result<SteadyStateRun, ExperimentError> {
    let mut sim = Simulation::new(params.clone(), options, seeded_rng(seed))?;
    let n = params.n as f64;
    let initial_mean = sim.state.opinion_sum() / n;
    let spacing = protocol.sample_spacing.max(1);
    let sample = |sim: &Simulation| -> Result<TimedHistogram, ExperimentError> {
        Ok(TimedHistogram {
            step: sim.step_count(),
            histogram: histogram(&sim.state.opinions, protocol.bins)?,
        })
    };

    let mut samples = vec![sample(&sim)?];
    while sim.step_count() < total_steps {
        sim.advance(spacing.min(total_steps - sim.step_count()));
        samples.push(sample(&sim)?);
    }

    let detector_history: Vec<TimedHistogram> = samples
        .iter()
        .step_by(protocol.detector_stride.max(1))
        .cloned()
        .collect();
    let convergence = convergence_check(&detector_history, protocol.threshold, protocol.window)?;

    let averaged: Vec<TimedHistogram> = match convergence.at_step {
        Some(t) => {
            let until = t + spacing * protocol.average_over as u64;
            while sim.step_count() < until {
                sim.advance(spacing.min(until - sim.step_count()));
                samples.push(sample(&sim)?);
            }
            samples
                .iter()
                .filter(|s| s.step > t)
                .take(protocol.average_over)
                .cloned()
                .collect()
        }
        None => {
            let skip = samples.len().saturating_sub(protocol.average_over);
            samples[skip..].to_vec()
        }
    };
    let steady = mean_histogram(&averaged.iter().map(|s| s.histogram.clone()).collect::<Vec<_>>())?;

    Ok(SteadyStateRun {
        seed,
        steady,
        averaged_steps: averaged.iter().map(|s| s.step).collect(),
        convergence,
        samples,
        initial_mean,
        final_mean: sim.state.opinion_sum() / n,
        final_bridges: analysis::community_bridge_count(&sim.state.graph, &sim.state.opinions, params.d),
        final_opinions: sim.state.opinions,
        steps_run: sim.state.step,
    })
}

/// Runs `steady_state` for every seed in parallel; results are in seed order.
pub fn run_ensemble(
    params: &ModelParams,
    options: DynamicsOptions,
    total_steps: u64,
    seeds: &[u64],
    protocol: &SteadyStateProtocol,
) -> Result<Vec<SteadyStateRun>, ExperimentError> {
    seeds
        .par_iter()
        .map(|&seed| steady_state(params, options, total_steps, seed, protocol))
        .collect()
}

/// Mean and sample standard deviation of a set of distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceStats {
    pub mean: f64,
    pub sd: f64,
    pub pairs: usize,
}

impl DistanceStats {
    fn of(xs: &[f64]) -> Self {
        let (mean, sd) = mean_and_sd(xs);
        DistanceStats {
            mean,
            sd,
            pairs: xs.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub name_a: String,
    pub name_b: String,
    pub runs_a: Vec<SteadyStateRun>,
    pub runs_b: Vec<SteadyStateRun>,
    /// L1 distances between runs of different scenarios and different seeds.
    pub cross: DistanceStats,
    /// L1 distances between runs of the same scenario, pooled over both scenarios.
    pub baseline: DistanceStats,
}

impl ComparisonReport {
    /// How many baseline standard deviations the cross mean sits above the
    /// baseline mean.
    pub fn excess_in_sd(&self) -> f64 {
        (self.cross.mean - self.baseline.mean) / self.baseline.sd
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario_a = {}", self.name_a);
        let _ = writeln!(s, "scenario_b = {}", self.name_b);
        let _ = writeln!(s, "seeds = {}", self.runs_a.len());
        let _ = writeln!(
            s,
            "cross_l1 = {} (sd {}, {} pairs)",
            fmt_real(self.cross.mean),
            fmt_real(self.cross.sd),
            self.cross.pairs
        );
        let _ = writeln!(
            s,
            "baseline_l1 = {} (sd {}, {} pairs)",
            fmt_real(self.baseline.mean),
            fmt_real(self.baseline.sd),
            self.baseline.pairs
        );
        let _ = writeln!(s, "excess_in_sd = {}", fmt_real(self.excess_in_sd()));
        s
    }

    /// Per-run rows: `seed,scenario,within_l1,cross_l1,initial_mean,final_mean`,
    /// where the distances are means over the other seeds.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "seed,scenario,within_l1,cross_l1,initial_mean,final_mean")?;
        for (own, other, name) in [
            (&self.runs_a, &self.runs_b, &self.name_a),
            (&self.runs_b, &self.runs_a, &self.name_b),
        ] {
            for (i, run) in own.iter().enumerate() {
                let mean_to = |set: &[SteadyStateRun]| {
                    let ds: Vec<f64> = set
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, r)| l1_distance(&run.steady, &r.steady).expect("same bins"))
                        .collect();
                    mean_and_sd(&ds).0
                };
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    run.seed,
                    name,
                    fmt_real(mean_to(own)),
                    fmt_real(mean_to(other)),
                    fmt_real(run.initial_mean),
                    fmt_real(run.final_mean)
                )?;
            }
        }
        Ok(())
    }
}

fn require_same(a: &Scenario, b: &Scenario) -> Result<(), ExperimentError> {
    let (pa, pb) = (&a.params, &b.params);
    let checks: [(&'static str, bool); 8] = [
        ("n", pa.n == pb.n),
        ("k_avg", pa.k_avg == pb.k_avg),
        ("d", pa.d == pb.d),
        ("mu", pa.mu == pb.mu),
        ("w", pa.w == pb.w),
        ("p", pa.p == pb.p),
        ("basal", pa.basal == pb.basal),
        ("total_steps", a.total_steps == b.total_steps),
    ];
    match checks.iter().find(|(_, same)| !same) {
        Some((field, _)) => Err(ExperimentError::MismatchedScenarios {
            a: a.name.clone(),
            b: b.name.clone(),
            field,
        }),
        None => Ok(()),
    }
}

/// Pairwise distances between runs: within each ensemble (pairs `i < j`) and
/// across ensembles (pairs with different seeds).
fn pairwise(runs_a: &[SteadyStateRun], runs_b: &[SteadyStateRun]) -> (Vec<f64>, Vec<f64>) {
    let d = |x: &SteadyStateRun, y: &SteadyStateRun| l1_distance(&x.steady, &y.steady).expect("same bins");
    let mut within = Vec::new();
    for set in [runs_a, runs_b] {
        for i in 0..set.len() {
            for j in (i + 1)..set.len() {
                within.push(d(&set[i], &set[j]));
            }
        }
    }
    let mut cross = Vec::new();
    for (i, x) in runs_a.iter().enumerate() {
        for (j, y) in runs_b.iter().enumerate() {
            if i != j {
                cross.push(d(x, y));
            }
        }
    }
    (within, cross)
}

/// Runs two scenarios that differ only in their initial distribution over the
/// same seeds and compares their steady states.
///
/// Same-seed pairs are left out of the cross distances because the two runs
/// share a random stream. With `a == b` the cross and baseline distance sets
/// therefore coincide.
pub fn run_comparison(
    a: &Scenario,
    b: &Scenario,
    seeds: &[u64],
    options: DynamicsOptions,
) -> Result<ComparisonReport, ExperimentError> {
    require_same(a, b)?;
    if seeds.len() < 2 {
        return Err(ExperimentError::TooFewSeeds {
            needed: 2,
            got: seeds.len(),
        });
    }
    let protocol = SteadyStateProtocol::for_params(&a.params, a.total_steps);
    let runs_a = run_ensemble(&a.params, options, a.total_steps, seeds, &protocol)?;
    let runs_b = run_ensemble(&b.params, options, b.total_steps, seeds, &protocol)?;
    let (within, cross) = pairwise(&runs_a, &runs_b);
    Ok(ComparisonReport {
        name_a: a.name.clone(),
        name_b: b.name.clone(),
        cross: DistanceStats::of(&cross),
        baseline: DistanceStats::of(&within),
        runs_a,
        runs_b,
    })
}

/// For each run, whether it is strictly closer to the mean steady state of its
/// own ensemble (leaving itself out) than to the mean of the other ensemble.
pub fn closer_to_own_ensemble(
    own: &[SteadyStateRun],
    other: &[SteadyStateRun],
) -> Result<Vec<bool>, ExperimentError> {
    let other_mean = mean_histogram(&other.iter().map(|r| r.steady.clone()).collect::<Vec<_>>())?;
    own.iter()
        .enumerate()
        .map(|(i, run)| {
            let rest: Vec<OpinionHistogram> = own
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, r)| r.steady.clone())
                .collect();
            let own_mean = mean_histogram(&rest)?;
            Ok(l1_distance(&run.steady, &own_mean)? < l1_distance(&run.steady, &other_mean)?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn preset_parameter_sets() {
        let ex2 = preset("ex2-powerlaw").unwrap();
        assert_eq!(
            ex2.snapshot_schedule,
            vec![0, 100_000, 500_000, 2_000_000, 10_000_000, 30_000_000]
        );
        assert_eq!((ex2.params.d, ex2.params.p), (0.1, 0.001));
        assert_eq!((ex2.params.n, ex2.params.k_avg), (10_000, 20.0));

        let ex1 = preset("ex1-uniform").unwrap();
        assert_eq!((ex1.params.n, ex1.params.k_avg), (10_000, 20.0));
        assert_eq!((ex1.params.d, ex1.params.w, ex1.params.p), (0.25, 0.5, 0.1));
        assert_eq!(ex1.snapshot_schedule, vec![0, 50_000, 150_000, 1_500_000]);
        assert_eq!(preset("ex1-powerlaw").unwrap().params.initial, DistributionSpec::power_law());

        let b = preset("fig1-b").unwrap();
        assert_eq!((b.params.d, b.params.p, b.params.w), (0.25, 0.01, 0.5));
        assert_eq!((b.params.n, b.params.k_avg), (1000, 10.0));
        let d = preset("fig1-d").unwrap();
        assert_eq!((d.params.d, d.params.p, d.params.w), (0.1, 0.001, 0.5));

        let a = preset("fig5-swap-a").unwrap();
        assert_eq!(a.params.initial, DistributionSpec::power_law());
        assert_eq!(a.params.basal, DistributionSpec::Uniform);
        let b = preset("fig5-swap-b").unwrap();
        assert_eq!(b.params.initial, DistributionSpec::Uniform);
        assert_eq!(b.params.basal, DistributionSpec::power_law());

        assert_eq!(preset("nonoise-baseline").unwrap().params.p, 0.0);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("fig9"), Err(ExperimentError::UnknownPreset { .. })));
    }

    #[test]
    fn desk_scaling_keeps_probabilities() {
        for name in PRESET_NAMES {
            let full = preset(name).unwrap();
            let desk = preset_at(name, Scale::Desk).unwrap();
            let (f, d) = (&full.params, &desk.params);
            assert_eq!((f.d, f.mu, f.w, f.p), (d.d, d.mu, d.w, d.p), "{name}");
            assert_eq!((f.initial, f.basal), (d.initial, d.basal), "{name}");
            assert_eq!((d.n, d.k_avg), (DESK_N, DESK_K_AVG));
            match d.mutation_timescale() {
                Some(t) => assert_eq!(desk.total_steps, (5.0 * t).round() as u64, "{name}"),
                None => assert_eq!(desk.total_steps, DESK_NO_NOISE_STEPS),
            }
            assert_eq!(desk.snapshot_schedule.first(), Some(&0));
            assert_eq!(desk.snapshot_schedule.last(), Some(&desk.total_steps));
            assert_eq!(desk.scale, Scale::Desk);
        }
        let ex1 = preset_at("ex1-uniform", Scale::Desk).unwrap();
        assert_eq!(ex1.total_steps, 50_000);
        assert_eq!(ex1.snapshot_schedule.len(), 51);
        assert_eq!(ex1.snapshot_schedule[1], 1000);
    }

    #[test]
    fn presets_round_trip_through_config() {
        for scale in [Scale::Desk, Scale::Full] {
            for name in PRESET_NAMES {
                let s = preset_at(name, scale).unwrap();
                let c = s.run_config(42);
                let back = parse_config(&c.to_toml()).unwrap();
                assert_eq!(back, c, "{name}");
                assert_eq!(back.params, s.params);
                assert_eq!(back.snapshot_schedule, s.snapshot_schedule);
            }
        }
    }

    #[test]
    fn uniform_schedule_shape() {
        assert_eq!(uniform_schedule(10, 3), vec![0, 3, 6, 9, 10]);
        assert_eq!(uniform_schedule(9, 3), vec![0, 3, 6, 9]);
        assert_eq!(uniform_schedule(0, 3), vec![0]);
    }

    fn small(name: &str) -> Scenario {
        let mut s = preset_at(name, Scale::Desk).unwrap();
        s.params.n = 200;
        s.params.k_avg = 6.0;
        s.total_steps = 5 * 2000;
        s
    }

    #[test]
    fn identical_scenarios_have_no_excess() {
        let s = small("ex1-uniform");
        let r = run_comparison(&s, &s, &[1, 2, 3, 4], DynamicsOptions::default()).unwrap();
        assert_eq!(r.cross.mean, r.baseline.mean);
        assert_eq!(r.cross.pairs, 12);
        assert_eq!(r.baseline.pairs, 12);
        assert_eq!(r.excess_in_sd(), 0.0);
    }

    #[test]
    fn comparison_rejects_mismatch() {
        let a = small("ex1-uniform");
        let mut b = small("ex1-powerlaw");
        b.params.d = 0.3;
        assert!(matches!(
            run_comparison(&a, &b, &[1, 2], DynamicsOptions::default()),
            Err(ExperimentError::MismatchedScenarios { field: "d", .. })
        ));
        let b = small("fig5-swap-b");
        assert!(matches!(
            run_comparison(&a, &b, &[1, 2], DynamicsOptions::default()),
            Err(ExperimentError::MismatchedScenarios { field: "basal", .. })
        ));
        assert!(run_comparison(&a, &a, &[1], DynamicsOptions::default()).is_err());
    }

    #[test]
    fn steady_state_is_deterministic_and_averaged() {
        let s = small("ex1-uniform");
        let proto = SteadyStateProtocol::for_params(&s.params, s.total_steps);
        assert_eq!(proto.sample_spacing, 200);
        let a = steady_state(&s.params, DynamicsOptions::default(), s.total_steps, 9, &proto).unwrap();
        let b = steady_state(&s.params, DynamicsOptions::default(), s.total_steps, 9, &proto).unwrap();
        assert_eq!(a.steady, b.steady);
        assert_eq!(a.averaged_steps.len(), 10);
        assert!((a.steady.mass().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        match a.convergence.at_step {
            Some(t) => assert!(a.averaged_steps.iter().all(|&s| s > t)),
            None => assert_eq!(*a.averaged_steps.last().unwrap(), s.total_steps),
        }
    }

    #[test]
    fn detector_fires_on_frozen_system() {
        // Without mutation or links nothing moves, so the detector fires as soon
        // as the window is full and the averaging samples follow it.
        let mut s = small("nonoise-baseline");
        s.params.k_avg = 0.0;
        s.total_steps = 5000;
        let proto = SteadyStateProtocol::for_params(&s.params, s.total_steps);
        let r = steady_state(&s.params, DynamicsOptions::default(), s.total_steps, 1, &proto).unwrap();
        let detector_spacing = proto.sample_spacing * proto.detector_stride as u64;
        assert_eq!(r.convergence.at_step, Some(5 * detector_spacing));
        assert_eq!(r.averaged_steps.first(), Some(&(5 * detector_spacing + proto.sample_spacing)));
        assert_eq!(r.initial_mean, r.final_mean);
    }
}
