//! `opiniond`: run, compare, sweep and analyze opinion-dynamics simulations.
//!
//! Seeding: a run with base seed `s` and `--seeds K` simulates seeds
//! `s, s+1, ..., s+K-1`, each on stream 0 of its own ChaCha8 key. Sweep cell `i`
//! uses stream `i` under the base seed, so cells are independent of each other
//! and of the order in which they run.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use opiniond_core::analysis::fmt_real;
use opiniond_core::config::{parse_config, RunConfig};
use opiniond_core::experiments::{
    closer_to_own_ensemble, desk, preset_at, run_comparison, Scale, Scenario,
};
use opiniond_core::rng::stream_rng;
use opiniond_core::{DistributionSpec, DynamicsOptions};

pub mod output;

use output::{SeedSummary, CONFIG_FILE, HISTOGRAM_FILE, REPORT_FILE};

/// Caps the worker threads used for seeds and sweep cells.
pub const THREADS_ENV: &str = "OPINIOND_THREADS";

#[derive(Debug, Parser)]
#[command(name = "opiniond", version, about = "Bounded-confidence opinion dynamics on adaptive networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a preset or config file, writing snapshots, histograms and a report.
    Run(RunArgs),
    /// Compare the steady states of two scenarios over a seed ensemble.
    Compare(CompareArgs),
    /// Run one simulation per cell of a (d, p, w) grid.
    Sweep(SweepArgs),
    /// Recompute histograms, clusters and convergence from a run directory.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Full => Scale::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitialArg {
    Uniform,
    PowerLaw,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["preset", "config"]))]
struct RunArgs {
    /// Named preset, e.g. ex1-uniform or fig1-c.
    #[arg(long)]
    preset: Option<String>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset scale.
    #[arg(long, value_enum, default_value = "desk", conflicts_with = "config")]
    scale: ScaleArg,
    /// Base seed (default: the config's seed, or 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds to run.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    /// Output directory (default: the config's output_dir, or "out").
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// First scenario (preset name).
    a: String,
    /// Second scenario (preset name).
    b: String,
    /// Replace the second scenario's initial distribution.
    #[arg(long, value_enum)]
    initial_b: Option<InitialArg>,
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..))]
    seeds: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Preset supplying every parameter not swept.
    #[arg(long)]
    preset: String,
    /// Tolerances, comma separated (default: the preset's).
    #[arg(long, value_delimiter = ',')]
    d: Vec<f64>,
    /// Mutation probabilities, comma separated (default: the preset's).
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Rewiring probabilities, comma separated (default: the preset's).
    #[arg(long, value_delimiter = ',')]
    w: Vec<f64>,
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Run directory to read; never modified.
    #[arg(long = "in")]
    input: PathBuf,
    /// Where to write recomputed histograms and report (default: print the report only).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs the command. Returns the exit
/// code: 0 on success, 2 on usage errors, 1 on any other failure.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(args),
        Command::Sweep(args) => sweep(args),
        Command::Analyze(args) => analyze(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        // Fails harmlessly if the pool already exists (repeated calls in one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn scenario_config(s: &Scenario, seed: u64, out: &Path) -> RunConfig {
    let mut c = s.run_config(seed);
    c.output_dir = out.to_path_buf();
    c
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut config = match (&args.preset, &args.config) {
        (Some(name), None) => {
            let s = preset_at(name, args.scale.into())?;
            let mut c = s.run_config(0);
            c.output_dir = PathBuf::from("out");
            c
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            parse_config(&text).with_context(|| format!("{}", path.display()))?
        }
        _ => unreachable!("clap enforces exactly one source"),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

/// Simulates `seeds` of `config` concurrently into `dir` and writes the
/// directory's config and report. Summaries are in seed order.
fn run_seeds(config: &RunConfig, seeds: &[u64], stream: u64, dir: &Path, header: &str) -> Result<Vec<SeedSummary>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    output::write_text(&dir.join(CONFIG_FILE), &format!("{header}{}", config.to_toml()))?;
    let summaries = seeds
        .par_iter()
        .map(|&seed| output::simulate_to_dir(config, seed, stream_rng(seed, stream), dir))
        .collect::<Result<Vec<_>>>()?;
    output::write_text(&dir.join(REPORT_FILE), &output::report_text(config, &summaries))?;
    Ok(summaries)
}

fn run(args: RunArgs) -> Result<()> {
    let config = load_config(&args)?;
    let seeds: Vec<u64> = (0..args.seeds)
        .map(|i| config.seed.checked_add(i).context("seed range overflows u64"))
        .collect::<Result<_>>()?;
    let dir = config.output_dir.clone();
    let summaries = run_seeds(&config, &seeds, 0, &dir, "")?;
    for s in &summaries {
        println!(
            "seed {}: {} major clusters, {} bridges, converged = {}",
            s.seed,
            s.major_clusters.len(),
            s.bridges.last().map_or(0, |b| b.1),
            s.convergence.converged
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let scale = args.scale.into();
    let a = preset_at(&args.a, scale)?;
    let mut b = preset_at(&args.b, scale)?;
    if let Some(initial) = args.initial_b {
        b = b.with_initial(match initial {
            InitialArg::Uniform => DistributionSpec::Uniform,
            InitialArg::PowerLaw => DistributionSpec::power_law(),
        });
        b.name = format!("{}+initial={}", b.name, b.params.initial);
    }
    let seeds: Vec<u64> = (0..args.seeds)
        .map(|i| args.seed.checked_add(i).context("seed range overflows u64"))
        .collect::<Result<_>>()?;
    let report = run_comparison(&a, &b, &seeds, DynamicsOptions::default())?;
    let count = |v: Vec<bool>| v.into_iter().filter(|&c| c).count();
    let own_a = count(closer_to_own_ensemble(&report.runs_a, &report.runs_b)?);
    let own_b = count(closer_to_own_ensemble(&report.runs_b, &report.runs_a)?);

    let dir = &args.out;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut text = report.to_text();
    text.push_str(&format!("closer_to_own_a = {own_a}/{}\n", report.runs_a.len()));
    text.push_str(&format!("closer_to_own_b = {own_b}/{}\n", report.runs_b.len()));
    output::write_text(&dir.join(REPORT_FILE), &text)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    fs::write(dir.join("distances.csv"), csv)?;
    for (tag, runs) in [("a", &report.runs_a), ("b", &report.runs_b)] {
        for run in runs.iter() {
            let sdir = output::seed_dir(&dir.join(tag), run.seed);
            fs::create_dir_all(&sdir)?;
            let mut buf = Vec::new();
            run.steady.write_csv(&mut buf)?;
            fs::write(sdir.join("steady.csv"), buf)?;
        }
    }
    print!("{text}");
    Ok(())
}

/// Grid values in the order given, or the preset's value.
fn axis(values: &[f64], default: f64) -> Vec<f64> {
    if values.is_empty() {
        vec![default]
    } else {
        values.to_vec()
    }
}

fn sweep(args: SweepArgs) -> Result<()> {
    let base = opiniond_core::experiments::preset(&args.preset)?;
    let mut cells = Vec::new();
    for &d in &axis(&args.d, base.params.d) {
        for &p in &axis(&args.p, base.params.p) {
            for &w in &axis(&args.w, base.params.w) {
                let mut s = base.clone();
                s.params.d = d;
                s.params.p = p;
                s.params.w = w;
                s.params.validate()?;
                if Scale::from(args.scale) == Scale::Desk {
                    s = desk(s);
                }
                cells.push(s);
            }
        }
    }
    let dir = &args.out;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;

    let results = cells
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let cdir = dir.join(format!("cell-{i}"));
            let config = scenario_config(s, args.seed, &cdir);
            let header = format!("# sweep cell {i}: random stream {i} under seed {}\n", args.seed);
            let summary = run_seeds(&config, &[args.seed], i as u64, &cdir, &header)?;
            Ok(summary.into_iter().next().expect("one seed per cell"))
        })
        .collect::<Result<Vec<SeedSummary>>>()?;

    let mut csv = String::from("cell,d,p,w,total_steps,major_clusters,bridges,converged\n");
    for (i, (s, r)) in cells.iter().zip(&results).enumerate() {
        csv.push_str(&format!(
            "{i},{},{},{},{},{},{},{}\n",
            fmt_real(s.params.d),
            fmt_real(s.params.p),
            fmt_real(s.params.w),
            s.total_steps,
            r.major_clusters.len(),
            r.bridges.last().map_or(0, |b| b.1),
            r.convergence.converged
        ));
    }
    output::write_text(&dir.join("cells.csv"), &csv)?;
    let text = format!("preset = {}\nseed = {}\ncells = {}\n\n{csv}", args.preset, args.seed, cells.len());
    output::write_text(&dir.join(REPORT_FILE), &text)?;
    print!("{text}");
    Ok(())
}

fn same_location(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let input = &args.input;
    let config_path = input.join(CONFIG_FILE);
    let config_text =
        fs::read_to_string(&config_path).with_context(|| format!("cannot read {}", config_path.display()))?;
    let config = parse_config(&config_text).with_context(|| format!("{}", config_path.display()))?;
    let seeds = output::stored_seeds(input)?;
    if seeds.is_empty() {
        bail!("{} holds no seed-<s> directories", input.display());
    }
    if let Some(out) = &args.out {
        if same_location(out, input) {
            bail!("--out must differ from --in; analyze never writes into its input");
        }
    }
    let analyzed = seeds
        .par_iter()
        .map(|&seed| output::analyze_seed_dir(&config, seed, &output::seed_dir(input, seed)))
        .collect::<Result<Vec<_>>>()?;
    let summaries: Vec<SeedSummary> = analyzed.iter().map(|(s, _)| s.clone()).collect();
    let text = output::report_text(&config, &summaries);
    if let Some(out) = &args.out {
        fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        output::write_text(&out.join(CONFIG_FILE), &config_text)?;
        output::write_text(&out.join(REPORT_FILE), &text)?;
        for (summary, history) in &analyzed {
            let sdir = output::seed_dir(out, summary.seed);
            fs::create_dir_all(&sdir)?;
            output::write_histograms(&sdir.join(HISTOGRAM_FILE), history)?;
        }
    }
    print!("{text}");
    Ok(())
}
