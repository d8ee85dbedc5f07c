//! On-disk layout of a run directory:
//!
//! ```text
//! DIR/config.toml                          the run configuration
//! DIR/report.txt                           clusters, bridges and convergence per seed
//! DIR/seed-<s>/snapshot-<t>.opinions.csv   node_id,opinion
//! DIR/seed-<s>/snapshot-<t>.edges.txt      one "u v" line per edge, u < v, sorted
//! DIR/seed-<s>/histograms.csv              step,bin_low,bin_high,mass
//! ```
//!
//! Every real is written with 17 significant digits, so re-reading a snapshot
//! reproduces the in-memory state exactly and reruns are byte-identical.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use opiniond_core::analysis::{
    community_bridge_count, convergence_check, fmt_real, histogram, major_clusters,
    opinion_clusters, DEFAULT_CONVERGENCE_THRESHOLD, DEFAULT_CONVERGENCE_WINDOW,
    MAJOR_CLUSTER_FRACTION,
};
use opiniond_core::config::RunConfig;
use opiniond_core::rng::SimRng;
use opiniond_core::{AdaptiveGraph, ConvergenceReport, Opinion, Simulation, TimedHistogram};

pub const CONFIG_FILE: &str = "config.toml";
pub const REPORT_FILE: &str = "report.txt";
pub const HISTOGRAM_FILE: &str = "histograms.csv";

pub fn seed_dir(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed-{seed}"))
}

fn opinions_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("snapshot-{step}.opinions.csv"))
}

fn edges_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("snapshot-{step}.edges.txt"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

pub fn write_opinions(path: &Path, opinions: &[Opinion]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "node_id,opinion")?;
    for (i, o) in opinions.iter().enumerate() {
        writeln!(out, "{i},{}", fmt_real(*o))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_opinions(path: &Path) -> Result<Vec<Opinion>> {
    let mut opinions = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            if line.trim() != "node_id,opinion" {
                bail!("{}: unexpected header {line:?}", path.display());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (id, value) = line
            .split_once(',')
            .with_context(|| format!("{}:{}: expected node_id,opinion", path.display(), idx + 1))?;
        let id: usize = id
            .trim()
            .parse()
            .with_context(|| format!("{}:{}: bad node id", path.display(), idx + 1))?;
        if id != opinions.len() {
            bail!("{}:{}: expected node {}, found {id}", path.display(), idx + 1, opinions.len());
        }
        let value: f64 = value
            .trim()
            .parse()
            .with_context(|| format!("{}:{}: bad opinion", path.display(), idx + 1))?;
        opinions.push(value);
    }
    Ok(opinions)
}

pub fn write_histograms(path: &Path, history: &[TimedHistogram]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "step,bin_low,bin_high,mass")?;
    for h in history {
        for (i, m) in h.histogram.mass().iter().enumerate() {
            let (lo, hi) = h.histogram.bin_bounds(i);
            writeln!(out, "{},{},{},{}", h.step, fmt_real(lo), fmt_real(hi), fmt_real(*m))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Everything the report says about one seed, computed from the stored snapshots.
#[derive(Debug, Clone)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_step: u64,
    pub raw_clusters: usize,
    /// `(center, size)` of the clusters holding at least 1% of the nodes.
    pub major_clusters: Vec<(f64, usize)>,
    /// `(step, bridges)` for every snapshot.
    pub bridges: Vec<(u64, usize)>,
    pub convergence: ConvergenceReport,
}

/// Streams the reduction of a run: feed snapshots in step order, then finish.
struct Reducer<'a> {
    config: &'a RunConfig,
    history: Vec<TimedHistogram>,
    bridges: Vec<(u64, usize)>,
    last: Option<(u64, Vec<Opinion>)>,
}

impl<'a> Reducer<'a> {
    fn new(config: &'a RunConfig) -> Self {
        Reducer {
            config,
            history: Vec::new(),
            bridges: Vec::new(),
            last: None,
        }
    }

    fn push(&mut self, step: u64, opinions: &[Opinion], graph: &AdaptiveGraph) -> Result<()> {
        self.history.push(TimedHistogram {
            step,
            histogram: histogram(opinions, self.config.bins)?,
        });
        self.bridges
            .push((step, community_bridge_count(graph, opinions, self.config.params.d)));
        self.last = Some((step, opinions.to_vec()));
        Ok(())
    }

    fn finish(self, seed: u64) -> Result<(SeedSummary, Vec<TimedHistogram>)> {
        let Some((final_step, opinions)) = self.last else {
            bail!("seed {seed}: no snapshots");
        };
        let gap = self.config.params.d / 2.0;
        let major = major_clusters(&opinions, gap, MAJOR_CLUSTER_FRACTION)?;
        let summary = SeedSummary {
            seed,
            final_step,
            raw_clusters: opinion_clusters(&opinions, gap)?.len(),
            major_clusters: major.iter().map(|c| (c.center(), c.size)).collect(),
            bridges: self.bridges,
            convergence: convergence_check(
                &self.history,
                DEFAULT_CONVERGENCE_THRESHOLD,
                DEFAULT_CONVERGENCE_WINDOW,
            )?,
        };
        Ok((summary, self.history))
    }
}

/// Runs one seed of `config` from `rng`, writing `DIR/seed-<seed>/`.
pub fn simulate_to_dir(config: &RunConfig, seed: u64, rng: SimRng, dir: &Path) -> Result<SeedSummary> {
    let sdir = seed_dir(dir, seed);
    fs::create_dir_all(&sdir).with_context(|| format!("cannot create {}", sdir.display()))?;
    let mut sim = Simulation::new(config.params.clone(), config.dynamics_options(), rng)?;
    let mut reducer = Reducer::new(config);
    for &t in &config.snapshot_schedule {
        sim.advance_to(t);
        write_opinions(&opinions_path(&sdir, t), &sim.state.opinions)?;
        let mut edges = create(&edges_path(&sdir, t))?;
        sim.state.graph.write_edge_list(&mut edges)?;
        edges.flush()?;
        reducer.push(t, &sim.state.opinions, &sim.state.graph)?;
    }
    sim.advance_to(config.total_steps);
    let (summary, history) = reducer.finish(seed)?;
    write_histograms(&sdir.join(HISTOGRAM_FILE), &history)?;
    Ok(summary)
}

/// Steps of the snapshots stored in a seed directory, ascending.
fn stored_steps(sdir: &Path) -> Result<Vec<u64>> {
    let mut steps = Vec::new();
    for entry in fs::read_dir(sdir).with_context(|| format!("cannot read {}", sdir.display()))? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(step) = name
            .strip_prefix("snapshot-")
            .and_then(|rest| rest.strip_suffix(".opinions.csv"))
        {
            steps.push(step.parse().with_context(|| format!("bad snapshot name {name}"))?);
        }
    }
    steps.sort_unstable();
    Ok(steps)
}

/// Recomputes a seed's histograms and summary from its stored snapshots.
pub fn analyze_seed_dir(config: &RunConfig, seed: u64, sdir: &Path) -> Result<(SeedSummary, Vec<TimedHistogram>)> {
    let mut reducer = Reducer::new(config);
    for step in stored_steps(sdir)? {
        let opinions = read_opinions(&opinions_path(sdir, step))?;
        if opinions.len() != config.params.n as usize {
            bail!("{}: snapshot {step} has {} nodes, config says {}", sdir.display(), opinions.len(), config.params.n);
        }
        let graph = AdaptiveGraph::read_edge_list(opinions.len(), open(&edges_path(sdir, step))?)
            .with_context(|| format!("{}: snapshot {step} edges", sdir.display()))?;
        reducer.push(step, &opinions, &graph)?;
    }
    reducer.finish(seed)
}

/// Seeds with a `seed-<s>` directory under `dir`, ascending.
pub fn stored_seeds(dir: &Path) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        if let Some(s) = entry.file_name().to_string_lossy().strip_prefix("seed-") {
            seeds.push(s.parse().with_context(|| format!("bad seed directory seed-{s}"))?);
        }
    }
    seeds.sort_unstable();
    Ok(seeds)
}

pub fn report_text(config: &RunConfig, summaries: &[SeedSummary]) -> String {
    let p = &config.params;
    let mut s = String::new();
    let _ = writeln!(s, "n = {}", p.n);
    let _ = writeln!(s, "k_avg = {}", fmt_real(p.k_avg));
    let _ = writeln!(s, "d = {}", fmt_real(p.d));
    let _ = writeln!(s, "mu = {}", fmt_real(p.mu));
    let _ = writeln!(s, "w = {}", fmt_real(p.w));
    let _ = writeln!(s, "p = {}", fmt_real(p.p));
    let _ = writeln!(s, "initial = {}", p.initial);
    let _ = writeln!(s, "basal = {}", p.basal);
    let _ = writeln!(s, "total_steps = {}", config.total_steps);
    let _ = writeln!(s, "bins = {}", config.bins);
    let _ = writeln!(s, "cluster_gap = {}", fmt_real(p.d / 2.0));
    for summary in summaries {
        let _ = writeln!(s);
        let _ = writeln!(s, "[seed-{}]", summary.seed);
        let _ = writeln!(s, "final_step = {}", summary.final_step);
        let _ = writeln!(s, "clusters = {}", summary.raw_clusters);
        let _ = writeln!(s, "major_clusters = {}", summary.major_clusters.len());
        let centers: Vec<String> = summary
            .major_clusters
            .iter()
            .map(|(c, size)| format!("{}:{size}", fmt_real(*c)))
            .collect();
        let _ = writeln!(s, "major_cluster_centers = [{}]", centers.join(", "));
        let (_, last_bridges) = summary.bridges.last().copied().unwrap_or((0, 0));
        let _ = writeln!(s, "bridges = {last_bridges}");
        let trace: Vec<String> = summary.bridges.iter().map(|(t, b)| format!("{t}:{b}")).collect();
        let _ = writeln!(s, "bridges_per_snapshot = [{}]", trace.join(", "));
        s.push_str(&summary.convergence.to_text());
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
