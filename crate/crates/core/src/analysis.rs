//! Steady-state characterization of opinion vectors and graphs.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::dynamics::Opinion;
use crate::graph::AdaptiveGraph;

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_CONVERGENCE_THRESHOLD: f64 = 0.1;
pub const DEFAULT_CONVERGENCE_WINDOW: usize = 5;
/// Clusters below this population share are treated as transient.
pub const MAJOR_CLUSTER_FRACTION: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("empty population")]
    EmptyPopulation,
    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("bin count mismatch: {0} vs {1}")]
    BinMismatch(usize, usize),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("malformed histogram CSV at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Normalized opinion density over `bins` equal-width bins of [0, 1].
///
/// Bin `i` covers `[i/B, (i+1)/B)`; the last bin also holds 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionHistogram {
    mass: Vec<f64>,
}

impl OpinionHistogram {
    /// Wraps raw masses. Masses must be non-negative; they are not renormalized.
    pub fn from_mass(mass: Vec<f64>) -> Result<Self, AnalysisError> {
        if mass.len() < 2 {
            return Err(AnalysisError::TooFewBins(mass.len()));
        }
        if mass.iter().any(|m| !(*m >= 0.0)) {
            return Err(AnalysisError::InvalidArgument("negative or NaN mass".into()));
        }
        Ok(OpinionHistogram { mass })
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn bin_bounds(&self, i: usize) -> (f64, f64) {
        let b = self.mass.len() as f64;
        (i as f64 / b, (i + 1) as f64 / b)
    }

    pub fn bin_of(value: f64, bins: usize) -> usize {
        ((value * bins as f64) as usize).min(bins - 1)
    }

    /// Mean opinion implied by the histogram with mass at bin centers.
    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let (lo, hi) = self.bin_bounds(i);
                m * 0.5 * (lo + hi)
            })
            .sum()
    }

    /// Writes `bin_low,bin_high,mass` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "bin_low,bin_high,mass")?;
        for (i, m) in self.mass.iter().enumerate() {
            let (lo, hi) = self.bin_bounds(i);
            writeln!(out, "{},{},{}", fmt_real(lo), fmt_real(hi), fmt_real(*m))?;
        }
        Ok(())
    }

    /// Parses the output of [`OpinionHistogram::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, AnalysisError> {
        let mut mass = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| AnalysisError::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
            if idx == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(AnalysisError::Parse {
                    line: line_no,
                    reason: format!("expected 3 columns, found {}", cols.len()),
                });
            }
            let m: f64 = cols[2].trim().parse().map_err(|e| AnalysisError::Parse {
                line: line_no,
                reason: format!("{e}"),
            })?;
            mass.push(m);
        }
        OpinionHistogram::from_mass(mass)
    }
}

/// Formats a real with 17 significant digits, enough to round-trip any f64.
/// Magnitudes in [1e-5, 1e5) are printed in positional notation.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..5).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, x)
    } else {
        format!("{:.16e}", x)
    }
}

pub fn histogram(opinions: &[Opinion], bins: usize) -> Result<OpinionHistogram, AnalysisError> {
    if bins < 2 {
        return Err(AnalysisError::TooFewBins(bins));
    }
    if opinions.is_empty() {
        return Err(AnalysisError::EmptyPopulation);
    }
    let mut counts = vec![0u64; bins];
    for &o in opinions {
        counts[OpinionHistogram::bin_of(o, bins)] += 1;
    }
    let n = opinions.len() as f64;
    Ok(OpinionHistogram {
        mass: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Sum of absolute mass differences; in [0, 2].
pub fn l1_distance(h1: &OpinionHistogram, h2: &OpinionHistogram) -> Result<f64, AnalysisError> {
    if h1.bins() != h2.bins() {
        return Err(AnalysisError::BinMismatch(h1.bins(), h2.bins()));
    }
    Ok(h1.mass.iter().zip(&h2.mass).map(|(a, b)| (a - b).abs()).sum())
}

/// Bin-wise mean of several histograms.
pub fn mean_histogram(hs: &[OpinionHistogram]) -> Result<OpinionHistogram, AnalysisError> {
    let first = hs.first().ok_or(AnalysisError::EmptyPopulation)?;
    let mut mass = vec![0.0; first.bins()];
    for h in hs {
        if h.bins() != first.bins() {
            return Err(AnalysisError::BinMismatch(first.bins(), h.bins()));
        }
        for (acc, m) in mass.iter_mut().zip(&h.mass) {
            *acc += m;
        }
    }
    let k = hs.len() as f64;
    mass.iter_mut().for_each(|m| *m /= k);
    Ok(OpinionHistogram { mass })
}

/// A run of sorted opinions with consecutive gaps below the split threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpinionCluster {
    pub low: Opinion,
    pub high: Opinion,
    pub size: usize,
}

impl OpinionCluster {
    pub fn center(&self) -> f64 {
        0.5 * (self.low + self.high)
    }
}

/// Splits the sorted opinions wherever two neighbors differ by `gap` or more.
pub fn opinion_clusters(opinions: &[Opinion], gap: f64) -> Result<Vec<OpinionCluster>, AnalysisError> {
    if opinions.is_empty() {
        return Err(AnalysisError::EmptyPopulation);
    }
    if !(gap > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("gap must be > 0, got {gap}")));
    }
    let mut sorted = opinions.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut clusters = Vec::new();
    let mut current = OpinionCluster {
        low: sorted[0],
        high: sorted[0],
        size: 1,
    };
    for &o in &sorted[1..] {
        if o - current.high < gap {
            current.high = o;
            current.size += 1;
        } else {
            clusters.push(current);
            current = OpinionCluster { low: o, high: o, size: 1 };
        }
    }
    clusters.push(current);
    Ok(clusters)
}

/// Raw number of clusters, transient singletons included.
pub fn cluster_count(opinions: &[Opinion], gap: f64) -> Result<usize, AnalysisError> {
    Ok(opinion_clusters(opinions, gap)?.len())
}

/// Clusters holding at least `min_fraction` of the population.
pub fn major_clusters(
    opinions: &[Opinion],
    gap: f64,
    min_fraction: f64,
) -> Result<Vec<OpinionCluster>, AnalysisError> {
    let n = opinions.len() as f64;
    Ok(opinion_clusters(opinions, gap)?
        .into_iter()
        .filter(|c| c.size as f64 >= min_fraction * n)
        .collect())
}

pub fn major_cluster_count(opinions: &[Opinion], gap: f64) -> Result<usize, AnalysisError> {
    Ok(major_clusters(opinions, gap, MAJOR_CLUSTER_FRACTION)?.len())
}

/// Number of edges whose endpoints disagree by at least `d`.
pub fn community_bridge_count(g: &AdaptiveGraph, opinions: &[Opinion], d: f64) -> usize {
    assert_eq!(g.node_count(), opinions.len(), "one opinion per node");
    (0..g.node_count() as u32)
        .map(|u| {
            g.neighbors(u)
                .iter()
                .filter(|&&v| v > u && (opinions[u as usize] - opinions[v as usize]).abs() >= d)
                .count()
        })
        .sum()
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
    sets: usize,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            sets: n,
        }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        self.sets -= 1;
        true
    }

    pub fn set_count(&self) -> usize {
        self.sets
    }
}

/// Connected components of the graph, counting only edges accepted by `keep`.
pub fn component_count<F>(g: &AdaptiveGraph, mut keep: F) -> usize
where
    F: FnMut(u32, u32) -> bool,
{
    let mut sets = DisjointSets::new(g.node_count());
    for (u, v) in g.edges() {
        if keep(u, v) {
            sets.union(u, v);
        }
    }
    sets.set_count()
}

/// Components of the subgraph of edges whose endpoints are within `d`.
pub fn tolerance_component_count(g: &AdaptiveGraph, opinions: &[Opinion], d: f64) -> usize {
    component_count(g, |u, v| (opinions[u as usize] - opinions[v as usize]).abs() < d)
}

/// A histogram tagged with the step it was taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedHistogram {
    pub step: u64,
    pub histogram: OpinionHistogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub converged: bool,
    /// Step of the snapshot that completed the first qualifying window.
    pub at_step: Option<u64>,
    /// The qualifying window if converged, otherwise the most recent distances.
    pub window_distances: Vec<f64>,
    pub threshold: f64,
    pub window: usize,
}

impl ConvergenceReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "converged = {}", self.converged);
        match self.at_step {
            Some(t) => {
                let _ = writeln!(s, "at_step = {t}");
            }
            None => {
                let _ = writeln!(s, "at_step = none");
            }
        }
        let _ = writeln!(s, "threshold = {}", fmt_real(self.threshold));
        let _ = writeln!(s, "window = {}", self.window);
        let trace: Vec<String> = self.window_distances.iter().map(|d| fmt_real(*d)).collect();
        let _ = writeln!(s, "window_distances = [{}]", trace.join(", "));
        s
    }
}

/// Online convergence detector: fires at the first snapshot where the last
/// `window` distances between consecutive histograms are all at most `threshold`.
pub fn convergence_check(
    history: &[TimedHistogram],
    threshold: f64,
    window: usize,
) -> Result<ConvergenceReport, AnalysisError> {
    if window < 2 {
        return Err(AnalysisError::InvalidArgument(format!("window must be >= 2, got {window}")));
    }
    if !(threshold > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "threshold must be > 0, got {threshold}"
        )));
    }
    let distances = history
        .windows(2)
        .map(|w| l1_distance(&w[0].histogram, &w[1].histogram))
        .collect::<Result<Vec<_>, _>>()?;
    let mut run = 0usize;
    for (i, &dist) in distances.iter().enumerate() {
        run = if dist <= threshold { run + 1 } else { 0 };
        if run >= window {
            return Ok(ConvergenceReport {
                converged: true,
                at_step: Some(history[i + 1].step),
                window_distances: distances[i + 1 - window..=i].to_vec(),
                threshold,
                window,
            });
        }
    }
    let tail = distances.len().saturating_sub(window);
    Ok(ConvergenceReport {
        converged: false,
        at_step: None,
        window_distances: distances[tail..].to_vec(),
        threshold,
        window,
    })
}

/// Largest distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at significance `alpha`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

/// Sample mean and sample standard deviation (n - 1 denominator).
pub fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point_mass(bins: usize, at: usize) -> OpinionHistogram {
        let mut m = vec![0.0; bins];
        m[at] = 1.0;
        OpinionHistogram::from_mass(m).unwrap()
    }

    #[test]
    fn histogram_single_bin() {
        let h = histogram(&[0.5; 37], 20).unwrap();
        assert_eq!(h.mass()[10], 1.0);
        assert_eq!(h.mass().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn histogram_closed_last_bin() {
        let h = histogram(&[1.0], 20).unwrap();
        assert_eq!(h.mass()[19], 1.0);
        let h = histogram(&[0.0, 0.05], 20).unwrap();
        assert_eq!(h.mass()[0], 0.5);
        assert_eq!(h.mass()[1], 0.5);
    }

    #[test]
    fn histogram_errors() {
        assert_eq!(histogram(&[], 20), Err(AnalysisError::EmptyPopulation));
        assert_eq!(histogram(&[0.1], 1), Err(AnalysisError::TooFewBins(1)));
    }

    #[test]
    fn l1_examples() {
        let u = OpinionHistogram::from_mass(vec![0.05; 20]).unwrap();
        assert_eq!(l1_distance(&u, &u).unwrap(), 0.0);
        assert_eq!(l1_distance(&point_mass(20, 0), &point_mass(20, 5)).unwrap(), 2.0);
        assert!((l1_distance(&u, &point_mass(20, 3)).unwrap() - 1.9).abs() < 1e-12);
        assert_eq!(
            l1_distance(&u, &point_mass(10, 3)),
            Err(AnalysisError::BinMismatch(20, 10))
        );
    }

    #[test]
    fn clusters_examples() {
        assert_eq!(cluster_count(&[0.3; 10], 0.125).unwrap(), 1);
        assert_eq!(cluster_count(&[0.1, 0.9], 0.5).unwrap(), 2);
        assert_eq!(cluster_count(&[], 0.5), Err(AnalysisError::EmptyPopulation));
        assert!(cluster_count(&[0.1], 0.0).is_err());
        // Two big groups plus a stray node: raw count 3, major count 2.
        let mut v = vec![0.2; 99];
        v.extend(vec![0.8; 100]);
        v.push(0.5);
        assert_eq!(cluster_count(&v, 0.125).unwrap(), 3);
        assert_eq!(major_cluster_count(&v, 0.125).unwrap(), 2);
    }

    #[test]
    fn bridges() {
        let g = AdaptiveGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(community_bridge_count(&g, &[0.4, 0.4, 0.4], 0.25), 0);
        let g = AdaptiveGraph::from_edges(2, [(0, 1)]).unwrap();
        assert_eq!(community_bridge_count(&g, &[0.0, 1.0], 0.25), 1);
    }

    #[test]
    fn components() {
        let g = AdaptiveGraph::from_edges(5, [(0, 1), (1, 2), (3, 4)]).unwrap();
        assert_eq!(component_count(&g, |_, _| true), 2);
        assert_eq!(tolerance_component_count(&g, &[0.0, 0.1, 0.9, 0.5, 0.5], 0.25), 3);
    }

    fn timed(hs: Vec<OpinionHistogram>) -> Vec<TimedHistogram> {
        hs.into_iter()
            .enumerate()
            .map(|(i, histogram)| TimedHistogram {
                step: i as u64 * 100,
                histogram,
            })
            .collect()
    }

    #[test]
    fn convergence_constant_stream() {
        let h = histogram(&[0.2, 0.7], 20).unwrap();
        let short = convergence_check(&timed(vec![h.clone(); 5]), 0.1, 5).unwrap();
        assert!(!short.converged);
        let r = convergence_check(&timed(vec![h; 6]), 0.1, 5).unwrap();
        assert!(r.converged);
        assert_eq!(r.at_step, Some(500));
        assert_eq!(r.window_distances, vec![0.0; 5]);
    }

    #[test]
    fn convergence_alternating_never() {
        let hs: Vec<_> = (0..40).map(|i| point_mass(20, if i % 2 == 0 { 0 } else { 19 })).collect();
        let r = convergence_check(&timed(hs), 0.1, 5).unwrap();
        assert!(!r.converged);
        assert_eq!(r.at_step, None);
        assert_eq!(r.window_distances, vec![2.0; 5]);
    }

    #[test]
    fn convergence_fires_at_first_window() {
        let mut hs: Vec<_> = (0..3).map(|i| point_mass(20, i)).collect();
        hs.extend(vec![point_mass(20, 9); 8]);
        let r = convergence_check(&timed(hs), 0.1, 3).unwrap();
        // Distances: 2, 2, 2, then zeros starting between index 2 and 3.
        assert_eq!(r.at_step, Some(600));
    }

    #[test]
    fn convergence_argument_errors() {
        assert!(convergence_check(&[], 0.1, 1).is_err());
        assert!(convergence_check(&[], 0.0, 5).is_err());
        assert!(!convergence_check(&[], 0.1, 5).unwrap().converged);
    }

    #[test]
    fn csv_round_trip() {
        let h = histogram(&[0.1, 0.15, 0.33, 0.999, 1.0, 0.71], 20).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("bin_low,bin_high,mass\n0,0.050000000000000003,"));
        assert_eq!(OpinionHistogram::read_csv(&buf[..]).unwrap(), h);
    }

    #[test]
    fn fmt_real_round_trips() {
        for x in [0.1, 1.0 / 3.0, 0.30000000000000004, 1e-7, 0.999_999_999_999, 12345.678, 1.0] {
            assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x, "{}", fmt_real(x));
        }
    }

    #[test]
    fn stats_helpers() {
        let (m, sd) = mean_and_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((sd - 1.2909944487358056).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]).unwrap() - 0.9979487157886733).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert!((ks_critical_value(10_000, 0.01) - 0.016276).abs() < 1e-5);
    }

    fn hist_strategy() -> impl Strategy<Value = OpinionHistogram> {
        proptest::collection::vec(0.0f64..=1.0, 1..200).prop_map(|v| histogram(&v, 20).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn l1_is_a_metric(a in hist_strategy(), b in hist_strategy(), c in hist_strategy()) {
            let ab = l1_distance(&a, &b).unwrap();
            prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
            prop_assert_eq!(ab, l1_distance(&b, &a).unwrap());
            prop_assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
            if ab == 0.0 {
                prop_assert_eq!(&a, &b);
            }
            let ac = l1_distance(&a, &c).unwrap();
            let cb = l1_distance(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn histogram_normalized(v in proptest::collection::vec(0.0f64..=1.0, 1..500), bins in 2usize..60) {
            let h = histogram(&v, bins).unwrap();
            prop_assert!((h.mass().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(h.mass().iter().all(|&m| m >= 0.0));
        }

        #[test]
        fn cluster_count_permutation_invariant(
            v in proptest::collection::vec(0.0f64..=1.0, 1..200),
            gap in 0.001f64..0.5,
            shuffle_seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut shuffled = v.clone();
            shuffled.shuffle(&mut crate::rng::seeded_rng(shuffle_seed));
            prop_assert_eq!(cluster_count(&v, gap).unwrap(), cluster_count(&shuffled, gap).unwrap());
        }

        #[test]
        fn zero_bridges_means_closed_components(
            seed in any::<u64>(),
            levels in proptest::collection::vec(0.0f64..=1.0, 1..5),
        ) {
            use rand::Rng;
            // Opinions drawn from a few levels, graph from ER; drop every bridge.
            let mut rng = crate::rng::seeded_rng(seed);
            let n = 30;
            let opinions: Vec<f64> = (0..n).map(|_| levels[rng.random_range(0..levels.len())]).collect();
            let g = AdaptiveGraph::erdos_renyi(n, 4.0, &mut rng).unwrap();
            let kept: Vec<_> = g.edges().into_iter()
                .filter(|&(u, v)| (opinions[u as usize] - opinions[v as usize]).abs() < 0.2)
                .collect();
            let g = AdaptiveGraph::from_edges(n, kept).unwrap();
            prop_assert_eq!(community_bridge_count(&g, &opinions, 0.2), 0);
            prop_assert_eq!(component_count(&g, |_, _| true), tolerance_component_count(&g, &opinions, 0.2));
        }
    }
}
