//! Statistical checks against independently computed references.

use opiniond_core::analysis::{community_bridge_count, histogram, ks_statistic};
use opiniond_core::dynamics::{mutate, run};
use opiniond_core::rng::{seeded_rng, stream_rng};
use opiniond_core::*;
use rand::Rng;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

/// Asymptotic two-sided KS critical value at the 1% level.
fn ks_crit_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

fn params(n: u32, k_avg: f64, d: f64, w: f64, p: f64) -> ModelParams {
    ModelParams {
        n,
        k_avg,
        d,
        mu: 0.5,
        w,
        p,
        initial: DistributionSpec::Uniform,
        basal: DistributionSpec::Uniform,
    }
}

#[test]
fn er_mean_degree_over_seeds() {
    let n = 1000;
    let mut total = 0.0;
    for seed in 0..50 {
        let g = AdaptiveGraph::erdos_renyi(n, 10.0, &mut seeded_rng(seed)).unwrap();
        total += 2.0 * g.edge_count() as f64 / n as f64;
    }
    let mean = total / 50.0;
    assert!((9.5..=10.5).contains(&mean), "mean degree {mean}");
}

#[test]
fn er_degrees_are_binomial() {
    let (n, k) = (1000usize, 10.0);
    let mut counts = vec![0u64; n];
    let seeds = 20;
    for seed in 0..seeds {
        let g = AdaptiveGraph::erdos_renyi(n, k, &mut stream_rng(seed, 3)).unwrap();
        for v in 0..n as NodeId {
            counts[g.degree(v)] += 1;
        }
    }
    let total = (n as u64 * seeds) as f64;
    let binom = Binomial::new(k / (n - 1) as f64, (n - 1) as u64).unwrap();

    // Merge cells from both tails until every expected count is at least 5.
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for deg in 0..n {
        obs += counts[deg] as f64;
        exp += binom.pmf(deg as u64) * total;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    let last = cells.last_mut().unwrap();
    last.0 += obs;
    last.1 += exp;

    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (cells.len() - 1) as f64;
    let crit = ChiSquared::new(df).unwrap().inverse_cdf(0.99);
    assert!(stat < crit, "chi-square {stat} >= {crit} with {df} df");
}

#[test]
fn random_node_and_neighbor_are_uniform() {
    let g = AdaptiveGraph::from_edges(4, [(0, 1), (1, 2)]).unwrap();
    let mut rng = seeded_rng(11);
    let mut counts = [0u32; 4];
    for _ in 0..100_000 {
        counts[g.random_node(&mut rng) as usize] += 1;
    }
    for c in counts {
        assert!((c as f64 / 1e5 - 0.25).abs() < 0.01, "{counts:?}");
    }

    let star = AdaptiveGraph::from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
    let mut counts = [0u32; 5];
    for _ in 0..100_000 {
        counts[star.random_neighbor(0, &mut rng).unwrap() as usize] += 1;
    }
    assert_eq!(counts[0], 0);
    for c in &counts[1..] {
        assert!((*c as f64 / 1e5 - 0.25).abs() < 0.01, "{counts:?}");
    }
}

/// Composite Simpson rule.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for i in 1..intervals {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn power_law_mean_matches_quadrature() {
    let (gamma, x_min): (f64, f64) = (3.0, 0.01);
    let raw = |x: f64| x.powf(-gamma);
    // Substituting x = e^s keeps the integrand smooth near x_min.
    let (a, b) = (x_min.ln(), 0.0);
    let norm = simpson(|s| raw(s.exp()) * s.exp(), a, b, 20_000);
    let first = simpson(|s| s.exp() * raw(s.exp()) * s.exp(), a, b, 20_000);
    let expected = first / norm;

    let spec = DistributionSpec::PowerLaw { gamma, x_min };
    let xs = spec.sample_vector(1_000_000, &mut seeded_rng(21));
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!((mean - expected).abs() < 3.0 * se, "mean {mean} vs {expected} (se {se})");
}

#[test]
fn uniform_mean() {
    let xs = DistributionSpec::Uniform.sample_vector(1_000_000, &mut seeded_rng(22));
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    assert!((mean - 0.5).abs() < 0.002, "{mean}");
}

#[test]
fn ks_against_analytic_cdfs() {
    let n = 100_000;
    let xs = DistributionSpec::Uniform.sample_vector(n, &mut seeded_rng(23));
    let stat = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
    assert!(stat < ks_crit_1pct(n), "uniform KS {stat}");

    let xs = DistributionSpec::power_law().sample_vector(n, &mut seeded_rng(24));
    let cdf = |x: f64| ((1e4 - x.powi(-2)) / (1e4 - 1.0)).clamp(0.0, 1.0);
    let stat = ks_statistic(&xs, |x| if x <= 0.01 { 0.0 } else { cdf(x) });
    assert!(stat < ks_crit_1pct(n), "power-law KS {stat}");
}

#[test]
fn power_law_puts_mass_near_zero() {
    let xs = DistributionSpec::power_law().sample_vector(100_000, &mut seeded_rng(25));
    let h = histogram(&xs, 20).unwrap();
    assert!(h.mass()[..4].windows(2).all(|w| w[0] > w[1]), "{:?}", h.mass());
    assert!(h.mass()[0] > 0.9);
}

#[test]
fn mutation_draws_follow_basal() {
    let graph = AdaptiveGraph::empty(10);
    let mut state = SimState::new(graph, vec![0.5; 10]);
    let mut rng = seeded_rng(26);
    let basal = DistributionSpec::power_law();
    let mut drawn = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        let m = mutate(&mut state, 1.0, &basal, &mut rng).expect("p = 1 always mutates");
        drawn.push(state.opinions[m as usize]);
    }
    let cdf = |x: f64| if x <= 0.01 { 0.0 } else { ((1e4 - x.powi(-2)) / (1e4 - 1.0)).min(1.0) };
    let stat = ks_statistic(&drawn, cdf);
    assert!(stat < ks_crit_1pct(drawn.len()), "KS {stat}");
}

#[test]
fn uniform_histogram_bins() {
    let mut rng = seeded_rng(27);
    let xs: Vec<f64> = (0..1_000_000).map(|_| rng.random::<f64>()).collect();
    let h = histogram(&xs, 20).unwrap();
    for m in h.mass() {
        assert!((m - 0.05).abs() < 0.002, "{m}");
    }
    assert!((h.mass().iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn opinion_sum_is_conserved_without_mutation() {
    let mut sim = Simulation::new(params(1000, 10.0, 0.25, 0.5, 0.0), DynamicsOptions::default(), seeded_rng(28)).unwrap();
    let before = sim.state.opinion_sum();
    sim.advance(1_000_000);
    let drift = (sim.state.opinion_sum() - before).abs();
    assert!(drift < 1e-6, "drift {drift}");
}

#[test]
fn example_one_snapshot_schedule() {
    let schedule = [0, 50_000, 150_000, 1_500_000];
    let snaps = run(
        &params(10_000, 20.0, 0.25, 0.5, 0.1),
        DynamicsOptions::default(),
        1_500_000,
        &schedule,
        seeded_rng(29),
    )
    .unwrap();
    assert_eq!(snaps.iter().map(|s| s.step).collect::<Vec<_>>(), schedule);
    let edges = snaps[0].edges.len();
    assert!(snaps.iter().all(|s| s.edges.len() == edges && s.opinions.len() == 10_000));
}

#[test]
fn frozen_system_has_no_bridges() {
    let mut sim = Simulation::new(params(100, 6.0, 0.25, 0.5, 0.0), DynamicsOptions::default(), seeded_rng(30)).unwrap();
    sim.advance(1_000_000);
    assert_eq!(community_bridge_count(&sim.state.graph, &sim.state.opinions, 0.25), 0);
}
