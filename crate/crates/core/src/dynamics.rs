//! Asynchronous update engine.
//!
//! One step picks a random node A and a random neighbor B. If their opinions
//! differ by less than `d` they move toward each other; otherwise A may drop the
//! link to B and link to a like-minded non-neighbor instead (probability `w`).
//! Independently, with probability `p` a random node replaces its opinion by a
//! draw from the basal distribution.

use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{DistributionError, DistributionSpec};
use crate::graph::{AdaptiveGraph, GraphError, NodeId};
use crate::rng::SimRng;

pub type Opinion = f64;

pub const DEFAULT_MU: f64 = 0.5;
pub const DEFAULT_PROBE_LIMIT: u32 = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("{field} must be in {range}, got {value}")]
    OutOfRange {
        field: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("{which} distribution: {source}")]
    Distribution {
        which: &'static str,
        source: DistributionError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("rewire precondition violated: {0}")]
    Precondition(String),
    #[error("invalid snapshot schedule: {0}")]
    InvalidSchedule(String),
}

/// Model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Number of nodes.
    pub n: u32,
    /// Target mean degree of the initial random graph.
    pub k_avg: f64,
    /// Tolerance: pairs closer than `d` make consensus.
    pub d: f64,
    /// Convergence rate of a consensus move.
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Rewiring probability for a dissenting pair.
    pub w: f64,
    /// Per-step mutation probability.
    pub p: f64,
    #[serde(default)]
    pub initial: DistributionSpec,
    #[serde(default)]
    pub basal: DistributionSpec,
}

fn default_mu() -> f64 {
    DEFAULT_MU
}

fn check(field: &'static str, range: &'static str, value: f64, ok: bool) -> Result<(), DynamicsError> {
    if ok {
        Ok(())
    } else {
        Err(DynamicsError::OutOfRange { field, range, value })
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let n = self.n as f64;
        check("n", "[2, 2^32)", n, self.n >= 2)?;
        check("k_avg", "[0, n-1]", self.k_avg, self.k_avg >= 0.0 && self.k_avg <= n - 1.0)?;
        check("d", "(0,1]", self.d, self.d > 0.0 && self.d <= 1.0)?;
        check("mu", "(0,0.5]", self.mu, self.mu > 0.0 && self.mu <= 0.5)?;
        check("w", "[0,1]", self.w, (0.0..=1.0).contains(&self.w))?;
        check("p", "[0,1]", self.p, (0.0..=1.0).contains(&self.p))?;
        self.initial
            .validate()
            .map_err(|source| DynamicsError::Distribution { which: "initial", source })?;
        self.basal
            .validate()
            .map_err(|source| DynamicsError::Distribution { which: "basal", source })?;
        Ok(())
    }

    /// `N / p`, the mean number of steps between two mutations of a given node.
    /// `None` when there is no mutation.
    pub fn mutation_timescale(&self) -> Option<f64> {
        (self.p > 0.0).then(|| self.n as f64 / self.p)
    }
}

/// How a rewiring node looks for a new partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewireSearch {
    /// Up to this many uniform random probes; the first acceptable node wins.
    /// Conditioned on success this is uniform over the acceptable nodes.
    Probes(u32),
    /// Enumerate every acceptable node and pick one uniformly.
    FullScan,
}

impl RewireSearch {
    /// `0` selects a full scan.
    pub fn from_probe_limit(limit: u32) -> Self {
        if limit == 0 {
            RewireSearch::FullScan
        } else {
            RewireSearch::Probes(limit)
        }
    }

    pub fn probe_limit(&self) -> u32 {
        match *self {
            RewireSearch::Probes(k) => k,
            RewireSearch::FullScan => 0,
        }
    }
}

impl Default for RewireSearch {
    fn default() -> Self {
        RewireSearch::Probes(DEFAULT_PROBE_LIMIT)
    }
}

/// Which node a mutation trial targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationTarget {
    /// A node drawn uniformly from the whole population.
    #[default]
    Independent,
    /// One of the two interacting nodes, chosen by a fair coin (A alone if isolated).
    Interacting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DynamicsOptions {
    pub rewire_search: RewireSearch,
    pub mutation_target: MutationTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interaction {
    Consensus,
    Rewired,
    RejectedNoRewire,
    IsolatedNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub interaction: Interaction,
    pub mutated: Option<NodeId>,
}

/// Graph, opinions and step counter of a running simulation.
#[derive(Debug, Clone)]
pub struct SimState {
    pub graph: AdaptiveGraph,
    pub opinions: Vec<Opinion>,
    pub step: u64,
}

impl SimState {
    pub fn new(graph: AdaptiveGraph, opinions: Vec<Opinion>) -> Self {
        assert_eq!(graph.node_count(), opinions.len(), "one opinion per node");
        SimState {
            graph,
            opinions,
            step: 0,
        }
    }

    pub fn opinion_sum(&self) -> f64 {
        self.opinions.iter().sum()
    }
}

/// Applies the consensus rule to a pair. Both outputs are computed from the
/// inputs; nothing changes unless `|oa - ob| < d`.
#[inline]
pub fn consensus_update(oa: Opinion, ob: Opinion, mu: f64, d: f64) -> (Opinion, Opinion) {
    let diff = oa - ob;
    if diff.abs() < d {
        let shift = mu * diff;
        (oa - shift, ob + shift)
    } else {
        (oa, ob)
    }
}

/// With probability `w`, moves the dissenting edge `{a, b}` to a uniformly chosen
/// node `c` that is not `a`, not yet linked to `a`, and within `d` of `a`'s
/// opinion. The edge is kept when the coin fails or no such node is found.
pub fn attempt_rewire<R: Rng + ?Sized>(
    state: &mut SimState,
    a: NodeId,
    b: NodeId,
    w: f64,
    d: f64,
    search: RewireSearch,
    rng: &mut R,
) -> Result<Interaction, DynamicsError> {
    if !state.graph.has_edge(a, b) {
        return Err(DynamicsError::Precondition(format!("{a}-{b} is not an edge")));
    }
    let gap = (state.opinions[a as usize] - state.opinions[b as usize]).abs();
    if gap < d {
        return Err(DynamicsError::Precondition(format!(
            "{a} and {b} differ by {gap} < d = {d}"
        )));
    }
    let coin = Bernoulli::new(w).map_err(|_| DynamicsError::OutOfRange {
        field: "w",
        range: "[0,1]",
        value: w,
    })?;
    Ok(rewire_dissenters(state, a, b, &coin, d, search, rng))
}

fn rewire_dissenters<R: Rng + ?Sized>(
    state: &mut SimState,
    a: NodeId,
    b: NodeId,
    coin: &Bernoulli,
    d: f64,
    search: RewireSearch,
    rng: &mut R,
) -> Interaction {
    if !coin.sample(rng) {
        return Interaction::RejectedNoRewire;
    }
    let target = match search {
        RewireSearch::Probes(limit) => probe_candidate(state, a, d, limit, rng),
        RewireSearch::FullScan => scan_candidate(state, a, d, rng),
    };
    match target {
        Some(c) => {
            state
                .graph
                .rewire_edge(a, b, c)
                .expect("candidate satisfies rewire preconditions");
            Interaction::Rewired
        }
        None => Interaction::RejectedNoRewire,
    }
}

#[inline]
fn acceptable(state: &SimState, a: NodeId, c: NodeId, d: f64) -> bool {
    c != a
        && (state.opinions[a as usize] - state.opinions[c as usize]).abs() < d
        && !state.graph.has_edge(a, c)
}

fn probe_candidate<R: Rng + ?Sized>(
    state: &SimState,
    a: NodeId,
    d: f64,
    limit: u32,
    rng: &mut R,
) -> Option<NodeId> {
    (0..limit)
        .map(|_| state.graph.random_node(rng))
        .find(|&c| acceptable(state, a, c, d))
}

fn scan_candidate<R: Rng + ?Sized>(state: &SimState, a: NodeId, d: f64, rng: &mut R) -> Option<NodeId> {
    let candidates: Vec<NodeId> = (0..state.graph.node_count() as NodeId)
        .filter(|&c| acceptable(state, a, c, d))
        .collect();
    match candidates.len() {
        0 => None,
        len => Some(candidates[rng.random_range(0..len as u32) as usize]),
    }
}

/// With probability `p`, replaces the opinion of a uniformly chosen node by a
/// draw from `basal` and returns that node.
pub fn mutate<R: Rng + ?Sized>(
    state: &mut SimState,
    p: f64,
    basal: &DistributionSpec,
    rng: &mut R,
) -> Option<NodeId> {
    if !rng.random_bool(p) {
        return None;
    }
    let m = state.graph.random_node(rng);
    state.opinions[m as usize] = basal.sample(rng);
    Some(m)
}

/// A simulation bound to its parameters and random stream.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub state: SimState,
    params: ModelParams,
    options: DynamicsOptions,
    rng: SimRng,
    rewire_coin: Bernoulli,
    mutation_coin: Bernoulli,
}

impl Simulation {
    /// Draws the initial graph, then the initial opinions, from `rng`, and keeps
    /// consuming the same stream for the dynamics.
    pub fn new(params: ModelParams, options: DynamicsOptions, mut rng: SimRng) -> Result<Self, DynamicsError> {
        params.validate()?;
        let graph = AdaptiveGraph::erdos_renyi(params.n as usize, params.k_avg, &mut rng)?;
        let opinions = params.initial.sample_vector(params.n as usize, &mut rng);
        Self::from_state(SimState::new(graph, opinions), params, options, rng)
    }

    pub fn from_state(
        state: SimState,
        params: ModelParams,
        options: DynamicsOptions,
        rng: SimRng,
    ) -> Result<Self, DynamicsError> {
        params.validate()?;
        if state.opinions.len() != params.n as usize || state.graph.node_count() != params.n as usize {
            return Err(DynamicsError::Precondition(format!(
                "state has {} opinions on {} nodes but n = {}",
                state.opinions.len(),
                state.graph.node_count(),
                params.n
            )));
        }
        let rewire_coin = Bernoulli::new(params.w).expect("validated");
        let mutation_coin = Bernoulli::new(params.p).expect("validated");
        Ok(Simulation {
            state,
            params,
            options,
            rng,
            rewire_coin,
            mutation_coin,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn options(&self) -> DynamicsOptions {
        self.options
    }

    pub fn step_count(&self) -> u64 {
        self.state.step
    }

    /// One interaction followed by one mutation trial.
    pub fn step(&mut self) -> StepOutcome {
        let state = &mut self.state;
        let rng = &mut self.rng;
        let d = self.params.d;

        let a = state.graph.random_node(rng);
        let partner = state.graph.random_neighbor(a, rng);
        let interaction = match partner {
            None => Interaction::IsolatedNode,
            Some(b) => {
                let (oa, ob) = (state.opinions[a as usize], state.opinions[b as usize]);
                if (oa - ob).abs() < d {
                    let (na, nb) = consensus_update(oa, ob, self.params.mu, d);
                    state.opinions[a as usize] = na;
                    state.opinions[b as usize] = nb;
                    Interaction::Consensus
                } else {
                    rewire_dissenters(state, a, b, &self.rewire_coin, d, self.options.rewire_search, rng)
                }
            }
        };

        let mutated = if self.mutation_coin.sample(rng) {
            let m = match (self.options.mutation_target, partner) {
                (MutationTarget::Independent, _) => state.graph.random_node(rng),
                (MutationTarget::Interacting, Some(b)) => {
                    if rng.random_bool(0.5) {
                        a
                    } else {
                        b
                    }
                }
                (MutationTarget::Interacting, None) => a,
            };
            state.opinions[m as usize] = self.params.basal.sample(rng);
            Some(m)
        } else {
            None
        };

        state.step += 1;
        StepOutcome { interaction, mutated }
    }

    /// Runs `steps` steps.
    pub fn advance(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// Runs until the step counter reaches `target` (no-op if already there).
    pub fn advance_to(&mut self, target: u64) {
        let now = self.state.step;
        if target > now {
            self.advance(target - now);
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            step: self.state.step,
            opinions: self.state.opinions.clone(),
            edges: self.state.graph.edges(),
        }
    }
}

/// Opinions and edge list at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub opinions: Vec<Opinion>,
    pub edges: Vec<(NodeId, NodeId)>,
}

/// Checks a schedule is strictly increasing, starts at 0 and ends at or before
/// `total_steps`.
pub fn validate_schedule(schedule: &[u64], total_steps: u64) -> Result<(), DynamicsError> {
    if schedule.first() != Some(&0) {
        return Err(DynamicsError::InvalidSchedule("schedule must start with step 0".into()));
    }
    if let Some(w) = schedule.windows(2).find(|w| w[0] >= w[1]) {
        return Err(DynamicsError::InvalidSchedule(format!(
            "schedule must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    if let Some(&last) = schedule.last() {
        if last > total_steps {
            return Err(DynamicsError::InvalidSchedule(format!(
                "step {last} exceeds total_steps {total_steps}"
            )));
        }
    }
    Ok(())
}

/// Builds a fresh simulation from `rng` and runs it for `total_steps`, taking a
/// snapshot at every scheduled step.
pub fn run(
    params: &ModelParams,
    options: DynamicsOptions,
    total_steps: u64,
    schedule: &[u64],
    rng: SimRng,
) -> Result<Vec<Snapshot>, DynamicsError> {
    validate_schedule(schedule, total_steps)?;
    let mut sim = Simulation::new(params.clone(), options, rng)?;
    let mut out = Vec::with_capacity(schedule.len());
    for &t in schedule {
        sim.advance_to(t);
        out.push(sim.snapshot());
    }
    sim.advance_to(total_steps);
    Ok(out)
}
