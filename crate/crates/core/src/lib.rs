//! Monte Carlo simulator for bounded-confidence (Deffuant) opinion dynamics on
//! adaptive networks with dissenter rewiring and opinion mutation.

pub mod analysis;
pub mod config;
pub mod distributions;
pub mod dynamics;
pub mod experiments;
pub mod graph;
pub mod rng;

pub use analysis::{ConvergenceReport, OpinionHistogram, TimedHistogram};
pub use distributions::DistributionSpec;
pub use dynamics::{
    DynamicsOptions, Interaction, ModelParams, MutationTarget, Opinion, RewireSearch, SimState, Simulation,
    Snapshot, StepOutcome,
};
pub use graph::{AdaptiveGraph, NodeId};
