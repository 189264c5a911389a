//! Decentralized smart charging of electric-vehicle fleets on radial low-voltage
//! feeders.
//!
//! Every line, bus and EV of the feeder is an agent. Line and bus agents sense
//! the electrical state, turn limit violations into criticalities and flood
//! `(criticality, targets)` requests to their neighbours. EV agents pick their
//! charging instants with combinatorial linear Thompson Sampling, learning both
//! a per-instant reward vector and the PV production of their household.
//!
//! The numerical kernels ([`grid`], [`bandit`], the metric functions) are
//! generic over [`Scalar`]; the simulation engine runs on `f64` through the
//! aliases exported here.

pub mod agents;
pub mod bandit;
pub mod config;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod report;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision learner used by the simulation engine.
pub type Learner = bandit::LinearLearner<f64>;
/// Reward-parameter learner (θ) of an EV agent.
pub type BanditState = bandit::BanditState<f64>;
/// PV-production learner (φ) of an EV agent.
pub type PvLearnerState = bandit::PvLearnerState<f64>;
pub type NetworkTopology = grid::NetworkTopology<f64>;
pub type PowerFlowSolution = grid::PowerFlowSolution<f64>;
pub type SuperArm = bandit::SuperArm;

/// Single-precision variants, mostly useful for memory-bound sweeps.
pub type BanditStateF32 = bandit::BanditState<f32>;
pub type NetworkTopologyF32 = grid::NetworkTopology<f32>;
