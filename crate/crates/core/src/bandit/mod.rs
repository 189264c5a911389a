//! Combinatorial linear Thompson Sampling.
//!
//! Each EV agent owns two Gaussian linear learners over its `m` daily
//! instants: one for the per-instant reward and one for the PV production of
//! its household. Super arms are sets of instants; with a linear reward the
//! best super arm of a given size is the top-k of the sampled parameter.

mod learner;
mod regret;
mod super_arm;

pub use learner::{LearnerSnapshot, LinearLearner, UpdateRule};
pub use regret::{pseudo_regret, DailySelection, RegretTrace};
pub use super_arm::{select_super_arm, SuperArm};

/// Learner of the per-instant reward vector θ.
pub type BanditState<T> = LinearLearner<T>;
/// Learner of the per-instant PV production vector φ (watt).
pub type PvLearnerState<T> = LinearLearner<T>;
