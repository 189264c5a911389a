use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Simulation, Strategy};
use crate::bandit::LearnerSnapshot;
use crate::{Error, Learner, Result};

pub const CHECKPOINT_FORMAT: &str = "amas-checkpoint/v1";

/// Learner state of every EV plus the day counter.
///
/// Day-start samples are drawn from per-(EV, day) random streams, so no
/// generator state needs saving: a restored run continues exactly as an
/// uninterrupted one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub seed: u64,
    pub strategy: Strategy,
    /// Next day to simulate.
    pub day: usize,
    pub theta: Vec<LearnerSnapshot>,
    pub phi: Vec<LearnerSnapshot>,
}

impl Checkpoint {
    pub fn capture(sim: &Simulation) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            seed: sim.scenario().seed,
            strategy: sim.strategy(),
            day: sim.day(),
            theta: sim.theta_learners().iter().map(Learner::snapshot).collect(),
            phi: sim.pv_learners().iter().map(Learner::snapshot).collect(),
        }
    }

    /// Loads the learners into `sim`, which must run the same scenario.
    pub fn apply(&self, sim: &mut Simulation) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unsupported format `{}`, expected `{CHECKPOINT_FORMAT}`",
                self.format
            )));
        }
        let fleet = sim.scenario().fleet.len();
        if self.seed != sim.scenario().seed || self.theta.len() != fleet || self.phi.len() != fleet
        {
            return Err(Error::Checkpoint(
                "checkpoint belongs to a different scenario".into(),
            ));
        }
        let theta = self
            .theta
            .iter()
            .map(Learner::from_snapshot)
            .collect::<Result<Vec<_>>>()?;
        let phi = self
            .phi
            .iter()
            .map(Learner::from_snapshot)
            .collect::<Result<Vec<_>>>()?;
        if theta
            .iter()
            .chain(&phi)
            .any(|l| l.dim() != sim.scenario().m)
        {
            return Err(Error::Checkpoint(
                "learner dimension differs from the scenario".into(),
            ));
        }
        sim.restore(self.day, theta, phi);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}
