//! Scenario generation, the per-instant agent loop and checkpoints.

mod checkpoint;
mod engine;
mod flood;
mod profile;
mod scenario;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use engine::{EngineOptions, Simulation, Strategy};
pub use flood::{AgentGraph, FloodOutcome};
pub use profile::{ingest_profile, write_profile, IngestedProfile, ProfileKind};
pub use scenario::{
    generate_scenario, FleetConfig, HouseholdConfig, IrradianceConfig, PriceConfig, PvConfig,
    PvPanel, Scenario, ScenarioConfig, TimeConfig, TruncatedNormal,
};
