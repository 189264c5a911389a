//! Radial feeder model and its electrical state.

mod power_flow;
mod pv;
mod topology;

pub use power_flow::{
    power_mismatch, power_mismatch_pu, solve_power_flow, solve_power_flow_with, PowerFlowSolution,
    SweepOptions, POWER_BASE_VA,
};
pub use pv::pv_power;
pub use topology::{
    build_replicated_feeder, Bus, Device, DeviceKind, FeederSpec, Line, LineSpec, NetworkTopology,
};
