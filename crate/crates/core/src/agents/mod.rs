//! Line, bus and EV agents.

mod criticality;
mod ev;
mod request;

pub use criticality::{bus_criticality, ev_reward, line_criticality, Criticality};
pub use ev::{ev_decide, ev_record, required_instants, ChargeDecision, EvProfile, EvState};
pub use request::{
    forward_request, priority_cmp, sample_cooperation_targets, target_count, AgentRef,
    CriticalityRequest, OriginKind,
};
