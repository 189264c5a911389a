use std::fmt;

use serde::{Deserialize, Serialize};

/// Agent distress in `[-1, 1]`; `0` is satisfied.
///
/// `+1` marks congestion or under-voltage, `-1` over-voltage.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Criticality(f64);

impl Criticality {
    pub const NONE: Criticality = Criticality(0.0);
    pub const CRITICAL: Criticality = Criticality(1.0);
    pub const OVER_VOLTAGE: Criticality = Criticality(-1.0);

    /// Clamps into `[-1, 1]`.
    pub fn new(value: f64) -> Self {
        Criticality(value.clamp(-1.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_critical(self) -> bool {
        self.0 != 0.0
    }
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn line_criticality(current: f64, rated: f64) -> Criticality {
    if current > rated {
        Criticality::CRITICAL
    } else {
        Criticality::NONE
    }
}

/// Strict inequalities: a voltage sitting on a limit is fine.
pub fn bus_criticality(v: f64, v_min: f64, v_max: f64) -> Criticality {
    if v < v_min {
        Criticality::CRITICAL
    } else if v > v_max {
        Criticality::OVER_VOLTAGE
    } else {
        Criticality::NONE
    }
}

/// Reward of a charging instant.
///
/// With any critical neighbour the reward is `-max(neighbours)`, so
/// congestion costs `-1` and over-voltage pays `+1`. Otherwise it is
/// `1 - cost`, where `cost` is the EV's own criticality (normalized price).
pub fn ev_reward(cost: Criticality, neighbours: &[Criticality]) -> f64 {
    let critical = neighbours.iter().filter(|c| c.is_critical());
    match critical.map(|c| c.value()).reduce(f64::max) {
        Some(worst) => -worst,
        None => 1.0 - cost.value(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_threshold_is_strict() {
        assert_eq!(line_criticality(105.0, 100.0), Criticality::CRITICAL);
        assert_eq!(line_criticality(100.0, 100.0), Criticality::NONE);
        assert_eq!(line_criticality(50.0, 100.0), Criticality::NONE);
    }

    #[test]
    fn bus_limits() {
        assert_eq!(bus_criticality(0.93, 0.95, 1.05).value(), 1.0);
        assert_eq!(bus_criticality(1.06, 0.95, 1.05).value(), -1.0);
        assert_eq!(bus_criticality(1.00, 0.95, 1.05).value(), 0.0);
        assert_eq!(bus_criticality(0.95, 0.95, 1.05).value(), 0.0);
        assert_eq!(bus_criticality(1.05, 0.95, 1.05).value(), 0.0);
    }

    #[test]
    fn reward_branches() {
        let c = Criticality::new;
        assert_eq!(ev_reward(c(0.4), &[c(1.0), c(0.0)]), -1.0);
        assert!((ev_reward(c(0.3), &[]) - 0.7).abs() < 1e-15);
        assert!((ev_reward(c(0.3), &[c(0.0), c(0.0)]) - 0.7).abs() < 1e-15);
        assert_eq!(ev_reward(c(0.9), &[c(-1.0)]), 1.0);
        assert_eq!(ev_reward(c(0.9), &[c(-1.0), c(1.0)]), -1.0);
    }

    #[test]
    fn constructor_clamps() {
        assert_eq!(Criticality::new(3.0).value(), 1.0);
        assert_eq!(Criticality::new(-3.0).value(), -1.0);
    }
}
