use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Criticality;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginKind {
    Bus,
    Line,
}

/// Address of an agent in the neighbourhood graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRef {
    Line(usize),
    Bus(usize),
    Ev(usize),
}

/// The `(criticality, targets)` pair exchanged between neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityRequest {
    pub criticality: Criticality,
    /// EVs asked to cooperate, sorted ascending.
    pub target_evs: Vec<usize>,
    pub origin_agent: usize,
    pub origin_kind: OriginKind,
    pub instant: usize,
}

impl CriticalityRequest {
    pub fn targets(&self, ev: usize) -> bool {
        self.target_evs.binary_search(&ev).is_ok()
    }
}

/// Total order on requests, greatest = most critical.
///
/// Severity `|Cr|` first, then under-voltage/congestion over over-voltage,
/// then line congestion over bus voltage, then the lowest origin id.
pub fn priority_cmp(a: &CriticalityRequest, b: &CriticalityRequest) -> Ordering {
    let (ca, cb) = (a.criticality.value(), b.criticality.value());
    ca.abs()
        .total_cmp(&cb.abs())
        .then((ca > 0.0).cmp(&(cb > 0.0)))
        .then(a.origin_kind.cmp(&b.origin_kind))
        .then(b.origin_agent.cmp(&a.origin_agent))
}

/// Request an agent passes on after seeing `received`.
///
/// The agent's own request competes only when its criticality is nonzero.
/// Line congestion outranks any voltage request, so a bus hands on a
/// received line request even while its own voltage is out of bounds.
pub fn forward_request(
    own: Option<CriticalityRequest>,
    received: &[CriticalityRequest],
) -> Option<CriticalityRequest> {
    own.into_iter()
        .filter(|r| r.criticality.is_critical())
        .chain(
            received
                .iter()
                .filter(|r| r.criticality.is_critical())
                .cloned(),
        )
        .max_by(priority_cmp)
}

/// Size of `[X]`: `ceil(fraction · |E|)`, at least one.
pub fn target_count(pool: usize, fraction: f64) -> usize {
    ((fraction * pool as f64).ceil() as usize).max(1)
}

/// Up to `count` distinct EVs drawn uniformly without replacement.
pub fn sample_cooperation_targets<R: Rng + ?Sized>(
    pool: &[usize],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut out: Vec<usize> = if count >= pool.len() {
        pool.to_vec()
    } else {
        index::sample(rng, pool.len(), count)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    };
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn req(cr: f64, kind: OriginKind, origin: usize) -> CriticalityRequest {
        CriticalityRequest {
            criticality: Criticality::new(cr),
            target_evs: vec![origin],
            origin_agent: origin,
            origin_kind: kind,
            instant: 0,
        }
    }

    #[test]
    fn critical_line_forwards_its_own_request() {
        let own = req(1.0, OriginKind::Line, 4);
        let out = forward_request(Some(own.clone()), &[req(0.0, OriginKind::Bus, 1)]).unwrap();
        assert_eq!(out, own);
    }

    #[test]
    fn bus_passes_line_congestion_over_own_voltage() {
        let line = req(1.0, OriginKind::Line, 9);
        let out = forward_request(
            Some(req(-1.0, OriginKind::Bus, 2)),
            std::slice::from_ref(&line),
        )
        .unwrap();
        assert_eq!(out, line);
        let out = forward_request(
            Some(req(1.0, OriginKind::Bus, 0)),
            std::slice::from_ref(&line),
        )
        .unwrap();
        assert_eq!(out, line);
    }

    #[test]
    fn calm_bus_without_requests_is_silent() {
        assert!(forward_request(Some(req(0.0, OriginKind::Bus, 3)), &[]).is_none());
        assert!(forward_request(None, &[]).is_none());
    }

    #[test]
    fn non_critical_line_relays_the_most_critical() {
        let out = forward_request(
            None,
            &[
                req(-1.0, OriginKind::Bus, 1),
                req(1.0, OriginKind::Bus, 5),
                req(1.0, OriginKind::Bus, 3),
            ],
        )
        .unwrap();
        assert_eq!(out.origin_agent, 3);
        assert_eq!(out.criticality.value(), 1.0);
    }

    #[test]
    fn over_voltage_travels_when_nothing_worse_exists() {
        let out = forward_request(None, &[req(-1.0, OriginKind::Bus, 1)]).unwrap();
        assert_eq!(out.criticality.value(), -1.0);
    }

    #[test]
    fn target_sampling_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            sample_cooperation_targets(&[4, 2, 9], 5, &mut rng),
            vec![2, 4, 9]
        );
        assert!(sample_cooperation_targets(&[], 2, &mut rng).is_empty());
        let s = sample_cooperation_targets(&(0..50).collect::<Vec<_>>(), 7, &mut rng);
        assert_eq!(s.len(), 7);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(target_count(55, 0.05), 3);
        assert_eq!(target_count(0, 0.05), 1);
        assert_eq!(target_count(10, 0.05), 1);
    }

    #[test]
    fn target_sampling_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pool: Vec<usize> = (100..110).collect();
        let n = 100_000;
        let mut hits = [0usize; 10];
        for _ in 0..n {
            let s = sample_cooperation_targets(&pool, 1, &mut rng);
            hits[s[0] - 100] += 1;
        }
        let p = 0.1;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for h in hits {
            assert!((h as f64 - n as f64 * p).abs() < 3.0 * sigma, "{h}");
        }
    }
}
