use std::cmp::Ordering;
use std::collections::VecDeque;

use crate::agents::{priority_cmp, AgentRef, CriticalityRequest};
use crate::NetworkTopology;

/// Neighbourhood graph of the agents.
///
/// Line agents neighbour their two endpoint buses; bus agents neighbour
/// their incident lines and the EVs plugged in there. Node order is all
/// lines, then all buses, then all EVs.
#[derive(Debug, Clone)]
pub struct AgentGraph {
    lines: usize,
    buses: usize,
    evs: usize,
    adjacency: Vec<Vec<usize>>,
}

/// Result of flooding one instant's requests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FloodOutcome {
    /// Every request delivered to each EV, in arrival order.
    pub delivered: Vec<Vec<CriticalityRequest>>,
    /// Micro-rounds in which at least one message moved.
    pub rounds: usize,
    pub messages: usize,
}

impl AgentGraph {
    pub fn new(net: &NetworkTopology, ev_buses: &[usize]) -> Self {
        let lines = net.lines().len();
        let buses = net.buses().len();
        let evs = ev_buses.len();
        let mut adjacency = vec![Vec::new(); lines + buses + evs];
        for line in net.lines() {
            for bus in [line.from_bus, line.to_bus] {
                adjacency[line.id].push(lines + bus);
                adjacency[lines + bus].push(line.id);
            }
        }
        for (ev, &bus) in ev_buses.iter().enumerate() {
            adjacency[lines + buses + ev].push(lines + bus);
            adjacency[lines + bus].push(lines + buses + ev);
        }
        Self {
            lines,
            buses,
            evs,
            adjacency,
        }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn node(&self, agent: AgentRef) -> usize {
        match agent {
            AgentRef::Line(i) => i,
            AgentRef::Bus(i) => self.lines + i,
            AgentRef::Ev(i) => self.lines + self.buses + i,
        }
    }

    pub fn agent(&self, node: usize) -> AgentRef {
        if node < self.lines {
            AgentRef::Line(node)
        } else if node < self.lines + self.buses {
            AgentRef::Bus(node - self.lines)
        } else {
            AgentRef::Ev(node - self.lines - self.buses)
        }
    }

    pub fn neighbours(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// Longest shortest path between two agents.
    pub fn diameter(&self) -> usize {
        let mut best = 0;
        let mut dist = vec![usize::MAX; self.len()];
        for src in 0..self.len() {
            dist.fill(usize::MAX);
            dist[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        best = best.max(dist[v]);
                        queue.push_back(v);
                    }
                }
            }
        }
        best
    }

    /// Monotone flooding to quiescence.
    ///
    /// `own` holds the request each line/bus agent originates this instant
    /// (indexed by node). An agent sends to all neighbours whenever the best
    /// request it has seen improves on what it last sent. EV agents only
    /// listen.
    pub fn flood(&self, own: &[Option<CriticalityRequest>]) -> FloodOutcome {
        let ev_base = self.lines + self.buses;
        let mut outcome = FloodOutcome {
            delivered: vec![Vec::new(); self.evs],
            ..FloodOutcome::default()
        };
        let mut sent: Vec<Option<CriticalityRequest>> = vec![None; self.len()];
        let mut outbox: Vec<(usize, CriticalityRequest)> = Vec::new();
        for (node, req) in own.iter().enumerate().take(ev_base) {
            if let Some(r) = req.as_ref().filter(|r| r.criticality.is_critical()) {
                sent[node] = Some(r.clone());
                outbox.push((node, r.clone()));
            }
        }

        while !outbox.is_empty() {
            outcome.rounds += 1;
            let mut inbox: Vec<Vec<CriticalityRequest>> = vec![Vec::new(); self.len()];
            for (from, req) in outbox.drain(..) {
                for &to in &self.adjacency[from] {
                    inbox[to].push(req.clone());
                    outcome.messages += 1;
                }
            }
            for (node, received) in inbox.into_iter().enumerate() {
                if received.is_empty() {
                    continue;
                }
                if node >= ev_base {
                    outcome.delivered[node - ev_base].extend(received);
                    continue;
                }
                let Some(best) = received.into_iter().max_by(priority_cmp) else {
                    continue;
                };
                let improves = match &sent[node] {
                    None => true,
                    Some(prev) => priority_cmp(&best, prev) == Ordering::Greater,
                };
                if improves {
                    sent[node] = Some(best.clone());
                    outbox.push((node, best));
                }
            }
        }
        outcome
    }
}
