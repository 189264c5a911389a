use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bus<T> {
    pub id: usize,
    /// Lower voltage limit, per-unit.
    pub v_min: T,
    /// Upper voltage limit, per-unit.
    pub v_max: T,
    /// Ids of devices attached to this bus.
    pub devices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Line<T> {
    pub id: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    /// Ohm.
    pub resistance: T,
    /// Ohm.
    pub reactance: T,
    /// Ampere.
    pub i_rated: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Household,
    Pv,
    ChargePoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Device {
    pub id: usize,
    pub bus: usize,
    pub kind: DeviceKind,
}

/// Radial network rooted at the slack bus.
///
/// Bus and line ids are their positions in `buses` and `lines`. The
/// constructor checks the tree property and precomputes a root-first
/// traversal order used by the sweep solver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkTopology<T> {
    buses: Vec<Bus<T>>,
    lines: Vec<Line<T>>,
    devices: Vec<Device>,
    slack_bus: usize,
    /// Nominal phase voltage in volt (1 pu).
    base_voltage: T,
    #[serde(skip)]
    parent_line: Vec<Option<usize>>,
    #[serde(skip)]
    order: Vec<usize>,
}

impl<T: Scalar> NetworkTopology<T> {
    pub fn new(
        buses: Vec<Bus<T>>,
        lines: Vec<Line<T>>,
        devices: Vec<Device>,
        slack_bus: usize,
        base_voltage: T,
    ) -> Result<Self> {
        let n = buses.len();
        if n == 0 {
            return Err(Error::Topology("network has no buses".into()));
        }
        if slack_bus >= n {
            return Err(Error::Topology(format!(
                "slack bus {slack_bus} does not exist"
            )));
        }
        if base_voltage <= T::zero() {
            return Err(Error::Topology("base voltage must be positive".into()));
        }
        for (i, bus) in buses.iter().enumerate() {
            if bus.id != i {
                return Err(Error::Topology(format!(
                    "bus at position {i} has id {}",
                    bus.id
                )));
            }
            if !(T::zero() < bus.v_min && bus.v_min < bus.v_max) {
                return Err(Error::Topology(format!(
                    "bus {i}: voltage limits must satisfy 0 < v_min < v_max"
                )));
            }
        }
        if lines.len() != n - 1 {
            return Err(Error::Topology(format!(
                "a radial network with {n} buses needs {} lines, found {}",
                n - 1,
                lines.len()
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (i, line) in lines.iter().enumerate() {
            if line.id != i {
                return Err(Error::Topology(format!(
                    "line at position {i} has id {}",
                    line.id
                )));
            }
            if line.from_bus >= n || line.to_bus >= n || line.from_bus == line.to_bus {
                return Err(Error::Topology(format!("line {i} has invalid endpoints")));
            }
            if line.i_rated <= T::zero() {
                return Err(Error::Topology(format!(
                    "line {i}: rated current must be positive"
                )));
            }
            let z2 = line.resistance * line.resistance + line.reactance * line.reactance;
            if z2 <= T::zero() {
                return Err(Error::Topology(format!("line {i}: zero impedance")));
            }
            adjacency[line.from_bus].push((line.to_bus, i));
            adjacency[line.to_bus].push((line.from_bus, i));
        }

        let mut parent_line = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([slack_bus]);
        seen[slack_bus] = true;
        while let Some(bus) = queue.pop_front() {
            order.push(bus);
            for &(next, line) in &adjacency[bus] {
                if Some(line) == parent_line[bus] {
                    continue;
                }
                if seen[next] {
                    return Err(Error::Topology(format!("cycle through line {line}")));
                }
                seen[next] = true;
                parent_line[next] = Some(line);
                queue.push_back(next);
            }
        }
        if order.len() != n {
            return Err(Error::Topology("network is not connected".into()));
        }

        for (i, dev) in devices.iter().enumerate() {
            if dev.id != i || dev.bus >= n {
                return Err(Error::Topology(format!(
                    "device {i} references a missing bus"
                )));
            }
            if !buses[dev.bus].devices.contains(&i) {
                return Err(Error::Topology(format!(
                    "device {i} is not listed on bus {}",
                    dev.bus
                )));
            }
        }

        Ok(Self {
            buses,
            lines,
            devices,
            slack_bus,
            base_voltage,
            parent_line,
            order,
        })
    }

    pub fn buses(&self) -> &[Bus<T>] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line<T>] {
        &self.lines
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn slack_bus(&self) -> usize {
        self.slack_bus
    }

    pub fn base_voltage(&self) -> T {
        self.base_voltage
    }

    /// Line feeding `bus` from the slack side; `None` for the slack bus.
    pub fn parent_line(&self, bus: usize) -> Option<usize> {
        self.parent_line[bus]
    }

    /// Parent-side endpoint of the line feeding `bus`.
    pub fn parent_bus(&self, bus: usize) -> Option<usize> {
        self.parent_line[bus].map(|l| {
            let line = &self.lines[l];
            if line.to_bus == bus {
                line.from_bus
            } else {
                line.to_bus
            }
        })
    }

    /// Buses in breadth-first order from the slack bus.
    pub fn root_first_order(&self) -> &[usize] {
        &self.order
    }

    pub fn devices_of_kind(&self, kind: DeviceKind) -> impl Iterator<Item = &Device> {
        self.devices.iter().filter(move |d| d.kind == kind)
    }

    pub fn lines_at(&self, bus: usize) -> impl Iterator<Item = &Line<T>> {
        self.lines
            .iter()
            .filter(move |l| l.from_bus == bus || l.to_bus == bus)
    }
}

/// Electrical data of one line class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub resistance_ohm: f64,
    pub reactance_ohm: f64,
    pub rated_current_a: f64,
}

/// Recipe for a feeder made of identical sub-districts.
///
/// With one sub-district the feeder chain hangs directly off the slack bus.
/// With several, a shared trunk line runs from the slack bus to a junction
/// bus and every sub-district chain starts with its own head line from that
/// junction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeederSpec {
    pub sub_districts: usize,
    pub buses_per_feeder: usize,
    pub households_per_bus: usize,
    pub pv_per_bus: usize,
    pub charge_points_per_bus: usize,
    pub trunk: LineSpec,
    pub head: LineSpec,
    pub segment: LineSpec,
    pub v_min: f64,
    pub v_max: f64,
    pub base_voltage: f64,
}

impl Default for FeederSpec {
    fn default() -> Self {
        Self {
            sub_districts: 1,
            buses_per_feeder: 11,
            households_per_bus: 5,
            pv_per_bus: 5,
            charge_points_per_bus: 5,
            trunk: LineSpec {
                resistance_ohm: 0.0001,
                reactance_ohm: 0.00005,
                rated_current_a: 12000.0,
            },
            head: LineSpec {
                resistance_ohm: 0.0018,
                reactance_ohm: 0.0009,
                rated_current_a: 950.0,
            },
            segment: LineSpec {
                resistance_ohm: 0.0018,
                reactance_ohm: 0.0009,
                rated_current_a: 950.0,
            },
            v_min: 0.95,
            v_max: 1.05,
            base_voltage: 230.0,
        }
    }
}

impl FeederSpec {
    /// Number of buses [`build_replicated_feeder`] produces.
    pub fn bus_count(&self) -> usize {
        let junction = usize::from(self.sub_districts > 1);
        1 + junction + self.sub_districts * self.buses_per_feeder
    }
}

pub fn build_replicated_feeder<T: Scalar>(spec: &FeederSpec) -> Result<NetworkTopology<T>> {
    if spec.sub_districts == 0 {
        return Err(Error::Topology("at least one sub-district required".into()));
    }
    if spec.buses_per_feeder == 0 {
        return Err(Error::Topology(
            "at least one bus per feeder required".into(),
        ));
    }
    let v_min = T::lit(spec.v_min);
    let v_max = T::lit(spec.v_max);
    let mut buses: Vec<Bus<T>> = Vec::with_capacity(spec.bus_count());
    let mut lines: Vec<Line<T>> = Vec::with_capacity(spec.bus_count() - 1);
    let mut devices = Vec::new();

    let add_bus = |buses: &mut Vec<Bus<T>>| {
        let id = buses.len();
        buses.push(Bus {
            id,
            v_min,
            v_max,
            devices: Vec::new(),
        });
        id
    };
    let add_line = |lines: &mut Vec<Line<T>>, from: usize, to: usize, ls: &LineSpec| {
        let id = lines.len();
        lines.push(Line {
            id,
            from_bus: from,
            to_bus: to,
            resistance: T::lit(ls.resistance_ohm),
            reactance: T::lit(ls.reactance_ohm),
            i_rated: T::lit(ls.rated_current_a),
        });
    };

    let slack = add_bus(&mut buses);
    let root = if spec.sub_districts > 1 {
        let junction = add_bus(&mut buses);
        add_line(&mut lines, slack, junction, &spec.trunk);
        junction
    } else {
        slack
    };

    for _ in 0..spec.sub_districts {
        let mut prev = root;
        for j in 0..spec.buses_per_feeder {
            let bus = add_bus(&mut buses);
            let ls = if j == 0 { &spec.head } else { &spec.segment };
            add_line(&mut lines, prev, bus, ls);
            for (kind, count) in [
                (DeviceKind::Household, spec.households_per_bus),
                (DeviceKind::Pv, spec.pv_per_bus),
                (DeviceKind::ChargePoint, spec.charge_points_per_bus),
            ] {
                for _ in 0..count {
                    let id = devices.len();
                    devices.push(Device { id, bus, kind });
                    buses[bus].devices.push(id);
                }
            }
            prev = bus;
        }
    }

    NetworkTopology::new(buses, lines, devices, slack, T::lit(spec.base_voltage))
}
