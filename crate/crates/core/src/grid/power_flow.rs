use nalgebra::Complex;
use serde::Serialize;

use super::NetworkTopology;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions<T> {
    /// Convergence threshold on the largest per-unit voltage change between sweeps.
    pub tolerance_pu: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for SweepOptions<T> {
    fn default() -> Self {
        Self {
            tolerance_pu: T::lit(1e-8),
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFlowSolution<T> {
    /// Per-unit voltage magnitude per bus.
    pub bus_voltages: Vec<T>,
    /// Current magnitude per line, ampere.
    pub line_currents: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
    /// Complex bus voltages in volt.
    #[serde(skip)]
    pub phasors: Vec<Complex<T>>,
}

/// Apparent power base for per-unit mismatch figures, VA.
pub const POWER_BASE_VA: f64 = 100_000.0;

fn magnitude<T: Scalar>(c: Complex<T>) -> T {
    (c.re * c.re + c.im * c.im).sqrt()
}

/// Backward-forward sweep with the default options.
///
/// `bus_loads_w` is the active power drawn at each bus (negative for net
/// export). Loads are constant-power at unity power factor.
pub fn solve_power_flow<T: Scalar>(
    net: &NetworkTopology<T>,
    bus_loads_w: &[T],
    slack_pu: T,
) -> Result<PowerFlowSolution<T>> {
    solve_power_flow_with(net, bus_loads_w, slack_pu, &SweepOptions::default())
}

pub fn solve_power_flow_with<T: Scalar>(
    net: &NetworkTopology<T>,
    bus_loads_w: &[T],
    slack_pu: T,
    opts: &SweepOptions<T>,
) -> Result<PowerFlowSolution<T>> {
    let n = net.buses().len();
    if bus_loads_w.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: bus_loads_w.len(),
        });
    }
    if bus_loads_w.iter().any(|p| !p.is_finite()) || !slack_pu.is_finite() || slack_pu <= T::zero()
    {
        return Err(Error::InvalidInput(
            "power-flow inputs must be finite".into(),
        ));
    }

    let base = net.base_voltage();
    let v0 = Complex::new(slack_pu * base, T::zero());
    let order = net.root_first_order();
    let impedance: Vec<Complex<T>> = net
        .lines()
        .iter()
        .map(|l| Complex::new(l.resistance, l.reactance))
        .collect();

    let mut v = vec![v0; n];
    let mut branch = vec![Complex::new(T::zero(), T::zero()); n];
    let mut line_current = vec![Complex::new(T::zero(), T::zero()); net.lines().len()];
    let floor = base * T::lit(1e-3);
    let mut converged = false;
    let mut iterations = 0;

    let backward =
        |v: &[Complex<T>], branch: &mut [Complex<T>], line_current: &mut [Complex<T>]| {
            for (b, acc) in branch.iter_mut().enumerate() {
                let s = Complex::new(bus_loads_w[b], T::zero());
                *acc = (s / v[b]).conj();
            }
            for &b in order.iter().rev() {
                if let (Some(line), Some(parent)) = (net.parent_line(b), net.parent_bus(b)) {
                    line_current[line] = branch[b];
                    let carried = branch[b];
                    branch[parent] += carried;
                }
            }
        };

    for it in 1..=opts.max_iterations {
        iterations = it;
        backward(&v, &mut branch, &mut line_current);

        let mut max_change = T::zero();
        let mut diverged = false;
        for &b in order {
            let (Some(line), Some(parent)) = (net.parent_line(b), net.parent_bus(b)) else {
                continue;
            };
            let updated = v[parent] - impedance[line] * line_current[line];
            let mag = magnitude(updated);
            if !mag.is_finite() || mag < floor {
                diverged = true;
            }
            let change = magnitude(updated - v[b]) / base;
            if change > max_change {
                max_change = change;
            }
            v[b] = updated;
        }
        if diverged {
            break;
        }
        if max_change < opts.tolerance_pu {
            converged = true;
            break;
        }
    }

    if converged {
        // currents consistent with the final voltages
        backward(&v, &mut branch, &mut line_current);
    }

    Ok(PowerFlowSolution {
        bus_voltages: v.iter().map(|&x| magnitude(x) / base).collect(),
        line_currents: line_current.iter().map(|&i| magnitude(i)).collect(),
        converged,
        iterations,
        phasors: v,
    })
}

/// Largest absolute complex power mismatch over all non-slack buses, in VA.
///
/// Line currents are recomputed from the voltage drop across each line
/// impedance and the resulting nodal balance is compared with the loads.
pub fn power_mismatch<T: Scalar>(
    net: &NetworkTopology<T>,
    bus_loads_w: &[T],
    solution: &PowerFlowSolution<T>,
) -> T {
    let v = &solution.phasors;
    let zero = Complex::new(T::zero(), T::zero());
    let mut drawn = vec![zero; v.len()];
    for line in net.lines() {
        let z = Complex::new(line.resistance, line.reactance);
        let i = (v[line.from_bus] - v[line.to_bus]) / z;
        // current leaving `from` towards `to`
        drawn[line.from_bus] -= i;
        drawn[line.to_bus] += i;
    }
    let mut worst = T::zero();
    for (b, &i) in drawn.iter().enumerate() {
        if b == net.slack_bus() {
            continue;
        }
        let s = v[b] * i.conj();
        let mismatch = magnitude(s - Complex::new(bus_loads_w[b], T::zero()));
        if mismatch > worst {
            worst = mismatch;
        }
    }
    worst
}

/// [`power_mismatch`] divided by [`POWER_BASE_VA`].
pub fn power_mismatch_pu<T: Scalar>(
    net: &NetworkTopology<T>,
    bus_loads_w: &[T],
    solution: &PowerFlowSolution<T>,
) -> T {
    power_mismatch(net, bus_loads_w, solution) / T::lit(POWER_BASE_VA)
}
