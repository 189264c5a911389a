use serde::Serialize;

use super::{select_super_arm, SuperArm};
use crate::{Error, Result, Scalar};

/// What an agent played on one day, and its estimate at that time.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySelection<T> {
    pub arm: SuperArm,
    pub estimate: Vec<T>,
    /// Instants the optimal super arm may use that day.
    pub candidates: Vec<usize>,
}

/// Cumulative regret after each day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretTrace<T> {
    /// `Σ_d (S*ᵀθ − S_dᵀθ̂_d)`: played arm valued by the day's estimate.
    pub estimated: Vec<T>,
    /// `Σ_d (S*ᵀθ − S_dᵀθ)`: played arm valued by the true parameter.
    pub realized: Vec<T>,
}

/// Pseudo-regret against the best super arm of the same size under `true_theta`.
pub fn pseudo_regret<T: Scalar>(
    true_theta: &[T],
    days: &[DailySelection<T>],
) -> Result<RegretTrace<T>> {
    let m = true_theta.len();
    let mut estimated = Vec::with_capacity(days.len());
    let mut realized = Vec::with_capacity(days.len());
    let (mut est_sum, mut real_sum) = (T::zero(), T::zero());
    for day in days {
        if day.arm.dim() != m {
            return Err(Error::Dimension {
                expected: m,
                found: day.arm.dim(),
            });
        }
        if day.estimate.len() != m {
            return Err(Error::Dimension {
                expected: m,
                found: day.estimate.len(),
            });
        }
        let best = select_super_arm(true_theta, &day.candidates, day.arm.len())?;
        let optimum = best.value(true_theta);
        est_sum += optimum - day.arm.value(&day.estimate);
        real_sum += optimum - day.arm.value(true_theta);
        estimated.push(est_sum);
        realized.push(real_sum);
    }
    Ok(RegretTrace {
        estimated,
        realized,
    })
}
