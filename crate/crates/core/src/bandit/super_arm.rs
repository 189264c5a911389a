use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// A set of instants chosen for charging.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperArm {
    m: usize,
    /// Selected instants in ascending order.
    selected: Vec<usize>,
}

impl SuperArm {
    pub fn new(m: usize, mut selected: Vec<usize>) -> Result<Self> {
        selected.sort_unstable();
        selected.dedup();
        if let Some(&bad) = selected.iter().find(|&&i| i >= m) {
            return Err(Error::InvalidInput(format!(
                "instant {bad} outside [0, {m})"
            )));
        }
        Ok(Self { m, selected })
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        Self {
            m: mask.len(),
            selected: (0..mask.len()).filter(|&i| mask[i]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.selected.binary_search(&i).is_ok()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.m];
        for &i in &self.selected {
            mask[i] = true;
        }
        mask
    }

    /// Linear super-arm value `Sᵀθ`.
    pub fn value<T: Scalar>(&self, theta: &[T]) -> T {
        self.selected
            .iter()
            .fold(T::zero(), |acc, &i| acc + theta[i])
    }
}

/// Top-`k` candidates under `theta`; equal values go to the lower instant.
pub fn select_super_arm<T: Scalar>(
    theta: &[T],
    candidates: &[usize],
    k: usize,
) -> Result<SuperArm> {
    let m = theta.len();
    if k > candidates.len() {
        return Err(Error::TooFewCandidates {
            k,
            available: candidates.len(),
        });
    }
    let mut pool = candidates.to_vec();
    if let Some(&bad) = pool.iter().find(|&&i| i >= m) {
        return Err(Error::InvalidInput(format!(
            "candidate {bad} outside [0, {m})"
        )));
    }
    if k == 0 {
        return SuperArm::new(m, Vec::new());
    }
    let order = |a: &usize, b: &usize| {
        theta[*b]
            .partial_cmp(&theta[*a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    };
    if k < pool.len() {
        pool.select_nth_unstable_by(k - 1, order);
        pool.truncate(k);
    }
    SuperArm::new(m, pool)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_largest_values() {
        let arm = select_super_arm(&[0.9, 0.1, 0.5, 0.7], &[0, 1, 2, 3], 2).unwrap();
        assert_eq!(arm.selected(), &[0, 3]);
        assert_eq!(arm.mask(), vec![true, false, false, true]);
        assert!((arm.value(&[0.9_f64, 0.1, 0.5, 0.7]) - 1.6).abs() < 1e-15);
    }

    #[test]
    fn zero_k_and_forced_candidates() {
        assert!(select_super_arm(&[1.0, 2.0], &[0, 1], 0)
            .unwrap()
            .is_empty());
        let arm = select_super_arm(&[5.0, 4.0, -1.0, -2.0], &[2, 3], 2).unwrap();
        assert_eq!(arm.selected(), &[2, 3]);
    }

    #[test]
    fn ties_prefer_lower_instant() {
        let arm = select_super_arm(&[0.5, 0.5, 0.5, 0.5], &[3, 1, 2, 0], 2).unwrap();
        assert_eq!(arm.selected(), &[0, 1]);
    }

    #[test]
    fn errors_when_k_exceeds_candidates() {
        assert!(matches!(
            select_super_arm(&[0.0; 4], &[1, 2], 3),
            Err(Error::TooFewCandidates { k: 3, available: 2 })
        ));
        assert!(select_super_arm(&[0.0; 4], &[7], 1).is_err());
    }
}
