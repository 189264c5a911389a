use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// How a day's played mask enters the Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// `A += M Mᵀ` with the whole day's 0/1 mask.
    RankOne,
    /// `A += Σ eᵢ eᵢᵀ` over the instants set in the mask (semi-bandit).
    #[default]
    PerArm,
}

/// Bayesian linear regression with Gaussian Thompson sampling.
///
/// Holds the Gram matrix `A` (identity prior), the response accumulator `b`
/// and the posterior mean `A⁻¹ b`. Samples are drawn from
/// `N(A⁻¹ b, scale² A⁻¹)`.
#[derive(Debug, Clone)]
pub struct LinearLearner<T: Scalar> {
    gram: DMatrix<T>,
    response: DVector<T>,
    estimate: DVector<T>,
    /// Cholesky factor of `gram`, refreshed with the estimate.
    lower: DMatrix<T>,
    scale: T,
    rule: UpdateRule,
}

impl<T: Scalar> LinearLearner<T> {
    pub fn new(m: usize, scale: T, rule: UpdateRule) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("learner needs at least one arm".into()));
        }
        if scale < T::zero() || !scale.is_finite() {
            return Err(Error::InvalidInput(format!(
                "exploration scale {scale} must be ≥ 0"
            )));
        }
        Ok(Self {
            gram: DMatrix::identity(m, m),
            response: DVector::zeros(m),
            estimate: DVector::zeros(m),
            lower: DMatrix::identity(m, m),
            scale,
            rule,
        })
    }

    pub fn dim(&self) -> usize {
        self.response.len()
    }

    pub fn gram(&self) -> &DMatrix<T> {
        &self.gram
    }

    pub fn response(&self) -> &DVector<T> {
        &self.response
    }

    /// Posterior mean `A⁻¹ b`.
    pub fn estimate(&self) -> &DVector<T> {
        &self.estimate
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn rule(&self) -> UpdateRule {
        self.rule
    }

    /// One draw from `N(estimate, scale² A⁻¹)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        let m = self.dim();
        let z = DVector::from_fn(m, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
        if self.scale == T::zero() {
            return self.estimate.clone();
        }
        // A = L Lᵀ, so x = L⁻ᵀ z has covariance A⁻¹.
        let x = self
            .lower
            .tr_solve_lower_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        &self.estimate + x * self.scale
    }

    /// End-of-day update with a 0/1 mask and the matching observations.
    ///
    /// Observations must be zero wherever the mask is unset.
    pub fn update(&mut self, mask: &[bool], observations: &[T]) -> Result<()> {
        let m = self.dim();
        for len in [mask.len(), observations.len()] {
            if len != m {
                return Err(Error::Dimension {
                    expected: m,
                    found: len,
                });
            }
        }
        if let Some(i) = (0..m).find(|&i| !mask[i] && observations[i] != T::zero()) {
            return Err(Error::InvalidInput(format!(
                "observation at unmasked instant {i}"
            )));
        }
        if !mask.iter().any(|&x| x) {
            return Ok(());
        }
        let played: Vec<usize> = (0..m).filter(|&i| mask[i]).collect();
        match self.rule {
            UpdateRule::RankOne => {
                for &i in &played {
                    for &j in &played {
                        self.gram[(i, j)] += T::one();
                    }
                }
            }
            UpdateRule::PerArm => {
                for &i in &played {
                    self.gram[(i, i)] += T::one();
                }
            }
        }
        for (r, &o) in self.response.iter_mut().zip(observations) {
            *r += o;
        }
        self.refresh()
    }

    fn refresh(&mut self) -> Result<()> {
        let chol =
            self.gram.clone().cholesky().ok_or_else(|| {
                Error::InvalidInput("Gram matrix lost positive definiteness".into())
            })?;
        self.estimate = chol.solve(&self.response);
        self.lower = chol.unpack();
        Ok(())
    }

    pub fn snapshot(&self) -> LearnerSnapshot {
        LearnerSnapshot {
            m: self.dim(),
            gram: self.gram.iter().map(|x| x.as_f64()).collect(),
            response: self.response.iter().map(|x| x.as_f64()).collect(),
            scale: self.scale.as_f64(),
            rule: self.rule,
        }
    }

    pub fn from_snapshot(snap: &LearnerSnapshot) -> Result<Self> {
        let m = snap.m;
        if snap.gram.len() != m * m || snap.response.len() != m {
            return Err(Error::Checkpoint(format!(
                "learner snapshot is not {m}-dimensional"
            )));
        }
        let mut learner = Self::new(m, T::lit(snap.scale), snap.rule)?;
        learner.gram = DMatrix::from_iterator(m, m, snap.gram.iter().map(|&x| T::lit(x)));
        learner.response = DVector::from_iterator(m, snap.response.iter().map(|&x| T::lit(x)));
        learner.refresh().map_err(|_| {
            Error::Checkpoint("snapshot Gram matrix is not positive definite".into())
        })?;
        Ok(learner)
    }
}

/// Plain-data form of a learner for checkpoints (column-major Gram matrix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSnapshot {
    pub m: usize,
    pub gram: Vec<f64>,
    pub response: Vec<f64>,
    pub scale: f64,
    pub rule: UpdateRule,
}
