use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{normal_ln_pdf, Real};

/// One-dimensional Gaussian mixture with components sorted by mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MixtureModel<T> {
    pub mu: Vec<T>,
    pub precision: Vec<T>,
    pub weight: Vec<T>,
}

impl<T: Real> MixtureModel<T> {
    /// Sorts the components by mean and checks the model invariants.
    pub fn new(mu: Vec<T>, precision: Vec<T>, weight: Vec<T>) -> Result<Self> {
        if mu.is_empty() || mu.len() != precision.len() || mu.len() != weight.len() {
            return Err(Error::InvalidArgument("mixture parameter lengths differ or are empty".into()));
        }
        let mut order: Vec<usize> = (0..mu.len()).collect();
        order.sort_by(|&a, &b| mu[a].partial_cmp(&mu[b]).unwrap_or(std::cmp::Ordering::Equal));
        let model = Self {
            mu: order.iter().map(|&i| mu[i]).collect(),
            precision: order.iter().map(|&i| precision[i]).collect(),
            weight: order.iter().map(|&i| weight[i]).collect(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Degenerate("component means must be strictly increasing".into()));
        }
        if self.precision.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
            return Err(Error::Degenerate("component precisions must be positive".into()));
        }
        let total: T = self.weight.iter().copied().sum();
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
        if (total - T::one()).abs() > tol || self.weight.iter().any(|&w| w < T::zero()) {
            return Err(Error::Degenerate(format!("mixing weights must sum to one (got {total})")));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    /// `ln(π_k N(x | μ_k, S_k))`.
    #[inline]
    pub fn ln_weighted_density(&self, k: usize, x: T) -> T {
        self.weight[k].ln() + normal_ln_pdf(x, self.mu[k], self.precision[k])
    }

    /// Mixture log-likelihood of a sample.
    pub fn log_likelihood(&self, xs: &[T]) -> T {
        let mut buf = vec![T::zero(); self.k()];
        xs.iter()
            .map(|&x| {
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = self.ln_weighted_density(k, x);
                }
                crate::num::log_sum_exp(&buf)
            })
            .sum()
    }

    /// 1-based power label of component `k`: the lowest-mean component is
    /// idle and takes label `K`, the rest count up from 1.
    pub fn paper_label(&self, k: usize) -> usize {
        if k == 0 {
            self.k()
        } else {
            k
        }
    }
}
