//! Prediction-versus-transmission planning for one anchored hypothesis.
//!
//! The belief `p` is the probability that the primary still sits at the
//! anchored level `k`, `τ` slots after anchoring.

mod montecarlo;
mod solve;

pub use montecarlo::{monte_carlo_value, monte_carlo_value_with, DurationModel, McEstimate};
pub use solve::{solve_policy, MIN_RECOMMENDED_GRID, solve_value, LevelPolicy, PolicyTable, SolveOptions, ValueGrids};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::sensing::{survival, SenseModel};

/// Scan cap for [`horizon`].
pub const HORIZON_SCAN_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BeliefState<T> {
    pub k: usize,
    pub tau: usize,
    pub p: T,
}

impl<T: Real> BeliefState<T> {
    /// Fresh anchor at level `k`.
    pub fn anchored(k: usize) -> Self {
        Self { k, tau: 0, p: T::one() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Predict,
    Transmit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ack {
    Positive,
    Negative,
}

/// Per-slot match reward `D`, mismatch penalty `Y` and block length `τ_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RewardSpec<T> {
    pub d: Vec<T>,
    pub y: Vec<T>,
    pub tau_s: usize,
}

impl<T: Real> RewardSpec<T> {
    pub fn new(d: Vec<T>, y: Vec<T>, tau_s: usize) -> Result<Self> {
        let rs = Self { d, y, tau_s };
        rs.validate()?;
        Ok(rs)
    }

    /// `D ≡ Y ≡ 1` over `k` levels.
    pub fn unit(k: usize, tau_s: usize) -> Self {
        Self {
            d: vec![T::one(); k],
            y: vec![T::one(); k],
            tau_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_s == 0 {
            return Err(Error::InvalidArgument("tau_s must be at least 1".into()));
        }
        if self.d.len() != self.y.len() {
            return Err(Error::InvalidArgument("D and Y lengths differ".into()));
        }
        if self.d.iter().chain(&self.y).any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidArgument("rewards and penalties must be positive".into()));
        }
        Ok(())
    }

    fn check_levels(&self, k: usize) -> Result<()> {
        if self.d.len() != k {
            return Err(Error::InvalidArgument(format!(
                "reward spec covers {} levels, sense model has {k}",
                self.d.len()
            )));
        }
        Ok(())
    }

    /// `Σ_j C[k][j] Y_j`.
    pub fn expected_penalty(&self, sm: &SenseModel<T>, k: usize) -> T {
        sm.c[k].iter().zip(&self.y).map(|(&c, &y)| c * y).sum()
    }
}

/// `Σ_i C[k][i] H[i][j]`: chance of observing `j` once the PT has left `k`.
pub fn departed_observation<T: Real>(sm: &SenseModel<T>, k: usize, j: usize) -> T {
    (0..sm.k()).map(|i| sm.c[k][i] * sm.h[i][j]).sum()
}

fn survival_value<T: Real>(nu: T, tau: usize, tau0: usize) -> T {
    survival(nu, tau as u64, tau0 as u64).value
}

/// Posterior after predicting at `τ` and observing level `j` one slot later.
pub fn belief_update_predict<T: Real>(b: BeliefState<T>, obs: usize, sm: &SenseModel<T>) -> Result<BeliefState<T>> {
    let pg = b.p * survival_value(sm.nu_hat, b.tau, 1);
    let stay = pg * sm.h[b.k][obs];
    let den = stay + (T::one() - pg) * departed_observation(sm, b.k, obs);
    if !(den > T::zero()) {
        return Err(Error::Numerical(format!("observation {obs} has zero probability under belief {b:?}")));
    }
    Ok(BeliefState {
        k: b.k,
        tau: b.tau + 1,
        p: (stay / den).min(T::one()),
    })
}

/// Posterior after a block transmitted at `τ` returns `ack`.
pub fn belief_update_transmit<T: Real>(b: BeliefState<T>, ack: Ack, sm: &SenseModel<T>, tau_s: usize) -> Result<BeliefState<T>> {
    let tau = b.tau + tau_s;
    let p = match ack {
        Ack::Negative => T::zero(),
        Ack::Positive => {
            let pg = b.p * survival_value(sm.nu_hat, b.tau, tau_s);
            let den = pg + (T::one() - pg) * sm.ack_after_departure(b.k);
            if !(den > T::zero()) {
                return Err(Error::Numerical(format!("positive ACK has zero probability under belief {b:?}")));
            }
            (pg / den).min(T::one())
        }
    };
    Ok(BeliefState { k: b.k, tau, p })
}

/// Expected utility of taking `action` under belief `b`.
pub fn expected_reward<T: Real>(b: BeliefState<T>, action: Action, sm: &SenseModel<T>, rs: &RewardSpec<T>) -> T {
    match action {
        Action::Predict => T::zero(),
        Action::Transmit => {
            let pg = b.p * survival_value(sm.nu_hat, b.tau, rs.tau_s);
            (pg * rs.d[b.k] - (T::one() - pg) * rs.expected_penalty(sm, b.k)) * T::of_usize(rs.tau_s)
        }
    }
}

/// `Σ_j C_kj Y_j / (Σ_j C_kj Y_j + D_k)`: below this survival, even a
/// certain anchor no longer pays for a block.
pub fn horizon_ratio<T: Real>(k: usize, sm: &SenseModel<T>, rs: &RewardSpec<T>) -> T {
    let pen = rs.expected_penalty(sm, k);
    pen / (pen + rs.d[k])
}

/// Last slot at which transmitting can still have non-negative expected
/// reward: the smallest `τ'` with `g(τ, τ_s) < ratio` for every `τ > τ'`.
pub fn horizon<T: Real>(k: usize, sm: &SenseModel<T>, rs: &RewardSpec<T>) -> Result<usize> {
    rs.check_levels(sm.k())?;
    let ratio = horizon_ratio(k, sm, rs);
    let g = |tau: usize| survival_value(sm.nu_hat, tau, rs.tau_s);
    let mut tau = 0;
    loop {
        while tau < HORIZON_SCAN_CAP && !(g(tau) < ratio) {
            tau += 1;
        }
        if tau >= HORIZON_SCAN_CAP {
            return Err(Error::Numerical(format!("horizon scan exceeded {HORIZON_SCAN_CAP} slots")));
        }
        // The Poisson survival ratio is non-increasing in τ; confirm over a
        // stretch past the crossing before trusting it.
        let guard_end = (2 * tau + 64).min(HORIZON_SCAN_CAP);
        match (tau + 1..guard_end).find(|&t| !(g(t) < ratio)) {
            None => return Ok(tau.saturating_sub(1)),
            Some(t) => tau = t,
        }
    }
}

/// Theorem-1 action for belief `b`, predicting above the horizon.
pub fn act<T: Real>(b: BeliefState<T>, table: &PolicyTable<T>) -> Action {
    let lp = &table.levels[b.k];
    if b.tau > lp.horizon {
        return Action::Predict;
    }
    let (lo, hi) = (lp.p_star[b.tau], lp.p_star2[b.tau]);
    if b.p <= lo || (hi < T::one() && b.p >= hi) {
        Action::Predict
    } else {
        Action::Transmit
    }
}
