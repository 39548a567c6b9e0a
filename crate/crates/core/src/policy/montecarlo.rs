//! Monte Carlo evaluation of the threshold policy on single-hypothesis
//! episodes.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution};
use serde::{Deserialize, Serialize};

use super::{act, belief_update_predict, belief_update_transmit, Ack, Action, BeliefState, PolicyTable, RewardSpec};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::sample::{categorical, poisson_at_least_one};
use crate::sensing::SenseModel;

/// How long the anchored hypothesis lasts in an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DurationModel {
    /// Poisson with the sense model's `ν̂`, conditioned to be at least 1.
    Poisson,
    Fixed(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub episodes: usize,
}

/// `V̂(0, 1, k)` over `episodes` rollouts with Poisson durations.
pub fn monte_carlo_value<T: Real, R: Rng + ?Sized>(
    table: &PolicyTable<T>,
    k: usize,
    sm_true: &SenseModel<T>,
    rs: &RewardSpec<T>,
    episodes: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    monte_carlo_value_with(table, k, sm_true, rs, episodes, DurationModel::Poisson, rng)
}

/// As [`monte_carlo_value`] with a chosen duration model.
///
/// The PT stays at `k` for `D` slots. A prediction at `τ` reads the level at
/// `τ + 1`, still `k` iff `D > τ + 1`; a block starting at `τ` is matched iff
/// `D > τ + τ_s`. After departure every observation or block faces a fresh
/// level drawn from row `k` of `C`.
pub fn monte_carlo_value_with<T: Real, R: Rng + ?Sized>(
    table: &PolicyTable<T>,
    k: usize,
    sm_true: &SenseModel<T>,
    rs: &RewardSpec<T>,
    episodes: usize,
    duration: DurationModel,
    rng: &mut R,
) -> Result<McEstimate> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("need at least one episode".into()));
    }
    if table.tau_s != rs.tau_s {
        return Err(Error::InvalidArgument("policy table and reward spec disagree on tau_s".into()));
    }
    let h: Vec<Vec<f64>> = sm_true.h.iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect();
    let c: Vec<Vec<f64>> = sm_true.c.iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect();
    let nu = sm_true.nu_hat.as_f64();
    let horizon = table.levels[k].horizon;
    let tau_s = rs.tau_s;
    let bern = |p: f64| Bernoulli::new(p.clamp(0.0, 1.0)).expect("probability in range");

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..episodes {
        let d = match duration {
            DurationModel::Poisson => poisson_at_least_one(rng, nu),
            DurationModel::Fixed(v) => v,
        };
        let mut b = BeliefState::<T>::anchored(k);
        let mut total = 0.0;
        while b.tau <= horizon {
            match act(b, table) {
                Action::Predict => {
                    let level = if d > (b.tau + 1) as u64 { k } else { categorical(rng, &c[k]) };
                    let obs = categorical(rng, &h[level]);
                    b = belief_update_predict(b, obs, sm_true)?;
                }
                Action::Transmit => {
                    let ack = if d > (b.tau + tau_s) as u64 {
                        total += rs.d[k].as_f64() * tau_s as f64;
                        Ack::Positive
                    } else {
                        let j = categorical(rng, &c[k]);
                        total -= rs.y[j].as_f64() * tau_s as f64;
                        if bern(sm_true.ack[k][j].as_f64()).sample(rng) {
                            Ack::Positive
                        } else {
                            Ack::Negative
                        }
                    };
                    b = belief_update_transmit(b, ack, sm_true, tau_s)?;
                }
            }
        }
        sum += total;
        sum_sq += total * total;
    }
    let m = episodes as f64;
    let mean = sum / m;
    let var = if episodes > 1 {
        ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_err: (var / m).sqrt(),
        episodes,
    })
}
