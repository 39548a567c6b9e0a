//! Non-periodic strategy with sliding-window relearning.

use rand::Rng;

use super::strategies::{track, NonperiodicOptions, ObservationHook, Planner};
use super::{Deployment, SimReport};
use crate::config::PolicyConfig;
use crate::dpgmm::{effective_k_trace, modal_k, summarize_with, Chain, GibbsState, SummaryOptions};
use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineOptions {
    pub window: usize,
    pub refit_every: usize,
    pub sweeps_per_refit: usize,
    pub divergence_refits: usize,
    pub summary: SummaryOptions,
    pub policy: PolicyConfig,
}

struct Refitter<'a, T, R: ?Sized> {
    window: Vec<T>,
    state: GibbsState<T>,
    opts: &'a OnlineOptions,
    nu_hat: T,
    rng: &'a mut R,
    seen: usize,
    refits: usize,
    updates: usize,
    last_k: usize,
    flips: usize,
    diverged: bool,
}

impl<T: Real, R: Rng + ?Sized> Refitter<'_, T, R> {
    fn trim(&mut self) {
        while self.window.len() > self.opts.window {
            self.window.remove(0);
            self.state.pop_front();
        }
    }
}

impl<T: Real, R: Rng + ?Sized> ObservationHook<T> for Refitter<'_, T, R> {
    fn observe(&mut self, x: T, planner: &mut Planner<T>) -> Result<bool> {
        self.window.push(x);
        self.state.push_back(&self.window, self.rng);
        self.trim();
        self.seen += 1;
        if self.seen % self.opts.refit_every != 0 {
            return Ok(false);
        }
        self.refits += 1;
        let snapshots = (0..self.opts.sweeps_per_refit)
            .map(|i| {
                self.state.sweep(&self.window, self.rng);
                self.state.snapshot(i, &self.window, false)
            })
            .collect();
        let chain = Chain {
            n_obs: self.window.len(),
            snapshots,
        };
        let k = modal_k(&effective_k_trace(&chain, &self.opts.summary));
        if k != self.last_k {
            self.flips += 1;
        } else {
            self.flips = 0;
        }
        self.last_k = k;
        if self.flips > self.opts.divergence_refits {
            self.diverged = true;
        }
        if k == planner.model.k() {
            return Ok(false);
        }
        let model = summarize_with(&chain, &self.opts.summary)?;
        // a refit the planner cannot use (one level, indistinct levels) is skipped
        match Planner::build(model, self.nu_hat, &self.opts.policy) {
            Ok(p) => {
                *planner = p;
                self.updates += 1;
                Ok(true)
            }
            Err(Error::Degenerate(_)) | Err(Error::Numerical(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }
}

/// Non-periodic strategy whose prediction-slot statistics feed a FIFO window
/// of the learner. Every `refit_every` predictions the warm chain runs
/// `sweeps_per_refit` sweeps; a change of the modal component count rebuilds
/// the model, sense model and policy table and drops the current anchor.
pub fn run_online<T: Real, R: Rng + ?Sized>(
    dep: &Deployment<T>,
    planner: &Planner<T>,
    state: GibbsState<T>,
    nu_hat: T,
    opts: &NonperiodicOptions,
    online: &OnlineOptions,
    rng: &mut R,
) -> Result<SimReport> {
    if online.window < 10 {
        return Err(Error::InvalidArgument(format!(
            "online window of {} observations collapses the learner to one component",
            online.window
        )));
    }
    if online.refit_every == 0 {
        return Err(Error::InvalidArgument("refit interval must be positive".into()));
    }
    if state.n() != dep.stage1 {
        return Err(Error::InvalidArgument("learner state does not match Stage I".into()));
    }
    let mut hook = Refitter {
        window: dep.stage1_stats().to_vec(),
        state,
        opts: online,
        nu_hat,
        rng,
        seen: 0,
        refits: 0,
        updates: 0,
        last_k: planner.model.k(),
        flips: 0,
        diverged: false,
    };
    hook.trim();
    let mut rep = track(dep, planner.clone(), opts, Some(&mut hook), "online")?;
    rep.refits = hook.refits;
    rep.model_updates = hook.updates;
    rep.diverged = hook.diverged;
    Ok(rep)
}
