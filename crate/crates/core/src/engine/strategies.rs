//! Periodic, non-periodic and perfect secondary strategies.

use super::{push_block, Deployment, Observation, SimReport, SlotAction, SlotRecord, Truth};
use crate::config::{AckRule, PolicyConfig};
use crate::error::Result;
use crate::mixture::MixtureModel;
use crate::num::Real;
use crate::policy::{act, belief_update_predict, belief_update_transmit, solve_policy, Ack, Action, BeliefState, PolicyTable};
use crate::sensing::{classify, SenseModel};

/// Learned model with the sense model and policy table derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Planner<T> {
    pub model: MixtureModel<T>,
    pub sm: SenseModel<T>,
    pub table: PolicyTable<T>,
}

impl<T: Real> Planner<T> {
    pub fn build(model: MixtureModel<T>, nu_hat: T, policy: &PolicyConfig) -> Result<Self> {
        let mut sm = SenseModel::from_mixture(&model, nu_hat)?;
        if policy.ack == AckRule::MatchOnly {
            sm.ack = vec![vec![T::zero(); sm.k()]; sm.k()];
        }
        let rs = policy.reward_spec(sm.k());
        let table = solve_policy(&sm, &rs, &policy.solve_options())?;
        Ok(Self { model, sm, table })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonperiodicOptions {
    /// An observation `j ≠ k` re-anchors once the updated belief drops
    /// below this.
    pub reanchor_threshold: f64,
    pub ack: AckRule,
    pub grid_step: usize,
}

impl Default for NonperiodicOptions {
    fn default() -> Self {
        Self {
            reanchor_threshold: 0.5,
            ack: AckRule::Labels,
            grid_step: 100,
        }
    }
}

/// Called with the statistic of every prediction slot; returns `true` when
/// it replaced the planner.
pub(super) trait ObservationHook<T> {
    fn observe(&mut self, x: T, planner: &mut Planner<T>) -> Result<bool>;
}

/// One sensing slot, then a block at the level just identified, regardless
/// of ACKs.
pub fn run_periodic<T: Real>(
    dep: &Deployment<T>,
    model: &MixtureModel<T>,
    tau_s: usize,
    ack: AckRule,
    grid_step: usize,
) -> SimReport {
    let truth = Truth::new(&dep.schedule, Some(model), ack);
    let mut records = dep.learn_records();
    let mut s = dep.stage1;
    while s < dep.horizon() {
        let j = classify(dep.stats.x[s], model);
        records.push(SlotRecord {
            slot: s,
            action: SlotAction::Predict,
            st_level: Some(truth.level(j, s)),
            pt_level: dep.trace.level[s],
            block_start: false,
            observation: Some(Observation::Level(j)),
        });
        s += 1;
        if s < dep.horizon() {
            push_block(dep, &truth, &mut records, s, tau_s, |slot| truth.level(j, slot));
            s += tau_s;
        }
    }
    let mut rep = SimReport::from_records("periodic", records, tau_s, grid_step);
    rep.k_hat = Some(model.k());
    rep
}

/// Back-to-back blocks at the true level of each block's first slot.
pub fn run_perfect<T: Real>(dep: &Deployment<T>, tau_s: usize, ack: AckRule, grid_step: usize) -> SimReport {
    let truth = Truth::new(&dep.schedule, None, ack);
    let mut records = dep.learn_records();
    let mut s = dep.stage1;
    while s < dep.horizon() {
        let level = dep.trace.level[s];
        push_block(dep, &truth, &mut records, s, tau_s, |_| level);
        s += tau_s;
    }
    SimReport::from_records("perfect", records, tau_s, grid_step)
}

/// Threshold policy on the anchored belief. The first Stage-II slot
/// predicts and anchors; later observations of another level re-anchor
/// when the belief falls below the threshold, and the first observation
/// after a negative ACK re-anchors unconditionally.
pub fn run_nonperiodic<T: Real>(dep: &Deployment<T>, planner: &Planner<T>, opts: &NonperiodicOptions) -> Result<SimReport> {
    track(dep, planner.clone(), opts, None::<&mut NoHook>, "nonperiodic")
}

struct NoHook;

impl<T> ObservationHook<T> for NoHook {
    fn observe(&mut self, _: T, _: &mut Planner<T>) -> Result<bool> {
        Ok(false)
    }
}

pub(super) fn track<T: Real, H: ObservationHook<T>>(
    dep: &Deployment<T>,
    mut planner: Planner<T>,
    opts: &NonperiodicOptions,
    mut hook: Option<&mut H>,
    name: &str,
) -> Result<SimReport> {
    let tau_s = planner.table.tau_s;
    let theta = T::lit(opts.reanchor_threshold);
    let mut truth = Truth::new(&dep.schedule, Some(&planner.model), opts.ack);
    let mut records = dep.learn_records();
    let mut s = dep.stage1;
    let mut belief: Option<BeliefState<T>> = None;
    let mut after_nack = false;
    while s < dep.horizon() {
        let action = belief.map_or(Action::Predict, |b| act(b, &planner.table));
        match action {
            Action::Predict => {
                let x = dep.stats.x[s];
                let j = classify(x, &planner.model);
                records.push(SlotRecord {
                    slot: s,
                    action: SlotAction::Predict,
                    st_level: Some(truth.level(j, s)),
                    pt_level: dep.trace.level[s],
                    block_start: false,
                    observation: Some(Observation::Level(j)),
                });
                s += 1;
                belief = Some(match belief {
                    Some(b) if !after_nack => match belief_update_predict(b, j, &planner.sm) {
                        Ok(nb) if !(j != b.k && nb.p < theta) => nb,
                        _ => BeliefState::anchored(j),
                    },
                    _ => BeliefState::anchored(j),
                });
                after_nack = false;
                if let Some(h) = hook.as_mut() {
                    if h.observe(x, &mut planner)? {
                        truth.remap(&dep.schedule, &planner.model);
                        belief = None;
                    }
                }
            }
            Action::Transmit => {
                let b = belief.expect("transmit needs an anchor");
                let ack = push_block(dep, &truth, &mut records, s, tau_s, |slot| truth.level(b.k, slot));
                s += tau_s;
                belief = Some(belief_update_transmit(b, ack, &planner.sm, tau_s)?);
                after_nack = ack == Ack::Negative;
            }
        }
    }
    let mut rep = SimReport::from_records(name, records, tau_s, opts.grid_step);
    rep.k_hat = Some(planner.model.k());
    Ok(rep)
}
