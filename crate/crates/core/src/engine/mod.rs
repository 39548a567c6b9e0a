//! Slot-level simulation of the secondary strategies and NPLA scoring.

mod experiment;
mod online;
mod strategies;

pub use experiment::{
    estimate_nu_hat, learn_stage1, run_experiment, write_outputs, CurveRow, ExperimentOptions, ExperimentResult, Learned, PointReport,
    RunRow, SummaryRow,
};
pub use online::{run_online, OnlineOptions};
pub use strategies::{run_nonperiodic, run_perfect, run_periodic, NonperiodicOptions, Planner};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::AckRule;
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;
use crate::num::Real;
use crate::policy::Ack;
use crate::scenario::{LevelTrace, ModeSchedule, StatStream};
use crate::sensing::map_to_truth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotAction {
    /// Stage-I sensing for the learner, never scored.
    Learn,
    /// A sensing slot spent predicting the PT level.
    Predict,
    /// One slot of a transmission block.
    Transmit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum Observation {
    Level(usize),
    Ack(Ack),
}

/// One slot of a run. Levels are true-level indices of the active mode; the
/// ST's learned level is mapped to the nearest true level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub action: SlotAction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub st_level: Option<usize>,
    pub pt_level: usize,
    /// First slot of a transmission block.
    #[serde(default)]
    pub block_start: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub strategy: String,
    pub seed: u64,
    pub tau_s: usize,
    pub horizon: usize,
    pub k_hat: Option<usize>,
    pub u_final: f64,
    /// `(τ, U(τ))` on the reporting grid.
    pub u_curve: Vec<(usize, f64)>,
    /// Share of sensing slots whose prediction hit the true level.
    pub p_c_hat: Option<f64>,
    pub predictions: usize,
    pub blocks: usize,
    pub matched_blocks: usize,
    pub refits: usize,
    pub model_updates: usize,
    pub diverged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<SlotRecord>,
}

impl SimReport {
    fn from_records(strategy: &str, records: Vec<SlotRecord>, tau_s: usize, grid_step: usize) -> Self {
        let horizon = records.len();
        let mut grid: Vec<usize> = (1..=horizon / grid_step.max(1)).map(|i| i * grid_step).collect();
        if grid.last() != Some(&horizon) && horizon > 0 {
            grid.push(horizon);
        }
        let u_curve: Vec<(usize, f64)> = grid.iter().copied().zip(npla_curve(&records, tau_s, &grid)).collect();
        let (mut predictions, mut hits, mut blocks) = (0, 0, 0);
        for r in &records {
            match r.action {
                SlotAction::Predict => {
                    predictions += 1;
                    if r.st_level == Some(r.pt_level) {
                        hits += 1;
                    }
                }
                SlotAction::Transmit if r.block_start => blocks += 1,
                _ => {}
            }
        }
        Self {
            strategy: strategy.into(),
            seed: 0,
            tau_s,
            horizon,
            k_hat: None,
            u_final: u_curve.last().map_or(0.0, |p| p.1),
            u_curve,
            p_c_hat: (predictions > 0).then(|| hits as f64 / predictions as f64),
            predictions,
            blocks,
            matched_blocks: matched_block_ends(&records, tau_s).len(),
            refits: 0,
            model_updates: 0,
            diverged: false,
            records,
        }
    }
}

/// End slots (exclusive) of the fully matched, completed blocks.
fn matched_block_ends(records: &[SlotRecord], tau_s: usize) -> Vec<usize> {
    let mut ends = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if !(r.action == SlotAction::Transmit && r.block_start) || i + tau_s > records.len() {
            continue;
        }
        let block = &records[i..i + tau_s];
        let whole = block
            .iter()
            .enumerate()
            .all(|(o, b)| b.action == SlotAction::Transmit && (o == 0 || !b.block_start));
        if whole && block.iter().all(|b| b.st_level == Some(b.pt_level)) {
            ends.push(i + tau_s);
        }
    }
    ends
}

/// Normalized power level alignment at `up_to`: `τ_s` times the number of
/// fully matched blocks completed within the first `up_to` slots, over
/// `up_to`.
pub fn npla(records: &[SlotRecord], tau_s: usize, up_to: usize) -> f64 {
    if up_to == 0 {
        return 0.0;
    }
    let up_to = up_to.min(records.len());
    let n = matched_block_ends(&records[..up_to], tau_s).len();
    (tau_s * n) as f64 / up_to as f64
}

/// [`npla`] at every point of an ascending `grid`.
pub fn npla_curve(records: &[SlotRecord], tau_s: usize, grid: &[usize]) -> Vec<f64> {
    let ends = matched_block_ends(records, tau_s);
    let mut i = 0;
    grid.iter()
        .map(|&t| {
            while i < ends.len() && ends[i] <= t {
                i += 1;
            }
            if t == 0 {
                0.0
            } else {
                (tau_s * i) as f64 / t as f64
            }
        })
        .collect()
}

/// Ground truth for one run: mode schedule, PT level trace and the test
/// statistic of every slot, generated up front so that all strategies see
/// the same realisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Deployment<T> {
    pub schedule: ModeSchedule<T>,
    pub trace: LevelTrace,
    pub stats: StatStream<T>,
    pub stage1: usize,
}

impl<T: Real> Deployment<T> {
    pub fn generate<R: Rng + ?Sized>(schedule: ModeSchedule<T>, horizon: usize, stage1: usize, rng: &mut R) -> Result<Self> {
        if stage1 > horizon {
            return Err(Error::InvalidArgument(format!(
                "Stage I ({stage1} slots) is longer than the horizon ({horizon})"
            )));
        }
        let trace = schedule.gen_levels(horizon, rng)?;
        let stats = schedule.gen_statistics(&trace, rng);
        Ok(Self {
            schedule,
            trace,
            stats,
            stage1,
        })
    }

    pub fn horizon(&self) -> usize {
        self.trace.len()
    }

    pub fn stage1_stats(&self) -> &[T] {
        &self.stats.x[..self.stage1]
    }

    fn learn_records(&self) -> Vec<SlotRecord> {
        (0..self.stage1)
            .map(|slot| SlotRecord {
                slot,
                action: SlotAction::Learn,
                st_level: None,
                pt_level: self.trace.level[slot],
                block_start: false,
                observation: None,
            })
            .collect()
    }
}

/// Maps learned components onto true levels per mode segment and decides
/// ACKs.
struct Truth {
    starts: Vec<usize>,
    maps: Vec<Vec<usize>>,
    labels: Vec<Vec<usize>>,
    rule: AckRule,
}

impl Truth {
    fn new<T: Real>(schedule: &ModeSchedule<T>, model: Option<&MixtureModel<T>>, rule: AckRule) -> Self {
        let starts = schedule.segments.iter().map(|s| s.0).collect();
        let maps = match model {
            Some(m) => schedule.segments.iter().map(|(_, mode)| map_to_truth(m, mode)).collect(),
            None => Vec::new(),
        };
        let labels = schedule
            .segments
            .iter()
            .map(|(_, mode)| (0..mode.level_count()).map(|l| mode.paper_label(l)).collect())
            .collect();
        Self {
            starts,
            maps,
            labels,
            rule,
        }
    }

    fn remap<T: Real>(&mut self, schedule: &ModeSchedule<T>, model: &MixtureModel<T>) {
        self.maps = schedule.segments.iter().map(|(_, mode)| map_to_truth(model, mode)).collect();
    }

    fn segment(&self, slot: usize) -> usize {
        self.starts.partition_point(|&s| s <= slot).saturating_sub(1)
    }

    fn level(&self, k: usize, slot: usize) -> usize {
        self.maps[self.segment(slot)][k]
    }

    /// Whether the PT's receiver tolerates an ST at true level `st` while
    /// the PT sits at `pt`.
    fn decodes(&self, st: usize, pt: usize, slot: usize) -> bool {
        if st == pt {
            return true;
        }
        match self.rule {
            AckRule::MatchOnly => false,
            AckRule::Labels => {
                let lab = &self.labels[self.segment(slot)];
                lab[st] > lab[pt]
            }
        }
    }
}

/// Appends a block of up to `tau_s` slots at the learned level `k` (or at
/// true level `st` when `k` is `None`) and returns its ACK.
fn push_block<T: Real>(
    dep: &Deployment<T>,
    truth: &Truth,
    records: &mut Vec<SlotRecord>,
    start: usize,
    tau_s: usize,
    st: impl Fn(usize) -> usize,
) -> Ack {
    let end = (start + tau_s).min(dep.horizon());
    let mut ok = true;
    for slot in start..end {
        let st_level = st(slot);
        let pt = dep.trace.level[slot];
        ok &= truth.decodes(st_level, pt, slot);
        records.push(SlotRecord {
            slot,
            action: SlotAction::Transmit,
            st_level: Some(st_level),
            pt_level: pt,
            block_start: slot == start,
            observation: None,
        });
    }
    let ack = if ok { Ack::Positive } else { Ack::Negative };
    if let Some(last) = records.last_mut() {
        last.observation = Some(Observation::Ack(ack));
    }
    ack
}
