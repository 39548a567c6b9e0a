//! Run configuration and the experiment presets.

use serde::{Deserialize, Serialize};

use crate::dpgmm::{BetaSampler, GibbsOptions, SummaryOptions};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::policy::{RewardSpec, SolveOptions};
use crate::scenario::{ModeSchedule, PowerMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Transmit-power ratios per level; the idle level has ratio 0.
    pub snr_ratios: Vec<f64>,
    /// Average received SNR over all levels, in dB.
    pub avg_snr_db: f64,
    pub prior: Vec<f64>,
    #[serde(default = "one")]
    pub sigma2_u: f64,
    pub samples_per_slot: usize,
    pub nu: f64,
    pub horizon: usize,
    #[serde(default = "default_stage1")]
    pub stage1_slots: usize,
    /// Wall-clock length of a slot, reported only.
    #[serde(default = "default_slot_ms")]
    pub slot_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change: Option<ModeChange>,
}

/// Switch to a new power mode at `at_slot`. Ratios are scaled by the unit
/// SNR of the initial mode, so that e.g. ratio 4 means four times level 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeChange {
    pub at_slot: usize,
    pub snr_ratios: Vec<f64>,
    pub prior: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnMethod {
    Dpgmm,
    Em,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub method: LearnMethod,
    pub alpha: f64,
    pub k0: usize,
    pub iters: usize,
    pub burnin: usize,
    pub beta_sampler: BetaSampler,
    pub min_share: f64,
    pub em_restarts: usize,
    /// Label runs shorter than this are merged before estimating `ν̂`.
    pub duration_min_run: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        let g = GibbsOptions::default();
        Self {
            method: LearnMethod::Dpgmm,
            alpha: g.alpha,
            k0: g.k0,
            iters: g.iters,
            burnin: g.burnin,
            beta_sampler: g.beta_sampler,
            min_share: SummaryOptions::default().min_share,
            em_restarts: 5,
            duration_min_run: 3,
        }
    }
}

impl LearnerConfig {
    pub fn gibbs(&self) -> GibbsOptions {
        GibbsOptions {
            iters: self.iters,
            burnin: self.burnin,
            alpha: self.alpha,
            k0: self.k0,
            beta_sampler: self.beta_sampler,
            keep_indicators: false,
        }
    }

    pub fn summary(&self) -> SummaryOptions {
        SummaryOptions { min_share: self.min_share }
    }
}

/// Which ACK rule the simulated receiver follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AckRule {
    /// Decodes iff matched or the ST's power label exceeds the PT's.
    Labels,
    /// Decodes iff the levels match.
    MatchOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub tau_s: usize,
    /// Per-slot match reward, the same for every level.
    pub reward: f64,
    /// Per-slot mismatch penalty, the same for every level.
    pub penalty: f64,
    pub grid_size: usize,
    pub reanchor_threshold: f64,
    pub ack: AckRule,
    pub mc_episodes: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            tau_s: 4,
            reward: 1.0,
            penalty: 1.0,
            grid_size: SolveOptions::default().grid_size,
            reanchor_threshold: 0.5,
            ack: AckRule::Labels,
            mc_episodes: 10_000,
        }
    }
}

impl PolicyConfig {
    pub fn reward_spec<T: Real>(&self, k: usize) -> RewardSpec<T> {
        RewardSpec {
            d: vec![T::lit(self.reward); k],
            y: vec![T::lit(self.penalty); k],
            tau_s: self.tau_s,
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            grid_size: self.grid_size,
            keep_grids: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Periodic,
    Nonperiodic,
    /// Non-periodic on an EM-learned model with the true level count.
    NonperiodicEm,
    Perfect,
    /// Non-periodic with sliding-window refits.
    Online,
    /// Non-periodic control for `online`: the same run without refits.
    Static,
    /// Prediction accuracy of the DPGMM model.
    PcDpgmm,
    /// Prediction accuracy of the EM model.
    PcEm,
    /// Planner value against Monte Carlo, per learned level.
    Theory,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Periodic => "periodic",
            Strategy::Nonperiodic => "nonperiodic",
            Strategy::NonperiodicEm => "nonperiodic-em",
            Strategy::Perfect => "perfect",
            Strategy::Online => "online",
            Strategy::Static => "static",
            Strategy::PcDpgmm => "pc-dpgmm",
            Strategy::PcEm => "pc-em",
            Strategy::Theory => "theory",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnlineConfig {
    pub refit_every: usize,
    pub sweeps_per_refit: usize,
    /// K flipping at this many consecutive refits flags divergence.
    pub divergence_refits: usize,
    /// FIFO window length; defaults to the Stage-I length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            refit_every: 50,
            sweeps_per_refit: 20,
            divergence_refits: 10,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub u_grid_step: usize,
    pub online: OnlineConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            strategies: vec![Strategy::Periodic, Strategy::Nonperiodic, Strategy::Perfect],
            seeds: (0..20).collect(),
            u_grid_step: 100,
            online: OnlineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    /// Also write gzip-compressed per-slot logs.
    pub slot_log: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            slot_log: false,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_stage1() -> usize {
    1000
}

fn default_slot_ms() -> f64 {
    2.0
}

impl ScenarioConfig {
    pub fn unit_snr(&self) -> Result<f64> {
        PowerMode::unit_snr(&self.snr_ratios, self.avg_snr_db)
    }

    pub fn initial_mode(&self) -> Result<PowerMode<f64>> {
        PowerMode::from_ratios(
            &self.snr_ratios,
            self.avg_snr_db,
            self.prior.clone(),
            self.sigma2_u,
            self.nu,
            self.samples_per_slot,
        )
    }

    pub fn schedule(&self) -> Result<ModeSchedule<f64>> {
        let first = self.initial_mode()?;
        match &self.change {
            None => Ok(ModeSchedule::constant(first)),
            Some(ch) => {
                let unit = self.unit_snr()?;
                let second = PowerMode::new(
                    ch.snr_ratios.iter().map(|r| r * unit).collect(),
                    ch.prior.clone(),
                    self.sigma2_u,
                    self.nu,
                    self.samples_per_slot,
                )?;
                ModeSchedule::new(vec![(0, first), (ch.at_slot, second)])
            }
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        let sc = &self.scenario;
        sc.schedule().map_err(|e| Error::Config(format!("scenario: {e}")))?;
        if sc.stage1_slots < 10 {
            return cfg_err(format!("scenario.stage1_slots must be at least 10, got {}", sc.stage1_slots));
        }
        if sc.horizon < 1 {
            return cfg_err("scenario.horizon must be at least 1".into());
        }
        let l = &self.learner;
        if l.iters <= l.burnin {
            return cfg_err(format!("learner.iters ({}) must exceed learner.burnin ({})", l.iters, l.burnin));
        }
        if l.k0 == 0 || !(l.alpha >= 0.0) {
            return cfg_err("learner.k0 must be positive and learner.alpha non-negative".into());
        }
        if !(0.0..1.0).contains(&l.min_share) {
            return cfg_err("learner.min_share must lie in [0, 1)".into());
        }
        let p = &self.policy;
        if p.tau_s == 0 {
            return cfg_err("policy.tau_s must be at least 1".into());
        }
        if !(p.reward > 0.0 && p.penalty > 0.0) {
            return cfg_err("policy.reward and policy.penalty must be positive".into());
        }
        if p.grid_size < 3 {
            return cfg_err("policy.grid_size must be at least 3".into());
        }
        if !(0.0..=1.0).contains(&p.reanchor_threshold) {
            return cfg_err("policy.reanchor_threshold must lie in [0, 1]".into());
        }
        let e = &self.engine;
        if e.seeds.is_empty() {
            return cfg_err("engine.seeds must not be empty".into());
        }
        if e.strategies.is_empty() {
            return cfg_err("engine.strategies must not be empty".into());
        }
        if e.u_grid_step == 0 {
            return cfg_err("engine.u_grid_step must be positive".into());
        }
        if let Some(w) = e.online.window {
            if w < 10 {
                return cfg_err(format!(
                    "engine.online.window = {w} collapses the learner to a single component; use at least 10"
                ));
            }
        }
        if e.online.refit_every == 0 {
            return cfg_err("engine.online.refit_every must be positive".into());
        }
        Ok(())
    }
}

/// Parameter varied by a preset sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    AvgSnrDb,
    SamplesPerSlot,
    TauS,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::AvgSnrDb => "avg_snr_db",
            SweepParam::SamplesPerSlot => "samples_per_slot",
            SweepParam::TauS => "tau_s",
        }
    }

    pub fn apply(&self, cfg: &mut RunConfig, v: f64) {
        match self {
            SweepParam::AvgSnrDb => cfg.scenario.avg_snr_db = v,
            SweepParam::SamplesPerSlot => cfg.scenario.samples_per_slot = v as usize,
            SweepParam::TauS => cfg.policy.tau_s = v as usize,
        }
    }

    pub fn read(&self, cfg: &RunConfig) -> f64 {
        match self {
            SweepParam::AvgSnrDb => cfg.scenario.avg_snr_db,
            SweepParam::SamplesPerSlot => cfg.scenario.samples_per_slot as f64,
            SweepParam::TauS => cfg.policy.tau_s as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// A named experiment: base configuration plus the sweeps it runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub base: RunConfig,
    /// Empty means a single point at the base configuration.
    pub sweeps: Vec<Sweep>,
}

pub const PRESET_NAMES: [&str; 5] = ["fig6", "fig7", "fig8", "fig9", "fig10"];

/// The four-level mode used throughout the presets.
pub fn base_scenario() -> ScenarioConfig {
    ScenarioConfig {
        snr_ratios: vec![1.0, 2.0, 3.0, 0.0],
        avg_snr_db: -12.0,
        prior: vec![0.25; 4],
        sigma2_u: 1.0,
        samples_per_slot: 10_000,
        nu: 50.0,
        horizon: 50_000,
        stage1_slots: 1000,
        slot_ms: 2.0,
        change: None,
    }
}

fn base_config(strategies: Vec<Strategy>) -> RunConfig {
    RunConfig {
        scenario: base_scenario(),
        learner: LearnerConfig::default(),
        policy: PolicyConfig::default(),
        engine: EngineConfig {
            strategies,
            ..EngineConfig::default()
        },
        output: OutputConfig::default(),
    }
}

impl Preset {
    pub fn named(name: &str) -> Result<Self> {
        use Strategy::*;
        let tau_sweep = || Sweep {
            param: SweepParam::TauS,
            values: vec![2.0, 4.0, 6.0, 8.0],
        };
        let preset = match name {
            "fig6" => {
                let mut base = base_config(vec![PcDpgmm, PcEm]);
                base.scenario.horizon = base.scenario.stage1_slots;
                base.engine.seeds = (0..10).collect();
                Self {
                    name: name.into(),
                    base,
                    sweeps: vec![
                        Sweep {
                            param: SweepParam::AvgSnrDb,
                            values: vec![-16.0, -14.0, -12.0, -10.0, -8.0],
                        },
                        Sweep {
                            param: SweepParam::SamplesPerSlot,
                            values: vec![1000.0, 5000.0, 10_000.0, 20_000.0],
                        },
                    ],
                }
            }
            "fig7" => {
                let mut base = base_config(vec![Theory]);
                base.scenario.nu = 100.0;
                base.scenario.horizon = base.scenario.stage1_slots;
                base.engine.seeds = vec![0];
                Self {
                    name: name.into(),
                    base,
                    sweeps: vec![tau_sweep()],
                }
            }
            "fig8" => {
                let mut base = base_config(vec![Perfect, Nonperiodic, NonperiodicEm, Periodic]);
                base.scenario.samples_per_slot = 5000;
                Self {
                    name: name.into(),
                    base,
                    sweeps: vec![],
                }
            }
            "fig9" => Self {
                name: name.into(),
                base: base_config(vec![Perfect, Nonperiodic, Periodic]),
                sweeps: vec![tau_sweep()],
            },
            "fig10" => {
                let mut base = base_config(vec![Online, Static]);
                base.scenario.horizon = 30_000;
                base.scenario.change = Some(ModeChange {
                    at_slot: 10_000,
                    snr_ratios: vec![1.0, 2.0, 3.0, 0.0, 4.0],
                    prior: vec![0.2; 5],
                });
                Self {
                    name: name.into(),
                    base,
                    sweeps: vec![],
                }
            }
            other => return Err(Error::UnknownPreset(other.into())),
        };
        Ok(preset)
    }

    /// Single-point experiment from a user configuration.
    pub fn custom(base: RunConfig) -> Self {
        Self {
            name: "custom".into(),
            base,
            sweeps: vec![],
        }
    }

    /// `(param name, value, config)` for every sweep point.
    pub fn points(&self) -> Vec<(String, f64, RunConfig)> {
        if self.sweeps.is_empty() {
            return vec![("none".into(), 0.0, self.base.clone())];
        }
        let mut out = Vec::new();
        for sw in &self.sweeps {
            for &v in &sw.values {
                let mut cfg = self.base.clone();
                sw.param.apply(&mut cfg, v);
                out.push((sw.param.name().to_string(), v, cfg));
            }
        }
        out
    }
}
