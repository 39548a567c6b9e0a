//! Seeds × sweep points × strategies, with CSV output.

use std::fs;
use std::io::Write;
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::online::{run_online, OnlineOptions};
use super::strategies::{run_nonperiodic, run_perfect, run_periodic, NonperiodicOptions, Planner};
use super::{Deployment, SimReport};
use crate::config::{LearnMethod, LearnerConfig, Preset, RunConfig, ScenarioConfig, Strategy};
use crate::dpgmm::{fit_em_gmm, run_gibbs_state, summarize_with, GibbsState};
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;
use crate::num::Real;
use crate::policy::monte_carlo_value;
use crate::rng::SeedStreams;
use crate::sensing::{classify, estimate_duration_mean, merge_short_runs, p_c_against_truth, run_lengths};

/// Stage-I output: point model, duration estimate and, for the DPGMM, the
/// final chain state.
#[derive(Debug, Clone, PartialEq)]
pub struct Learned<T> {
    pub model: MixtureModel<T>,
    pub nu_hat: T,
    pub state: Option<GibbsState<T>>,
}

/// Fits the Stage-I statistics. `l_known` is used by EM only. `ν̂` is the
/// mean interior run length of the MAP labels after merging short runs; with
/// fewer than two interior runs it falls back to the mean of all runs.
pub fn learn_stage1<T: Real, R: Rng + ?Sized>(
    x: &[T],
    cfg: &LearnerConfig,
    method: LearnMethod,
    l_known: usize,
    rng: &mut R,
) -> Result<Learned<T>> {
    let (model, state) = match method {
        LearnMethod::Dpgmm => {
            let (chain, state) = run_gibbs_state(x, &cfg.gibbs(), rng)?;
            (summarize_with(&chain, &cfg.summary())?, Some(state))
        }
        LearnMethod::Em => (fit_em_gmm(x, l_known, cfg.em_restarts, rng)?.model, None),
    };
    let nu_hat = estimate_nu_hat(x, &model, cfg.duration_min_run)?;
    Ok(Learned { model, nu_hat, state })
}

/// Mean hypothesis duration from the MAP labels of `x`, after merging runs
/// shorter than `min_run`.
pub fn estimate_nu_hat<T: Real>(x: &[T], model: &MixtureModel<T>, min_run: usize) -> Result<T> {
    let labels: Vec<usize> = x.iter().map(|&v| classify(v, model)).collect();
    let merged = merge_short_runs(&labels, min_run);
    match estimate_duration_mean::<T>(&merged) {
        Ok(v) => Ok(v),
        Err(Error::Degenerate(_)) => Ok(T::of_usize(merged.len()) / T::of_usize(run_lengths(&merged).len().max(1))),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExperimentOptions {
    /// Keep the per-run reports.
    pub keep_reports: bool,
    /// Keep per-slot records inside the kept reports.
    pub keep_records: bool,
}

/// One CSV row of `runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub preset: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub strategy: String,
    /// Power-level label, for per-level rows.
    pub level: Option<usize>,
    pub tau_s: usize,
    pub k_hat: Option<usize>,
    pub nu_hat: Option<f64>,
    pub u_final: Option<f64>,
    pub p_c: Option<f64>,
    pub v_theory: Option<f64>,
    pub v_hat: Option<f64>,
    pub v_hat_se: Option<f64>,
    pub refits: Option<usize>,
    pub model_updates: Option<usize>,
    pub diverged: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub preset: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub strategy: String,
    pub level: Option<usize>,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub preset: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub strategy: String,
    pub tau: usize,
    pub n: usize,
    pub u_mean: f64,
    pub u_ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub report: SimReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub preset: Preset,
    pub runs: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
    pub curves: Vec<CurveRow>,
    pub reports: Vec<PointReport>,
}

impl ExperimentResult {
    /// Summary entry for `(strategy, metric)` at a sweep value.
    pub fn summary_for(&self, sweep_value: f64, strategy: &str, metric: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.strategy == strategy && r.metric == metric && r.level.is_none())
    }
}

struct Prepared {
    scenario: ScenarioConfig,
    learner: LearnerConfig,
    dep: Deployment<f64>,
    dpgmm: Option<std::result::Result<Learned<f64>, String>>,
    em: Option<std::result::Result<Learned<f64>, String>>,
}

impl Prepared {
    fn learned(&mut self, method: LearnMethod, streams: &SeedStreams) -> std::result::Result<&Learned<f64>, String> {
        let x = self.dep.stage1_stats();
        let l = self.dep.schedule.initial().level_count();
        let slot = match method {
            LearnMethod::Dpgmm => &mut self.dpgmm,
            LearnMethod::Em => &mut self.em,
        };
        if slot.is_none() {
            let mut rng = streams.stream(
                match method {
                    LearnMethod::Dpgmm => "learner",
                    LearnMethod::Em => "learner-em",
                },
                0,
            );
            *slot = Some(learn_stage1(x, &self.learner, method, l, &mut rng).map_err(|e| e.to_string()));
        }
        slot.as_ref().expect("just filled").as_ref().map_err(Clone::clone)
    }
}

struct SeedOutput {
    rows: Vec<RunRow>,
    reports: Vec<(usize, SimReport)>,
}

fn blank_row(preset: &str, param: &str, value: f64, seed: u64, strategy: Strategy, cfg: &RunConfig) -> RunRow {
    RunRow {
        preset: preset.into(),
        sweep_param: param.into(),
        sweep_value: value,
        seed,
        strategy: strategy.name().into(),
        level: None,
        tau_s: cfg.policy.tau_s,
        k_hat: None,
        nu_hat: None,
        u_final: None,
        p_c: None,
        v_theory: None,
        v_hat: None,
        v_hat_se: None,
        refits: None,
        model_updates: None,
        diverged: None,
        error: None,
    }
}

fn run_seed(preset: &Preset, points: &[(String, f64, RunConfig)], seed: u64, opts: &ExperimentOptions) -> Result<SeedOutput> {
    let streams = SeedStreams::new(seed);
    let mut cache: Vec<Prepared> = Vec::new();
    let mut out = SeedOutput {
        rows: Vec::new(),
        reports: Vec::new(),
    };
    for (pi, (param, value, cfg)) in points.iter().enumerate() {
        let idx = match cache.iter().position(|p| p.scenario == cfg.scenario && p.learner == cfg.learner) {
            Some(i) => i,
            None => {
                let schedule = cfg.scenario.schedule()?;
                let mut rng = streams.stream("scenario", 0);
                let dep = Deployment::generate(schedule, cfg.scenario.horizon, cfg.scenario.stage1_slots, &mut rng)?;
                cache.push(Prepared {
                    scenario: cfg.scenario.clone(),
                    learner: cfg.learner.clone(),
                    dep,
                    dpgmm: None,
                    em: None,
                });
                cache.len() - 1
            }
        };
        let prep = &mut cache[idx];
        let nonperiodic = NonperiodicOptions {
            reanchor_threshold: cfg.policy.reanchor_threshold,
            ack: cfg.policy.ack,
            grid_step: cfg.engine.u_grid_step,
        };
        let tau_s = cfg.policy.tau_s;
        let step = cfg.engine.u_grid_step;
        for &strategy in &cfg.engine.strategies {
            let mut row = blank_row(&preset.name, param, *value, seed, strategy, cfg);
            let method = if matches!(strategy, Strategy::PcEm | Strategy::NonperiodicEm) {
                LearnMethod::Em
            } else {
                cfg.learner.method
            };
            let mut rows = Vec::new();
            let mut report = None;
            let outcome: std::result::Result<(), String> = (|| {
                if strategy == Strategy::Perfect {
                    report = Some(run_perfect(&prep.dep, tau_s, cfg.policy.ack, step));
                    return Ok(());
                }
                let learned = prep.learned(method, &streams)?.clone();
                row.k_hat = Some(learned.model.k());
                row.nu_hat = Some(learned.nu_hat);
                let initial = prep.dep.schedule.initial();
                match strategy {
                    Strategy::PcDpgmm | Strategy::PcEm => {
                        row.p_c = Some(p_c_against_truth(&learned.model, initial));
                    }
                    Strategy::Periodic => {
                        report = Some(run_periodic(&prep.dep, &learned.model, tau_s, cfg.policy.ack, step));
                    }
                    Strategy::Nonperiodic | Strategy::NonperiodicEm | Strategy::Static => {
                        let planner = Planner::build(learned.model, learned.nu_hat, &cfg.policy).map_err(|e| e.to_string())?;
                        let mut rep = run_nonperiodic(&prep.dep, &planner, &nonperiodic).map_err(|e| e.to_string())?;
                        rep.strategy = strategy.name().into();
                        report = Some(rep);
                    }
                    Strategy::Online => {
                        let state = learned.state.clone().ok_or_else(|| "online learning needs the DPGMM learner".to_string())?;
                        let planner = Planner::build(learned.model, learned.nu_hat, &cfg.policy).map_err(|e| e.to_string())?;
                        let online = OnlineOptions {
                            window: cfg.engine.online.window.unwrap_or(cfg.scenario.stage1_slots),
                            refit_every: cfg.engine.online.refit_every,
                            sweeps_per_refit: cfg.engine.online.sweeps_per_refit,
                            divergence_refits: cfg.engine.online.divergence_refits,
                            summary: cfg.learner.summary(),
                            policy: cfg.policy.clone(),
                        };
                        let mut rng = streams.stream("engine", pi as u64);
                        let rep = run_online(&prep.dep, &planner, state, learned.nu_hat, &nonperiodic, &online, &mut rng)
                            .map_err(|e| e.to_string())?;
                        report = Some(rep);
                    }
                    Strategy::Theory => {
                        let planner = Planner::build(learned.model.clone(), learned.nu_hat, &cfg.policy).map_err(|e| e.to_string())?;
                        let rs = cfg.policy.reward_spec::<f64>(planner.sm.k());
                        let mut rng = streams.stream("policy-mc", pi as u64);
                        for (k, lp) in planner.table.levels.iter().enumerate() {
                            let mc = monte_carlo_value(&planner.table, k, &planner.sm, &rs, cfg.policy.mc_episodes, &mut rng)
                                .map_err(|e| e.to_string())?;
                            let mut r = row.clone();
                            r.level = Some(learned.model.paper_label(k));
                            r.v_theory = Some(lp.v0);
                            r.v_hat = Some(mc.mean);
                            r.v_hat_se = Some(mc.std_err);
                            rows.push(r);
                        }
                    }
                    Strategy::Perfect => unreachable!(),
                }
                Ok(())
            })();
            if let Err(e) = outcome {
                row.error = Some(e);
            }
            if let Some(mut rep) = report {
                rep.seed = seed;
                row.u_final = Some(rep.u_final);
                row.p_c = row.p_c.or(rep.p_c_hat);
                row.k_hat = row.k_hat.or(rep.k_hat);
                if strategy == Strategy::Online {
                    row.k_hat = rep.k_hat;
                    row.refits = Some(rep.refits);
                    row.model_updates = Some(rep.model_updates);
                    row.diverged = Some(rep.diverged);
                }
                if !opts.keep_records {
                    rep.records.clear();
                }
                out.reports.push((pi, rep));
            }
            if rows.is_empty() {
                out.rows.push(row);
            } else {
                out.rows.extend(rows);
            }
        }
    }
    Ok(out)
}

fn mean_ci(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

fn summarize_rows(preset: &str, rows: &[RunRow]) -> Vec<SummaryRow> {
    type Key = (String, u64, String, Option<usize>);
    let mut keys: Vec<Key> = Vec::new();
    for r in rows {
        let k = (r.sweep_param.clone(), r.sweep_value.to_bits(), r.strategy.clone(), r.level);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let metrics: [(&str, fn(&RunRow) -> Option<f64>); 6] = [
        ("u_final", |r| r.u_final),
        ("p_c", |r| r.p_c),
        ("k_hat", |r| r.k_hat.map(|k| k as f64)),
        ("nu_hat", |r| r.nu_hat),
        ("v_theory", |r| r.v_theory),
        ("v_hat", |r| r.v_hat),
    ];
    let mut out = Vec::new();
    for (param, bits, strategy, level) in keys {
        let group: Vec<&RunRow> = rows
            .iter()
            .filter(|r| r.sweep_param == param && r.sweep_value.to_bits() == bits && r.strategy == strategy && r.level == level)
            .collect();
        for (name, get) in metrics {
            let vals: Vec<f64> = group.iter().filter_map(|r| get(r)).collect();
            if vals.is_empty() {
                continue;
            }
            let (mean, ci95) = mean_ci(&vals);
            out.push(SummaryRow {
                preset: preset.into(),
                sweep_param: param.clone(),
                sweep_value: f64::from_bits(bits),
                strategy: strategy.clone(),
                level,
                metric: name.into(),
                n: vals.len(),
                mean,
                ci95,
            });
        }
    }
    out
}

fn curve_rows(preset: &str, points: &[(String, f64, RunConfig)], reports: &[(usize, SimReport)]) -> Vec<CurveRow> {
    let mut out = Vec::new();
    let mut keys: Vec<(usize, String)> = Vec::new();
    for (pi, r) in reports {
        let k = (*pi, r.strategy.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    for (pi, strategy) in keys {
        let curves: Vec<&Vec<(usize, f64)>> = reports
            .iter()
            .filter(|(p, r)| *p == pi && r.strategy == strategy)
            .map(|(_, r)| &r.u_curve)
            .collect();
        let len = curves.iter().map(|c| c.len()).min().unwrap_or(0);
        for i in 0..len {
            let vals: Vec<f64> = curves.iter().map(|c| c[i].1).collect();
            let (u_mean, u_ci95) = mean_ci(&vals);
            out.push(CurveRow {
                preset: preset.into(),
                sweep_param: points[pi].0.clone(),
                sweep_value: points[pi].1,
                strategy: strategy.clone(),
                tau: curves[0][i].0,
                n: vals.len(),
                u_mean,
                u_ci95,
            });
        }
    }
    out
}

/// Runs every seed of `preset.base.engine.seeds` over all sweep points and
/// strategies. Within a seed, all points sharing the scenario and learner
/// settings reuse one deployment and one Stage-I fit, and every strategy
/// sees the same statistics. Seeds run in parallel; the output order does
/// not depend on scheduling.
pub fn run_experiment(preset: &Preset, opts: &ExperimentOptions) -> Result<ExperimentResult> {
    let points = preset.points();
    for (_, _, cfg) in &points {
        cfg.validate()?;
    }
    let seeds = &preset.base.engine.seeds;
    let need_reports = ExperimentOptions {
        keep_reports: true,
        keep_records: opts.keep_records,
    };
    let per_seed = seeds
        .par_iter()
        .map(|&s| run_seed(preset, &points, s, &need_reports))
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::new();
    let mut reports = Vec::new();
    for s in per_seed {
        runs.extend(s.rows);
        reports.extend(s.reports);
    }
    // seed-major to point-major
    let order = |r: &RunRow| points.iter().position(|p| p.0 == r.sweep_param && p.1 == r.sweep_value);
    runs.sort_by_key(|r| order(r));
    reports.sort_by_key(|(pi, _)| *pi);
    let summary = summarize_rows(&preset.name, &runs);
    let curves = curve_rows(&preset.name, &points, &reports);
    let reports = if opts.keep_reports {
        reports
            .into_iter()
            .map(|(pi, report)| PointReport {
                sweep_param: points[pi].0.clone(),
                sweep_value: points[pi].1,
                report,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ExperimentResult {
        preset: preset.clone(),
        runs,
        summary,
        curves,
        reports,
    })
}

fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `runs.csv`, `summary.csv`, `curves.csv` and `config.toml` into
/// `dir`, plus one gzip JSONL slot log per kept report that has records.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("runs.csv"), &result.runs)?;
    write_csv(&dir.join("summary.csv"), &result.summary)?;
    write_csv(&dir.join("curves.csv"), &result.curves)?;
    fs::write(dir.join("config.toml"), result.preset.base.to_toml_string()?)?;
    let with_records: Vec<&PointReport> = result.reports.iter().filter(|r| !r.report.records.is_empty()).collect();
    if !with_records.is_empty() {
        let slots = dir.join("slots");
        fs::create_dir_all(&slots)?;
        for pr in with_records {
            let r = &pr.report;
            let name = format!("{}_{}_{}_seed{}.jsonl.gz", r.strategy, pr.sweep_param, pr.sweep_value, r.seed);
            let mut gz = GzEncoder::new(fs::File::create(slots.join(name))?, Compression::default());
            for rec in &r.records {
                serde_json::to_writer(&mut gz, rec)?;
                gz.write_all(b"\n")?;
            }
            gz.finish()?;
        }
    }
    Ok(())
}
