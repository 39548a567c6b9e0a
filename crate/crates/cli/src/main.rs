use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use levelshare::config::{LearnMethod, Preset, RunConfig, PRESET_NAMES};
use levelshare::dpgmm::{effective_k_trace, run_gibbs, summarize_with, Chain};
use levelshare::engine::{estimate_nu_hat, run_experiment, write_outputs, Deployment, ExperimentOptions, ExperimentResult, Planner};
use levelshare::policy::{horizon_ratio, RewardSpec, MIN_RECOMMENDED_GRID};
use levelshare::rng::SeedStreams;
use levelshare::{Error, MixtureModel};

#[derive(Parser)]
#[command(name = "levelshare", version, about = "Blind power-level learning and spectrum sharing simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Source {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (fig6 .. fig10); with --config, the config replaces the
    /// preset's base settings and the preset's sweeps are kept.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Em,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate Stage-I statistics and fit the mixture model.
    Learn {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        /// Fit EM with the true level count instead of the DPGMM.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Derive the sense model and policy table from a model file.
    Plan {
        #[arg(long)]
        model: PathBuf,
        /// Policy settings; defaults to the configuration stored in the model file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        tau_s: Option<usize>,
        #[arg(long)]
        grid_size: Option<usize>,
        /// Print the threshold curves as CSV (tau,k,p_star) on stdout.
        #[arg(long)]
        dump: bool,
        /// Output directory; defaults to the model file's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a configuration or preset across seeds.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Run this single master seed.
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Run master seeds 0..N.
        #[arg(long)]
        seeds: Option<u64>,
        /// Override the horizon; Stage I shrinks to at most half of it.
        #[arg(long)]
        horizon: Option<usize>,
        /// Also write gzip JSONL per-slot logs.
        #[arg(long)]
        slot_log: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run presets fig6 to fig10 into one subdirectory each.
    Reproduce {
        #[arg(long)]
        seeds: Option<u64>,
        /// Restrict to these presets.
        #[arg(long, value_delimiter = ',')]
        preset: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::Config(_)) | Some(Error::UnknownPreset(_)) => Failure::Config(format!("{e:#}")),
            _ => Failure::Runtime(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CliResult<T> = Result<T, Failure>;

/// Model file written by `learn` and read by `plan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    method: LearnMethod,
    seed: u64,
    model: MixtureModel,
    nu_hat: f64,
    config: RunConfig,
}

fn read_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_toml_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn load_source(src: &Source) -> CliResult<Preset> {
    let preset = match (&src.config, &src.preset) {
        (None, None) => return Err(Failure::Config("either --config or --preset is required".into())),
        (Some(c), None) => Preset::custom(read_config(c)?),
        (None, Some(p)) => Preset::named(p)?,
        (Some(c), Some(p)) => {
            let mut preset = Preset::named(p)?;
            preset.base = read_config(c)?;
            preset
        }
    };
    Ok(preset)
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_learn(source: &Source, seed: Option<u64>, baseline: Option<Baseline>, out: &Path) -> CliResult<()> {
    let cfg = load_source(source)?.base;
    let seed = seed.unwrap_or(cfg.engine.seeds[0]);
    let streams = SeedStreams::new(seed);
    let schedule = cfg.scenario.schedule()?;
    let dep = Deployment::generate(
        schedule,
        cfg.scenario.horizon.max(cfg.scenario.stage1_slots),
        cfg.scenario.stage1_slots,
        &mut streams.stream("scenario", 0),
    )?;
    let x = dep.stage1_stats();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let method = match baseline {
        Some(Baseline::Em) => LearnMethod::Em,
        None => cfg.learner.method,
    };
    let model = match method {
        LearnMethod::Dpgmm => {
            let chain: Chain<f64> = run_gibbs(x, &cfg.learner.gibbs(), &mut streams.stream("learner", 0))?;
            let file = fs::File::create(out.join("chain.jsonl")).context("creating chain.jsonl")?;
            chain.write_jsonl(std::io::BufWriter::new(file))?;
            let keff = effective_k_trace(&chain, &cfg.learner.summary());
            let mut diag = String::from("iteration,k,k_effective,joint_log_likelihood\n");
            for (s, ke) in chain.snapshots.iter().zip(&keff) {
                diag.push_str(&format!("{},{},{},{}\n", s.iteration, s.k, ke, s.joint_log_likelihood));
            }
            fs::write(out.join("diagnostics.csv"), diag).context("writing diagnostics.csv")?;
            summarize_with(&chain, &cfg.learner.summary())?
        }
        LearnMethod::Em => {
            let l = dep.schedule.initial().level_count();
            let fit = levelshare::dpgmm::fit_em_gmm(x, l, cfg.learner.em_restarts, &mut streams.stream("learner-em", 0))?;
            let mut diag = String::from("iteration,log_likelihood\n");
            for (i, ll) in fit.loglik.iter().enumerate() {
                diag.push_str(&format!("{i},{ll}\n"));
            }
            fs::write(out.join("diagnostics.csv"), diag).context("writing diagnostics.csv")?;
            fit.model
        }
    };
    let nu_hat = estimate_nu_hat(x, &model, cfg.learner.duration_min_run)?;
    println!("K = {}", model.k());
    for k in 0..model.k() {
        println!(
            "  level {}: mean {:.6}, precision {:.6e}, weight {:.4}",
            model.paper_label(k),
            model.mu[k],
            model.precision[k],
            model.weight[k]
        );
    }
    println!("nu_hat = {nu_hat:.3}");
    let file = ModelFile {
        method,
        seed,
        model,
        nu_hat,
        config: cfg,
    };
    write_json(&out.join("model.json"), &file)?;
    Ok(())
}

fn cmd_plan(
    model: &Path,
    config: Option<&Path>,
    tau_s: Option<usize>,
    grid_size: Option<usize>,
    dump: bool,
    out: Option<&Path>,
) -> CliResult<()> {
    let text = fs::read_to_string(model)
        .with_context(|| format!("reading {}", model.display()))
        .map_err(Failure::Runtime)?;
    let mf: ModelFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", model.display()))
        .map_err(Failure::Runtime)?;
    let mut policy = match config {
        Some(c) => read_config(c)?.policy,
        None => mf.config.policy.clone(),
    };
    if let Some(t) = tau_s {
        policy.tau_s = t;
    }
    if let Some(g) = grid_size {
        policy.grid_size = g;
    }
    let mut check = mf.config.clone();
    check.policy = policy.clone();
    check.validate()?;
    if policy.grid_size < MIN_RECOMMENDED_GRID {
        eprintln!(
            "warning: belief grid of {} points is below the recommended {MIN_RECOMMENDED_GRID}; values and thresholds are coarse",
            policy.grid_size
        );
    }
    let planner = Planner::build(mf.model.clone(), mf.nu_hat, &policy).context("deriving the sense model")?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| model.parent().unwrap_or(Path::new(".")).to_path_buf());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("sense_model.json"), planner.sm.to_json()?).context("writing sense_model.json")?;
    fs::write(out.join("policy.json"), planner.table.to_json()?).context("writing policy.json")?;
    let rs: RewardSpec<f64> = policy.reward_spec(planner.sm.k());
    let mut lines = Vec::new();
    for lp in &planner.table.levels {
        let ratio = horizon_ratio(lp.k, &planner.sm, &rs);
        lines.push(format!(
            "level {} (k={}): horizon {}, ratio threshold {ratio}, V(0,1,k) = {:.6}",
            planner.model.paper_label(lp.k),
            lp.k,
            lp.horizon,
            lp.v0
        ));
    }
    if dump {
        print!("{}", planner.table.threshold_csv());
        for l in lines {
            eprintln!("{l}");
        }
    } else {
        for l in lines {
            println!("{l}");
        }
    }
    Ok(())
}

fn print_summary(res: &ExperimentResult) {
    for s in &res.summary {
        if !matches!(s.metric.as_str(), "u_final" | "p_c" | "k_hat" | "v_theory" | "v_hat") {
            continue;
        }
        let level = s.level.map(|l| format!(" level {l}")).unwrap_or_default();
        let point = if s.sweep_param == "none" {
            String::new()
        } else {
            format!("{}={} ", s.sweep_param, s.sweep_value)
        };
        println!("{}{}{} {}: {:.4} ± {:.4} (n={})", point, s.strategy, level, s.metric, s.mean, s.ci95, s.n);
    }
}

fn run_and_write(preset: &Preset, out: &Path, slot_log: bool) -> CliResult<()> {
    let opts = ExperimentOptions {
        keep_reports: true,
        keep_records: slot_log,
    };
    let res = run_experiment(preset, &opts).with_context(|| format!("running preset {}", preset.name))?;
    write_outputs(&res, out).with_context(|| format!("writing results to {}", out.display()))?;
    let reports = out.join("reports");
    fs::create_dir_all(&reports).context("creating reports directory")?;
    for pr in &res.reports {
        let mut r = pr.report.clone();
        r.records.clear();
        let name = format!("{}_{}_{}_seed{}.json", r.strategy, pr.sweep_param, pr.sweep_value, r.seed);
        write_json(&reports.join(name), &r)?;
    }
    print_summary(&res);
    let failed: Vec<_> = res.runs.iter().filter(|r| r.error.is_some()).collect();
    if !failed.is_empty() {
        for r in &failed {
            eprintln!(
                "run failed: preset {} {}={} seed {} strategy {}: {}",
                r.preset,
                r.sweep_param,
                r.sweep_value,
                r.seed,
                r.strategy,
                r.error.as_deref().unwrap_or("")
            );
        }
        return Err(Failure::Runtime(anyhow::anyhow!("{} of {} runs failed", failed.len(), res.runs.len())));
    }
    Ok(())
}

fn cmd_simulate(
    source: &Source,
    seed: Option<u64>,
    seeds: Option<u64>,
    horizon: Option<usize>,
    slot_log: bool,
    out: &Path,
) -> CliResult<()> {
    let mut preset = load_source(source)?;
    let base = &mut preset.base;
    if let Some(s) = seed {
        base.engine.seeds = vec![s];
    }
    if let Some(n) = seeds {
        base.engine.seeds = (0..n).collect();
    }
    if let Some(h) = horizon {
        base.scenario.horizon = h;
        base.scenario.stage1_slots = base.scenario.stage1_slots.min((h / 2).max(10));
    }
    base.output.slot_log |= slot_log;
    base.validate()?;
    let slot_log = base.output.slot_log;
    run_and_write(&preset, out, slot_log)
}

fn cmd_reproduce(seeds: Option<u64>, only: &[String], out: &Path) -> CliResult<()> {
    for name in only {
        if !PRESET_NAMES.contains(&name.as_str()) {
            return Err(Error::UnknownPreset(name.clone()).into());
        }
    }
    for name in PRESET_NAMES {
        if !only.is_empty() && !only.iter().any(|o| o == name) {
            continue;
        }
        let mut preset = Preset::named(name)?;
        if let Some(n) = seeds {
            preset.base.engine.seeds = (0..n).collect();
        }
        println!("== {name}");
        run_and_write(&preset, &out.join(name), false)?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.cmd {
        Cmd::Learn {
            source,
            seed,
            baseline,
            out,
        } => cmd_learn(source, *seed, *baseline, out),
        Cmd::Plan {
            model,
            config,
            tau_s,
            grid_size,
            dump,
            out,
        } => cmd_plan(model, config.as_deref(), *tau_s, *grid_size, *dump, out.as_deref()),
        Cmd::Simulate {
            source,
            seed,
            seeds,
            horizon,
            slot_log,
            out,
        } => cmd_simulate(source, *seed, *seeds, *horizon, *slot_log, out),
        Cmd::Reproduce { seeds, preset, out } => cmd_reproduce(*seeds, preset, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
