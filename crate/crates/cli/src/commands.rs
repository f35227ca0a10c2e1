use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mfabc_core::abc::ThetaFunction;
use mfabc_core::experiments::{
    burn_in_study, efficiency_settings, efficiency_study, generate_benchmark, relative_efficiency_grid, variance_study,
    write_distance_csv, write_grid_csv, BenchmarkTable, BurnInSpec, VarianceSpec,
};
use mfabc_core::models::{CostModel, RepressilatorPair, ViralPair, REPRESSILATOR_TAU, VIRAL_CELLS};
use mfabc_core::network::{repressilator_model, repressilator_prior, viral_model, viral_prior, Prior, ReactionNetwork};
use mfabc_core::sampler::{
    run_campaign, run_rejection, AdaptiveSpec, CampaignResult, CampaignSpec, EtaSource, EtaTracePoint,
};
use mfabc_core::toy::BernoulliToy;
use mfabc_core::tuning::{optimal_eta, optimal_eta_constrained, Bounds, ConstrainedMode, TuningReport};
use serde_json::json;

use crate::config::{
    EtaConfig, ExperimentConfig, Method, ModelConfig, NamedFunction, Scale, StudyConfig, TuneConfig, TuneMode,
};
use crate::manifest::{stream_docs, Manifest, Output};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Benchmark,
    Run,
    Study,
    Tune,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Benchmark => "benchmark",
            Command::Run => "run",
            Command::Study => "study",
            Command::Tune => "tune",
        }
    }
}

pub struct Context {
    pub cfg: ExperimentConfig,
    pub config_path: PathBuf,
    pub out: PathBuf,
    pub workers: usize,
}

enum Pair {
    Repressilator(RepressilatorPair),
    Viral(ViralPair),
    Toy(BernoulliToy),
}

macro_rules! with_pair {
    ($pair:expr, $p:ident => $body:expr) => {
        match $pair {
            Pair::Repressilator($p) => $body,
            Pair::Viral($p) => $body,
            Pair::Toy($p) => $body,
        }
    };
}

fn network(
    base: ReactionNetwork,
    horizon: Option<f64>,
    overrides: &std::collections::BTreeMap<String, f64>,
) -> Result<ReactionNetwork, CliError> {
    let pairs: Vec<(String, f64)> = overrides.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let mut net = base.with_overrides(&pairs).map_err(|e| CliError::Config(format!("model.overrides: {e}")))?;
    if let Some(h) = horizon {
        net.horizon = h;
    }
    Ok(net)
}

fn build_pair(cfg: &ExperimentConfig) -> Result<Pair, CliError> {
    Ok(match &cfg.model {
        ModelConfig::Repressilator { tau, horizon, overrides, prior, cost } => {
            let net = network(repressilator_model(), *horizon, overrides)?;
            let prior = prior.clone().unwrap_or_else(repressilator_prior);
            Pair::Repressilator(RepressilatorPair::new(net, prior, tau.unwrap_or(REPRESSILATOR_TAU), *cost, cfg.seed)?)
        }
        ModelConfig::Viral { cells, summary_scale, horizon, overrides, prior, cost } => {
            let net = network(viral_model(), *horizon, overrides)?;
            let prior: Prior = prior.clone().unwrap_or_else(viral_prior);
            Pair::Viral(ViralPair::new(
                net,
                prior,
                cells.unwrap_or(VIRAL_CELLS),
                summary_scale.unwrap_or(1.0),
                *cost,
                cfg.seed,
            )?)
        }
        ModelConfig::Toy { p_tp, p_fp, p_fn, cost_lo, c_p, c_n } => Pair::Toy(
            BernoulliToy::new(*p_tp, *p_fp, *p_fn, *cost_lo, *c_p, *c_n)
                .map_err(|e| CliError::Config(format!("model: {e}")))?,
        ),
    })
}

fn cost_model(cfg: &ExperimentConfig) -> Option<CostModel> {
    match &cfg.model {
        ModelConfig::Repressilator { cost, .. } | ModelConfig::Viral { cost, .. } => Some(*cost),
        ModelConfig::Toy { .. } => None,
    }
}

fn resolve(ctx: &Context, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        ctx.config_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn named(fs: &[NamedFunction]) -> Vec<(String, ThetaFunction)> {
    fs.iter().map(|f| (f.name.clone(), f.function.clone())).collect()
}

fn generate(ctx: &Context, out: &mut Output) -> Result<BenchmarkTable, CliError> {
    let pair = build_pair(&ctx.cfg)?;
    let (eps_lo, eps_hi) = ctx.cfg.eps();
    let table = with_pair!(&pair, p => generate_benchmark(p, ctx.cfg.rows(), ctx.cfg.seed, eps_lo, eps_hi))?;
    out.write_csv("benchmark.csv", |w| table.write_csv(w))?;
    Ok(table)
}

/// A stored table if one is named, otherwise a freshly generated one
/// (written to the output directory).
fn table(ctx: &Context, stored: Option<&PathBuf>, out: &mut Output) -> Result<(BenchmarkTable, String), CliError> {
    match stored {
        Some(p) => {
            let path = resolve(ctx, p);
            let f = File::open(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let (eps_lo, eps_hi) = ctx.cfg.eps();
            let t = BenchmarkTable::read_csv(f, eps_lo, eps_hi)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Ok((t, path.display().to_string()))
        }
        None => Ok((generate(ctx, out)?, "benchmark.csv (generated)".to_string())),
    }
}

fn table_summary(t: &BenchmarkTable) -> serde_json::Value {
    json!({
        "rows": t.len(),
        "invalid": t.invalid.len(),
        "eps_lo": t.eps_lo,
        "eps_hi": t.eps_hi,
        "cost_ratio": t.cost_ratio(),
        "distance_correlation": t.distance_correlation(),
        "estimates": t.estimates().ok(),
    })
}

fn eta_source(ctx: &Context, eta: &EtaConfig) -> Result<EtaSource, CliError> {
    Ok(match eta {
        EtaConfig::Fixed { eta1, eta2 } => EtaSource::Fixed { eta1: *eta1, eta2: *eta2 },
        EtaConfig::Optimal { estimates: Some(e), mode, bounds, .. } => {
            EtaSource::Optimal { estimates: *e, bounds: bounds.unwrap_or_default(), mode: *mode }
        }
        EtaConfig::Optimal { report: Some(p), mode, bounds, .. } => {
            let path = resolve(ctx, p);
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let report: TuningReport = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("campaign.eta.report ({}): {e}", path.display())))?;
            let stored_mode = match report.mode.as_str() {
                "early_rejection" => Some(ConstrainedMode::EarlyRejection),
                "early_decision" => Some(ConstrainedMode::EarlyDecision),
                _ => None,
            };
            EtaSource::Optimal {
                estimates: report.estimates,
                bounds: bounds.unwrap_or(report.eta.bounds),
                mode: mode.or(stored_mode),
            }
        }
        EtaConfig::Optimal { .. } => {
            return Err(CliError::Config("campaign.eta: give exactly one of `estimates` or `report`".into()))
        }
        EtaConfig::Adaptive { burn_in, bounds, objective, gate, freeze_after } => EtaSource::Adaptive(AdaptiveSpec {
            burn_in: *burn_in,
            bounds: bounds.unwrap_or_default(),
            objective: objective.clone(),
            gate: *gate,
            freeze_after: match freeze_after {
                None => Some(2 * burn_in),
                Some(0) => None,
                Some(n) => Some(*n),
            },
        }),
    })
}

fn write_trace(out: &mut Output, trace: &[EtaTracePoint]) -> Result<(), CliError> {
    out.write_csv("eta_trace.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["index", "eta1", "eta2", "at_floor1", "at_floor2", "provisional"])?;
        for p in trace {
            w.write_record([
                p.index.to_string(),
                p.eta1.to_string(),
                p.eta2.to_string(),
                u8::from(p.flags.at_floor1).to_string(),
                u8::from(p.flags.at_floor2).to_string(),
                u8::from(p.flags.provisional).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

fn default_subsamples(scale: Scale) -> (usize, usize) {
    match scale {
        Scale::Desk => (200, 50),
        Scale::Paper => (10_000, 500),
    }
}

fn bounds_or_default(b: &Option<Bounds>) -> Bounds {
    b.unwrap_or_default()
}

/// What the command would do, for `--dry-run`.
pub fn plan(ctx: &Context, cmd: Command) -> serde_json::Value {
    let cfg = &ctx.cfg;
    let (eps_lo, eps_hi) = cfg.eps();
    let mut steps: Vec<String> = Vec::new();
    let gen = format!("generate {} benchmark rows of the {} model", cfg.rows(), cfg.model.label());
    let source = |stored: &Option<PathBuf>| match stored {
        Some(p) => format!("read benchmark table {}", resolve(ctx, p).display()),
        None => gen.clone(),
    };
    match cmd {
        Command::Benchmark => {
            steps.push(gen.clone());
            steps.push("write benchmark.csv, distances.csv".into());
        }
        Command::Run => match &cfg.campaign {
            Some(c) => {
                steps.push(format!(
                    "{:?} campaign of the {} model, stop rule {:?}",
                    c.method,
                    cfg.model.label(),
                    c.stop
                ));
                steps.push("write campaign.csv (and eta_trace.csv when adaptive)".into());
            }
            None => steps.push("error: no [campaign] section".into()),
        },
        Command::Study => match &cfg.study {
            Some(StudyConfig::Efficiency { table, .. }) => {
                steps.push(source(table));
                steps
                    .push("efficiency study; write efficiency.csv, exceedance.csv, eta_grid.csv, distances.csv".into());
            }
            Some(StudyConfig::Variance { table, .. }) => {
                steps.push(source(table));
                steps.push("variance study; write variance.csv".into());
            }
            Some(StudyConfig::BurnIn { table, .. }) => {
                steps.push(source(table));
                steps.push("burn-in study; write burn_in_efficiency.csv, burn_in_eta.csv".into());
            }
            None => steps.push("error: no [study] section".into()),
        },
        Command::Tune => {
            let t = cfg.tune.clone().unwrap_or_default();
            steps.push(source(&t.table));
            steps.push("write tuning.json, eta_grid.csv".into());
        }
    }
    json!({
        "command": cmd.name(),
        "model": cfg.model.label(),
        "seed": cfg.seed,
        "scale": cfg.scale,
        "eps_lo": eps_lo,
        "eps_hi": eps_hi,
        "workers": ctx.workers,
        "out": ctx.out.display().to_string(),
        "steps": steps,
    })
}

pub fn execute(ctx: &Context, cmd: Command) -> Result<PathBuf, CliError> {
    let start = Instant::now();
    let mut out = Output::create(&ctx.out)?;
    let (summary, trace, streams) = match cmd {
        Command::Benchmark => benchmark(ctx, &mut out)?,
        Command::Run => run(ctx, &mut out)?,
        Command::Study => study(ctx, &mut out)?,
        Command::Tune => tune(ctx, &mut out)?,
    };
    let manifest = Manifest {
        tool: format!("mfabc {}", env!("CARGO_PKG_VERSION")),
        command: cmd.name().to_string(),
        config_path: ctx.config_path.display().to_string(),
        seed: ctx.cfg.seed,
        scale: ctx.cfg.scale,
        workers: ctx.workers,
        streams: stream_docs(&streams),
        config: ctx.cfg.clone(),
        summary,
        eta_trace: trace,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        files: vec![],
    };
    out.finish(manifest)
}

type Produced = (serde_json::Value, Option<Vec<EtaTracePoint>>, Vec<&'static str>);

fn benchmark(ctx: &Context, out: &mut Output) -> Result<Produced, CliError> {
    let t = generate(ctx, out)?;
    out.write_csv("distances.csv", |w| write_distance_csv(&t, w))?;
    let mut summary = table_summary(&t);
    summary["cost_model"] = json!(cost_model(&ctx.cfg));
    Ok((summary, None, vec!["campaign", "observed"]))
}

fn campaign_summary(r: &CampaignResult, functions: &[(String, ThetaFunction)]) -> serde_json::Value {
    json!({
        "sample": r.sample.summary(functions),
        "initial_eta": r.initial_eta,
        "final_eta": r.final_eta,
        "gate_after": r.gate_after,
        "trace_points": r.eta_trace.len(),
        "low_fidelity_cost": r.timing.low_total,
        "high_fidelity_cost": r.timing.high_total,
        "invalid": r.invalid,
    })
}

fn run(ctx: &Context, out: &mut Output) -> Result<Produced, CliError> {
    let c = ctx.cfg.campaign.as_ref().ok_or_else(|| CliError::Config("campaign: section required for `run`".into()))?;
    let eta = match (&c.method, &c.eta) {
        (Method::Rejection, _) => EtaSource::Fixed { eta1: 1.0, eta2: 1.0 },
        (Method::Multifidelity, Some(e)) => eta_source(ctx, e)?,
        (Method::Multifidelity, None) => {
            return Err(CliError::Config("campaign.eta: required for a multifidelity campaign".into()))
        }
    };
    let (eps_lo, eps_hi) = ctx.cfg.eps();
    let spec = CampaignSpec { eps_lo, eps_hi, eta, stop: c.stop, seed: ctx.cfg.seed, coupling: c.coupling };
    spec.validate().map_err(|e| CliError::Config(format!("campaign: {e}")))?;
    let pair = build_pair(&ctx.cfg)?;
    let result = with_pair!(&pair, p => match c.method {
        Method::Rejection => run_rejection(p, &spec),
        Method::Multifidelity => run_campaign(p, &spec),
    })?;
    out.write_csv("campaign.csv", |w| result.sample.write_csv(w))?;
    if !result.eta_trace.is_empty() {
        write_trace(out, &result.eta_trace)?;
    }
    let summary = campaign_summary(&result, &named(&c.functions));
    let trace = matches!(spec.eta, EtaSource::Adaptive(_)).then(|| result.eta_trace.clone());
    Ok((summary, trace, vec!["campaign", "observed"]))
}

fn study(ctx: &Context, out: &mut Output) -> Result<Produced, CliError> {
    let s = ctx.cfg.study.as_ref().ok_or_else(|| CliError::Config("study: section required for `study`".into()))?;
    let seed = ctx.cfg.seed;
    let summary = match s {
        StudyConfig::Efficiency { table: stored, subsample_size, repeats, settings, bounds, grid } => {
            let (t, source) = table(ctx, stored.as_ref(), out)?;
            let bounds = bounds_or_default(bounds);
            let est = t.estimates().ok();
            let settings = match (settings, &est) {
                (Some(s), _) => s.clone(),
                (None, Some(e)) => efficiency_settings(e, bounds),
                (None, None) => {
                    return Err(CliError::Run(
                        "table has too few checked records to estimate rates; give study.settings".into(),
                    ))
                }
            };
            let (def_size, def_repeats) = default_subsamples(ctx.cfg.scale);
            let size = subsample_size.unwrap_or(def_size);
            let repeats = repeats.unwrap_or(def_repeats);
            let study = efficiency_study(&t, &settings, size, repeats, seed)
                .map_err(|e| CliError::Config(format!("study: {e}")))?;
            out.write_csv("efficiency.csv", |w| study.write_efficiency_csv(w))?;
            out.write_csv("exceedance.csv", |w| study.write_exceedance_csv(w))?;
            out.write_csv("distances.csv", |w| write_distance_csv(&t, w))?;
            if let Some(e) = &est {
                let g = relative_efficiency_grid(e, bounds, grid.unwrap_or(50));
                out.write_csv("eta_grid.csv", |w| write_grid_csv(&g, w))?;
            }
            let per_setting: Vec<_> = study
                .settings
                .iter()
                .enumerate()
                .map(|(i, st)| json!({"setting": st.label, "eta1": st.eta1, "eta2": st.eta2, "phi": study.phi[i], "median_efficiency": study.median(&st.label)}))
                .collect();
            json!({"table": source, "table_summary": table_summary(&t), "subsample_size": size, "repeats": repeats, "settings": per_setting})
        }
        StudyConfig::Variance { table: stored, functions, budget, repeats, midway, bounds } => {
            let (t, source) = table(ctx, stored.as_ref(), out)?;
            let row_cost = t.rows.iter().map(|r| r.cost_lo + r.cost_hi).sum::<f64>() / t.len() as f64;
            let budget = budget.unwrap_or(match ctx.cfg.scale {
                Scale::Desk => 1000.0 * row_cost,
                Scale::Paper => 30.0,
            });
            let repeats = repeats.unwrap_or(match ctx.cfg.scale {
                Scale::Desk => 1000,
                Scale::Paper => 5000,
            });
            let spec = VarianceSpec {
                functions: named(functions),
                budget,
                repeats,
                seed,
                bounds: bounds_or_default(bounds),
                midway: *midway,
            };
            let study = variance_study(&t, &spec)?;
            out.write_csv("variance.csv", |w| study.write_csv(w))?;
            json!({"table": source, "table_summary": table_summary(&t), "budget": budget, "repeats": repeats, "spearman": study.spearman})
        }
        StudyConfig::BurnIn { table: stored, burn_in, adaptive_len, repeats, bounds } => {
            let (t, source) = table(ctx, stored.as_ref(), out)?;
            let repeats = repeats.unwrap_or(100);
            let share = (t.len() / repeats) as u64;
            let cap = match ctx.cfg.scale {
                Scale::Desk => u64::MAX,
                Scale::Paper => 1000,
            };
            let burn_in = burn_in.unwrap_or((share / 2).min(cap));
            let adaptive_len = adaptive_len.unwrap_or(share.saturating_sub(burn_in));
            if burn_in == 0 || adaptive_len == 0 {
                return Err(CliError::Config(format!(
                    "study: {} rows cannot hold {repeats} repeats of burn-in plus adaptive phase; set study.burn_in / study.adaptive_len or more benchmark.rows",
                    t.len()
                )));
            }
            let spec = BurnInSpec { burn_in, adaptive_len, repeats, seed, bounds: bounds_or_default(bounds) };
            let study = burn_in_study(&t, &spec).map_err(|e| CliError::Config(format!("study: {e}")))?;
            out.write_csv("burn_in_efficiency.csv", |w| study.write_efficiency_csv(w))?;
            out.write_csv("burn_in_eta.csv", |w| study.write_eta_csv(w))?;
            json!({"table": source, "table_summary": table_summary(&t), "burn_in": burn_in, "adaptive_len": adaptive_len, "repeats": repeats})
        }
    };
    Ok((summary, None, vec!["campaign", "observed", "study"]))
}

fn tune(ctx: &Context, out: &mut Output) -> Result<Produced, CliError> {
    let cfg: TuneConfig = ctx.cfg.tune.clone().unwrap_or_default();
    let (t, source) = table(ctx, cfg.table.as_ref(), out)?;
    let bounds = bounds_or_default(&cfg.bounds);
    let est = match &cfg.function {
        Some(f) => t.f_estimates(f)?,
        None => t.estimates()?,
    };
    let (label, eta) = match cfg.mode {
        TuneMode::Unconstrained => ("unconstrained", optimal_eta(&est, bounds)),
        TuneMode::EarlyRejection => {
            ("early_rejection", optimal_eta_constrained(&est, ConstrainedMode::EarlyRejection, bounds))
        }
        TuneMode::EarlyDecision => {
            ("early_decision", optimal_eta_constrained(&est, ConstrainedMode::EarlyDecision, bounds))
        }
    };
    let report = TuningReport::new(est, label, eta);
    out.write_json("tuning.json", &report)?;
    let g = relative_efficiency_grid(&est, bounds, cfg.grid.unwrap_or(50));
    out.write_csv("eta_grid.csv", |w| write_grid_csv(&g, w))?;
    Ok((
        json!({"table": source, "table_summary": table_summary(&t), "report": report}),
        None,
        vec!["campaign", "observed"],
    ))
}
