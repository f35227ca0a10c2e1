//! Experiment configuration: TOML (or JSON) with unknown keys rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mfabc_core::abc::ThetaFunction;
use mfabc_core::experiments::EtaSetting;
use mfabc_core::models::{CostModel, REPRESSILATOR_EPSILON, REPRESSILATOR_TAU, VIRAL_CELLS, VIRAL_EPSILON};
use mfabc_core::network::{repressilator_prior, viral_prior, Prior};
use mfabc_core::sampler::{Gate, Objective, StopRule};
use mfabc_core::toy::TOY_EPSILON;
use mfabc_core::tuning::{Bounds, ConstrainedMode, PerfEstimates};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub scale: Scale,
    pub model: ModelConfig,
    #[serde(default)]
    pub distance: DistanceConfig,
    #[serde(default)]
    pub benchmark: BenchmarkConfig,
    pub campaign: Option<CampaignConfig>,
    pub study: Option<StudyConfig>,
    pub tune: Option<TuneConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ModelConfig {
    Repressilator {
        tau: Option<f64>,
        horizon: Option<f64>,
        #[serde(default)]
        overrides: BTreeMap<String, f64>,
        prior: Option<Prior>,
        #[serde(default)]
        cost: CostModel,
    },
    Viral {
        cells: Option<usize>,
        /// 1 for fractions, 100 for percentages.
        summary_scale: Option<f64>,
        horizon: Option<f64>,
        #[serde(default)]
        overrides: BTreeMap<String, f64>,
        prior: Option<Prior>,
        #[serde(default)]
        cost: CostModel,
    },
    /// Correlated Bernoulli acceptance indicators with fixed costs.
    Toy { p_tp: f64, p_fp: f64, p_fn: f64, cost_lo: f64, c_p: f64, c_n: f64 },
}

impl ModelConfig {
    pub fn label(&self) -> &'static str {
        match self {
            ModelConfig::Repressilator { .. } => "repressilator",
            ModelConfig::Viral { .. } => "viral",
            ModelConfig::Toy { .. } => "toy",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelConfig::Repressilator { prior, .. } => prior.as_ref().map_or(repressilator_prior().dim(), Prior::dim),
            ModelConfig::Viral { prior, .. } => prior.as_ref().map_or(viral_prior().dim(), Prior::dim),
            ModelConfig::Toy { .. } => 1,
        }
    }

    fn default_epsilon(&self) -> f64 {
        match self {
            ModelConfig::Repressilator { .. } => REPRESSILATOR_EPSILON,
            ModelConfig::Viral { .. } => VIRAL_EPSILON,
            ModelConfig::Toy { .. } => TOY_EPSILON,
        }
    }

    fn default_rows(&self, scale: Scale) -> u64 {
        match (self, scale) {
            (ModelConfig::Repressilator { .. }, Scale::Desk) => 10_000,
            (ModelConfig::Repressilator { .. }, Scale::Paper) => 5_000_000,
            (ModelConfig::Viral { .. }, Scale::Desk) => 5_000,
            (ModelConfig::Viral { .. }, Scale::Paper) => 100_000,
            (ModelConfig::Toy { .. }, Scale::Desk) => 10_000,
            (ModelConfig::Toy { .. }, Scale::Paper) => 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceConfig {
    pub eps_lo: Option<f64>,
    pub eps_hi: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub rows: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Multifidelity,
    Rejection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedFunction {
    pub name: String,
    pub function: ThetaFunction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default)]
    pub method: Method,
    pub eta: Option<EtaConfig>,
    pub stop: StopRule,
    /// Rejection only: run the low-fidelity model too.
    #[serde(default)]
    pub coupling: bool,
    #[serde(default)]
    pub functions: Vec<NamedFunction>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum EtaConfig {
    Fixed {
        eta1: f64,
        eta2: f64,
    },
    /// Optimum from explicit estimates or from a `tune` report file.
    Optimal {
        estimates: Option<PerfEstimates>,
        report: Option<PathBuf>,
        mode: Option<ConstrainedMode>,
        bounds: Option<Bounds>,
    },
    Adaptive {
        burn_in: u64,
        bounds: Option<Bounds>,
        #[serde(default)]
        objective: Objective,
        #[serde(default)]
        gate: Gate,
        /// Defaults to twice the burn-in; 0 keeps adapting for the whole run.
        freeze_after: Option<u64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum StudyConfig {
    Efficiency {
        /// Stored benchmark CSV; generated when absent.
        table: Option<PathBuf>,
        subsample_size: Option<usize>,
        repeats: Option<usize>,
        /// Defaults to the standard settings plus the midway variants.
        settings: Option<Vec<EtaSetting>>,
        bounds: Option<Bounds>,
        /// Resolution of the relative-efficiency grid written for plotting.
        grid: Option<usize>,
    },
    Variance {
        table: Option<PathBuf>,
        functions: Vec<NamedFunction>,
        /// Per-repeat budget in cost units; default 1000 mean row costs.
        budget: Option<f64>,
        repeats: Option<usize>,
        #[serde(default)]
        midway: bool,
        bounds: Option<Bounds>,
    },
    BurnIn {
        table: Option<PathBuf>,
        burn_in: Option<u64>,
        adaptive_len: Option<u64>,
        repeats: Option<usize>,
        bounds: Option<Bounds>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMode {
    #[default]
    Unconstrained,
    EarlyRejection,
    EarlyDecision,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub mode: TuneMode,
    pub bounds: Option<Bounds>,
    /// Tune for the variance of this function instead of ESS.
    pub function: Option<ThetaFunction>,
    pub grid: Option<usize>,
}

/// Parse by extension: `.json` as JSON, anything else as TOML. Errors carry
/// the path of the offending field.
pub fn parse(path: &Path, text: &str) -> Result<ExperimentConfig, CliError> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Config(format!("{}: {}", e.path(), e.inner())))
    } else {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let msg = e.inner().message().to_string();
            CliError::Config(format!("{}: {msg}", e.path()))
        })
    }
}

fn bad(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(path, format!("must be positive and finite, got {v}")))
    }
}

fn probability(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(bad(path, format!("must lie in (0, 1], got {v}")))
    }
}

fn nonzero<T: PartialEq + Default + std::fmt::Display>(path: &str, v: T) -> Result<(), CliError> {
    if v == T::default() {
        Err(bad(path, "must be positive"))
    } else {
        Ok(())
    }
}

fn check_bounds(path: &str, b: &Option<Bounds>) -> Result<(), CliError> {
    match b {
        Some(b) => b.validate().map_err(|e| bad(path, e)),
        None => Ok(()),
    }
}

fn check_function(path: &str, f: &ThetaFunction, dim: usize) -> Result<(), CliError> {
    match f.max_index() {
        Some(i) if i >= dim => Err(bad(path, format!("parameter index {i} out of range for {dim} parameters"))),
        _ => Ok(()),
    }
}

fn check_functions(path: &str, fs: &[NamedFunction], dim: usize) -> Result<(), CliError> {
    for (i, f) in fs.iter().enumerate() {
        check_function(&format!("{path}[{i}].function"), &f.function, dim)?;
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn eps(&self) -> (f64, f64) {
        let d = self.model.default_epsilon();
        (self.distance.eps_lo.unwrap_or(d), self.distance.eps_hi.unwrap_or(d))
    }

    pub fn rows(&self) -> u64 {
        self.benchmark.rows.unwrap_or_else(|| self.model.default_rows(self.scale))
    }

    /// Value checks that need no simulation.
    pub fn validate(&self) -> Result<(), CliError> {
        let (eps_lo, eps_hi) = self.eps();
        positive("distance.eps_lo", eps_lo)?;
        positive("distance.eps_hi", eps_hi)?;
        nonzero("benchmark.rows", self.rows())?;
        match &self.model {
            ModelConfig::Repressilator { tau, horizon, prior, cost, .. } => {
                positive("model.tau", tau.unwrap_or(REPRESSILATOR_TAU))?;
                if let Some(h) = horizon {
                    positive("model.horizon", *h)?;
                }
                if let Some(p) = prior {
                    p.validate().map_err(|e| bad("model.prior", e))?;
                }
                cost.validate().map_err(|e| bad("model.cost", e))?;
            }
            ModelConfig::Viral { cells, summary_scale, horizon, prior, cost, .. } => {
                nonzero("model.cells", cells.unwrap_or(VIRAL_CELLS))?;
                positive("model.summary_scale", summary_scale.unwrap_or(1.0))?;
                if let Some(h) = horizon {
                    positive("model.horizon", *h)?;
                }
                if let Some(p) = prior {
                    p.validate().map_err(|e| bad("model.prior", e))?;
                }
                cost.validate().map_err(|e| bad("model.cost", e))?;
            }
            ModelConfig::Toy { p_tp, p_fp, p_fn, cost_lo, c_p, c_n } => {
                mfabc_core::toy::BernoulliToy::new(*p_tp, *p_fp, *p_fn, *cost_lo, *c_p, *c_n)
                    .map_err(|e| bad("model", e))?;
            }
        }
        let dim = self.model.dim();
        if let Some(c) = &self.campaign {
            match c.stop {
                StopRule::Count(n) => nonzero("campaign.stop.count", n)?,
                StopRule::Budget { seconds, max_records } => {
                    positive("campaign.stop.budget.seconds", seconds)?;
                    if let Some(m) = max_records {
                        nonzero("campaign.stop.budget.max_records", m)?;
                    }
                }
            }
            check_functions("campaign.functions", &c.functions, dim)?;
            match (&c.method, &c.eta) {
                (Method::Multifidelity, None) => {
                    return Err(bad("campaign.eta", "required for a multifidelity campaign"))
                }
                (_, Some(EtaConfig::Fixed { eta1, eta2 })) => {
                    probability("campaign.eta.eta1", *eta1)?;
                    probability("campaign.eta.eta2", *eta2)?;
                }
                (_, Some(EtaConfig::Optimal { estimates, report, bounds, .. })) => {
                    check_bounds("campaign.eta.bounds", bounds)?;
                    match (estimates, report) {
                        (Some(e), None) => e.validate().map_err(|m| bad("campaign.eta.estimates", m))?,
                        (None, Some(_)) => {}
                        _ => return Err(bad("campaign.eta", "give exactly one of `estimates` or `report`")),
                    }
                }
                (_, Some(EtaConfig::Adaptive { burn_in, bounds, objective, .. })) => {
                    nonzero("campaign.eta.burn_in", *burn_in)?;
                    check_bounds("campaign.eta.bounds", bounds)?;
                    if let Objective::Function { function } = objective {
                        check_function("campaign.eta.objective.function", function, dim)?;
                    }
                }
                (Method::Rejection, None) => {}
            }
        }
        if let Some(s) = &self.study {
            match s {
                StudyConfig::Efficiency { subsample_size, repeats, settings, bounds, grid, .. } => {
                    if let Some(n) = subsample_size {
                        nonzero("study.subsample_size", *n)?;
                    }
                    if let Some(n) = repeats {
                        nonzero("study.repeats", *n)?;
                    }
                    if let Some(n) = grid {
                        nonzero("study.grid", *n)?;
                    }
                    check_bounds("study.bounds", bounds)?;
                    for (i, st) in settings.iter().flatten().enumerate() {
                        probability(&format!("study.settings[{i}].eta1"), st.eta1)?;
                        probability(&format!("study.settings[{i}].eta2"), st.eta2)?;
                    }
                }
                StudyConfig::Variance { functions, budget, repeats, bounds, .. } => {
                    if functions.is_empty() {
                        return Err(bad("study.functions", "at least one function is required"));
                    }
                    check_functions("study.functions", functions, dim)?;
                    if let Some(b) = budget {
                        positive("study.budget", *b)?;
                    }
                    if let Some(n) = repeats {
                        nonzero("study.repeats", *n)?;
                    }
                    check_bounds("study.bounds", bounds)?;
                }
                StudyConfig::BurnIn { burn_in, adaptive_len, repeats, bounds, .. } => {
                    if let Some(n) = burn_in {
                        nonzero("study.burn_in", *n)?;
                    }
                    if let Some(n) = adaptive_len {
                        nonzero("study.adaptive_len", *n)?;
                    }
                    if let Some(n) = repeats {
                        nonzero("study.repeats", *n)?;
                    }
                    check_bounds("study.bounds", bounds)?;
                }
            }
        }
        if let Some(t) = &self.tune {
            check_bounds("tune.bounds", &t.bounds)?;
            if let Some(f) = &t.function {
                check_function("tune.function", f, dim)?;
            }
            if let Some(n) = t.grid {
                nonzero("tune.grid", n)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toml(text: &str) -> Result<ExperimentConfig, CliError> {
        parse(Path::new("c.toml"), text)
    }

    #[test]
    fn minimal_config_parses() {
        let c = toml("seed = 3\n[model]\nkind = \"repressilator\"\n").unwrap();
        c.validate().unwrap();
        assert_eq!(c.eps(), (50.0, 50.0));
        assert_eq!(c.rows(), 10_000);
    }

    #[test]
    fn unknown_key_names_its_path() {
        let e = toml("[model]\nkind = \"repressilator\"\n[campaign]\nstop = { count = 5 }\nspeed = 2\n").unwrap_err();
        let CliError::Config(msg) = e else { panic!("{e:?}") };
        assert!(msg.contains("campaign") && msg.contains("speed"), "{msg}");
    }

    #[test]
    fn nonpositive_epsilon_rejected() {
        let c = toml("[model]\nkind = \"viral\"\n[distance]\neps_hi = 0.0\n").unwrap();
        let CliError::Config(msg) = c.validate().unwrap_err() else { panic!() };
        assert!(msg.starts_with("distance.eps_hi"), "{msg}");
    }

    #[test]
    fn json_is_the_same_schema() {
        let c = parse(
            Path::new("c.json"),
            r#"{"seed": 1, "model": {"kind": "toy", "p_tp": 0.1, "p_fp": 0.02, "p_fn": 0.03, "cost_lo": 1, "c_p": 2, "c_n": 6},
                "campaign": {"eta": {"kind": "fixed", "eta1": 0.5, "eta2": 0.5}, "stop": {"count": 10}}}"#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.model.dim(), 1);
    }

    #[test]
    fn function_index_checked_against_prior() {
        let c = toml(
            "[model]\nkind = \"repressilator\"\n[campaign]\nstop = { count = 5 }\neta = { kind = \"fixed\", eta1 = 1.0, eta2 = 1.0 }\n[[campaign.functions]]\nname = \"x\"\nfunction = { kind = \"component\", index = 2 }\n",
        )
        .unwrap();
        let CliError::Config(msg) = c.validate().unwrap_err() else { panic!() };
        assert!(msg.starts_with("campaign.functions[0].function"), "{msg}");
    }
}
