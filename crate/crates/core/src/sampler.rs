//! Rejection, early accept/reject and adaptive multifidelity campaigns.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abc::{weight_multifidelity, weight_plain, Case, ThetaFunction, WeightRecord, WeightedSample};
use crate::error::{Error, SimError};
use crate::rng::{stream_rng, SimRng, StreamId, CAMPAIGN};
use crate::tuning::{
    optimal_eta, optimal_eta_constrained, Bounds, BurnInTally, ConstrainedMode, ContinuationProbs, EtaFlags,
    PerfEstimates, Provenance,
};

/// Output of a low-fidelity simulation: distance to the observed data,
/// cost, and whatever noise the coupled high-fidelity run needs.
#[derive(Debug, Clone)]
pub struct LowFi<C> {
    pub distance: f64,
    pub cost: f64,
    pub coupling: C,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighFi {
    pub distance: f64,
    pub cost: f64,
}

/// A prior with a low-fidelity model and a coupled high-fidelity model.
pub trait FidelityPair: Sync {
    type Coupling: Send;

    fn param_names(&self) -> Vec<String>;
    fn sample_prior(&self, rng: &mut SimRng) -> Vec<f64>;
    fn low(&self, theta: &[f64], rng: &mut SimRng) -> Result<LowFi<Self::Coupling>, SimError>;
    /// High-fidelity run conditioned on the low-fidelity noise.
    fn high(&self, theta: &[f64], coupling: Self::Coupling, rng: &mut SimRng) -> Result<HighFi, SimError>;
    /// High-fidelity run on its own.
    fn high_uncoupled(&self, theta: &[f64], rng: &mut SimRng) -> Result<HighFi, SimError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    /// Adapt once `k >= M` records have been checked at high fidelity.
    #[default]
    Checked,
    /// Adapt once `M` records have been produced.
    Total,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Objective {
    /// Maximise ESS per unit cost.
    #[default]
    Ess,
    /// Minimise the variance of the estimate of `F` per unit cost.
    Function { function: ThetaFunction },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveSpec {
    /// Burn-in length `M`.
    pub burn_in: u64,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub gate: Gate,
    /// Stop adapting once this many records exist (`None`: never).
    #[serde(default)]
    pub freeze_after: Option<u64>,
}

impl AdaptiveSpec {
    /// Defaults: checked-count gate, floors 0.01, freeze after `2M` records.
    pub fn new(burn_in: u64) -> Self {
        Self {
            burn_in,
            bounds: Bounds::default(),
            objective: Objective::Ess,
            gate: Gate::Checked,
            freeze_after: Some(2 * burn_in),
        }
    }
}

/// Where the continuation probabilities come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EtaSource {
    Fixed {
        eta1: f64,
        eta2: f64,
    },
    /// Optimise from given estimates, optionally restricted.
    Optimal {
        estimates: PerfEstimates,
        #[serde(default)]
        bounds: Bounds,
        #[serde(default)]
        mode: Option<ConstrainedMode>,
    },
    Adaptive(AdaptiveSpec),
}

impl EtaSource {
    pub fn initial(&self) -> Result<ContinuationProbs, Error> {
        match self {
            EtaSource::Fixed { eta1, eta2 } => ContinuationProbs::fixed(*eta1, *eta2).map_err(Error::Invalid),
            EtaSource::Optimal { estimates, bounds, mode } => {
                estimates.validate().map_err(Error::Invalid)?;
                bounds.validate().map_err(Error::Invalid)?;
                Ok(match mode {
                    None => optimal_eta(estimates, *bounds),
                    Some(m) => optimal_eta_constrained(estimates, *m, *bounds),
                })
            }
            EtaSource::Adaptive(a) => {
                a.bounds.validate().map_err(Error::Invalid)?;
                let mut c = ContinuationProbs::unit();
                c.source = Provenance::Adapted;
                c.bounds = a.bounds;
                Ok(c)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StopRule {
    /// Exactly this many Monte Carlo indices.
    Count(u64),
    /// Stop at the first record whose cumulative cost exceeds the budget
    /// (that record included), or after `max_records`.
    Budget { seconds: f64, max_records: Option<u64> },
}

impl StopRule {
    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            StopRule::Count(0) => Err(Error::Invalid("stop count must be positive".into())),
            StopRule::Budget { seconds, .. } if !(seconds > 0.0) => {
                Err(Error::Invalid(format!("budget must be positive, got {seconds}")))
            }
            StopRule::Budget { max_records: Some(0), .. } => Err(Error::Invalid("max_records must be positive".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub eta: EtaSource,
    pub stop: StopRule,
    pub seed: u64,
    /// Rejection only: also run the low-fidelity model (the `(1, 1)`
    /// multifidelity baseline) instead of high fidelity alone.
    #[serde(default)]
    pub coupling: bool,
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<(), Error> {
        for (name, e) in [("eps_lo", self.eps_lo), ("eps_hi", self.eps_hi)] {
            if !(e > 0.0) {
                return Err(Error::Invalid(format!("{name} must be positive, got {e}")));
            }
        }
        self.stop.validate()?;
        self.eta.initial()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaTracePoint {
    /// Index of the record after which this value was set.
    pub index: u64,
    pub eta1: f64,
    pub eta2: f64,
    pub flags: EtaFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvalidRecord {
    pub index: u64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub low_total: f64,
    pub high_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub sample: WeightedSample,
    /// Domain of the per-index streams (`<domain>/index-<i>`).
    pub stream_domain: String,
    pub initial_eta: ContinuationProbs,
    pub final_eta: ContinuationProbs,
    /// One entry per record after the adaptation gate; empty for fixed runs.
    pub eta_trace: Vec<EtaTracePoint>,
    /// Number of records seen when the gate opened.
    pub gate_after: Option<u64>,
    pub timing: Timing,
    pub invalid: Vec<InvalidRecord>,
}

impl CampaignResult {
    pub fn stream_id(&self, record: &WeightRecord) -> String {
        format!("{}/index-{}", self.stream_domain, record.index)
    }

    fn assemble(
        names: Vec<String>,
        records: Vec<WeightRecord>,
        invalid: Vec<InvalidRecord>,
        initial_eta: ContinuationProbs,
        final_eta: ContinuationProbs,
        eta_trace: Vec<EtaTracePoint>,
        gate_after: Option<u64>,
    ) -> Self {
        let timing = Timing {
            low_total: records.iter().map(|r| r.cost_lo).sum(),
            high_total: records.iter().map(|r| r.cost_hi).sum(),
        };
        Self {
            sample: WeightedSample { param_names: names, records },
            stream_domain: CAMPAIGN.to_string(),
            initial_eta,
            final_eta,
            eta_trace,
            gate_after,
            timing,
            invalid,
        }
    }
}

/// Per-index generator used by every campaign and by benchmark generation.
pub fn record_rng(seed: u64, index: u64) -> SimRng {
    StreamId::new(CAMPAIGN, index).rng(seed)
}

/// One multifidelity record. Draw order on the index stream: prior, low
/// fidelity, continuation uniform, high fidelity.
pub fn multifidelity_record<P: FidelityPair + ?Sized>(
    pair: &P,
    eps_lo: f64,
    eps_hi: f64,
    seed: u64,
    index: u64,
    eta1: f64,
    eta2: f64,
) -> Result<WeightRecord, SimError> {
    let mut rng = record_rng(seed, index);
    let theta = pair.sample_prior(&mut rng);
    let low = pair.low(&theta, &mut rng)?;
    let w_tilde = weight_plain(low.distance, eps_lo) == 1.0;
    let u: f64 = rng.random();
    let mut cost_hi = 0.0;
    let coupling = low.coupling;
    let out = weight_multifidelity(w_tilde, u, eta1, eta2, || {
        let h = pair.high(&theta, coupling, &mut rng)?;
        cost_hi = h.cost;
        Ok::<_, SimError>(weight_plain(h.distance, eps_hi) == 1.0)
    })?;
    Ok(WeightRecord {
        index,
        theta,
        w: out.weight,
        w_tilde,
        w_high: out.w_high,
        case: out.case,
        cost_lo: low.cost,
        cost_hi,
        u,
        eta: out.eta,
    })
}

/// One high-fidelity-only rejection record: prior, then high fidelity.
pub fn plain_record<P: FidelityPair + ?Sized>(
    pair: &P,
    eps_hi: f64,
    seed: u64,
    index: u64,
) -> Result<WeightRecord, SimError> {
    let mut rng = record_rng(seed, index);
    let theta = pair.sample_prior(&mut rng);
    let h = pair.high_uncoupled(&theta, &mut rng)?;
    let w = weight_plain(h.distance, eps_hi);
    Ok(WeightRecord {
        index,
        theta,
        w,
        w_tilde: false,
        w_high: Some(w == 1.0),
        case: Case::Plain,
        cost_lo: 0.0,
        cost_hi: h.cost,
        u: 0.0,
        eta: 1.0,
    })
}

const BUDGET_CHUNK: u64 = 256;

/// Evaluate indices in parallel and merge in index order.
fn run_indexed(
    stop: &StopRule,
    eval: impl Fn(u64) -> Result<WeightRecord, SimError> + Sync,
) -> (Vec<WeightRecord>, Vec<InvalidRecord>) {
    let mut records = Vec::new();
    let mut invalid = Vec::new();
    let mut push = |i: u64, r: Result<WeightRecord, SimError>, records: &mut Vec<WeightRecord>| match r {
        Ok(rec) => records.push(rec),
        Err(e) => invalid.push(InvalidRecord { index: i, error: e.to_string() }),
    };
    match *stop {
        StopRule::Count(n) => {
            let out: Vec<_> = (0..n).into_par_iter().map(|i| (i, eval(i))).collect();
            for (i, r) in out {
                push(i, r, &mut records);
            }
        }
        StopRule::Budget { seconds, max_records } => {
            let cap = max_records.unwrap_or(u64::MAX);
            let mut spent = 0.0;
            let mut next = 0u64;
            'outer: while next < cap {
                let end = (next + BUDGET_CHUNK).min(cap);
                let out: Vec<_> = (next..end).into_par_iter().map(|i| (i, eval(i))).collect();
                for (i, r) in out {
                    if let Ok(rec) = &r {
                        spent += rec.cost();
                    }
                    push(i, r, &mut records);
                    if spent > seconds {
                        break 'outer;
                    }
                }
                next = end;
            }
        }
    }
    (records, invalid)
}

/// Rejection ABC. Without coupling only the high-fidelity model runs;
/// with coupling this is the `(1, 1)` multifidelity baseline.
pub fn run_rejection<P: FidelityPair>(pair: &P, spec: &CampaignSpec) -> Result<CampaignResult, Error> {
    spec.validate()?;
    if spec.coupling {
        let unit = CampaignSpec { eta: EtaSource::Fixed { eta1: 1.0, eta2: 1.0 }, ..spec.clone() };
        return run_multifidelity(pair, &unit);
    }
    let (records, invalid) = run_indexed(&spec.stop, |i| plain_record(pair, spec.eps_hi, spec.seed, i));
    let eta = ContinuationProbs::unit();
    Ok(CampaignResult::assemble(pair.param_names(), records, invalid, eta, eta, vec![], None))
}

/// Early accept/reject multifidelity ABC with fixed continuation probabilities.
pub fn run_multifidelity<P: FidelityPair>(pair: &P, spec: &CampaignSpec) -> Result<CampaignResult, Error> {
    spec.validate()?;
    let eta = match &spec.eta {
        EtaSource::Adaptive(_) => return run_adaptive(pair, spec),
        other => other.initial()?,
    };
    let (records, invalid) = run_indexed(&spec.stop, |i| {
        multifidelity_record(pair, spec.eps_lo, spec.eps_hi, spec.seed, i, eta.eta1, eta.eta2)
    });
    Ok(CampaignResult::assemble(pair.param_names(), records, invalid, eta, eta, vec![], None))
}

/// Sequential controller for adaptive continuation probabilities.
///
/// Starts at `(1, 1)`; once the gate opens, re-optimises after every
/// record from the burn-in tally, floored at the bounds, until frozen.
#[derive(Debug, Clone)]
pub struct AdaptiveController {
    spec: AdaptiveSpec,
    tally: BurnInTally,
    eta: ContinuationProbs,
    gate_after: Option<u64>,
    seen: u64,
}

impl AdaptiveController {
    pub fn new(spec: AdaptiveSpec) -> Self {
        let mut eta = ContinuationProbs::unit();
        eta.source = Provenance::Adapted;
        eta.bounds = spec.bounds;
        Self { spec, tally: BurnInTally::new(), eta, gate_after: None, seen: 0 }
    }

    /// Start past the gate from an existing burn-in tally.
    pub fn from_tally(spec: AdaptiveSpec, tally: BurnInTally) -> Self {
        let mut c = Self::new(spec);
        c.seen = tally.m;
        c.tally = tally;
        c.gate_after = Some(c.seen);
        c.reoptimise();
        c
    }

    pub fn eta(&self) -> ContinuationProbs {
        self.eta
    }

    pub fn tally(&self) -> &BurnInTally {
        &self.tally
    }

    pub fn gate_after(&self) -> Option<u64> {
        self.gate_after
    }

    fn f_value(&self, theta: &[f64]) -> f64 {
        match &self.spec.objective {
            Objective::Ess => 0.0,
            Objective::Function { function } => function.eval(theta),
        }
    }

    fn reoptimise(&mut self) {
        let est = match &self.spec.objective {
            Objective::Ess => self.tally.estimates().ok(),
            Objective::Function { .. } => self.tally.running_mean().and_then(|mu| self.tally.f_estimates(mu).ok()),
        };
        if let Some(est) = est {
            let mut c = optimal_eta(&est, self.spec.bounds);
            c.source = Provenance::Adapted;
            self.eta = c;
        }
    }

    /// Feed one completed record; returns the trace point when past the gate.
    pub fn observe(&mut self, record: &WeightRecord) -> Option<EtaTracePoint> {
        let f = self.f_value(&record.theta);
        self.tally.update(record, f);
        self.seen += 1;
        if self.gate_after.is_none() {
            let count = match self.spec.gate {
                Gate::Checked => self.tally.k,
                Gate::Total => self.tally.m,
            };
            if count >= self.spec.burn_in {
                self.gate_after = Some(self.seen);
            }
        }
        self.gate_after?;
        let frozen = self.spec.freeze_after.is_some_and(|n| self.seen > n);
        if !frozen {
            self.reoptimise();
        }
        Some(EtaTracePoint { index: record.index, eta1: self.eta.eta1, eta2: self.eta.eta2, flags: self.eta.flags })
    }
}

/// Drive a controller over a record source until the stop rule fires.
/// Used by live adaptive campaigns and by replays on stored rows.
pub fn adaptive_loop(
    controller: &mut AdaptiveController,
    stop: &StopRule,
    mut eval: impl FnMut(u64, f64, f64) -> Option<Result<WeightRecord, SimError>>,
) -> (Vec<WeightRecord>, Vec<InvalidRecord>, Vec<EtaTracePoint>) {
    let (cap, budget) = match *stop {
        StopRule::Count(n) => (n, f64::INFINITY),
        StopRule::Budget { seconds, max_records } => (max_records.unwrap_or(u64::MAX), seconds),
    };
    let mut records = Vec::new();
    let mut invalid = Vec::new();
    let mut trace = Vec::new();
    let mut spent = 0.0;
    for i in 0..cap {
        let eta = controller.eta();
        let Some(r) = eval(i, eta.eta1, eta.eta2) else { break };
        match r {
            Ok(rec) => {
                spent += rec.cost();
                if let Some(p) = controller.observe(&rec) {
                    trace.push(p);
                }
                records.push(rec);
                if spent > budget {
                    break;
                }
            }
            Err(e) => invalid.push(InvalidRecord { index: i, error: e.to_string() }),
        }
    }
    (records, invalid, trace)
}

/// Adaptive early accept/reject multifidelity ABC (sequential).
pub fn run_adaptive<P: FidelityPair>(pair: &P, spec: &CampaignSpec) -> Result<CampaignResult, Error> {
    spec.validate()?;
    let EtaSource::Adaptive(a) = &spec.eta else {
        return Err(Error::Invalid("adaptive campaign needs an adaptive eta source".into()));
    };
    let mut ctl = AdaptiveController::new(a.clone());
    let initial = ctl.eta();
    let (records, invalid, trace) = adaptive_loop(&mut ctl, &spec.stop, |i, e1, e2| {
        Some(multifidelity_record(pair, spec.eps_lo, spec.eps_hi, spec.seed, i, e1, e2))
    });
    Ok(CampaignResult::assemble(pair.param_names(), records, invalid, initial, ctl.eta(), trace, ctl.gate_after()))
}

/// Dispatch on the eta source.
pub fn run_campaign<P: FidelityPair>(pair: &P, spec: &CampaignSpec) -> Result<CampaignResult, Error> {
    match spec.eta {
        EtaSource::Adaptive(_) => run_adaptive(pair, spec),
        _ => run_multifidelity(pair, spec),
    }
}

/// A stream for auxiliary draws that must not disturb campaign streams.
pub fn aux_rng(seed: u64, domain: &str, index: u64) -> SimRng {
    stream_rng(seed, domain, index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{BernoulliToy, TOY_EPSILON};

    fn toy() -> BernoulliToy {
        BernoulliToy::new(0.10, 0.02, 0.03, 1.0, 2.0, 6.0).unwrap()
    }

    fn spec(eta: EtaSource, n: u64, seed: u64) -> CampaignSpec {
        CampaignSpec { eps_lo: TOY_EPSILON, eps_hi: TOY_EPSILON, eta, stop: StopRule::Count(n), seed, coupling: true }
    }

    fn fixed(e1: f64, e2: f64) -> EtaSource {
        EtaSource::Fixed { eta1: e1, eta2: e2 }
    }

    #[test]
    fn unit_eta_matches_rejection_record_for_record() {
        let t = toy();
        let a = run_rejection(&t, &spec(fixed(0.3, 0.3), 2000, 5)).unwrap();
        let b = run_multifidelity(&t, &spec(fixed(0.3, 0.3), 2000, 5)).unwrap();
        let unit = run_multifidelity(&t, &spec(fixed(1.0, 1.0), 2000, 5)).unwrap();
        assert_eq!(a.sample, unit.sample);
        // same prior draws and low-fidelity outcomes under any eta
        for (x, y) in a.sample.records.iter().zip(&b.sample.records) {
            assert_eq!(x.theta, y.theta);
            assert_eq!(x.w_tilde, y.w_tilde);
            assert_eq!(x.u, y.u);
        }
        assert!(a.sample.records.iter().all(|r| r.w == 0.0 || r.w == 1.0));
    }

    #[test]
    fn infinite_epsilon_accepts_everything() {
        let t = toy();
        let mut s = spec(fixed(1.0, 1.0), 500, 1);
        s.eps_hi = f64::INFINITY;
        s.coupling = false;
        let r = run_rejection(&t, &s).unwrap();
        assert!(r.sample.records.iter().all(|r| r.w == 1.0));
        let mean_theta = r.sample.records.iter().map(|r| r.theta[0]).sum::<f64>() / 500.0;
        assert_eq!(r.sample.estimate(&ThetaFunction::Component { index: 0 }).unwrap(), mean_theta);
    }

    #[test]
    fn tiny_epsilon_rejects_everything() {
        let t = toy();
        let mut s = spec(fixed(1.0, 1.0), 200, 1);
        s.eps_hi = 1e-9;
        s.coupling = false;
        let r = run_rejection(&t, &s).unwrap();
        assert!(r.sample.records.iter().all(|r| r.w == 0.0));
        assert!(r.sample.estimate(&ThetaFunction::Component { index: 0 }).is_err());
    }

    #[test]
    fn continuation_rates_match_eta() {
        let t = toy();
        let n = 100_000;
        let r = run_multifidelity(&t, &spec(fixed(0.4, 0.2), n, 9)).unwrap();
        let recs = &r.sample.records;
        for (wt, eta) in [(true, 0.4), (false, 0.2)] {
            let class: Vec<_> = recs.iter().filter(|r| r.w_tilde == wt).collect();
            let checked = class.iter().filter(|r| r.high_simulated()).count() as f64;
            let nn = class.len() as f64;
            let se = (eta * (1.0 - eta) / nn).sqrt();
            assert!((checked / nn - eta).abs() < 3.0 * se, "class {wt}: {} vs {eta}", checked / nn);
        }
        let total_checked = recs.iter().filter(|r| r.high_simulated()).count() as f64 / n as f64;
        let expect = 0.4 * t.low_accept() + 0.2 * (1.0 - t.low_accept());
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((total_checked - expect).abs() < 3.0 * se);
        // weight bookkeeping
        let counts: usize = Case::ALL.iter().map(|&c| r.sample.case_count(c)).sum();
        assert_eq!(counts, n as usize);
        for rec in recs {
            match rec.case {
                Case::CheckedFalsePositive => assert_eq!(rec.w, 1.0 - 1.0 / 0.4),
                Case::CheckedFalseNegative => assert_eq!(rec.w, 1.0 / 0.2),
                _ => {}
            }
        }
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let t = toy();
        let s = spec(fixed(0.5, 0.25), 3000, 11);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_multifidelity(&t, &s).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_multifidelity(&t, &s).unwrap());
        assert_eq!(one, four);
    }

    #[test]
    fn budget_stop_overshoots_by_at_most_one_record() {
        let t = toy();
        let mut s = spec(fixed(0.5, 0.5), 1, 3);
        s.stop = StopRule::Budget { seconds: 500.0, max_records: None };
        let r = run_multifidelity(&t, &s).unwrap();
        let total = r.sample.total_cost();
        let last = r.sample.records.last().unwrap().cost();
        assert!(total > 500.0 && total - last <= 500.0);
        s.stop = StopRule::Budget { seconds: 1e-3, max_records: None };
        let r = run_multifidelity(&t, &s).unwrap();
        assert_eq!(r.sample.len(), 1);
    }

    #[test]
    fn adaptive_without_gate_is_rejection() {
        let t = toy();
        let adaptive = spec(EtaSource::Adaptive(AdaptiveSpec::new(10_000)), 2000, 4);
        let r = run_adaptive(&t, &adaptive).unwrap();
        let base = run_rejection(&t, &spec(fixed(1.0, 1.0), 2000, 4)).unwrap();
        assert_eq!(r.sample.records, base.sample.records);
        assert!(r.eta_trace.is_empty());
        assert_eq!(r.gate_after, None);
    }

    #[test]
    fn adaptive_trace_covers_records_after_gate() {
        let t = toy();
        let mut a = AdaptiveSpec::new(500);
        a.freeze_after = None;
        let r = run_adaptive(&t, &spec(EtaSource::Adaptive(a), 5000, 8)).unwrap();
        let gate = r.gate_after.unwrap();
        assert_eq!(gate, 500);
        assert_eq!(r.eta_trace.len() as u64, 5000 - gate + 1);
        assert!(r.final_eta.eta1 < 1.0 && r.final_eta.eta2 < 1.0);
    }

    #[test]
    fn zero_false_rates_sit_on_floors() {
        let t = BernoulliToy::new(0.1, 0.0, 0.0, 1.0, 2.0, 6.0).unwrap();
        let mut a = AdaptiveSpec::new(200);
        a.freeze_after = None;
        let r = run_adaptive(&t, &spec(EtaSource::Adaptive(a), 2000, 2)).unwrap();
        assert!(r.eta_trace.iter().all(|p| p.eta1 == 0.01 && p.eta2 == 0.01 && p.flags.provisional));
    }

    #[test]
    fn invalid_spec_rejected() {
        let t = toy();
        let mut s = spec(fixed(0.5, 0.5), 10, 1);
        s.eps_lo = 0.0;
        assert!(run_multifidelity(&t, &s).is_err());
        let s = spec(fixed(0.0, 0.5), 10, 1);
        assert!(run_multifidelity(&t, &s).is_err());
        let s = spec(fixed(0.5, 0.5), 0, 1);
        assert!(run_multifidelity(&t, &s).is_err());
    }
}
