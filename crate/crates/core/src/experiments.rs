//! Benchmark tables and replay studies.
//!
//! A benchmark table stores, for every prior draw, both distances, both
//! costs and the continuation uniform. Any fixed or adaptive campaign can
//! then be replayed on the rows without re-simulating, charging the stored
//! costs according to which simulations the campaign would have run.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abc::{ess_of, weight_multifidelity, weight_plain, Case, ThetaFunction, WeightRecord, WeightedSample};
use crate::error::{Error, SimError};
use crate::rng::{stream_rng, STUDY};
use crate::sampler::{
    adaptive_loop, record_rng, AdaptiveController, AdaptiveSpec, FidelityPair, Gate, InvalidRecord, Objective, StopRule,
};
use crate::stats::{exceedance, median, pearson, spearman, variance};
use crate::tuning::{
    optimal_eta, optimal_eta_constrained, phi, Bounds, BurnInTally, ConstrainedMode, ContinuationProbs, PerfEstimates,
};

/// Both fidelities evaluated at one prior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub index: u64,
    pub theta: Vec<f64>,
    pub d_lo: f64,
    pub d_hi: f64,
    pub cost_lo: f64,
    pub cost_hi: f64,
    /// Continuation uniform drawn between the two simulations.
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub param_names: Vec<String>,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub rows: Vec<BenchmarkRow>,
    pub invalid: Vec<InvalidRecord>,
}

/// One benchmark row, using the same per-index stream and draw order as a
/// live multifidelity campaign so replays reproduce live runs exactly.
pub fn benchmark_row<P: FidelityPair + ?Sized>(pair: &P, seed: u64, index: u64) -> Result<BenchmarkRow, SimError> {
    let mut rng = record_rng(seed, index);
    let theta = pair.sample_prior(&mut rng);
    let low = pair.low(&theta, &mut rng)?;
    let u: f64 = rng.random();
    let high = pair.high(&theta, low.coupling, &mut rng)?;
    Ok(BenchmarkRow { index, theta, d_lo: low.distance, d_hi: high.distance, cost_lo: low.cost, cost_hi: high.cost, u })
}

/// `n` complete coupled rows, generated in parallel; failures are logged
/// and excluded.
pub fn generate_benchmark<P: FidelityPair>(
    pair: &P,
    n: u64,
    seed: u64,
    eps_lo: f64,
    eps_hi: f64,
) -> Result<BenchmarkTable, Error> {
    if n == 0 {
        return Err(Error::Invalid("benchmark size must be at least 1".into()));
    }
    for (name, e) in [("eps_lo", eps_lo), ("eps_hi", eps_hi)] {
        if !(e > 0.0) {
            return Err(Error::Invalid(format!("{name} must be positive, got {e}")));
        }
    }
    let out: Vec<_> = (0..n).into_par_iter().map(|i| (i, benchmark_row(pair, seed, i))).collect();
    let mut rows = Vec::with_capacity(n as usize);
    let mut invalid = Vec::new();
    for (i, r) in out {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => invalid.push(InvalidRecord { index: i, error: e.to_string() }),
        }
    }
    Ok(BenchmarkTable { param_names: pair.param_names(), eps_lo, eps_hi, rows, invalid })
}

/// Replay one row under `(eta1, eta2)`: the high-fidelity result and cost
/// are used only if the stored uniform says the campaign would have
/// continued.
pub fn replay_row(row: &BenchmarkRow, eps_lo: f64, eps_hi: f64, eta1: f64, eta2: f64) -> WeightRecord {
    replay_row_with(row, row.u, eps_lo, eps_hi, eta1, eta2)
}

/// As [`replay_row`] with a caller-supplied continuation uniform, for
/// resampling schemes that draw the same row more than once.
pub fn replay_row_with(row: &BenchmarkRow, u: f64, eps_lo: f64, eps_hi: f64, eta1: f64, eta2: f64) -> WeightRecord {
    let w_tilde = weight_plain(row.d_lo, eps_lo) == 1.0;
    let w_hi = weight_plain(row.d_hi, eps_hi) == 1.0;
    let out = weight_multifidelity(w_tilde, u, eta1, eta2, || Ok::<_, std::convert::Infallible>(w_hi))
        .unwrap_or_else(|e| match e {});
    WeightRecord {
        index: row.index,
        theta: row.theta.clone(),
        w: out.weight,
        w_tilde,
        w_high: out.w_high,
        case: out.case,
        cost_lo: row.cost_lo,
        cost_hi: if out.w_high.is_some() { row.cost_hi } else { 0.0 },
        u,
        eta: out.eta,
    }
}

const CSV_TAIL: [&str; 8] = ["d_lo", "d_hi", "cost_lo", "cost_hi", "w_lo", "w_hi", "u", ""];

impl BenchmarkTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn w_lo(&self, row: &BenchmarkRow) -> bool {
        weight_plain(row.d_lo, self.eps_lo) == 1.0
    }

    pub fn w_hi(&self, row: &BenchmarkRow) -> bool {
        weight_plain(row.d_hi, self.eps_hi) == 1.0
    }

    pub fn replay(&self, row: &BenchmarkRow, eta1: f64, eta2: f64) -> WeightRecord {
        replay_row(row, self.eps_lo, self.eps_hi, eta1, eta2)
    }

    /// Replay a fixed-eta campaign over the given rows.
    pub fn replay_fixed<'a>(
        &self,
        rows: impl IntoIterator<Item = &'a BenchmarkRow>,
        eta1: f64,
        eta2: f64,
    ) -> WeightedSample {
        WeightedSample {
            param_names: self.param_names.clone(),
            records: rows.into_iter().map(|r| self.replay(r, eta1, eta2)).collect(),
        }
    }

    /// All rows checked, as at `(1, 1)`.
    pub fn full_records(&self) -> Vec<WeightRecord> {
        self.rows.iter().map(|r| self.replay(r, 1.0, 1.0)).collect()
    }

    pub fn tally(&self, f: impl Fn(&[f64]) -> f64) -> BurnInTally {
        BurnInTally::from_records(&self.full_records(), f)
    }

    /// Empirical rates and costs over the whole table.
    pub fn estimates(&self) -> Result<PerfEstimates, Error> {
        self.tally(|_| 0.0).estimates().map_err(|e| Error::Invalid(format!("table estimates unavailable: {e:?}")))
    }

    /// Rejection estimate of `F` over the whole table.
    pub fn rejection_mean(&self, f: &ThetaFunction) -> Result<f64, Error> {
        Ok(self.replay_fixed(&self.rows, 1.0, 1.0).estimate(f)?)
    }

    /// `F`-weighted rates centred at the table's rejection estimate of `F`.
    pub fn f_estimates(&self, f: &ThetaFunction) -> Result<PerfEstimates, Error> {
        let f_bar = self.rejection_mean(f)?;
        self.tally(|t| f.eval(t))
            .f_estimates(f_bar)
            .map_err(|e| Error::Invalid(format!("table estimates unavailable: {e:?}")))
    }

    /// `mean(cost_lo) / mean(cost_hi)`.
    pub fn cost_ratio(&self) -> f64 {
        let lo: f64 = self.rows.iter().map(|r| r.cost_lo).sum();
        let hi: f64 = self.rows.iter().map(|r| r.cost_hi).sum();
        lo / hi
    }

    /// Pearson correlation of the two distances.
    pub fn distance_correlation(&self) -> f64 {
        let a: Vec<f64> = self.rows.iter().map(|r| r.d_lo).collect();
        let b: Vec<f64> = self.rows.iter().map(|r| r.d_hi).collect();
        pearson(&a, &b)
    }

    /// Columns `index,<theta names>,d_lo,d_hi,cost_lo,cost_hi,w_lo,w_hi,u`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        header.extend(self.param_names.iter().cloned());
        header.extend(CSV_TAIL[..7].iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.index.to_string()];
            rec.extend(r.theta.iter().map(|v| v.to_string()));
            rec.extend([r.d_lo, r.d_hi, r.cost_lo, r.cost_hi].map(|v| v.to_string()));
            rec.push(u8::from(self.w_lo(r)).to_string());
            rec.push(u8::from(self.w_hi(r)).to_string());
            rec.push(r.u.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a table written by [`BenchmarkTable::write_csv`]. The stored
    /// indicator columns are ignored; acceptance is recomputed from the
    /// distances with the given thresholds.
    pub fn read_csv<R: Read>(input: R, eps_lo: f64, eps_hi: f64) -> Result<Self, Error> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        let p = cols.len().checked_sub(8).ok_or_else(|| Error::Invalid("benchmark CSV has too few columns".into()))?;
        if cols[0] != "index" || cols[1 + p..] != CSV_TAIL[..7] {
            return Err(Error::Invalid(format!("unexpected benchmark CSV header: {}", cols.join(","))));
        }
        let param_names = cols[1..1 + p].iter().map(|s| s.to_string()).collect();
        let num = |s: &str, line: usize| -> Result<f64, Error> {
            s.parse::<f64>().map_err(|_| Error::Invalid(format!("line {line}: not a number: {s:?}")))
        };
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let index =
                rec[0].parse::<u64>().map_err(|_| Error::Invalid(format!("line {line}: bad index {:?}", &rec[0])))?;
            let theta = (1..=p).map(|c| num(&rec[c], line)).collect::<Result<Vec<_>, _>>()?;
            let f = |c: usize| num(&rec[1 + p + c], line);
            rows.push(BenchmarkRow {
                index,
                theta,
                d_lo: f(0)?,
                d_hi: f(1)?,
                cost_lo: f(2)?,
                cost_hi: f(3)?,
                u: f(6)?,
            });
        }
        Ok(Self { param_names, eps_lo, eps_hi, rows, invalid: vec![] })
    }
}

/// A labelled pair of continuation probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaSetting {
    pub label: String,
    pub eta1: f64,
    pub eta2: f64,
}

impl EtaSetting {
    pub fn new(label: impl Into<String>, eta1: f64, eta2: f64) -> Self {
        Self { label: label.into(), eta1, eta2 }
    }

    fn from_probs(label: &str, c: ContinuationProbs) -> Self {
        Self::new(label, c.eta1, c.eta2)
    }
}

pub const REJECTION: &str = "rejection";
pub const EARLY_REJECTION: &str = "early_rejection";
pub const EARLY_DECISION: &str = "early_decision";
pub const EARLY_ACCEPT_REJECT: &str = "early_accept_reject";

/// Rejection, the two constrained optima and the unconstrained optimum.
pub fn standard_settings(est: &PerfEstimates, bounds: Bounds) -> Vec<EtaSetting> {
    vec![
        EtaSetting::new(REJECTION, 1.0, 1.0),
        EtaSetting::from_probs(EARLY_REJECTION, optimal_eta_constrained(est, ConstrainedMode::EarlyRejection, bounds)),
        EtaSetting::from_probs(EARLY_DECISION, optimal_eta_constrained(est, ConstrainedMode::EarlyDecision, bounds)),
        EtaSetting::from_probs(EARLY_ACCEPT_REJECT, optimal_eta(est, bounds)),
    ]
}

/// Points midway between `centre` and each corner of the unit square,
/// labelled by the direction of each coordinate (`-` towards 0).
pub fn midway_settings(prefix: &str, eta1: f64, eta2: f64) -> Vec<EtaSetting> {
    let mut out = Vec::with_capacity(4);
    for (s1, c1) in [("-", 0.0), ("+", 1.0)] {
        for (s2, c2) in [("-", 0.0), ("+", 1.0)] {
            out.push(EtaSetting::new(format!("{prefix}{s1}/{s2}"), 0.5 * (eta1 + c1), 0.5 * (eta2 + c2)));
        }
    }
    out
}

/// Standard settings plus the four midway variants of the optimum.
pub fn efficiency_settings(est: &PerfEstimates, bounds: Bounds) -> Vec<EtaSetting> {
    let mut s = standard_settings(est, bounds);
    let opt = s[3].clone();
    s.extend(midway_settings("ear", opt.eta1, opt.eta2));
    s
}

/// Disjoint random subsamples of row positions.
fn partition(n_rows: usize, size: usize, repeats: usize, seed: u64) -> Result<Vec<Vec<usize>>, Error> {
    if size == 0 || repeats == 0 {
        return Err(Error::Invalid("subsample size and repeats must be positive".into()));
    }
    if size.checked_mul(repeats).is_none_or(|need| need > n_rows) {
        return Err(Error::Invalid(format!(
            "{repeats} subsamples of {size} need more than the {n_rows} rows available"
        )));
    }
    let mut idx: Vec<usize> = (0..n_rows).collect();
    idx.shuffle(&mut stream_rng(seed, STUDY, 0));
    Ok(idx.chunks(size).take(repeats).map(|c| c.to_vec()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyStudy {
    pub settings: Vec<EtaSetting>,
    /// Theoretical `phi` at each setting (table estimates).
    pub phi: Vec<f64>,
    /// `efficiency[s][r]`: ESS / T_tot of subsample `r` under setting `s`.
    pub efficiency: Vec<Vec<f64>>,
    /// `exceedance[a][b]`: probability that a realisation under `a` is more
    /// efficient than one under `b` (ties count one half).
    pub exceedance: Vec<Vec<f64>>,
    pub subsample_size: usize,
    pub repeats: usize,
}

impl EfficiencyStudy {
    pub fn position(&self, label: &str) -> Option<usize> {
        self.settings.iter().position(|s| s.label == label)
    }

    pub fn median(&self, label: &str) -> Option<f64> {
        self.position(label).map(|i| median(&self.efficiency[i]))
    }

    pub fn exceedance_of(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.exceedance[self.position(a)?][self.position(b)?])
    }

    /// Long format: `setting,eta1,eta2,phi,repeat,efficiency`.
    pub fn write_efficiency_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["setting", "eta1", "eta2", "phi", "repeat", "efficiency"])?;
        for (s, (set, effs)) in self.settings.iter().zip(&self.efficiency).enumerate() {
            for (r, e) in effs.iter().enumerate() {
                w.write_record([
                    set.label.clone(),
                    set.eta1.to_string(),
                    set.eta2.to_string(),
                    self.phi[s].to_string(),
                    r.to_string(),
                    e.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Square matrix with a leading label column.
    pub fn write_exceedance_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["setting".to_string()];
        header.extend(self.settings.iter().map(|s| s.label.clone()));
        w.write_record(&header)?;
        for (set, row) in self.settings.iter().zip(&self.exceedance) {
            let mut rec = vec![set.label.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Replay every setting on `repeats` disjoint subsamples of `size` rows.
pub fn efficiency_study(
    table: &BenchmarkTable,
    settings: &[EtaSetting],
    size: usize,
    repeats: usize,
    seed: u64,
) -> Result<EfficiencyStudy, Error> {
    if settings.is_empty() {
        return Err(Error::Invalid("no eta settings given".into()));
    }
    for s in settings {
        ContinuationProbs::fixed(s.eta1, s.eta2).map_err(|e| Error::Invalid(format!("setting {}: {e}", s.label)))?;
    }
    let parts = partition(table.len(), size, repeats, seed)?;
    let est = table.estimates().ok();
    let phi_values = settings.iter().map(|s| est.as_ref().map_or(f64::NAN, |e| phi(s.eta1, s.eta2, e))).collect();
    let per_part: Vec<Vec<f64>> = parts
        .par_iter()
        .map(|part| {
            settings
                .iter()
                .map(|s| table.replay_fixed(part.iter().map(|&i| &table.rows[i]), s.eta1, s.eta2).efficiency())
                .collect()
        })
        .collect();
    let efficiency: Vec<Vec<f64>> = (0..settings.len()).map(|s| per_part.iter().map(|p| p[s]).collect()).collect();
    let exceedance = efficiency.iter().map(|a| efficiency.iter().map(|b| exceedance(a, b)).collect()).collect();
    Ok(EfficiencyStudy {
        settings: settings.to_vec(),
        phi: phi_values,
        efficiency,
        exceedance,
        subsample_size: size,
        repeats,
    })
}

/// `phi(opt) / phi(eta)` on an `n x n` grid of cell centres, the fraction of
/// the best achievable efficiency.
pub fn relative_efficiency_grid(est: &PerfEstimates, bounds: Bounds, n: usize) -> Vec<(f64, f64, f64)> {
    let opt = optimal_eta(est, bounds);
    let best = phi(opt.eta1, opt.eta2, est);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (e1, e2) = ((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
            out.push((e1, e2, best / phi(e1, e2, est)));
        }
    }
    out
}

pub fn write_grid_csv<W: Write>(grid: &[(f64, f64, f64)], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["eta1", "eta2", "relative_efficiency"])?;
    for (a, b, c) in grid {
        w.write_record([a.to_string(), b.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Scatter data: `index,<names>,d_lo,d_hi,w_lo,w_hi`.
pub fn write_distance_csv<W: Write>(table: &BenchmarkTable, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend(table.param_names.iter().cloned());
    header.extend(["d_lo", "d_hi", "w_lo", "w_hi"].map(String::from));
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![r.index.to_string()];
        rec.extend(r.theta.iter().map(|v| v.to_string()));
        rec.extend([r.d_lo.to_string(), r.d_hi.to_string()]);
        rec.push(u8::from(table.w_lo(r)).to_string());
        rec.push(u8::from(table.w_hi(r)).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSpec {
    pub functions: Vec<(String, ThetaFunction)>,
    /// Per-repeat simulation budget in the table's cost units.
    pub budget: f64,
    pub repeats: usize,
    pub seed: u64,
    #[serde(default)]
    pub bounds: Bounds,
    /// Also evaluate the four midway variants of each F-optimum.
    #[serde(default)]
    pub midway: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub function: String,
    pub setting: String,
    pub eta1: f64,
    pub eta2: f64,
    pub phi: f64,
    /// Sample variance of the estimates across repeats.
    pub variance: f64,
    pub mean_estimate: f64,
    /// Percentage reductions against the rejection row of the same function.
    pub phi_reduction: f64,
    pub variance_reduction: f64,
    pub mean_records: f64,
    /// Repeats whose total weight was zero (excluded).
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceStudy {
    pub rows: Vec<VarianceRow>,
    /// Spearman correlation of `phi` and observed variance per function.
    pub spearman: Vec<(String, f64)>,
}

pub const OPTIMAL_ESS: &str = "optimal_ess";

impl VarianceStudy {
    pub fn get(&self, function: &str, setting: &str) -> Option<&VarianceRow> {
        self.rows.iter().find(|r| r.function == function && r.setting == setting)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Budget-limited replay. Rows are drawn with replacement from the table
/// (bootstrap) until the charged cost first exceeds the budget. Each draw
/// gets a fresh continuation uniform: a repeated row must not repeat its
/// decision. Within a repeat every setting sees the same draws.
fn budget_replay(
    table: &BenchmarkTable,
    budget: f64,
    seed: u64,
    repeat: usize,
    eta1: f64,
    eta2: f64,
) -> WeightedSample {
    let mut rng = stream_rng(seed, STUDY, repeat as u64);
    let mut sample = WeightedSample::new(table.param_names.clone());
    let mut spent = 0.0;
    while spent <= budget {
        let row = &table.rows[rng.random_range(0..table.len())];
        let u: f64 = rng.random();
        let rec = replay_row_with(row, u, table.eps_lo, table.eps_hi, eta1, eta2);
        spent += rec.cost();
        sample.records.push(rec);
    }
    sample
}

/// Variance of the estimate of each `F` under a fixed budget, for
/// rejection, early rejection, early decision and early accept/reject
/// optimised for `F`, and the ESS optimum.
pub fn variance_study(table: &BenchmarkTable, spec: &VarianceSpec) -> Result<VarianceStudy, Error> {
    if table.is_empty() {
        return Err(Error::Invalid("empty benchmark table".into()));
    }
    if spec.repeats < 2 {
        return Err(Error::Invalid("variance study needs at least 2 repeats".into()));
    }
    let max_cost = table.rows.iter().map(|r| r.cost_lo + r.cost_hi).fold(0.0, f64::max);
    if !(spec.budget > max_cost) {
        return Err(Error::Invalid(format!("budget {} must exceed the largest row cost {max_cost}", spec.budget)));
    }
    let ess_opt = optimal_eta(&table.estimates()?, spec.bounds);
    let mut rows = Vec::new();
    let mut corr = Vec::new();
    for (name, f) in &spec.functions {
        let est = table.f_estimates(f)?;
        let mut settings = standard_settings(&est, spec.bounds);
        settings.push(EtaSetting::from_probs(OPTIMAL_ESS, ess_opt));
        if spec.midway {
            let opt = settings[3].clone();
            settings.extend(midway_settings("ear", opt.eta1, opt.eta2));
        }
        let mut block: Vec<VarianceRow> = settings
            .par_iter()
            .map(|s| {
                let mut estimates = Vec::with_capacity(spec.repeats);
                let mut records = 0usize;
                let mut failed = 0;
                for r in 0..spec.repeats {
                    let sample = budget_replay(table, spec.budget, spec.seed, r, s.eta1, s.eta2);
                    records += sample.len();
                    match sample.estimate(f) {
                        Ok(v) => estimates.push(v),
                        Err(_) => failed += 1,
                    }
                }
                let var = if estimates.len() > 1 { variance(&estimates) } else { f64::NAN };
                VarianceRow {
                    function: name.clone(),
                    setting: s.label.clone(),
                    eta1: s.eta1,
                    eta2: s.eta2,
                    phi: phi(s.eta1, s.eta2, &est),
                    variance: var,
                    mean_estimate: estimates.iter().sum::<f64>() / estimates.len().max(1) as f64,
                    phi_reduction: 0.0,
                    variance_reduction: 0.0,
                    mean_records: records as f64 / spec.repeats as f64,
                    failed,
                }
            })
            .collect();
        let (phi0, var0) = (block[0].phi, block[0].variance);
        for r in &mut block {
            r.phi_reduction = 100.0 * (1.0 - r.phi / phi0);
            r.variance_reduction = 100.0 * (1.0 - r.variance / var0);
        }
        let p: Vec<f64> = block.iter().map(|r| r.phi).collect();
        let v: Vec<f64> = block.iter().map(|r| r.variance).collect();
        corr.push((name.clone(), spearman(&p, &v)));
        rows.extend(block);
    }
    Ok(VarianceStudy { rows, spearman: corr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurnInSpec {
    /// Burn-in length of each small run.
    pub burn_in: u64,
    /// Records replayed after the burn-in in each run.
    pub adaptive_len: u64,
    pub repeats: usize,
    pub seed: u64,
    #[serde(default)]
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurnInRun {
    pub repeat: usize,
    /// ESS / T_tot of the burn-in records (`None` for the shared burn-in).
    pub burn_in_efficiency: Option<f64>,
    pub adaptive_efficiency: f64,
    pub start: ContinuationProbs,
    pub end: ContinuationProbs,
    /// Misclassifications seen before adaptation began.
    pub burn_in_fp: u64,
    pub burn_in_fn: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurnInStudy {
    /// Adaptive phases started from the whole table as burn-in.
    pub large: Vec<BurnInRun>,
    /// Independent small burn-ins, each followed by its adaptive phase.
    pub small: Vec<BurnInRun>,
}

impl BurnInStudy {
    /// `phase,repeat,efficiency` with phases `during_burn_in`,
    /// `after_small_burn_in`, `after_large_burn_in`.
    pub fn write_efficiency_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["phase", "repeat", "efficiency"])?;
        for r in &self.large {
            w.write_record([
                "after_large_burn_in".to_string(),
                r.repeat.to_string(),
                r.adaptive_efficiency.to_string(),
            ])?;
        }
        for r in &self.small {
            w.write_record([
                "after_small_burn_in".to_string(),
                r.repeat.to_string(),
                r.adaptive_efficiency.to_string(),
            ])?;
        }
        for r in &self.small {
            if let Some(e) = r.burn_in_efficiency {
                w.write_record(["during_burn_in".to_string(), r.repeat.to_string(), e.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Final continuation probabilities of the small runs:
    /// `repeat,start_eta1,start_eta2,eta1,eta2,at_floor1,at_floor2,burn_in_fp,burn_in_fn`.
    pub fn write_eta_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "repeat",
            "start_eta1",
            "start_eta2",
            "eta1",
            "eta2",
            "at_floor1",
            "at_floor2",
            "burn_in_fp",
            "burn_in_fn",
        ])?;
        for r in &self.small {
            w.write_record([
                r.repeat.to_string(),
                r.start.eta1.to_string(),
                r.start.eta2.to_string(),
                r.end.eta1.to_string(),
                r.end.eta2.to_string(),
                u8::from(r.end.flags.at_floor1).to_string(),
                u8::from(r.end.flags.at_floor2).to_string(),
                r.burn_in_fp.to_string(),
                r.burn_in_fn.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn efficiency_of(records: &[WeightRecord]) -> f64 {
    let cost: f64 = records.iter().map(WeightRecord::cost).sum();
    ess_of(records.iter().map(|r| r.w)) / cost
}

fn adaptive_spec(burn_in: u64, bounds: Bounds) -> AdaptiveSpec {
    AdaptiveSpec { burn_in, bounds, objective: Objective::Ess, gate: Gate::Checked, freeze_after: None }
}

/// Replay adaptive campaigns on table rows.
///
/// Large: the whole table is the burn-in set; each repeat adapts over its
/// own disjoint block of `adaptive_len` rows. Small: each repeat burns in
/// on `burn_in` fresh rows at `(1, 1)` then adapts over the next
/// `adaptive_len` rows.
pub fn burn_in_study(table: &BenchmarkTable, spec: &BurnInSpec) -> Result<BurnInStudy, Error> {
    spec.bounds.validate().map_err(Error::Invalid)?;
    if spec.burn_in == 0 || spec.adaptive_len == 0 {
        return Err(Error::Invalid("burn_in and adaptive_len must be positive".into()));
    }
    let run_len = (spec.burn_in + spec.adaptive_len) as usize;
    let small_parts = partition(table.len(), run_len, spec.repeats, spec.seed)?;
    let large_parts = partition(table.len(), spec.adaptive_len as usize, spec.repeats, spec.seed ^ 0x9e37_79b9)?;
    let full = table.tally(|_| 0.0);

    let replay = |ctl: &mut AdaptiveController, rows: &[usize]| {
        let (records, _, _) = adaptive_loop(ctl, &StopRule::Count(rows.len() as u64), |i, e1, e2| {
            Some(Ok(table.replay(&table.rows[rows[i as usize]], e1, e2)))
        });
        records
    };

    let large = large_parts
        .par_iter()
        .enumerate()
        .map(|(r, rows)| {
            let mut ctl = AdaptiveController::from_tally(adaptive_spec(full.m, spec.bounds), full.clone());
            let start = ctl.eta();
            let records = replay(&mut ctl, rows);
            BurnInRun {
                repeat: r,
                burn_in_efficiency: None,
                adaptive_efficiency: efficiency_of(&records),
                start,
                end: ctl.eta(),
                burn_in_fp: 0,
                burn_in_fn: 0,
            }
        })
        .collect();

    let small = small_parts
        .par_iter()
        .enumerate()
        .map(|(r, rows)| {
            let mut ctl = AdaptiveController::new(adaptive_spec(spec.burn_in, spec.bounds));
            let records = replay(&mut ctl, rows);
            let m = spec.burn_in as usize;
            let (burn, rest) = records.split_at(m.min(records.len()));
            let count = |c: Case| burn.iter().filter(|x| x.case == c).count() as u64;
            let start = BurnInTally::from_records(burn, |_| 0.0)
                .estimates()
                .map(|e| optimal_eta(&e, spec.bounds))
                .unwrap_or_else(|_| ContinuationProbs::unit());
            BurnInRun {
                repeat: r,
                burn_in_efficiency: Some(efficiency_of(burn)),
                adaptive_efficiency: efficiency_of(rest),
                start,
                end: ctl.eta(),
                burn_in_fp: count(Case::CheckedFalsePositive),
                burn_in_fn: count(Case::CheckedFalseNegative),
            }
        })
        .collect();
    Ok(BurnInStudy { large, small })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{run_multifidelity, CampaignSpec, EtaSource};
    use crate::toy::{BernoulliToy, TOY_EPSILON};

    fn toy() -> BernoulliToy {
        BernoulliToy::new(0.10, 0.02, 0.03, 1.0, 2.0, 6.0).unwrap()
    }

    fn table(n: u64, seed: u64) -> BenchmarkTable {
        generate_benchmark(&toy(), n, seed, TOY_EPSILON, TOY_EPSILON).unwrap()
    }

    #[test]
    fn single_row_table() {
        let t = table(1, 1);
        assert_eq!(t.len(), 1);
        assert!(t.rows[0].cost_hi > 0.0);
    }

    #[test]
    fn replay_matches_live_campaign() {
        let t = table(3000, 7);
        for (e1, e2) in [(1.0, 1.0), (0.4, 0.1), (0.05, 0.9)] {
            let spec = CampaignSpec {
                eps_lo: TOY_EPSILON,
                eps_hi: TOY_EPSILON,
                eta: EtaSource::Fixed { eta1: e1, eta2: e2 },
                stop: StopRule::Count(3000),
                seed: 7,
                coupling: true,
            };
            let live = run_multifidelity(&toy(), &spec).unwrap();
            let replay = t.replay_fixed(&t.rows, e1, e2);
            assert_eq!(live.sample.records, replay.records);
        }
    }

    #[test]
    fn supplied_uniform_drives_the_decision() {
        let t = table(400, 4);
        let row = t.rows.iter().find(|r| !t.w_lo(r) && t.w_hi(r)).expect("a false negative row");
        let checked = replay_row_with(row, 0.1, t.eps_lo, t.eps_hi, 0.5, 0.5);
        let skipped = replay_row_with(row, 0.9, t.eps_lo, t.eps_hi, 0.5, 0.5);
        assert_eq!((checked.case, checked.w, checked.u), (Case::CheckedFalseNegative, 2.0, 0.1));
        assert_eq!((skipped.case, skipped.w, skipped.cost_hi), (Case::EarlyReject, 0.0, 0.0));
        assert_eq!(replay_row_with(row, row.u, t.eps_lo, t.eps_hi, 0.5, 0.5), t.replay(row, 0.5, 0.5));
    }

    #[test]
    fn unit_setting_charges_both_costs() {
        let t = table(500, 2);
        let s = t.replay_fixed(&t.rows, 1.0, 1.0);
        let expect: f64 = t.rows.iter().map(|r| r.cost_lo + r.cost_hi).sum();
        assert_eq!(s.total_cost(), expect);
        let ess = ess_of(t.rows.iter().map(|r| weight_plain(r.d_hi, t.eps_hi)));
        assert_eq!(s.efficiency(), ess / expect);
    }

    #[test]
    fn csv_round_trip() {
        let t = table(50, 3);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = BenchmarkTable::read_csv(buf.as_slice(), t.eps_lo, t.eps_hi).unwrap();
        assert_eq!(back.rows, t.rows);
        assert_eq!(back.param_names, t.param_names);
        assert!(BenchmarkTable::read_csv("a,b\n1,2\n".as_bytes(), 1.0, 1.0).is_err());
    }

    #[test]
    fn table_estimates_match_toy() {
        let t = table(100_000, 4);
        let est = t.estimates().unwrap();
        let exact = toy().estimates();
        for (a, b) in [(est.p_tp, exact.p_tp), (est.p_fp, exact.p_fp), (est.p_fn, exact.p_fn)] {
            assert!((a - b).abs() < 3.0 * (b * (1.0 - b) / 1e5).sqrt(), "{a} vs {b}");
        }
    }

    #[test]
    fn efficiency_study_shapes_and_symmetry() {
        let t = table(2000, 5);
        let est = t.estimates().unwrap();
        let settings = efficiency_settings(&est, Bounds::default());
        assert_eq!(settings.len(), 8);
        let st = efficiency_study(&t, &settings, 100, 20, 1).unwrap();
        assert_eq!(st.efficiency.len(), 8);
        assert!(st.efficiency.iter().all(|e| e.len() == 20));
        for i in 0..8 {
            assert_eq!(st.exceedance[i][i], 0.5);
            for j in 0..8 {
                let (a, b) = (st.exceedance[i][j], st.exceedance[j][i]);
                assert!((0.0..=1.0).contains(&a) && (a + b - 1.0).abs() < 1e-12);
            }
        }
        assert!(efficiency_study(&t, &settings, 100, 21, 1).is_err());
    }

    #[test]
    fn midway_points() {
        let s = midway_settings("ear", 0.2, 0.4);
        let pts: Vec<(f64, f64)> = s.iter().map(|s| (s.eta1, s.eta2)).collect();
        assert_eq!(pts, vec![(0.1, 0.2), (0.1, 0.7), (0.6, 0.2), (0.6, 0.7)]);
        assert_eq!(s[1].label, "ear-/+");
    }

    #[test]
    fn constant_function_has_zero_variance() {
        let t = table(2000, 6);
        let spec = VarianceSpec {
            functions: vec![("one".into(), ThetaFunction::Constant { value: 1.0 })],
            budget: 200.0,
            repeats: 20,
            seed: 3,
            bounds: Bounds::default(),
            midway: false,
        };
        // constant F: all F-weighted rates vanish, so every setting sits on the floors
        let st = variance_study(&t, &spec).unwrap();
        assert_eq!(st.rows.len(), 5);
        assert!(st.rows.iter().all(|r| r.variance == 0.0));
    }

    #[test]
    fn budget_must_exceed_row_cost() {
        let t = table(200, 6);
        let spec = VarianceSpec {
            functions: vec![("theta".into(), ThetaFunction::Component { index: 0 })],
            budget: 1.0,
            repeats: 5,
            seed: 3,
            bounds: Bounds::default(),
            midway: false,
        };
        assert!(variance_study(&t, &spec).is_err());
    }

    #[test]
    fn burn_in_study_runs() {
        let t = table(6000, 8);
        let spec = BurnInSpec { burn_in: 200, adaptive_len: 300, repeats: 10, seed: 2, bounds: Bounds::default() };
        let st = burn_in_study(&t, &spec).unwrap();
        assert_eq!(st.large.len(), 10);
        assert_eq!(st.small.len(), 10);
        let full = optimal_eta(&t.estimates().unwrap(), Bounds::default());
        assert!(st.large.iter().all(|r| r.start == {
            let mut c = full;
            c.source = crate::tuning::Provenance::Adapted;
            c
        }));
        assert!(st.small.iter().all(|r| r.burn_in_efficiency.is_some()));
    }

    #[test]
    fn zero_misclassification_burn_in_starts_on_floor() {
        let exact = BernoulliToy::new(0.2, 0.0, 0.0, 1.0, 2.0, 6.0).unwrap();
        let t = generate_benchmark(&exact, 3000, 1, TOY_EPSILON, TOY_EPSILON).unwrap();
        let spec = BurnInSpec { burn_in: 100, adaptive_len: 100, repeats: 5, seed: 1, bounds: Bounds::default() };
        let st = burn_in_study(&t, &spec).unwrap();
        for r in &st.small {
            assert_eq!((r.burn_in_fp, r.burn_in_fn), (0, 0));
            assert!(r.start.flags.at_floor1 && r.start.flags.at_floor2);
            assert!(r.end.flags.at_floor1 && r.end.flags.at_floor2);
        }
    }
}
