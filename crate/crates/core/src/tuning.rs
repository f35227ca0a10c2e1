//! Efficiency objective, optimal continuation probabilities and the
//! burn-in estimators that feed them.

use serde::{Deserialize, Serialize};

use crate::abc::{Case, WeightRecord, WeightedSample};
use crate::error::AbcError;

/// ROC and cost summary of a low/high fidelity pair.
///
/// `c_p` and `c_n` are the expected high-fidelity costs already multiplied
/// by the probability of a low-fidelity accept / reject. When
/// `f_reference` is set, the three rates are weighted by `(F - F_bar)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfEstimates {
    pub p_tp: f64,
    pub p_fp: f64,
    pub p_fn: f64,
    pub c_p: f64,
    pub c_n: f64,
    pub c_lo: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_reference: Option<f64>,
}

impl PerfEstimates {
    pub fn new(p_tp: f64, p_fp: f64, p_fn: f64, c_p: f64, c_n: f64, c_lo: f64) -> Self {
        Self { p_tp, p_fp, p_fn, c_p, c_n, c_lo, f_reference: None }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [self.p_tp, self.p_fp, self.p_fn, self.c_p, self.c_n, self.c_lo];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(format!("estimates must be finite and non-negative: {self:?}"));
        }
        if self.f_reference.is_none()
            && ([self.p_tp, self.p_fp, self.p_fn].iter().any(|&p| p > 1.0) || self.p_tp + self.p_fn > 1.0 + 1e-12)
        {
            return Err(format!("rates must be probabilities with p_tp + p_fn <= 1: {self:?}"));
        }
        Ok(())
    }

    /// `R_0 = p_tp - p_fp`.
    pub fn r_0(&self) -> f64 {
        self.p_tp - self.p_fp
    }

    /// `R_p = p_fp * c_lo / c_p`.
    pub fn r_p(&self) -> f64 {
        ratio(self.p_fp * self.c_lo, self.c_p)
    }

    /// `R_n = p_fn * c_lo / c_n`.
    pub fn r_n(&self) -> f64 {
        ratio(self.p_fn * self.c_lo, self.c_n)
    }

    /// Expected cost per record.
    pub fn expected_cost(&self, eta1: f64, eta2: f64) -> f64 {
        self.c_lo + eta1 * self.c_p + eta2 * self.c_n
    }

    /// Expected squared weight (or its `F`-weighted analogue).
    pub fn second_moment(&self, eta1: f64, eta2: f64) -> f64 {
        self.r_0() + self.p_fp / eta1 + self.p_fn / eta2
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// `phi(eta1, eta2) = [(p_tp - p_fp) + p_fp/eta1 + p_fn/eta2] * [c_lo + eta1 c_p + eta2 c_n]`,
/// the asymptotic inverse efficiency.
pub fn phi(eta1: f64, eta2: f64, est: &PerfEstimates) -> f64 {
    est.second_moment(eta1, eta2) * est.expected_cost(eta1, eta2)
}

/// Lower bounds on the continuation probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub eta1_min: f64,
    pub eta2_min: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self { eta1_min: 0.01, eta2_min: 0.01 }
    }
}

impl Bounds {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("eta1_min", self.eta1_min), ("eta2_min", self.eta2_min)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Fixed,
    Optimized,
    Adapted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaFlags {
    /// No false positives: the unconstrained optimum for `eta1` is 0.
    pub degenerate1: bool,
    /// No false negatives: the unconstrained optimum for `eta2` is 0.
    pub degenerate2: bool,
    /// Chosen by the boundary rule rather than the interior formula.
    pub boundary: bool,
    /// Based on degenerate estimates; expected to move once more data arrive.
    pub provisional: bool,
    /// `eta1` / `eta2` raised to their floors.
    pub at_floor1: bool,
    pub at_floor2: bool,
}

/// Continuation probabilities `(eta1, eta2)` with their origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationProbs {
    pub eta1: f64,
    pub eta2: f64,
    pub source: Provenance,
    pub bounds: Bounds,
    pub flags: EtaFlags,
}

impl ContinuationProbs {
    pub fn fixed(eta1: f64, eta2: f64) -> Result<Self, String> {
        for (name, v) in [("eta1", eta1), ("eta2", eta2)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        Ok(Self {
            eta1,
            eta2,
            source: Provenance::Fixed,
            bounds: Bounds { eta1_min: eta1.min(0.01), eta2_min: eta2.min(0.01) },
            flags: EtaFlags::default(),
        })
    }

    pub fn unit() -> Self {
        Self::fixed(1.0, 1.0).expect("valid")
    }

    fn bounded(eta1: f64, eta2: f64, bounds: Bounds, mut flags: EtaFlags) -> Self {
        let e1 = eta1.clamp(bounds.eta1_min, 1.0);
        let e2 = eta2.clamp(bounds.eta2_min, 1.0);
        flags.at_floor1 = eta1 <= bounds.eta1_min;
        flags.at_floor2 = eta2 <= bounds.eta2_min;
        flags.provisional = flags.degenerate1 || flags.degenerate2;
        Self { eta1: e1, eta2: e2, source: Provenance::Optimized, bounds, flags }
    }
}

/// Minimiser over `eta in (0, 1]` of `(b + a/eta)(d + c eta)` with
/// `a, c, d >= 0`. Returns 0 when the infimum is approached at 0.
pub fn argmin_hyperbolic(a: f64, b: f64, c: f64, d: f64) -> f64 {
    if a == 0.0 {
        // first factor is constant; cost only grows with eta
        return if c > 0.0 { 0.0 } else { 1.0 };
    }
    if c == 0.0 || b <= 0.0 {
        // expanded: b d + a c + b c eta + a d / eta, non-increasing in eta
        return 1.0;
    }
    let eta = (a * d / (b * c)).sqrt();
    if eta.is_finite() {
        eta.min(1.0)
    } else {
        golden_section(|e| (b + a / e) * (d + c * e), 1e-12, 1.0, 1e-6)
    }
}

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Best `eta2` with `eta1 = 1`: `min(1, sqrt(p_fn (c_lo + c_p) / (c_n p_tp)))`.
fn boundary_eta2(est: &PerfEstimates) -> f64 {
    argmin_hyperbolic(est.p_fn, est.r_0() + est.p_fp, est.c_n, est.c_lo + est.c_p)
}

/// Best `eta1` with `eta2 = 1`.
fn boundary_eta1(est: &PerfEstimates) -> f64 {
    argmin_hyperbolic(est.p_fp, est.r_0() + est.p_fn, est.c_p, est.c_lo + est.c_n)
}

/// Continuation probabilities minimising `phi` on `(0, 1]^2`, raised to
/// the lower bounds.
///
/// Interior optimum `(sqrt(R_p/R_0), sqrt(R_n/R_0))` when `R_0 > 0` and
/// both ratios are at most 1; otherwise the better of the two edge optima
/// `(1, eta2_bar)` and `(eta1_bar, 1)`.
pub fn optimal_eta(est: &PerfEstimates, bounds: Bounds) -> ContinuationProbs {
    let flags = EtaFlags { degenerate1: est.p_fp == 0.0, degenerate2: est.p_fn == 0.0, ..EtaFlags::default() };
    let (r0, rp, rn) = (est.r_0(), est.r_p(), est.r_n());
    if r0 > 0.0 && rp.max(rn) <= r0 {
        return ContinuationProbs::bounded((rp / r0).sqrt(), (rn / r0).sqrt(), bounds, flags);
    }
    let e2 = boundary_eta2(est);
    let e1 = boundary_eta1(est);
    // compare at the floored values actually used
    let e2f = e2.max(bounds.eta2_min);
    let e1f = e1.max(bounds.eta1_min);
    let flags = EtaFlags { boundary: true, ..flags };
    if phi(1.0, e2f, est) <= phi(e1f, 1.0, est) {
        ContinuationProbs::bounded(1.0, e2, bounds, flags)
    } else {
        ContinuationProbs::bounded(e1, 1.0, bounds, flags)
    }
}

/// Restricted optimisation modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstrainedMode {
    /// `eta1 = 1`, optimise `eta2`.
    EarlyRejection,
    /// `eta1 = eta2`, optimise the common value.
    EarlyDecision,
}

pub fn optimal_eta_constrained(est: &PerfEstimates, mode: ConstrainedMode, bounds: Bounds) -> ContinuationProbs {
    match mode {
        ConstrainedMode::EarlyRejection => {
            let flags = EtaFlags { degenerate2: est.p_fn == 0.0, boundary: true, ..EtaFlags::default() };
            let mut c = ContinuationProbs::bounded(1.0, boundary_eta2(est), bounds, flags);
            c.flags.at_floor1 = false;
            c
        }
        ConstrainedMode::EarlyDecision => {
            let a = est.p_fp + est.p_fn;
            let degenerate = a == 0.0;
            let flags = EtaFlags { degenerate1: degenerate, degenerate2: degenerate, ..EtaFlags::default() };
            let e = argmin_hyperbolic(a, est.r_0(), est.c_p + est.c_n, est.c_lo);
            let floor = bounds.eta1_min.max(bounds.eta2_min);
            ContinuationProbs::bounded(e.max(floor), e.max(floor), bounds, EtaFlags { at_floor1: e <= floor, ..flags })
        }
    }
}

/// Why corrected burn-in estimates cannot be formed yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotReady {
    NoChecked,
    NoPositiveChecked,
    NoNegativeChecked,
}

/// Count, sum and sum of squares of `F` over one outcome class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct Moments {
    n: u64,
    s1: f64,
    s2: f64,
}

impl Moments {
    fn add(&mut self, f: f64) {
        self.n += 1;
        self.s1 += f;
        self.s2 += f * f;
    }

    /// `sum (F - mu)^2` over the class.
    fn centred(&self, mu: f64) -> f64 {
        (self.s2 - 2.0 * mu * self.s1 + self.n as f64 * mu * mu).max(0.0)
    }
}

/// Running sums for the burn-in / adaptive estimators.
///
/// Every record contributes to `m`; records whose high-fidelity model ran
/// contribute to `k`. Class-conditional means from the checked subset are
/// rescaled by `rho_m / rho_k` (positives) and `(1 - rho_m)/(1 - rho_k)`
/// (negatives), where `rho` is the fraction of low-fidelity accepts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BurnInTally {
    pub m: u64,
    pub k: u64,
    pub pos_m: u64,
    pub pos_k: u64,
    pub cost_lo_sum: f64,
    pub cost_pos_sum: f64,
    pub cost_neg_sum: f64,
    tp: Moments,
    fp: Moments,
    fneg: Moments,
    /// Running `sum w F` and `sum w` over all records.
    wf_sum: f64,
    w_sum: f64,
}

impl BurnInTally {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a WeightRecord>, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut t = Self::new();
        for r in records {
            t.update(r, f(&r.theta));
        }
        t
    }

    /// Add one completed record; `f_value` is `F(theta)` (any value when
    /// only the plain estimates are needed).
    pub fn update(&mut self, r: &WeightRecord, f_value: f64) {
        self.m += 1;
        self.cost_lo_sum += r.cost_lo;
        if r.w_tilde {
            self.pos_m += 1;
        }
        self.wf_sum += r.w * f_value;
        self.w_sum += r.w;
        let Some(w_high) = r.w_high else { return };
        self.k += 1;
        if r.w_tilde {
            self.pos_k += 1;
            self.cost_pos_sum += r.cost_hi;
            if w_high {
                self.tp.add(f_value);
            } else {
                self.fp.add(f_value);
            }
        } else {
            self.cost_neg_sum += r.cost_hi;
            if w_high {
                self.fneg.add(f_value);
            }
        }
    }

    pub fn rho_m(&self) -> f64 {
        self.pos_m as f64 / self.m as f64
    }

    pub fn rho_k(&self) -> f64 {
        self.pos_k as f64 / self.k as f64
    }

    /// Current `sum w F / sum w`, if defined.
    pub fn running_mean(&self) -> Option<f64> {
        (self.w_sum != 0.0).then(|| self.wf_sum / self.w_sum)
    }

    fn factors(&self) -> Result<(f64, f64), NotReady> {
        if self.k == 0 {
            return Err(NotReady::NoChecked);
        }
        if self.pos_k == 0 {
            return Err(NotReady::NoPositiveChecked);
        }
        if self.pos_k == self.k {
            return Err(NotReady::NoNegativeChecked);
        }
        let k = self.k as f64;
        let pos = self.rho_m() / self.rho_k() / k;
        let neg = (1.0 - self.rho_m()) / (1.0 - self.rho_k()) / k;
        Ok((pos, neg))
    }

    pub fn estimates(&self) -> Result<PerfEstimates, NotReady> {
        let (pos, neg) = self.factors()?;
        Ok(PerfEstimates {
            p_tp: pos * self.tp.n as f64,
            p_fp: pos * self.fp.n as f64,
            p_fn: neg * self.fneg.n as f64,
            c_p: pos * self.cost_pos_sum,
            c_n: neg * self.cost_neg_sum,
            c_lo: self.cost_lo_sum / self.m as f64,
            f_reference: None,
        })
    }

    /// Rates weighted by `(F - f_bar)^2`; costs unchanged.
    pub fn f_estimates(&self, f_bar: f64) -> Result<PerfEstimates, NotReady> {
        let (pos, neg) = self.factors()?;
        let base = self.estimates()?;
        Ok(PerfEstimates {
            p_tp: pos * self.tp.centred(f_bar),
            p_fp: pos * self.fp.centred(f_bar),
            p_fn: neg * self.fneg.centred(f_bar),
            f_reference: Some(f_bar),
            ..base
        })
    }
}

/// `F`-weighted estimates from completed records.
pub fn f_weighted_estimates(
    records: &[WeightRecord],
    f: impl Fn(&[f64]) -> f64,
    f_bar: f64,
) -> Result<PerfEstimates, NotReady> {
    BurnInTally::from_records(records, f).f_estimates(f_bar)
}

/// Plug-in variance of the self-normalised estimator,
/// `sum w^2 (F - mu)^2 / (sum w)^2` with `mu` the estimate itself.
pub fn variance_proxy(sample: &WeightedSample, f: impl Fn(&[f64]) -> f64) -> Result<f64, AbcError> {
    let fv: Vec<f64> = sample.records.iter().map(|r| f(&r.theta)).collect();
    let w = sample.weights();
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return Err(AbcError::ZeroTotalWeight);
    }
    let mu = w.iter().zip(&fv).map(|(w, f)| w * f).sum::<f64>() / total;
    let num: f64 = w.iter().zip(&fv).map(|(w, f)| w * w * (f - mu) * (f - mu)).sum();
    Ok(num / (total * total))
}

/// JSON-serialisable tuning result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningReport {
    pub estimates: PerfEstimates,
    pub r_p: f64,
    pub r_n: f64,
    pub r_0: f64,
    pub mode: String,
    pub eta: ContinuationProbs,
    pub phi: f64,
    pub phi_unit: f64,
}

impl TuningReport {
    pub fn new(estimates: PerfEstimates, mode: &str, eta: ContinuationProbs) -> Self {
        Self {
            r_p: estimates.r_p(),
            r_n: estimates.r_n(),
            r_0: estimates.r_0(),
            phi: phi(eta.eta1, eta.eta2, &estimates),
            phi_unit: phi(1.0, 1.0, &estimates),
            mode: mode.to_string(),
            estimates,
            eta,
        }
    }
}

/// Counts of each case in a record set, for reports.
pub fn case_histogram(records: &[WeightRecord]) -> Vec<(Case, usize)> {
    Case::ALL.iter().map(|&c| (c, records.iter().filter(|r| r.case == c).count())).collect()
}
