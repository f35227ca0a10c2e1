//! Summaries, distances, the four weight schemes and weighted samples.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{AbcError, Error};

/// Summary statistics of one simulation or of the observed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SummaryVector(pub Vec<f64>);

impl SummaryVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for SummaryVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Euclidean distance divided by `normalization`, with acceptance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSpec {
    pub normalization: f64,
    pub epsilon: f64,
}

impl DistanceSpec {
    pub fn new(normalization: f64, epsilon: f64) -> Result<Self, Error> {
        let spec = Self { normalization, epsilon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.normalization > 0.0 && self.normalization.is_finite()) {
            return Err(Error::Invalid(format!("normalization must be positive, got {}", self.normalization)));
        }
        Ok(())
    }

    pub fn distance(&self, sim: &SummaryVector, obs: &SummaryVector) -> Result<f64, AbcError> {
        distance(sim, obs, self)
    }

    pub fn accepts(&self, d: f64) -> bool {
        weight_plain(d, self.epsilon) == 1.0
    }
}

pub fn distance(sim: &SummaryVector, obs: &SummaryVector, spec: &DistanceSpec) -> Result<f64, AbcError> {
    if sim.len() != obs.len() {
        return Err(AbcError::DimensionMismatch { simulated: sim.len(), observed: obs.len() });
    }
    let ss: f64 = sim.0.iter().zip(&obs.0).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(ss.sqrt() / spec.normalization)
}

/// `I(d < epsilon)`; ties are rejected.
pub fn weight_plain(d: f64, epsilon: f64) -> f64 {
    if d < epsilon {
        1.0
    } else {
        0.0
    }
}

/// Early rejection: with probability `1 - eta` stop at weight 0, otherwise
/// run the high-fidelity check and weight the acceptance by `1 / eta`.
/// Returns the weight and whether the high-fidelity model was run.
pub fn weight_early_rejection<E>(u: f64, eta: f64, high: impl FnOnce() -> Result<bool, E>) -> Result<(f64, bool), E> {
    if u >= eta {
        return Ok((0.0, false));
    }
    let w = if high()? { 1.0 } else { 0.0 };
    Ok((w / eta, true))
}

/// Early decision: keep `w_tilde` with probability `1 - eta`, otherwise
/// correct it by `(w - w_tilde) / eta`. Can be negative.
pub fn weight_early_decision<E>(
    w_tilde: bool,
    u: f64,
    eta: f64,
    high: impl FnOnce() -> Result<bool, E>,
) -> Result<(f64, bool), E> {
    let wt = if w_tilde { 1.0 } else { 0.0 };
    if u >= eta {
        return Ok((wt, false));
    }
    let w = if high()? { 1.0 } else { 0.0 };
    Ok((wt + (w - wt) / eta, true))
}

/// How a multifidelity weight was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    EarlyAccept,
    EarlyReject,
    CheckedTruePositive,
    CheckedTrueNegative,
    CheckedFalsePositive,
    CheckedFalseNegative,
    /// Plain rejection ABC, high fidelity only.
    Plain,
}

impl Case {
    pub const ALL: [Case; 7] = [
        Case::EarlyAccept,
        Case::EarlyReject,
        Case::CheckedTruePositive,
        Case::CheckedTrueNegative,
        Case::CheckedFalsePositive,
        Case::CheckedFalseNegative,
        Case::Plain,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Case::EarlyAccept => "early_accept",
            Case::EarlyReject => "early_reject",
            Case::CheckedTruePositive => "checked_tp",
            Case::CheckedTrueNegative => "checked_tn",
            Case::CheckedFalsePositive => "checked_fp",
            Case::CheckedFalseNegative => "checked_fn",
            Case::Plain => "plain",
        }
    }

    pub fn parse(s: &str) -> Option<Case> {
        Case::ALL.into_iter().find(|c| c.label() == s)
    }

    pub fn checked(self) -> bool {
        !matches!(self, Case::EarlyAccept | Case::EarlyReject)
    }

    /// Case for low/high decisions, `high = None` meaning not simulated.
    pub fn classify(w_tilde: bool, high: Option<bool>) -> Case {
        match (w_tilde, high) {
            (true, None) => Case::EarlyAccept,
            (false, None) => Case::EarlyReject,
            (true, Some(true)) => Case::CheckedTruePositive,
            (false, Some(false)) => Case::CheckedTrueNegative,
            (true, Some(false)) => Case::CheckedFalsePositive,
            (false, Some(true)) => Case::CheckedFalseNegative,
        }
    }

    /// Weight implied by the case and the continuation probabilities.
    pub fn weight(self, eta1: f64, eta2: f64) -> f64 {
        match self {
            Case::EarlyAccept | Case::CheckedTruePositive => 1.0,
            Case::EarlyReject | Case::CheckedTrueNegative => 0.0,
            Case::CheckedFalsePositive => 1.0 - 1.0 / eta1,
            Case::CheckedFalseNegative => 1.0 / eta2,
            Case::Plain => f64::NAN,
        }
    }
}

/// Result of the multifidelity weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfOutcome {
    pub weight: f64,
    pub case: Case,
    pub w_high: Option<bool>,
    /// Continuation probability applied, `eta1` or `eta2`.
    pub eta: f64,
}

/// Early accept/reject weight `w_tilde + I(u < eta)/eta * (w - w_tilde)`
/// with `eta = eta1` after a low-fidelity accept and `eta2` after a reject.
pub fn weight_multifidelity<E>(
    w_tilde: bool,
    u: f64,
    eta1: f64,
    eta2: f64,
    high: impl FnOnce() -> Result<bool, E>,
) -> Result<MfOutcome, E> {
    let eta = if w_tilde { eta1 } else { eta2 };
    let (w_high, weight) = if u < eta {
        let w = high()?;
        let (wt, wh) = (f64::from(u8::from(w_tilde)), f64::from(u8::from(w)));
        (Some(w), wt + (wh - wt) / eta)
    } else {
        (None, f64::from(u8::from(w_tilde)))
    };
    Ok(MfOutcome { weight, case: Case::classify(w_tilde, w_high), w_high, eta })
}

/// A function of the parameter vector whose posterior mean is estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ThetaFunction {
    /// `theta[index]`.
    Component {
        index: usize,
    },
    /// `1` when `lo <= theta[index] < hi`, else `0`.
    Indicator {
        index: usize,
        lo: f64,
        hi: f64,
    },
    Constant {
        value: f64,
    },
}

impl ThetaFunction {
    pub fn eval(&self, theta: &[f64]) -> f64 {
        match *self {
            ThetaFunction::Component { index } => theta[index],
            ThetaFunction::Indicator { index, lo, hi } => f64::from(u8::from(theta[index] >= lo && theta[index] < hi)),
            ThetaFunction::Constant { value } => value,
        }
    }

    pub fn max_index(&self) -> Option<usize> {
        match *self {
            ThetaFunction::Component { index } | ThetaFunction::Indicator { index, .. } => Some(index),
            ThetaFunction::Constant { .. } => None,
        }
    }
}

/// One Monte Carlo index of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub index: u64,
    pub theta: Vec<f64>,
    pub w: f64,
    pub w_tilde: bool,
    pub w_high: Option<bool>,
    pub case: Case,
    /// Low-fidelity cost in seconds (0 for plain rejection without a low-fidelity model).
    pub cost_lo: f64,
    /// High-fidelity cost in seconds (0 when not simulated).
    pub cost_hi: f64,
    pub u: f64,
    pub eta: f64,
}

impl WeightRecord {
    pub fn cost(&self) -> f64 {
        self.cost_lo + self.cost_hi
    }

    pub fn high_simulated(&self) -> bool {
        self.w_high.is_some()
    }
}

/// Signed-weight Monte Carlo sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub param_names: Vec<String>,
    pub records: Vec<WeightRecord>,
}

/// `(sum w)^2 / sum w^2`, zero for all-zero weights.
pub fn ess_of(weights: impl IntoIterator<Item = f64>) -> f64 {
    let (s, s2) = weights.into_iter().fold((0.0, 0.0), |(s, s2), w| (s + w, s2 + w * w));
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

/// Self-normalised estimate `sum w F / sum w`.
pub fn estimate_of(weights: &[f64], values: &[f64]) -> Result<f64, AbcError> {
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(AbcError::ZeroTotalWeight);
    }
    Ok(weights.iter().zip(values).map(|(w, f)| w * f).sum::<f64>() / total)
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSummary {
    pub n: usize,
    pub ess: f64,
    pub t_tot: f64,
    pub z_hat: f64,
    pub efficiency: f64,
    pub case_counts: Vec<(String, usize)>,
    pub estimates: Vec<(String, Option<f64>)>,
}

impl WeightedSample {
    pub fn new(param_names: Vec<String>) -> Self {
        Self { param_names, records: vec![] }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.w).collect()
    }

    pub fn ess(&self) -> f64 {
        ess_of(self.records.iter().map(|r| r.w))
    }

    pub fn total_cost(&self) -> f64 {
        self.records.iter().map(WeightRecord::cost).sum()
    }

    /// `sum w / N`, an estimate of the ABC evidence.
    pub fn z_hat(&self) -> f64 {
        if self.records.is_empty() {
            return f64::NAN;
        }
        self.records.iter().map(|r| r.w).sum::<f64>() / self.records.len() as f64
    }

    /// ESS per second of simulation.
    pub fn efficiency(&self) -> f64 {
        self.ess() / self.total_cost()
    }

    pub fn estimate(&self, f: &ThetaFunction) -> Result<f64, AbcError> {
        self.estimate_with(|theta| f.eval(theta))
    }

    pub fn estimate_with(&self, f: impl Fn(&[f64]) -> f64) -> Result<f64, AbcError> {
        let w = self.weights();
        let v: Vec<f64> = self.records.iter().map(|r| f(&r.theta)).collect();
        estimate_of(&w, &v)
    }

    pub fn case_count(&self, case: Case) -> usize {
        self.records.iter().filter(|r| r.case == case).count()
    }

    pub fn summary(&self, functions: &[(String, ThetaFunction)]) -> SampleSummary {
        SampleSummary {
            n: self.len(),
            ess: self.ess(),
            t_tot: self.total_cost(),
            z_hat: self.z_hat(),
            efficiency: self.efficiency(),
            case_counts: Case::ALL
                .iter()
                .map(|&c| (c.label().to_string(), self.case_count(c)))
                .filter(|(_, n)| *n > 0)
                .collect(),
            estimates: functions.iter().map(|(name, f)| (name.clone(), self.estimate(f).ok())).collect(),
        }
    }

    /// CSV with columns `index,<theta names>,w,w_tilde,case,cost_lo,cost_hi`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        header.extend(self.param_names.iter().cloned());
        header.extend(["w", "w_tilde", "case", "cost_lo", "cost_hi"].map(String::from));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.index.to_string()];
            row.extend(r.theta.iter().map(|v| v.to_string()));
            row.push(r.w.to_string());
            row.push(u8::from(r.w_tilde).to_string());
            row.push(r.case.label().to_string());
            row.push(r.cost_lo.to_string());
            row.push(r.cost_hi.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn never() -> Result<bool, Infallible> {
        panic!("high fidelity must not run")
    }

    fn yes() -> Result<bool, Infallible> {
        Ok(true)
    }

    fn no() -> Result<bool, Infallible> {
        Ok(false)
    }

    #[test]
    fn distance_examples() {
        let spec = DistanceSpec::new(10.0, 50.0).unwrap();
        let a = SummaryVector(vec![1.0, 2.0, 3.0]);
        assert_eq!(distance(&a, &a, &spec).unwrap(), 0.0);
        let b = SummaryVector(vec![11.0, 2.0, 3.0]);
        assert!((distance(&a, &b, &spec).unwrap() - 1.0).abs() < 1e-15);
        let unit = DistanceSpec::new(1.0, 0.25).unwrap();
        let d = distance(&SummaryVector(vec![1.0, 1.0, 0.0]), &SummaryVector(vec![0.0; 3]), &unit).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            distance(&a, &SummaryVector(vec![0.0]), &spec),
            Err(AbcError::DimensionMismatch { simulated: 3, observed: 1 })
        );
    }

    #[test]
    fn nonpositive_epsilon_rejected() {
        assert!(DistanceSpec::new(1.0, 0.0).is_err());
        assert!(DistanceSpec::new(1.0, -1.0).is_err());
    }

    #[test]
    fn plain_weight_is_strict() {
        assert_eq!(weight_plain(49.9, 50.0), 1.0);
        assert_eq!(weight_plain(50.0, 50.0), 0.0);
        assert_eq!(weight_plain(120.0, 50.0), 0.0);
    }

    #[test]
    fn early_rejection_examples() {
        assert_eq!(weight_early_rejection(0.7, 0.5, never).unwrap(), (0.0, false));
        assert_eq!(weight_early_rejection(0.5, 0.5, never).unwrap(), (0.0, false));
        assert_eq!(weight_early_rejection(0.2, 0.5, yes).unwrap(), (2.0, true));
        assert_eq!(weight_early_rejection(0.2, 0.5, no).unwrap(), (0.0, true));
    }

    #[test]
    fn early_decision_examples() {
        assert_eq!(weight_early_decision(true, 0.9, 0.5, never).unwrap(), (1.0, false));
        assert_eq!(weight_early_decision(true, 0.1, 0.5, no).unwrap(), (-1.0, true));
        assert_eq!(weight_early_decision(true, 0.1, 0.5, yes).unwrap(), (1.0, true));
        assert_eq!(weight_early_decision(false, 0.1, 0.25, yes).unwrap(), (4.0, true));
    }

    #[test]
    fn multifidelity_cases() {
        let ea = weight_multifidelity(true, 0.9, 0.5, 0.5, never).unwrap();
        assert_eq!((ea.weight, ea.case), (1.0, Case::EarlyAccept));
        let er = weight_multifidelity(false, 0.9, 0.5, 0.5, never).unwrap();
        assert_eq!((er.weight, er.case), (0.0, Case::EarlyReject));
        let fp = weight_multifidelity(true, 0.1, 0.161, 0.048, no).unwrap();
        assert_eq!(fp.case, Case::CheckedFalsePositive);
        assert!((fp.weight - (1.0 - 1.0 / 0.161)).abs() < 1e-12);
        assert!((fp.weight + 5.2112).abs() < 1e-4);
        let fneg = weight_multifidelity(false, 0.01, 0.161, 0.048, yes).unwrap();
        assert_eq!(fneg.case, Case::CheckedFalseNegative);
        assert!((fneg.weight - 20.8333).abs() < 1e-4);
        let tp = weight_multifidelity(true, 0.1, 0.5, 0.5, yes).unwrap();
        assert_eq!((tp.weight, tp.case), (1.0, Case::CheckedTruePositive));
        let tn = weight_multifidelity(false, 0.1, 0.5, 0.5, no).unwrap();
        assert_eq!((tn.weight, tn.case), (0.0, Case::CheckedTrueNegative));
    }

    #[test]
    fn case_weight_matches_formula() {
        for wt in [false, true] {
            for wh in [false, true] {
                let out = weight_multifidelity(wt, 0.0, 0.3, 0.2, || Ok::<_, Infallible>(wh)).unwrap();
                assert_eq!(out.weight, out.case.weight(0.3, 0.2));
            }
        }
    }

    #[test]
    fn estimator_examples() {
        assert_eq!(estimate_of(&[1.0, 1.0, 1.0], &[1.0, 2.0, 6.0]).unwrap(), 3.0);
        assert_eq!(estimate_of(&[1.0, 0.0], &[5.0, 9.0]).unwrap(), 5.0);
        assert_eq!(estimate_of(&[1.0, -1.0, 1.0], &[2.0, 4.0, 6.0]).unwrap(), 4.0);
        assert_eq!(estimate_of(&[0.0, 0.0], &[2.0, 4.0]), Err(AbcError::ZeroTotalWeight));
    }

    #[test]
    fn ess_examples() {
        assert_eq!(ess_of([1.0; 10]), 10.0);
        assert_eq!(ess_of([1.0, 1.0, 0.0, 0.0]), 2.0);
        assert_eq!(ess_of([1.0, -1.0, 1.0, 1.0]), 1.0);
        assert_eq!(ess_of([0.0, 0.0]), 0.0);
    }

    #[test]
    fn csv_layout() {
        let s = WeightedSample {
            param_names: vec!["n".into(), "K_h".into()],
            records: vec![WeightRecord {
                index: 3,
                theta: vec![2.0, 20.0],
                w: -1.5,
                w_tilde: true,
                w_high: Some(false),
                case: Case::CheckedFalsePositive,
                cost_lo: 0.25,
                cost_hi: 1.0,
                u: 0.1,
                eta: 0.4,
            }],
        };
        let mut buf = vec![];
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "index,n,K_h,w,w_tilde,case,cost_lo,cost_hi\n3,2,20,-1.5,1,checked_fp,0.25,1\n");
        assert_eq!(s.total_cost(), 1.25);
    }
}
