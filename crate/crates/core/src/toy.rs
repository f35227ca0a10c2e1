//! Synthetic fidelity pair with a known joint law of the two acceptance
//! indicators, used to check estimators against closed forms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::rng::SimRng;
use crate::sampler::{FidelityPair, HighFi, LowFi};
use crate::tuning::PerfEstimates;

/// Distances handed back by the toy; any threshold in `(0.5, 1.5]` gives
/// the specified acceptance law.
pub const TOY_ACCEPT_DISTANCE: f64 = 0.5;
pub const TOY_REJECT_DISTANCE: f64 = 1.5;
pub const TOY_EPSILON: f64 = 1.0;

/// Two correlated Bernoulli acceptance indicators `(w_tilde, w)` with
/// `P(1,1) = p_tp`, `P(1,0) = p_fp`, `P(0,1) = p_fn`, and deterministic
/// costs. The parameter is one-dimensional, `Unif(-sqrt 3, sqrt 3)` (unit
/// variance) and independent of the indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliToy {
    pub p_tp: f64,
    pub p_fp: f64,
    pub p_fn: f64,
    /// Low-fidelity cost per record.
    pub cost_lo: f64,
    /// High-fidelity cost contribution after a low-fidelity accept,
    /// already multiplied by `P(w_tilde = 1)`.
    pub c_p: f64,
    /// Same after a low-fidelity reject, multiplied by `P(w_tilde = 0)`.
    pub c_n: f64,
}

impl BernoulliToy {
    pub fn new(p_tp: f64, p_fp: f64, p_fn: f64, cost_lo: f64, c_p: f64, c_n: f64) -> Result<Self, String> {
        let toy = Self { p_tp, p_fp, p_fn, cost_lo, c_p, c_n };
        toy.estimates().validate()?;
        if p_tp + p_fp + p_fn > 1.0 {
            return Err("joint probabilities exceed 1".into());
        }
        if p_tp + p_fp <= 0.0 || p_tp + p_fp >= 1.0 {
            return Err("low-fidelity acceptance probability must lie strictly in (0, 1)".into());
        }
        if !(cost_lo > 0.0 && c_p > 0.0 && c_n > 0.0) {
            return Err("costs must be positive".into());
        }
        Ok(toy)
    }

    /// Exact rates and costs.
    pub fn estimates(&self) -> PerfEstimates {
        PerfEstimates::new(self.p_tp, self.p_fp, self.p_fn, self.c_p, self.c_n, self.cost_lo)
    }

    /// `P(w = 1)`.
    pub fn acceptance(&self) -> f64 {
        self.p_tp + self.p_fn
    }

    pub fn low_accept(&self) -> f64 {
        self.p_tp + self.p_fp
    }

    /// Cost of one high-fidelity run given the low-fidelity decision.
    pub fn cost_hi(&self, w_tilde: bool) -> f64 {
        if w_tilde {
            self.c_p / self.low_accept()
        } else {
            self.c_n / (1.0 - self.low_accept())
        }
    }

    fn distance(accept: bool) -> f64 {
        if accept {
            TOY_ACCEPT_DISTANCE
        } else {
            TOY_REJECT_DISTANCE
        }
    }
}

impl FidelityPair for BernoulliToy {
    /// `(w_tilde, w)`, drawn jointly.
    type Coupling = (bool, bool);

    fn param_names(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn sample_prior(&self, rng: &mut SimRng) -> Vec<f64> {
        let h = 3f64.sqrt();
        vec![rng.random_range(-h..h)]
    }

    fn low(&self, _theta: &[f64], rng: &mut SimRng) -> Result<LowFi<(bool, bool)>, SimError> {
        let u: f64 = rng.random();
        let (lo, hi) = if u < self.p_tp {
            (true, true)
        } else if u < self.p_tp + self.p_fp {
            (true, false)
        } else if u < self.p_tp + self.p_fp + self.p_fn {
            (false, true)
        } else {
            (false, false)
        };
        Ok(LowFi { distance: Self::distance(lo), cost: self.cost_lo, coupling: (lo, hi) })
    }

    fn high(&self, _theta: &[f64], (w_tilde, w): (bool, bool), _rng: &mut SimRng) -> Result<HighFi, SimError> {
        Ok(HighFi { distance: Self::distance(w), cost: self.cost_hi(w_tilde) })
    }

    fn high_uncoupled(&self, _theta: &[f64], rng: &mut SimRng) -> Result<HighFi, SimError> {
        let accept = rng.random::<f64>() < self.acceptance();
        let cost = self.low_accept() * self.cost_hi(true) + (1.0 - self.low_accept()) * self.cost_hi(false);
        Ok(HighFi { distance: Self::distance(accept), cost })
    }
}
