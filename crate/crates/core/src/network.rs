//! Stochastic reaction networks, parameter vectors and priors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Default abort threshold for molecule counts.
pub const DEFAULT_COUNT_LIMIT: i64 = i32::MAX as i64;

/// A rate constant: either a named network parameter or a literal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate {
    Param(usize),
    Const(f64),
}

impl Rate {
    fn value(self, params: &[f64]) -> f64 {
        match self {
            Rate::Param(i) => params[i],
            Rate::Const(v) => v,
        }
    }
}

/// Closed-form rate law of a single reaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateLaw {
    /// `k * prod_s C(x_s, n_s)` over the listed reactants.
    MassAction { rate: Rate, reactants: Vec<(usize, u32)> },
    /// `basal + max * K^n / (K^n + p^n)` with `p` the repressor count.
    HillRepression { basal: Rate, max: Rate, repressor: usize, hill: Rate, half: Rate },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub name: String,
    /// Net state change (one column of the stoichiometric matrix).
    pub change: Vec<i64>,
    pub law: RateLaw,
    /// Flagged for the hybrid scheme.
    #[serde(default)]
    pub fast: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionNetwork {
    pub name: String,
    pub species: Vec<String>,
    pub parameters: Vec<String>,
    /// Nominal parameter values, overridden by a [`ParamVector`] at bind time.
    pub defaults: Vec<f64>,
    pub reactions: Vec<Reaction>,
    pub initial_state: Vec<i64>,
    pub horizon: f64,
    pub count_limit: i64,
}

/// Hill repression `K^n / (K^n + p^n)`.
pub fn hill_repression(p: f64, hill: f64, half: f64) -> f64 {
    let kn = half.powf(hill);
    kn / (kn + p.powf(hill))
}

impl ReactionNetwork {
    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn reaction_count(&self) -> usize {
        self.reactions.len()
    }

    /// `N x M` stoichiometric matrix, rows are species.
    pub fn stoichiometry(&self) -> Vec<Vec<i64>> {
        (0..self.species_count()).map(|s| self.reactions.iter().map(|r| r.change[s]).collect()).collect()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p == name)
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn fast_reactions(&self) -> Vec<usize> {
        (0..self.reaction_count()).filter(|&j| self.reactions[j].fast).collect()
    }

    /// Replace nominal values, e.g. fixed prior assignments or config overrides.
    pub fn with_overrides(mut self, overrides: &[(String, f64)]) -> Result<Self, ModelError> {
        for (name, value) in overrides {
            let i = self.param_index(name).ok_or_else(|| ModelError::UnknownParameter(name.clone()))?;
            self.defaults[i] = *value;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.species_count();
        if self.initial_state.len() != n {
            return Err(ModelError::InvalidNetwork("initial state length".into()));
        }
        if self.initial_state.iter().any(|&x| x < 0) {
            return Err(ModelError::InvalidNetwork("negative initial count".into()));
        }
        if self.defaults.len() != self.parameters.len() {
            return Err(ModelError::InvalidNetwork("parameter defaults length".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ModelError::InvalidNetwork("horizon must be positive".into()));
        }
        let np = self.parameters.len();
        let rate_ok = |r: &Rate| match *r {
            Rate::Param(i) => i < np,
            Rate::Const(v) => v.is_finite() && v >= 0.0,
        };
        for r in &self.reactions {
            if r.change.len() != n {
                return Err(ModelError::InvalidNetwork(format!("reaction `{}` change length", r.name)));
            }
            let ok = match &r.law {
                RateLaw::MassAction { rate, reactants } => rate_ok(rate) && reactants.iter().all(|&(s, _)| s < n),
                RateLaw::HillRepression { basal, max, repressor, hill, half } => {
                    [basal, max, hill, half].into_iter().all(rate_ok) && *repressor < n
                }
            };
            if !ok {
                return Err(ModelError::InvalidNetwork(format!("reaction `{}` rate law", r.name)));
            }
        }
        Ok(())
    }

    /// Resolve parameters and precompute rate constants for simulation.
    pub fn bind(&self, theta: &ParamVector) -> Result<Kinetics, ModelError> {
        let mut params = self.defaults.clone();
        for (name, &value) in theta.names.iter().zip(&theta.values) {
            let i = self.param_index(name).ok_or_else(|| ModelError::UnknownParameter(name.clone()))?;
            params[i] = value;
        }
        for (name, &v) in self.parameters.iter().zip(&params) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParameter { name: name.clone(), value: v });
            }
        }
        let laws = self
            .reactions
            .iter()
            .map(|r| match &r.law {
                RateLaw::MassAction { rate, reactants } => {
                    BoundLaw::MassAction { k: rate.value(&params), reactants: reactants.clone() }
                }
                RateLaw::HillRepression { basal, max, repressor, hill, half } => {
                    let n = hill.value(&params);
                    BoundLaw::Hill {
                        basal: basal.value(&params),
                        max: max.value(&params),
                        repressor: *repressor,
                        hill: n,
                        half_pow: half.value(&params).powf(n),
                    }
                }
            })
            .collect();
        Ok(Kinetics {
            laws,
            changes: self.reactions.iter().map(|r| r.change.clone()).collect(),
            params,
            species: self.species_count(),
            horizon: self.horizon,
            count_limit: self.count_limit,
            initial_state: self.initial_state.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) enum BoundLaw {
    MassAction { k: f64, reactants: Vec<(usize, u32)> },
    Hill { basal: f64, max: f64, repressor: usize, hill: f64, half_pow: f64 },
}

/// A network with all rate constants resolved.
#[derive(Debug, Clone)]
pub struct Kinetics {
    pub(crate) laws: Vec<BoundLaw>,
    pub changes: Vec<Vec<i64>>,
    pub params: Vec<f64>,
    pub species: usize,
    pub horizon: f64,
    pub count_limit: i64,
    pub initial_state: Vec<i64>,
}

fn falling_binomial(x: i64, n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => x as f64,
        _ => {
            let mut acc = 1.0;
            for i in 0..n as i64 {
                let f = (x - i) as f64;
                if f <= 0.0 {
                    return 0.0;
                }
                acc *= f / (i + 1) as f64;
            }
            acc
        }
    }
}

impl Kinetics {
    pub fn reaction_count(&self) -> usize {
        self.laws.len()
    }

    pub fn propensity(&self, j: usize, x: &[i64]) -> f64 {
        match &self.laws[j] {
            BoundLaw::MassAction { k, reactants } => {
                let mut a = *k;
                for &(s, n) in reactants {
                    a *= falling_binomial(x[s], n);
                    if a == 0.0 {
                        break;
                    }
                }
                a
            }
            BoundLaw::Hill { basal, max, repressor, hill, half_pow } => {
                let p = x[*repressor].max(0) as f64;
                basal + max * half_pow / (half_pow + p.powf(*hill))
            }
        }
    }

    pub fn propensities(&self, x: &[i64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.propensity(j, x);
        }
    }

    pub(crate) fn law(&self, j: usize) -> &BoundLaw {
        &self.laws[j]
    }
}

/// Values of the free (uncertain) parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(names.len(), values.len());
        Self { names, values }
    }

    pub fn empty() -> Self {
        Self { names: vec![], values: vec![] }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Marginal prior of one free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamPrior {
    Uniform {
        low: f64,
        high: f64,
    },
    /// `nominal * base^u`, `u ~ Unif(-1, 1)`.
    LogScaled {
        nominal: f64,
        base: f64,
    },
}

impl ParamPrior {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            ParamPrior::Uniform { low, high } => (low, high),
            ParamPrior::LogScaled { nominal, base } => (nominal / base, nominal * base),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ParamPrior::Uniform { low, high } => {
                if high == low {
                    low
                } else {
                    low + (high - low) * rng.random::<f64>()
                }
            }
            ParamPrior::LogScaled { nominal, base } => {
                let u = 2.0 * rng.random::<f64>() - 1.0;
                nominal * base.powf(u)
            }
        }
    }

    /// Density; a degenerate uniform is treated as a unit point mass.
    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match *self {
            ParamPrior::Uniform { low, high } => {
                if high == low {
                    1.0
                } else {
                    1.0 / (high - low)
                }
            }
            ParamPrior::LogScaled { base, .. } => 1.0 / (2.0 * x * base.ln()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ParamPrior::Uniform { low, high } => 0.5 * (low + high),
            ParamPrior::LogScaled { nominal, base } => {
                let l = base.ln();
                nominal * (base - 1.0 / base) / (2.0 * l)
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ParamPrior::Uniform { low, high } => (high - low).powi(2) / 12.0,
            ParamPrior::LogScaled { nominal, base } => {
                let l = base.ln();
                let second = nominal * nominal * (base * base - 1.0 / (base * base)) / (4.0 * l);
                second - self.mean().powi(2)
            }
        }
    }

    fn check(&self, name: &str) -> Result<(), ModelError> {
        let bad = |reason: &str| Err(ModelError::InvalidPrior { name: name.to_string(), reason: reason.to_string() });
        match *self {
            ParamPrior::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite()) || high < low {
                    return bad("uniform bounds must be finite with low <= high");
                }
            }
            ParamPrior::LogScaled { nominal, base } => {
                if !(nominal > 0.0 && nominal.is_finite()) || !(base > 1.0 && base.is_finite()) {
                    return bad("log-scaled prior needs nominal > 0 and base > 1");
                }
            }
        }
        Ok(())
    }
}

/// Independent product prior over the free parameters, plus fixed assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prior {
    pub params: Vec<(String, ParamPrior)>,
    #[serde(default)]
    pub fixed: Vec<(String, f64)>,
}

impl Prior {
    pub fn new(params: Vec<(String, ParamPrior)>) -> Result<Self, ModelError> {
        for (name, p) in &params {
            p.check(name)?;
        }
        Ok(Self { params, fixed: vec![] })
    }

    pub fn with_fixed(mut self, fixed: Vec<(String, f64)>) -> Self {
        self.fixed = fixed;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.params.iter().try_for_each(|(n, p)| p.check(n))
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    /// Draw `theta ~ prior`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        ParamVector { names: self.names(), values: self.params.iter().map(|(_, p)| p.sample(rng)).collect() }
    }

    pub fn density(&self, theta: &ParamVector) -> f64 {
        self.params.iter().zip(&theta.values).map(|((_, p), &x)| p.density(x)).product()
    }
}

/// Free function form of [`Prior::sample`].
pub fn sample_prior<R: Rng + ?Sized>(prior: &Prior, rng: &mut R) -> ParamVector {
    prior.sample(rng)
}

fn unit(n: usize, i: usize, v: i64) -> Vec<i64> {
    let mut c = vec![0; n];
    c[i] = v;
    c
}

/// Three-gene repressilator: species `m1..m3, p1..p3`, 12 reactions.
///
/// Transcription of `m_i` is repressed by `p_j` for `(i, j)` in
/// `(1,3), (2,1), (3,2)`; mRNA decays at rate 1, translation and protein
/// decay run at rate `beta`.
pub fn repressilator_model() -> ReactionNetwork {
    let species: Vec<String> = ["m1", "m2", "m3", "p1", "p2", "p3"].iter().map(|s| s.to_string()).collect();
    let parameters: Vec<String> = ["alpha0", "alpha", "beta", "n", "K_h"].iter().map(|s| s.to_string()).collect();
    let (alpha0, alpha, beta, hill, half) =
        (Rate::Param(0), Rate::Param(1), Rate::Param(2), Rate::Param(3), Rate::Param(4));
    let n = species.len();
    let repressor_of = [5usize, 3, 4];
    let mut reactions = Vec::with_capacity(12);
    for i in 0..3 {
        reactions.push(Reaction {
            name: format!("transcription_{}", i + 1),
            change: unit(n, i, 1),
            law: RateLaw::HillRepression { basal: alpha0, max: alpha, repressor: repressor_of[i], hill, half },
            fast: false,
        });
        reactions.push(Reaction {
            name: format!("mrna_decay_{}", i + 1),
            change: unit(n, i, -1),
            law: RateLaw::MassAction { rate: Rate::Const(1.0), reactants: vec![(i, 1)] },
            fast: false,
        });
        reactions.push(Reaction {
            name: format!("translation_{}", i + 1),
            change: unit(n, 3 + i, 1),
            law: RateLaw::MassAction { rate: beta, reactants: vec![(i, 1)] },
            fast: false,
        });
        reactions.push(Reaction {
            name: format!("protein_decay_{}", i + 1),
            change: unit(n, 3 + i, -1),
            law: RateLaw::MassAction { rate: beta, reactants: vec![(3 + i, 1)] },
            fast: false,
        });
    }
    ReactionNetwork {
        name: "repressilator".into(),
        species,
        parameters,
        defaults: vec![1.0, 1000.0, 5.0, 2.0, 20.0],
        reactions,
        initial_state: vec![0, 0, 0, 40, 20, 60],
        horizon: 10.0,
        count_limit: DEFAULT_COUNT_LIMIT,
    }
}

/// Uniform prior on `(n, K_h)`; the other repressilator rates stay nominal.
pub fn repressilator_prior() -> Prior {
    Prior::new(vec![
        ("n".into(), ParamPrior::Uniform { low: 1.0, high: 4.0 }),
        ("K_h".into(), ParamPrior::Uniform { low: 10.0, high: 30.0 }),
    ])
    .expect("static prior")
}

pub const VIRAL_NOMINAL: [f64; 6] = [1.0, 0.025, 100.0, 0.25, 1.9985, 7.5e-5];

/// Intracellular viral kinetics: species `template, genome, struct, virus`.
///
/// Reactions 3 (struct production) and 5 (struct decay) are flagged fast.
pub fn viral_model() -> ReactionNetwork {
    let species: Vec<String> = ["template", "genome", "struct", "virus"].iter().map(|s| s.to_string()).collect();
    let parameters: Vec<String> = (1..=6).map(|i| format!("k{i}")).collect();
    let k = |i: usize| Rate::Param(i - 1);
    let mk = |name: &str, change: [i64; 4], rate: Rate, reactants: Vec<(usize, u32)>, fast: bool| Reaction {
        name: name.into(),
        change: change.to_vec(),
        law: RateLaw::MassAction { rate, reactants },
        fast,
    };
    let reactions = vec![
        mk("genome_synthesis", [0, 1, 0, 0], k(1), vec![(0, 1)], false),
        mk("template_formation", [1, -1, 0, 0], k(2), vec![(1, 1)], false),
        mk("struct_synthesis", [0, 0, 1, 0], k(3), vec![(0, 1)], true),
        mk("template_decay", [-1, 0, 0, 0], k(4), vec![(0, 1)], false),
        mk("struct_decay", [0, 0, -1, 0], k(5), vec![(2, 1)], true),
        mk("virus_assembly", [0, -1, -1, 1], k(6), vec![(1, 1), (2, 1)], false),
    ];
    ReactionNetwork {
        name: "viral".into(),
        species,
        parameters,
        defaults: VIRAL_NOMINAL.to_vec(),
        reactions,
        initial_state: vec![1, 0, 0, 0],
        horizon: 200.0,
        count_limit: DEFAULT_COUNT_LIMIT,
    }
}

/// Each `k_i = nominal_i * 1.5^{u_i}`, `u_i ~ Unif(-1, 1)`.
pub fn viral_prior() -> Prior {
    Prior::new(
        VIRAL_NOMINAL
            .iter()
            .enumerate()
            .map(|(i, &nominal)| (format!("k{}", i + 1), ParamPrior::LogScaled { nominal, base: 1.5 }))
            .collect(),
    )
    .expect("static prior")
}

/// `0 -> X` at rate `birth`, `X -> 0` at rate `death * x`.
pub fn birth_death_model(birth: f64, death: f64, x0: i64, horizon: f64) -> ReactionNetwork {
    ReactionNetwork {
        name: "birth_death".into(),
        species: vec!["X".into()],
        parameters: vec!["birth".into(), "death".into()],
        defaults: vec![birth, death],
        reactions: vec![
            Reaction {
                name: "birth".into(),
                change: vec![1],
                law: RateLaw::MassAction { rate: Rate::Param(0), reactants: vec![] },
                fast: false,
            },
            Reaction {
                name: "death".into(),
                change: vec![-1],
                law: RateLaw::MassAction { rate: Rate::Param(1), reactants: vec![(0, 1)] },
                fast: false,
            },
        ],
        initial_state: vec![x0],
        horizon,
        count_limit: DEFAULT_COUNT_LIMIT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn nominal() -> ParamVector {
        ParamVector::empty()
    }

    #[test]
    fn hill_half_saturation() {
        for n in [1.0, 2.0, 3.7] {
            assert!((hill_repression(20.0, n, 20.0) - 0.5).abs() < 1e-12);
        }
        let net = repressilator_model();
        let kin = net.bind(&nominal()).unwrap();
        // p3 = K_h = 20 represses m1.
        let x = [0, 0, 0, 40, 20, 20];
        assert!((kin.propensity(0, &x) - (1.0 + 1000.0 / 2.0)).abs() < 1e-9);
    }

    #[test]
    fn hill_monotone_and_unity_at_zero() {
        assert_eq!(hill_repression(0.0, 2.5, 17.0), 1.0);
        let mut prev = 1.0;
        for p in 1..200 {
            let v = hill_repression(p as f64, 2.5, 17.0);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn repressilator_shape_and_initial_propensities() {
        let net = repressilator_model();
        net.validate().unwrap();
        assert_eq!(net.species_count(), 6);
        assert_eq!(net.reaction_count(), 12);
        assert_eq!(net.initial_state, vec![0, 0, 0, 40, 20, 60]);
        assert_eq!(net.horizon, 10.0);
        let kin = net.bind(&nominal()).unwrap();
        assert_eq!(kin.params, vec![1.0, 1000.0, 5.0, 2.0, 20.0]);
        let mut v = vec![0.0; 12];
        kin.propensities(&net.initial_state, &mut v);
        for i in 0..3 {
            assert_eq!(v[4 * i + 2], 0.0, "translation {i}");
            assert_eq!(v[4 * i + 1], 0.0, "mrna decay {i}");
        }
        // m1 repressed by p3 = 60, m2 by p1 = 40, m3 by p2 = 20.
        assert!((v[0] - (1.0 + 1000.0 * 400.0 / (400.0 + 3600.0))).abs() < 1e-9);
        assert!((v[4] - (1.0 + 1000.0 * 400.0 / (400.0 + 1600.0))).abs() < 1e-9);
        assert!((v[8] - 501.0).abs() < 1e-9);
        assert!((v[3] - 5.0 * 40.0).abs() < 1e-12);
    }

    #[test]
    fn viral_shape() {
        let net = viral_model();
        net.validate().unwrap();
        assert_eq!(net.defaults, vec![1.0, 0.025, 100.0, 0.25, 1.9985, 7.5e-5]);
        assert_eq!(net.fast_reactions(), vec![2, 4]);
        assert_eq!(net.initial_state, vec![1, 0, 0, 0]);
        assert_eq!(net.horizon, 200.0);
        let kin = net.bind(&nominal()).unwrap();
        assert_eq!(kin.propensity(5, &[1, 0, 0, 0]), 0.0);
        assert!((kin.propensity(5, &[0, 7, 11, 0]) - 7.5e-5 * 77.0).abs() < 1e-15);
    }

    #[test]
    fn bind_rejects_unknown_and_negative() {
        let net = repressilator_model();
        let bad = ParamVector::new(vec!["nope".into()], vec![1.0]);
        assert!(matches!(net.bind(&bad), Err(ModelError::UnknownParameter(_))));
        let neg = ParamVector::new(vec!["n".into()], vec![-1.0]);
        assert!(matches!(net.bind(&neg), Err(ModelError::InvalidParameter { .. })));
    }

    #[test]
    fn degenerate_prior_is_point_mass() {
        let prior = Prior::new(vec![("a".into(), ParamPrior::Uniform { low: 3.0, high: 3.0 })]).unwrap();
        let mut rng = stream_rng(1, "t", 0);
        for _ in 0..100 {
            assert_eq!(prior.sample(&mut rng).values[0], 3.0);
        }
    }

    #[test]
    fn prior_moments_match_analytic() {
        for prior in [repressilator_prior(), viral_prior()] {
            let mut rng = stream_rng(11, "moments", 0);
            let n = 100_000;
            let draws: Vec<ParamVector> = (0..n).map(|_| prior.sample(&mut rng)).collect();
            for (i, (name, p)) in prior.params.iter().enumerate() {
                let xs: Vec<f64> = draws.iter().map(|d| d.values[i]).collect();
                let mean = xs.iter().sum::<f64>() / n as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let se_mean = (p.variance() / n as f64).sqrt();
                assert!((mean - p.mean()).abs() < 3.0 * se_mean, "{name} mean {mean} vs {}", p.mean());
                // Var of the sample variance ~ (m4 - s^4)/n; bound m4 <= 9/5 s^4 for these shapes.
                let se_var = (0.8 * p.variance().powi(2) / n as f64).sqrt();
                assert!((var - p.variance()).abs() < 3.0 * se_var, "{name} var {var} vs {}", p.variance());
            }
        }
    }

    #[test]
    fn propensities_nonnegative_on_random_states() {
        let mut rng = stream_rng(5, "states", 0);
        for (net, prior) in [(repressilator_model(), repressilator_prior()), (viral_model(), viral_prior())] {
            let m = net.reaction_count();
            let mut v = vec![0.0; m];
            for _ in 0..10_000 {
                let theta = prior.sample(&mut rng);
                let kin = net.bind(&theta).unwrap();
                let x: Vec<i64> = (0..net.species_count()).map(|_| rng.random_range(0..5000)).collect();
                kin.propensities(&x, &mut v);
                assert!(v.iter().all(|&a| a >= 0.0 && a.is_finite()));
                // exact firing of any enabled reaction keeps counts nonnegative
                for (j, &a) in v.iter().enumerate() {
                    if a > 0.0 {
                        assert!(x.iter().zip(&kin.changes[j]).all(|(xi, c)| xi + c >= 0));
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn prior_samples_inside_support_with_positive_density(seed in any::<u64>()) {
            let mut rng = stream_rng(seed, "support", 0);
            for prior in [repressilator_prior(), viral_prior()] {
                let theta = prior.sample(&mut rng);
                for ((_, p), &x) in prior.params.iter().zip(&theta.values) {
                    let (lo, hi) = p.support();
                    prop_assert!(x >= lo && x <= hi);
                }
                prop_assert!(prior.density(&theta) > 0.0);
            }
        }
    }

    #[test]
    fn density_zero_outside_support() {
        let p = ParamPrior::LogScaled { nominal: 2.0, base: 1.5 };
        assert_eq!(p.density(1.0), 0.0);
        assert!(p.density(2.0) > 0.0);
        assert_eq!(p.density(3.5), 0.0);
    }
}
