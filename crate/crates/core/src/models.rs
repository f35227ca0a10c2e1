//! The two benchmark fidelity pairs: the repressilator (tau-leap against
//! coupled SSA) and the viral population (hybrid against coupled exact).

use serde::{Deserialize, Serialize};

use crate::abc::{distance, DistanceSpec, SummaryVector};
use crate::error::{Error, SimError};
use crate::network::{
    repressilator_model, repressilator_prior, viral_model, viral_prior, ParamVector, Prior, ReactionNetwork,
};
use crate::rng::{stream_rng, SimRng, OBSERVED};
use crate::sampler::{FidelityPair, HighFi, LowFi};
use crate::sim::{
    coupled_high_fi, hybrid_viral_simulate, ssa_simulate, tau_leap_simulate, NoiseRecord, PoissonSkeleton, SimOptions,
    Trajectory, UnitPoissonProcess, Watch,
};

/// How a simulation is charged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum CostModel {
    /// Measured seconds.
    #[default]
    WallClock,
    /// Work units (events, leaps x channels, completed points) times a
    /// fixed price. Deterministic, so outputs are byte-reproducible.
    Work { seconds_per_unit: f64 },
}

impl CostModel {
    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            CostModel::Work { seconds_per_unit } if !(seconds_per_unit > 0.0 && seconds_per_unit.is_finite()) => {
                Err(Error::Invalid(format!("seconds_per_unit must be positive, got {seconds_per_unit}")))
            }
            _ => Ok(()),
        }
    }

    pub fn charge(&self, tr: &Trajectory) -> f64 {
        match *self {
            CostModel::WallClock => tr.wall_cost.max(1e-9),
            CostModel::Work { seconds_per_unit } => tr.work.max(1) as f64 * seconds_per_unit,
        }
    }
}

fn bind_theta(prior: &Prior, theta: &[f64]) -> ParamVector {
    let mut names = prior.names();
    let mut values = theta.to_vec();
    for (n, v) in &prior.fixed {
        names.push(n.clone());
        values.push(*v);
    }
    ParamVector::new(names, values)
}

fn checked_distance(sim: &SummaryVector, obs: &SummaryVector, spec: &DistanceSpec) -> f64 {
    distance(sim, obs, spec).expect("summary dimension fixed at construction")
}

/// Observation times `0, 1, ..., floor(T)`.
pub fn integer_grid(horizon: f64) -> Vec<f64> {
    (0..=horizon.floor() as u64).map(|t| t as f64).collect()
}

/// Repressilator: summaries are all species counts on the observation
/// grid; distance is Euclidean over the horizon.
#[derive(Debug, Clone)]
pub struct RepressilatorPair {
    pub net: ReactionNetwork,
    pub prior: Prior,
    pub tau: f64,
    pub grid: Vec<f64>,
    pub observed: SummaryVector,
    pub metric: DistanceSpec,
    pub cost: CostModel,
}

pub const REPRESSILATOR_TAU: f64 = 0.01;
pub const REPRESSILATOR_EPSILON: f64 = 50.0;

impl RepressilatorPair {
    /// Observed data from one SSA run at the network's nominal values.
    pub fn new(net: ReactionNetwork, prior: Prior, tau: f64, cost: CostModel, seed: u64) -> Result<Self, Error> {
        net.validate()?;
        prior.validate()?;
        cost.validate()?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Invalid(format!("tau must be positive, got {tau}")));
        }
        let grid = integer_grid(net.horizon);
        let opts = SimOptions::grid(grid.clone());
        let obs = ssa_simulate(&net, &ParamVector::empty(), &opts, &mut stream_rng(seed, OBSERVED, 0))?;
        let metric = DistanceSpec::new(net.horizon, REPRESSILATOR_EPSILON)?;
        Ok(Self { observed: SummaryVector(obs.flatten()), net, prior, tau, grid, metric, cost })
    }

    pub fn standard(cost: CostModel, seed: u64) -> Result<Self, Error> {
        Self::new(repressilator_model(), repressilator_prior(), REPRESSILATOR_TAU, cost, seed)
    }

    fn opts(&self) -> SimOptions {
        SimOptions::grid(self.grid.clone())
    }

    fn score(&self, tr: &Trajectory) -> f64 {
        checked_distance(&SummaryVector(tr.flatten()), &self.observed, &self.metric)
    }
}

impl FidelityPair for RepressilatorPair {
    type Coupling = PoissonSkeleton;

    fn param_names(&self) -> Vec<String> {
        self.prior.names()
    }

    fn sample_prior(&self, rng: &mut SimRng) -> Vec<f64> {
        self.prior.sample(rng).values
    }

    fn low(&self, theta: &[f64], rng: &mut SimRng) -> Result<LowFi<PoissonSkeleton>, SimError> {
        let (tr, sk) = tau_leap_simulate(&self.net, &bind_theta(&self.prior, theta), self.tau, &self.opts(), rng)?;
        Ok(LowFi { distance: self.score(&tr), cost: self.cost.charge(&tr), coupling: sk })
    }

    fn high(&self, theta: &[f64], coupling: PoissonSkeleton, rng: &mut SimRng) -> Result<HighFi, SimError> {
        let noise = NoiseRecord::Skeleton(coupling);
        let tr = coupled_high_fi(&noise, &self.net, &bind_theta(&self.prior, theta), &self.opts(), rng)?;
        Ok(HighFi { distance: self.score(&tr), cost: self.cost.charge(&tr) })
    }

    fn high_uncoupled(&self, theta: &[f64], rng: &mut SimRng) -> Result<HighFi, SimError> {
        let tr = ssa_simulate(&self.net, &bind_theta(&self.prior, theta), &self.opts(), rng)?;
        Ok(HighFi { distance: self.score(&tr), cost: self.cost.charge(&tr) })
    }
}

/// Per-cell outcome feeding the viral population summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOutcome {
    pub virus: i64,
    pub first_exceed: Option<f64>,
}

/// Population summary: infected fraction, `log2` of the mean final virus
/// count of infected cells, and the mean fraction of the horizon at which
/// infected cells first exceed the threshold. Fractions are multiplied by
/// `scale` (1 for fractions, 100 for percentages). Zero vector when no cell
/// is infected.
pub fn viral_summary(cells: &[CellOutcome], threshold: i64, horizon: f64, scale: f64) -> SummaryVector {
    let infected: Vec<&CellOutcome> = cells.iter().filter(|c| c.virus > threshold).collect();
    if infected.is_empty() {
        return SummaryVector(vec![0.0; 3]);
    }
    let n = infected.len() as f64;
    let output = infected.iter().map(|c| c.virus as f64).sum::<f64>() / n;
    let onset = infected.iter().map(|c| c.first_exceed.unwrap_or(horizon) / horizon).sum::<f64>() / n;
    SummaryVector(vec![scale * n / cells.len() as f64, output.log2(), scale * onset])
}

pub const VIRAL_CELLS: usize = 10;
pub const VIRAL_THRESHOLD: i64 = 3;
pub const VIRAL_EPSILON: f64 = 0.25;
const VIRUS: usize = 3;

/// Viral population of independent cells sharing one parameter vector.
#[derive(Debug, Clone)]
pub struct ViralPair {
    pub net: ReactionNetwork,
    pub prior: Prior,
    pub cells: usize,
    pub threshold: i64,
    pub scale: f64,
    pub observed: SummaryVector,
    pub metric: DistanceSpec,
    pub cost: CostModel,
}

impl ViralPair {
    /// Observed data from `cells` SSA runs at the network's nominal values.
    pub fn new(
        net: ReactionNetwork,
        prior: Prior,
        cells: usize,
        scale: f64,
        cost: CostModel,
        seed: u64,
    ) -> Result<Self, Error> {
        net.validate()?;
        prior.validate()?;
        cost.validate()?;
        if cells == 0 {
            return Err(Error::Invalid("cells must be positive".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Invalid(format!("summary scale must be positive, got {scale}")));
        }
        if net.species_count() <= VIRUS {
            return Err(Error::Invalid("viral network needs a fourth (virus) species".into()));
        }
        let mut pair = Self {
            net,
            prior,
            cells,
            threshold: VIRAL_THRESHOLD,
            scale,
            observed: SummaryVector(vec![]),
            metric: DistanceSpec::new(1.0, VIRAL_EPSILON)?,
            cost,
        };
        let opts = pair.opts();
        let mut outcomes = Vec::with_capacity(cells);
        for c in 0..cells {
            let tr = ssa_simulate(&pair.net, &ParamVector::empty(), &opts, &mut stream_rng(seed, OBSERVED, c as u64))?;
            outcomes.push(pair.outcome(&tr));
        }
        pair.observed = viral_summary(&outcomes, pair.threshold, pair.net.horizon, scale);
        Ok(pair)
    }

    pub fn standard(cost: CostModel, seed: u64) -> Result<Self, Error> {
        Self::new(viral_model(), viral_prior(), VIRAL_CELLS, 1.0, cost, seed)
    }

    fn opts(&self) -> SimOptions {
        SimOptions::grid(vec![self.net.horizon]).with_watch(Watch { species: VIRUS, threshold: self.threshold })
    }

    fn outcome(&self, tr: &Trajectory) -> CellOutcome {
        CellOutcome { virus: tr.final_state()[VIRUS], first_exceed: tr.first_exceed }
    }

    fn score(&self, outcomes: &[CellOutcome]) -> f64 {
        let s = viral_summary(outcomes, self.threshold, self.net.horizon, self.scale);
        checked_distance(&s, &self.observed, &self.metric)
    }
}

impl FidelityPair for ViralPair {
    /// Slow-reaction unit processes, one per cell.
    type Coupling = Vec<UnitPoissonProcess>;

    fn param_names(&self) -> Vec<String> {
        self.prior.names()
    }

    fn sample_prior(&self, rng: &mut SimRng) -> Vec<f64> {
        self.prior.sample(rng).values
    }

    fn low(&self, theta: &[f64], rng: &mut SimRng) -> Result<LowFi<Self::Coupling>, SimError> {
        let p = bind_theta(&self.prior, theta);
        let opts = self.opts();
        let mut outcomes = Vec::with_capacity(self.cells);
        let mut noise = Vec::with_capacity(self.cells);
        let mut cost = 0.0;
        for _ in 0..self.cells {
            let (tr, process) = hybrid_viral_simulate(&self.net, &p, &opts, rng)?;
            cost += self.cost.charge(&tr);
            outcomes.push(self.outcome(&tr));
            noise.push(process);
        }
        Ok(LowFi { distance: self.score(&outcomes), cost, coupling: noise })
    }

    fn high(&self, theta: &[f64], coupling: Self::Coupling, rng: &mut SimRng) -> Result<HighFi, SimError> {
        let p = bind_theta(&self.prior, theta);
        let opts = self.opts();
        let mut outcomes = Vec::with_capacity(self.cells);
        let mut cost = 0.0;
        for process in coupling {
            let tr = coupled_high_fi(&NoiseRecord::Exact(process), &self.net, &p, &opts, rng)?;
            cost += self.cost.charge(&tr);
            outcomes.push(self.outcome(&tr));
        }
        Ok(HighFi { distance: self.score(&outcomes), cost })
    }

    fn high_uncoupled(&self, theta: &[f64], rng: &mut SimRng) -> Result<HighFi, SimError> {
        let p = bind_theta(&self.prior, theta);
        let opts = self.opts();
        let mut outcomes = Vec::with_capacity(self.cells);
        let mut cost = 0.0;
        for _ in 0..self.cells {
            let tr = ssa_simulate(&self.net, &p, &opts, rng)?;
            cost += self.cost.charge(&tr);
            outcomes.push(self.outcome(&tr));
        }
        Ok(HighFi { distance: self.score(&outcomes), cost })
    }
}
