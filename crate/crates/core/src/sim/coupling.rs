use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{complete_poisson, map_to_exact, PoissonSkeleton, SimOptions, Trajectory, UnitPoissonProcess};
use crate::error::SimError;
use crate::network::{ParamVector, ReactionNetwork};

/// Randomness recorded by a low-fidelity run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRecord {
    /// Interval counts from tau-leaping; completed before use.
    Skeleton(PoissonSkeleton),
    /// Exact unit event times (hybrid slow reactions).
    Exact(UnitPoissonProcess),
}

/// A low-fidelity run together with the noise needed to couple a
/// high-fidelity run to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledPair {
    pub low_fi: Trajectory,
    pub noise: NoiseRecord,
    pub high_fi: Option<Trajectory>,
    /// Set once `high_fi` has been produced from `noise`.
    pub high_from_noise: bool,
    pub stream: String,
}

impl CoupledPair {
    pub fn new(low_fi: Trajectory, noise: NoiseRecord, stream: impl Into<String>) -> Self {
        Self { low_fi, noise, high_fi: None, high_from_noise: false, stream: stream.into() }
    }

    /// Run the coupled exact simulation and attach it.
    pub fn simulate_high<R: Rng + ?Sized>(
        &mut self,
        net: &ReactionNetwork,
        theta: &ParamVector,
        opts: &SimOptions,
        rng: &mut R,
    ) -> Result<&Trajectory, SimError> {
        let tr = coupled_high_fi(&self.noise, net, theta, opts, rng)?;
        self.high_from_noise = true;
        Ok(self.high_fi.insert(tr))
    }
}

/// Exact simulation driven by the unit-rate processes behind a low-fidelity
/// run: complete the skeleton (if any), then apply the time change. The
/// reported cost covers both steps.
pub fn coupled_high_fi<R: Rng + ?Sized>(
    noise: &NoiseRecord,
    net: &ReactionNetwork,
    theta: &ParamVector,
    opts: &SimOptions,
    rng: &mut R,
) -> Result<Trajectory, SimError> {
    let start = Instant::now();
    let mut process = match noise {
        NoiseRecord::Skeleton(sk) => complete_poisson(sk, rng),
        NoiseRecord::Exact(p) => p.clone(),
    };
    let completed: u64 = process.events.iter().map(|e| e.len() as u64).sum();
    let mut tr = map_to_exact(&mut process, net, theta, opts, rng)?;
    tr.wall_cost = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    tr.work += completed;
    Ok(tr)
}
