//! Stochastic simulation at both fidelities and the Poisson-process coupling.

mod coupling;
mod hybrid;
mod poisson;
mod ssa;
mod tau_leap;
mod trajectory;

pub use coupling::{coupled_high_fi, CoupledPair, NoiseRecord};
pub use hybrid::{hybrid_deterministic_wait, hybrid_viral_simulate};
pub use poisson::{complete_poisson, map_to_exact, PoissonSkeleton, SkeletonInterval, UnitPoissonProcess};
pub use ssa::ssa_simulate;
pub use tau_leap::tau_leap_simulate;
pub use trajectory::{RecordMode, SimOptions, Trajectory, Watch};

pub(crate) use trajectory::Recorder;

use crate::error::SimError;

pub(crate) fn check_counts(x: &[i64], limit: i64, time: f64) -> Result<(), SimError> {
    match x.iter().position(|&v| v > limit) {
        Some(species) => Err(SimError::Overflow { species, limit, time }),
        None => Ok(()),
    }
}

pub(crate) fn apply(x: &mut [i64], change: &[i64]) {
    for (xi, c) in x.iter_mut().zip(change) {
        *xi += c;
    }
}
