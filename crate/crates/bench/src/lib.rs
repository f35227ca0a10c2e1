//! Shared fixtures for the benchmarks.

use mfabc_core::models::integer_grid;
use mfabc_core::network::{repressilator_model, ParamVector, ReactionNetwork};
use mfabc_core::sim::SimOptions;
use mfabc_core::tuning::PerfEstimates;

/// Repressilator at its nominal parameters, observed on the integer grid.
pub fn repressilator() -> (ReactionNetwork, ParamVector, SimOptions) {
    let net = repressilator_model();
    let opts = SimOptions::grid(integer_grid(net.horizon));
    (net, ParamVector::empty(), opts)
}

/// Rates resembling the repressilator benchmark.
pub fn repressilator_like_estimates() -> PerfEstimates {
    PerfEstimates::new(0.05, 0.02, 0.004, 0.8, 11.0, 0.8)
}
