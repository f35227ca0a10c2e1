//! Multifidelity approximate Bayesian computation.
//!
//! The crate couples cheap low-fidelity simulations (tau-leaping, hybrid
//! quasi-steady-state schemes) with exact high-fidelity simulations that
//! share the same unit-rate Poisson noise, builds weighted Monte Carlo
//! samples with early accept/reject weights, and tunes the continuation
//! probabilities that trade effective sample size against simulation cost.
//!
//! Module map:
//!
//! * [`network`]: reaction networks, priors and the two benchmark models.
//! * [`sim`]: SSA, tau-leap, Poisson-process completion, time-change
//!   mapping, the viral hybrid scheme and the coupled high-fidelity run.
//! * [`abc`]: summaries, distances, the four weight schemes and weighted samples.
//! * [`tuning`]: the efficiency objective, optimal continuation probabilities
//!   and burn-in estimators.
//! * [`sampler`]: rejection, multifidelity and adaptive campaigns.
//! * [`models`]: the repressilator and viral fidelity pairs.
//! * [`toy`]: a synthetic pair with a known joint acceptance law.
//! * [`experiments`]: benchmark tables and the replay studies.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod abc;
pub mod error;
pub mod experiments;
pub mod models;
pub mod network;
pub mod rng;
pub mod sampler;
pub mod sim;
pub mod stats;
pub mod toy;
pub mod tuning;

pub use abc::{Case, DistanceSpec, SummaryVector, WeightRecord, WeightedSample};
pub use error::{AbcError, Error, ModelError, SimError};
pub use experiments::{BenchmarkRow, BenchmarkTable};
pub use models::{CostModel, RepressilatorPair, ViralPair};
pub use network::{ParamVector, Prior, ReactionNetwork};
pub use rng::{SimRng, StreamId};
pub use sampler::{AdaptiveSpec, CampaignResult, CampaignSpec, EtaSource, FidelityPair, StopRule};
pub use tuning::{Bounds, ContinuationProbs, PerfEstimates};

pub type Result<T, E = Error> = std::result::Result<T, E>;
