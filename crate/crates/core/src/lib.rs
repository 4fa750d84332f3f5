//! Symmetric opinion dynamics with a growing population.
//!
//! Agents relax toward each other under an all-to-all averaging flow while
//! new agents arrive at scheduled times with i.i.d. opinions. The crate
//! simulates this hybrid system, measures its moments, checks the exact jump
//! formulas at arrivals, estimates expectations over ensembles, and evaluates
//! the condition sums that decide whether the population reaches consensus
//! on the mean of the incoming opinions.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod kernel;
pub mod montecarlo;
pub mod numeric;
pub mod observables;
pub mod schedule;

pub use analysis::{
    classify_schedule, condition_sum, condition_sum_from_times, dawson_f, envelope_bound,
    fit_decay_exponent, Classification, DecayFit, EnvelopeDirection, EnvelopeSpec, JumpBound,
    ScheduleVerdict,
};
pub use dynamics::{
    inject_agent, integrate_interval, rhs, run_simulation, Integrator, RecordGrid, SimConfig,
    SimState, StopRule,
};
pub use error::{Error, Result};
pub use kernel::{Kernel, KernelForm};
pub use montecarlo::{
    derive_run_seed, ensemble_statistic, run_ensemble, run_ensemble_with_workers, sample_incoming,
    EnsembleStats, Estimate, OpinionSource, Statistic,
};
pub use observables::{
    compute_moments, expected_m1_deviation, m1_closed_form, predict_jumps, JumpPrediction,
    MomentRecord, MomentSeries, RecordEvent,
};
pub use schedule::GrowthSchedule;
