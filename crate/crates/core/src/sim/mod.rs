//! Seeded Monte-Carlo experiment drivers.
//!
//! Work is split into trials or fixed-size symbol batches, each drawing from
//! its own random stream (see [`crate::rng`]). Partial results are reduced in
//! index order with exact integer counts or [`pairwise_sum`], so reports do
//! not depend on the number of worker threads.
//!
//! [`pairwise_sum`]: crate::stats::pairwise_sum

pub mod config;
mod detect2;
mod estimate;
mod gaussfit;
mod multiuser;
pub mod report;
mod timing;

use std::time::Instant;

use rayon::prelude::*;

pub use config::{
    Detect2Config, EstimateConfig, EstimateDetection, Experiment, ExperimentConfig, GaussFitConfig, MultiuserConfig,
    PilotSearchConfig, ProblemSpec, ScenarioSpec, TimingConfig, DEFAULT_BATCH, SCHEMA_VERSION,
};
pub use detect2::run_two_user_experiment;
pub use estimate::{run_estimation_experiment, run_pilot_search};
pub use gaussfit::run_gaussian_fit;
pub use multiuser::run_multiuser_experiment;
pub use report::{Cell, ExperimentReport, Metric, Table, TimingRow, TimingSection};
pub use timing::run_timing_experiment;

use crate::error::Result;
use crate::rng::{stream, StreamRng};

/// Run whichever experiment `cfg` describes.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = match &cfg.experiment {
        Experiment::Gaussfit(_) => run_gaussian_fit(cfg),
        Experiment::Estimate(_) => run_estimation_experiment(cfg),
        Experiment::PilotSearch(_) => run_pilot_search(cfg),
        Experiment::Detect2(_) => run_two_user_experiment(cfg),
        Experiment::Multiuser(_) => run_multiuser_experiment(cfg),
        Experiment::Timing(_) => run_timing_experiment(cfg),
    }?;
    report.timing.threads = rayon::current_num_threads();
    report.timing.total_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Split `total` items into [`DEFAULT_BATCH`]-sized batches and map each,
/// in parallel, with its own stream of `seed`. Results come back in batch order.
pub(crate) fn batched<T, F>(total: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, u64) -> T + Sync + Send,
{
    let batches = total.div_ceil(DEFAULT_BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, b);
            let n = DEFAULT_BATCH.min(total - b * DEFAULT_BATCH);
            f(&mut rng, n)
        })
        .collect()
}
