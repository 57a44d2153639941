//! Experiment driver: episodes, bounds, aggregation, file output and the
//! randomized self-checks behind `verify`.

pub mod aggregate;
pub mod bounds;
pub mod config;
pub mod episode;
pub mod output;
pub mod par;
pub mod sweep;
pub mod verify;

use crate::error::Result;

pub use aggregate::{aggregate, Summary};
pub use bounds::{bound_value, BoundKind, BoundParams, SkipTerm};
pub use config::{Algo, RunConfig, Seeds};
pub use episode::{
    generate_instance, run_episode, run_on_instance, Episode, Instance, RegretReport, Trace,
};

/// Runs every seed of `config` and hands each finished episode to `f`.
/// Seeds are independent, so they fan out over the worker pool when the
/// `parallel` feature is on.
pub fn for_each_seed<R, F>(config: &RunConfig, record_trace: bool, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(Episode) -> R + Sync + Send,
{
    config.validate()?;
    let seeds = config.seeds.to_vec();
    par::map_ordered(&seeds, |&seed| {
        run_episode(config, seed, record_trace).map(&f)
    })
    .into_iter()
    .collect()
}

/// Reports for every seed of `config`, in seed order.
pub fn run_seeds(config: &RunConfig) -> Result<Vec<RegretReport>> {
    for_each_seed(config, false, |ep| ep.report)
}

/// [`run_seeds`] on the calling thread only.
pub fn run_seeds_sequential(config: &RunConfig) -> Result<Vec<RegretReport>> {
    config.validate()?;
    par::map_sequential(&config.seeds.to_vec(), |&seed| {
        run_episode(config, seed, false).map(|ep| ep.report)
    })
    .into_iter()
    .collect()
}
