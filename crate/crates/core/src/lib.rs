//! Exponential-weights bandit learners that adapt their step size to delayed
//! feedback, a seeded delayed-feedback environment, and an experiment harness.
//!
//! Rounds are numbered from 1, arms from 0.
//!
//! ```
//! use delay_bandits::harness::{run_episode, Algo, RunConfig};
//!
//! let config = RunConfig::new(
//!     Algo::Dada,
//!     "bernoulli_gap(0.3,0.5)".parse().unwrap(),
//!     "constant(5)".parse().unwrap(),
//!     4,
//!     500,
//! );
//! let episode = run_episode(&config, 7, false).unwrap();
//! assert!(episode.report.regret <= episode.report.bounds.cor1.unwrap());
//! ```

pub mod dada;
pub mod deda;
pub mod env;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod skipper;
pub mod weights;

pub use dada::{DadaPolicy, Decision, EstimatorMode, StepSchedule};
pub use deda::{DedaPolicy, DelayKnowledge};
pub use env::{AdversarySpec, DelaySchedule, DelaySpec, FeedbackEvent, FeedbackQueue, LossMatrix};
pub use error::{Error, Result};
pub use estimators::Estimate;
pub use skipper::{SkipDada, SkipState};
