//! Population-guided parallel policy search at desk scale.
//!
//! N identical TD3 learners share one experience replay buffer. A chief
//! periodically picks the learner with the best recent returns, freezes a
//! snapshot of its policy, and softly pulls every other learner toward it
//! through an augmented actor loss whose weight adapts so the population
//! stays spread around the best policy. Baseline parallel schemes (shared
//! parameters, experience sharing only, periodic resetting, a distilled
//! center policy) run on the same learner and buffer code so differences
//! are isolated to orchestration, and a tabular module certifies the
//! scheme's monotone-improvement guarantee exactly on small random MDPs.
//!
//! Entry points:
//!
//! - [`harness::run`] executes a configured training run and writes CSV
//!   artifacts, checkpoints and a summary.
//! - [`tabular::certify_corpus`] certifies the improvement guarantee over
//!   a corpus of random MDPs.
//! - the `p3s` binary wraps both behind `train`, `verify-theory` and
//!   `summarize` subcommands; the `examples/` directory shows one runnable
//!   program per capability.

pub mod chief;
pub mod env;
pub mod error;
pub mod nn;
pub mod replay;
pub mod harness;
pub mod tabular;
pub mod td3;

pub use error::{Error, Result};
