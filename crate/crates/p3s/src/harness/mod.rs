//! Experiment orchestration: configuration, seeding, the lockstep runner,
//! the evaluation protocol and cross-run summaries.

pub mod config;
pub mod eval;
pub mod runner;
pub mod seeding;
pub mod summary;

pub use config::{CenterConfig, ResettingConfig, RunConfig, SchemeKind};
pub use eval::evaluate_policy;
pub use runner::{run, EvalRow, RunArtifacts, SyncRow};
pub use summary::{comparison_table, export_summary, load_run_dir, RunEntry};
