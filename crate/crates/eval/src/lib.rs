//! Leave-one-patient-out evaluation of the seizure pipeline on recordings or
//! a synthetic corpus, with SNR reporting and ablation sweeps.

pub mod config;
pub mod corpus;
pub mod error;
pub mod experiment;
pub mod lopo;
pub mod pipeline;
pub mod snr;

pub use config::ExperimentConfig;
pub use error::{EvalError, Result};
pub use experiment::{run_experiment, sweep, ExperimentResult, SweepAxis, SweepTable};
pub use lopo::{lopo_plan, Fold, FoldPlan};
pub use snr::{compare_snr, snr, SnrComparison, SnrReport};
