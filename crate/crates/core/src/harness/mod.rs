//! Command-line plumbing: experiment configuration, synthetic data
//! generation, convergence logs and the self-check battery.

pub mod commands;
pub mod config;
pub mod log;
pub mod selfcheck;
pub mod wavelet;

pub use commands::{forward, invert, InvertReport};
pub use config::ExperimentConfig;
pub use selfcheck::{run_selfcheck, CheckResult, Fault, SelfcheckOptions};
