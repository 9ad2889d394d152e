//! Seeded Monte Carlo driver: configuration, scene draws, trials, sweeps and
//! RMSE reports.

mod assign;
pub mod config;
pub mod report;
pub mod scenario;
pub mod seed;
mod sweep;
pub mod trial;

pub use assign::assign_by_angle;
pub use config::{ExperimentConfig, GainModel, Layout, Method, SweepAxis, TxBeam};
pub use report::{aggregate, emit_csv, read_csv, rmse, write_csv, write_misses_csv, MissRow, RmseReport, RmseRow};
pub use scenario::{draw_scene, FrameTruth, Scenario};
pub use sweep::{report_from, run_sweep, run_sweep_with, run_trials};
pub use trial::{
    calibrate, estimate_angles, matched_combiner, measure_path, run_trial, run_trial_at, sensing_frame, AngleStage,
    Calibration, ErrorSample, Quantity, TrialResult,
};

/// Harness failures, split by the exit code the CLI maps them to.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Estimation(#[from] crate::Error),
}

impl HarnessError {
    /// 1 for configuration problems, 2 for everything at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}
