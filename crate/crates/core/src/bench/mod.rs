//! Evaluation engine: click alignment, calibrated scoring, sweeps and reports.

mod align;
mod eval;
mod report;
mod stats;
mod sweep;

pub use align::{align_to_clicks, nearest_within, Alignment, MatchedSample, DEFAULT_ALIGN_WINDOW_US};
pub use eval::{
    aggregate, calibration_pairs, evaluate_session, prepare_session, score_session, score_with_profile, Aggregate, Aggregation, EvalConfig, EvalResult, PreparedSample,
    PreparedSession, SplitMode,
};
pub use report::{parse_rows_csv, parse_rows_json, report, rows_to_csv, rows_to_json, write_gnuplot, ReportFormat, CSV_HEADER};
pub use stats::{mean_std, welch_t_test, WelchTest};
pub use sweep::{
    sweep_calibration_samples, sweep_distance, trial_seed, EstimatorSpec, SweepConfig, SweepRow, CALIBRATION_LADDER,
};

use thiserror::Error;

use crate::calibration::CalibrationError;
use crate::estimators::EstimatorError;
use crate::session::SessionError;
use crate::synthlab::SynthError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("insufficient samples: need {required} (calibration {n_cal} + test {n_test}), have {available}")]
    InsufficientSamples { required: usize, n_cal: usize, n_test: usize, available: usize },
    #[error("no results to report")]
    EmptyResults,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("report parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}
