//! Training, inference, checkpoints, evaluation glue, and gradient checks.

mod checkpoint;
mod config;
mod gradcheck;
mod infer;
mod prepare;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use config::{hash_text, LrSchedule, TrainConfig};
pub use gradcheck::{gradcheck, random_problem, CaseReport, GradcheckReport, GroupError, Problem, FD_STEP, KINK_MARGIN};
pub use infer::{detect_frame, infer, InferSettings};
pub use prepare::{mix_seed, prepare_unit, prepare_units, revealed_units, supervision_for, PreparedUnit};
pub use train::{clamp_sigma, dims_for, infer_settings, train, validation_map, EpochLog, TrainOutcome};

use crate::data::Dataset;
use crate::eval::{evaluate as evaluate_dets, Detection, EvalSettings, Report};

/// Metrics of `dets` against `dataset`.
pub fn evaluate(dets: &[Detection], dataset: &Dataset, settings: &EvalSettings) -> Report {
    evaluate_dets(dets, dataset, settings)
}
