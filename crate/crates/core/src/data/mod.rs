//! Dataset schema, loading, synthetic generation and splitting.

mod schema;
mod split;
mod synth;

pub use schema::{
    load_dataset, load_inference_samples, save_dataset, split_path, Dataset, Frame, GtBox, InferenceFrame,
    InferenceSample, Proposal, Sample, TaskSpec, DATASET_EXT,
};
pub use split::{partition_sizes, split};
pub use synth::{generate_synthetic, Prototypes, SyntheticConfig, SyntheticData, KEYPOINT_NAMES};
