//! Weakly supervised object detection from action labels.
//!
//! Proposals in an image or clip are scored by an object head. During
//! training each proposal's contribution to the image-level object loss is
//! weighted by a learned spatial prior: a Gaussian over the offset between
//! the proposal center and an anchor point built from the actor's keypoints.
//! An action loss ties the same prior weights to action recognition.

pub mod data;
pub mod diff;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod kv;
pub mod model;
pub mod pipeline;
pub mod prior;
pub mod temporal;

pub use error::{Error, Result};
