//! Test-time detection: object head on every proposal, per-class NMS, then a
//! score threshold. Only proposals are read; see [`InferenceSample`].

use rayon::prelude::*;

use crate::data::{InferenceFrame, InferenceSample};
use crate::eval::Detection;
use crate::geometry::{nms_indices, BBox};
use crate::model::{object_scores_styled, LossStyle, Params};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferSettings {
    pub style: LossStyle,
    pub nms_iou: f64,
    pub score_threshold: f64,
}

/// Detections of one frame as `(object, box, score)`, grouped by class in
/// NMS order.
pub fn detect_frame(params: &Params<f64>, frame: &InferenceFrame, s: &InferSettings) -> Vec<(usize, BBox, f64)> {
    if frame.proposals.is_empty() {
        return Vec::new();
    }
    let features: Vec<Vec<f64>> = frame.proposals.iter().map(|p| p.feature.clone()).collect();
    let (_, probs) = object_scores_styled(params, &features, s.style);
    let mut out = Vec::new();
    for c in 0..params.dims.n_objects {
        let scored: Vec<(BBox, f64)> = frame.proposals.iter().zip(&probs).map(|(p, pr)| (p.bbox, pr[c])).collect();
        for i in nms_indices(&scored, s.nms_iou) {
            if scored[i].1 >= s.score_threshold {
                out.push((c, scored[i].0, scored[i].1));
            }
        }
    }
    out
}

/// Detections for every frame of every sample, in sample/frame/class order.
pub fn infer(params: &Params<f64>, samples: &[InferenceSample], s: &InferSettings) -> Vec<Detection> {
    let per_sample: Vec<Vec<Detection>> = samples
        .par_iter()
        .map(|sample| {
            let mut dets = Vec::new();
            for (t, frame) in sample.frames.iter().enumerate() {
                for (object, bbox, score) in detect_frame(params, frame, s) {
                    dets.push(Detection { sample_id: sample.id.clone(), frame: t, object, bbox, score });
                }
            }
            dets
        })
        .collect();
    per_sample.into_iter().flatten().collect()
}
