//! Detection metrics: per-class AP at a fixed IoU, mAP, and CorLoc.
//!
//! An evaluation image is one `(sample, frame)` pair from
//! [`Sample::eval_frames`]. Detections on any other frame are ignored.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::geometry::{iou, BBox};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub sample_id: String,
    #[serde(default)]
    pub frame: usize,
    pub object: usize,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// Matching threshold for AP (IoU >= value).
    pub ap_iou: f64,
    /// Localization threshold for CorLoc (IoU > value).
    pub corloc_iou: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { ap_iou: 0.5, corloc_iou: 0.5 }
    }
}

fn rank(a: &Detection, b: &Detection) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.sample_id.cmp(&b.sample_id))
}

/// Indices of `dets` by descending score, then sample id, then input order.
pub fn ranking(dets: &[Detection]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    // stable sort keeps input order on full ties
    idx.sort_by(|&i, &j| rank(&dets[i], &dets[j]));
    idx
}

pub type ImageKey = (String, usize);

/// Greedy one-to-one matching of already ranked single-class detections.
///
/// A detection is a true positive when its best-IoU still unmatched ground
/// truth in the same image reaches `iou_thresh`; that ground truth is then
/// consumed. Ties between ground truths go to the lower index.
pub fn match_detections(ranked: &[&Detection], gts: &HashMap<ImageKey, Vec<BBox>>, iou_thresh: f64) -> Vec<bool> {
    let mut used: HashMap<&ImageKey, Vec<bool>> = gts.iter().map(|(k, v)| (k, vec![false; v.len()])).collect();
    ranked
        .iter()
        .map(|d| {
            let key = (d.sample_id.clone(), d.frame);
            let Some((k, boxes)) = gts.get_key_value(&key) else {
                return false;
            };
            let taken = used.get_mut(k).unwrap();
            let mut best = None;
            let mut best_iou = f64::NEG_INFINITY;
            for (g, b) in boxes.iter().enumerate() {
                if taken[g] {
                    continue;
                }
                let v = iou(&d.bbox, b);
                if v > best_iou {
                    best_iou = v;
                    best = Some(g);
                }
            }
            match best {
                Some(g) if best_iou >= iou_thresh => {
                    taken[g] = true;
                    true
                }
                _ => false,
            }
        })
        .collect()
}

/// All-point average precision of a ranked TP/FP sequence against `n_gt`
/// ground-truth instances, using the monotone precision envelope.
/// Returns 0 when `n_gt == 0`.
pub fn average_precision(flags: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(flags.len());
    for (i, &f) in flags.iter().enumerate() {
        tp += f as usize;
        points.push((tp as f64 / n_gt as f64, tp as f64 / (i + 1) as f64));
    }
    for i in (0..points.len().saturating_sub(1)).rev() {
        points[i].1 = points[i].1.max(points[i + 1].1);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in points {
        if r > prev_recall {
            ap += (r - prev_recall) * p;
            prev_recall = r;
        }
    }
    ap
}

/// Per-class CorLoc: over images holding the class, the fraction whose
/// top-scored detection of that class overlaps one of its ground truths
/// with IoU strictly above `iou_thresh`. `None` when no image holds it.
pub fn corloc(dets: &[Detection], gts: &BTreeMap<ImageKey, Vec<(usize, BBox)>>, n_classes: usize, iou_thresh: f64) -> Vec<Option<f64>> {
    let mut top: HashMap<(&str, usize, usize), &Detection> = HashMap::new();
    for d in dets {
        let e = top.entry((d.sample_id.as_str(), d.frame, d.object)).or_insert(d);
        if d.score > e.score {
            *e = d;
        }
    }
    (0..n_classes)
        .map(|c| {
            let mut n = 0usize;
            let mut hit = 0usize;
            for ((id, frame), boxes) in gts {
                let mine: Vec<&BBox> = boxes.iter().filter(|(o, _)| *o == c).map(|(_, b)| b).collect();
                if mine.is_empty() {
                    continue;
                }
                n += 1;
                if let Some(d) = top.get(&(id.as_str(), *frame, c)) {
                    if mine.iter().any(|b| iou(&d.bbox, b) > iou_thresh) {
                        hit += 1;
                    }
                }
            }
            (n > 0).then(|| hit as f64 / n as f64)
        })
        .collect()
}

/// Metrics report written by the evaluator. Undefined entries are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub classes: Vec<String>,
    pub per_class_ap: Vec<Option<f64>>,
    pub map: f64,
    pub per_class_corloc: Vec<Option<f64>>,
    pub corloc_mean: f64,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Mean of the defined entries, 0 when none are defined.
pub fn defined_mean(xs: &[Option<f64>]) -> f64 {
    let v: Vec<f64> = xs.iter().flatten().copied().collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Ground truth of every evaluation image, keyed by `(sample id, frame)`.
pub fn eval_images(samples: &[Sample]) -> BTreeMap<ImageKey, Vec<(usize, BBox)>> {
    let mut out = BTreeMap::new();
    for s in samples {
        for f in s.eval_frames() {
            out.insert((s.id.clone(), f), s.gt_for_frame(f));
        }
    }
    out
}

pub fn evaluate(dets: &[Detection], dataset: &Dataset, settings: &EvalSettings) -> Report {
    let images = eval_images(&dataset.samples);
    let n_classes = dataset.task.n_objects();
    let kept: Vec<Detection> = dets
        .iter()
        .filter(|d| d.object < n_classes && images.contains_key(&(d.sample_id.clone(), d.frame)))
        .cloned()
        .collect();
    let order = ranking(&kept);

    let per_class_ap: Vec<Option<f64>> = (0..n_classes)
        .map(|c| {
            let mut gts: HashMap<ImageKey, Vec<BBox>> = HashMap::new();
            let mut n_gt = 0;
            for (k, boxes) in &images {
                let mine: Vec<BBox> = boxes.iter().filter(|(o, _)| *o == c).map(|(_, b)| *b).collect();
                n_gt += mine.len();
                if !mine.is_empty() {
                    gts.insert(k.clone(), mine);
                }
            }
            if n_gt == 0 {
                return None;
            }
            let ranked: Vec<&Detection> = order.iter().map(|&i| &kept[i]).filter(|d| d.object == c).collect();
            Some(average_precision(&match_detections(&ranked, &gts, settings.ap_iou), n_gt))
        })
        .collect();
    let per_class_corloc = corloc(&kept, &images, n_classes, settings.corloc_iou);
    Report {
        classes: dataset.task.objects.clone(),
        map: defined_mean(&per_class_ap),
        corloc_mean: defined_mean(&per_class_corloc),
        per_class_ap,
        per_class_corloc,
    }
}
