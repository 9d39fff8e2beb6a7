use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Scored};
use crate::prior::Keypoints;

/// Extension of dataset split files.
pub const DATASET_EXT: &str = "wsod.json";

/// Names and sizes shared by every sample of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub actions: Vec<String>,
    pub objects: Vec<String>,
    /// Object class involved in each action.
    pub action_object: Vec<usize>,
    pub num_keypoints: usize,
    pub feature_dim: usize,
}

impl TaskSpec {
    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.actions.is_empty() || self.objects.is_empty() {
            return Err(Error::Task("need at least one action and one object".into()));
        }
        if self.action_object.len() != self.actions.len() {
            return Err(Error::Task(format!(
                "action_object has {} entries for {} actions",
                self.action_object.len(),
                self.actions.len()
            )));
        }
        if let Some((a, o)) = self.action_object.iter().enumerate().find(|(_, &o)| o >= self.objects.len()) {
            return Err(Error::Task(format!("action {a} maps to unknown object {o}")));
        }
        if self.feature_dim == 0 {
            return Err(Error::Task("feature_dim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub confidence: f64,
    pub feature: Vec<f64>,
}

impl Scored for Proposal {
    fn bbox(&self) -> &BBox {
        &self.bbox
    }
    fn confidence(&self) -> f64 {
        self.confidence
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub proposals: Vec<Proposal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person_box: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person_feature: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<Keypoints>,
}

/// Ground-truth object box, used only for evaluation and supervised mixing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub object: usize,
    #[serde(rename = "box")]
    pub bbox: BBox,
    /// Frame of the sample the box belongs to.
    #[serde(default)]
    pub frame: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub frames: Vec<Frame>,
    pub actions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_boxes: Option<Vec<GtBox>>,
}

impl Sample {
    /// Ground truth of one frame as `(object, box)` pairs.
    pub fn gt_for_frame(&self, frame: usize) -> Vec<(usize, BBox)> {
        self.gt_boxes
            .iter()
            .flatten()
            .filter(|g| g.frame == frame)
            .map(|g| (g.object, g.bbox))
            .collect()
    }

    /// Frames that count as evaluation images: every frame of a single-frame
    /// sample, otherwise the frames carrying ground truth.
    pub fn eval_frames(&self) -> Vec<usize> {
        if self.frames.len() == 1 {
            return vec![0];
        }
        let mut f: Vec<usize> = self.gt_boxes.iter().flatten().map(|g| g.frame).collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub task: TaskSpec,
    pub samples: Vec<Sample>,
}

fn check_vec(id: &str, field: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::schema(id, field, format!("length {} != feature_dim {}", v.len(), dim)));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::schema(id, field, "non-finite value"));
    }
    Ok(())
}

fn check_box(id: &str, field: &str, b: &BBox) -> Result<()> {
    if !b.is_valid() {
        return Err(Error::schema(id, field, format!("invalid box {:?}", <[f64; 4]>::from(*b))));
    }
    Ok(())
}

impl Dataset {
    /// Check every invariant, naming the offending sample and field.
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        let t = &self.task;
        let mut ids = HashSet::new();
        for s in &self.samples {
            let id = s.id.as_str();
            if !ids.insert(id) {
                return Err(Error::schema(id, "id", "duplicate sample id"));
            }
            if s.frames.is_empty() {
                return Err(Error::schema(id, "frames", "at least one frame required"));
            }
            if let Some(&a) = s.actions.iter().find(|&&a| a >= t.n_actions()) {
                return Err(Error::schema(id, "actions", format!("action id {a} >= n_a {}", t.n_actions())));
            }
            for (fi, f) in s.frames.iter().enumerate() {
                for (pi, p) in f.proposals.iter().enumerate() {
                    let field = format!("frames[{fi}].proposals[{pi}]");
                    check_box(id, &format!("{field}.box"), &p.bbox)?;
                    check_vec(id, &format!("{field}.feature"), &p.feature, t.feature_dim)?;
                    if !(0.0..=1.0).contains(&p.confidence) {
                        return Err(Error::schema(id, format!("{field}.confidence"), "outside [0, 1]"));
                    }
                }
                if let Some(b) = &f.person_box {
                    check_box(id, &format!("frames[{fi}].person_box"), b)?;
                }
                if let Some(pf) = &f.person_feature {
                    check_vec(id, &format!("frames[{fi}].person_feature"), pf, t.feature_dim)?;
                }
                if let Some(k) = &f.keypoints {
                    if k.len() != t.num_keypoints {
                        return Err(Error::schema(
                            id,
                            format!("frames[{fi}].keypoints"),
                            format!("{} keypoints, expected {}", k.len(), t.num_keypoints),
                        ));
                    }
                    if k.points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                        return Err(Error::schema(id, format!("frames[{fi}].keypoints"), "non-finite value"));
                    }
                }
            }
            for (gi, g) in s.gt_boxes.iter().flatten().enumerate() {
                if g.object >= t.n_objects() {
                    return Err(Error::schema(
                        id,
                        format!("gt_boxes[{gi}].object"),
                        format!("object id {} >= n_o {}", g.object, t.n_objects()),
                    ));
                }
                if g.frame >= s.frames.len() {
                    return Err(Error::schema(id, format!("gt_boxes[{gi}].frame"), "frame out of range"));
                }
                check_box(id, &format!("gt_boxes[{gi}].box"), &g.bbox)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("dataset serializes")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let ds: Dataset = serde_json::from_str(text).map_err(|e| Error::Json { path: origin.to_string(), source: e })?;
        ds.validate()?;
        Ok(ds)
    }
}

/// Read and validate a dataset file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    Dataset::from_json(&text, &path.display().to_string())
}

pub fn save_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ds.to_json()).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

/// `<dir>/<split>.wsod.json`
pub fn split_path(dir: impl AsRef<Path>, split: &str) -> std::path::PathBuf {
    dir.as_ref().join(format!("{split}.{DATASET_EXT}"))
}

/// Proposal-only view of a frame: everything inference may look at.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct InferenceFrame {
    pub proposals: Vec<Proposal>,
}

/// Sample as seen by inference. Person boxes, keypoints, labels and ground
/// truth are not part of this type.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct InferenceSample {
    pub id: String,
    pub frames: Vec<InferenceFrame>,
}

#[derive(Debug, Clone, Deserialize)]
struct InferenceDataset {
    samples: Vec<InferenceSample>,
}

impl From<&Sample> for InferenceSample {
    fn from(s: &Sample) -> Self {
        Self {
            id: s.id.clone(),
            frames: s.frames.iter().map(|f| InferenceFrame { proposals: f.proposals.clone() }).collect(),
        }
    }
}

/// Read only what inference needs from a dataset file.
pub fn load_inference_samples(path: impl AsRef<Path>) -> Result<Vec<InferenceSample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    let ds: InferenceDataset =
        serde_json::from_str(&text).map_err(|e| Error::Json { path: path.display().to_string(), source: e })?;
    Ok(ds.samples)
}
