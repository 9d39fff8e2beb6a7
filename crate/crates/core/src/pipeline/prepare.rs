//! Turning dataset samples into training units: frame sampling, proposal
//! filtering, tubelet linking, and the seeded choice of samples whose boxes
//! are revealed for supervised mixing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Sample, TaskSpec};
use crate::geometry::{filter_proposal_indices, BBox};
use crate::model::{assign_supervised, FrameSupervision, TrainUnit, UnitFrame};
use crate::prior::PriorVariant;
use crate::temporal::{link_tubelets, sample_frames};

use super::config::TrainConfig;

/// A unit plus what is needed to map it back to its sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedUnit {
    pub unit: TrainUnit,
    pub sample: usize,
    /// Ground truth of each unit frame, empty when none is annotated.
    pub gts: Vec<Vec<(usize, BBox)>>,
}

/// SplitMix64 finalizer; derives independent stream seeds from one seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Build the training unit of one sample, or `None` when some sampled frame
/// has no proposal left after filtering.
pub fn prepare_unit(sample: &Sample, task: &TaskSpec, cfg: &TrainConfig) -> Option<(TrainUnit, Vec<usize>)> {
    let n_src = sample.frames.len();
    let chosen = if n_src == 1 { vec![0] } else { sample_frames(n_src, cfg.n_frames) };
    let mut frames = Vec::with_capacity(chosen.len());
    let mut linkable = Vec::with_capacity(chosen.len());
    for &t in &chosen {
        let f = &sample.frames[t];
        // the center variant runs without person detection
        let person = match cfg.prior {
            PriorVariant::Center => None,
            _ => f.person_box.as_ref(),
        };
        let keep = filter_proposal_indices(&f.proposals, person, cfg.theta_h, cfg.n_r);
        if keep.is_empty() {
            return None;
        }
        let boxes: Vec<BBox> = keep.iter().map(|&i| f.proposals[i].bbox).collect();
        linkable.push(keep.iter().map(|&i| (f.proposals[i].bbox, f.proposals[i].confidence)).collect::<Vec<_>>());
        frames.push(UnitFrame {
            boxes,
            features: keep.iter().map(|&i| f.proposals[i].feature.clone()).collect(),
            person_feature: f.person_feature.clone(),
            keypoints: f.keypoints.clone(),
        });
    }
    let tubelets = if frames.len() == 1 {
        (0..frames[0].boxes.len()).map(|i| vec![i]).collect()
    } else {
        link_tubelets(&linkable, cfg.lambda, cfg.k).into_iter().map(|t| t.indices).collect()
    };
    let unit = TrainUnit {
        frames,
        tubelets,
        actions: sample.actions.clone(),
        action_object: task.action_object.clone(),
        n_actions: task.n_actions(),
    };
    Some((unit, chosen))
}

/// Units of every usable training sample. Skipped samples are logged.
pub fn prepare_units(ds: &Dataset, cfg: &TrainConfig) -> Vec<PreparedUnit> {
    let mut out = Vec::with_capacity(ds.samples.len());
    for (i, s) in ds.samples.iter().enumerate() {
        match prepare_unit(s, &ds.task, cfg) {
            Some((unit, chosen)) => {
                let gts = chosen.iter().map(|&t| s.gt_for_frame(t)).collect();
                out.push(PreparedUnit { unit, sample: i, gts });
            }
            None => log::warn!("sample {}: no proposals left after filtering, skipped", s.id),
        }
    }
    out
}

/// Which units get supervision: a seeded `round(rho · m)` of the `m` units
/// that carry ground truth. Larger `rho` reveals a superset for a fixed seed.
pub fn revealed_units(units: &[PreparedUnit], rho: f64, seed: u64) -> Vec<bool> {
    let mut candidates: Vec<usize> = (0..units.len())
        .filter(|&i| units[i].gts.iter().any(|g| !g.is_empty()))
        .collect();
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x5EED])));
    let n = (rho * candidates.len() as f64).round() as usize;
    let mut mask = vec![false; units.len()];
    for &i in &candidates[..n.min(candidates.len())] {
        mask[i] = true;
    }
    mask
}

/// Supervised picks of one revealed unit; negatives are redrawn per epoch.
pub fn supervision_for(pu: &PreparedUnit, seed: u64, epoch: usize, index: usize) -> Vec<FrameSupervision> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, epoch as u64, index as u64]));
    pu.gts
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(t, g)| FrameSupervision { frame: t, picks: assign_supervised(&pu.unit.frames[t].boxes, g, &mut rng) })
        .collect()
}
