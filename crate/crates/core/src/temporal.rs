//! Frame sampling, proposal linking into tubelets, and score pooling.

use serde::{Deserialize, Serialize};

use crate::geometry::{iou, BBox};

/// `n` frame indices spread uniformly over a clip of `t` frames:
/// `floor(i·t/n)` for `i = 0..n`. Short clips repeat frames.
pub fn sample_frames(t: usize, n: usize) -> Vec<usize> {
    assert!(t >= 1 && n >= 1, "sample_frames needs t >= 1 and n >= 1");
    (0..n).map(|i| i * t / n).collect()
}

/// A chain of one proposal per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tubelet {
    /// Proposal index in each frame.
    pub indices: Vec<usize>,
    /// `Σ conf + λ Σ IoU(consecutive boxes)`.
    pub score: f64,
}

/// Linking objective of a path through `frames`.
pub fn path_score(frames: &[Vec<(BBox, f64)>], path: &[usize], lambda: f64) -> f64 {
    let conf: f64 = path.iter().zip(frames).map(|(&i, f)| f[i].1).sum();
    let link: f64 = (1..path.len())
        .map(|t| iou(&frames[t - 1][path[t - 1]].0, &frames[t][path[t]].0))
        .sum();
    conf + lambda * link
}

/// Best path over the proposals still marked `alive`, by forward dynamic
/// programming. Ties go to the lower proposal index.
fn best_path(frames: &[Vec<(BBox, f64)>], alive: &[Vec<bool>], lambda: f64) -> Option<Tubelet> {
    let n = frames.len();
    let mut score: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(n);
    score.push(
        frames[0]
            .iter()
            .zip(&alive[0])
            .map(|((_, c), &ok)| if ok { *c } else { f64::NEG_INFINITY })
            .collect(),
    );
    back.push(vec![0; frames[0].len()]);
    for t in 1..n {
        let mut s = vec![f64::NEG_INFINITY; frames[t].len()];
        let mut b = vec![0; frames[t].len()];
        for (r, (rb, rc)) in frames[t].iter().enumerate() {
            if !alive[t][r] {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            let mut arg = usize::MAX;
            for (q, (qb, _)) in frames[t - 1].iter().enumerate() {
                let prev = score[t - 1][q];
                if prev == f64::NEG_INFINITY {
                    continue;
                }
                let v = prev + lambda * iou(qb, rb);
                if v > best {
                    best = v;
                    arg = q;
                }
            }
            if arg != usize::MAX {
                s[r] = best + rc;
                b[r] = arg;
            }
        }
        score.push(s);
        back.push(b);
    }
    let last = &score[n - 1];
    let mut end = None;
    for (r, &v) in last.iter().enumerate() {
        if v > f64::NEG_INFINITY && end.is_none_or(|e: usize| v > last[e]) {
            end = Some(r);
        }
    }
    let end = end?;
    let mut indices = vec![0; n];
    indices[n - 1] = end;
    for t in (1..n).rev() {
        indices[t - 1] = back[t][indices[t]];
    }
    Some(Tubelet { score: path_score(frames, &indices, lambda), indices })
}

/// Greedily extract up to `k` disjoint maximum-score tubelets.
///
/// `frames[t]` holds `(box, confidence)` per proposal. Extraction stops after
/// `k` tubelets or once any frame has no unused proposal left.
pub fn link_tubelets(frames: &[Vec<(BBox, f64)>], lambda: f64, k: usize) -> Vec<Tubelet> {
    if frames.is_empty() || frames.iter().any(|f| f.is_empty()) {
        return Vec::new();
    }
    let mut alive: Vec<Vec<bool>> = frames.iter().map(|f| vec![true; f.len()]).collect();
    let mut out = Vec::new();
    while out.len() < k {
        let Some(tb) = best_path(frames, &alive, lambda) else {
            break;
        };
        for (t, &i) in tb.indices.iter().enumerate() {
            alive[t][i] = false;
        }
        out.push(tb);
        if alive.iter().any(|a| !a.iter().any(|&x| x)) {
            break;
        }
    }
    out
}

/// Mean of per-frame class scores.
pub fn pool_scores(per_frame: &[Vec<f64>]) -> Vec<f64> {
    assert!(!per_frame.is_empty(), "pool_scores needs at least one frame");
    let n = per_frame.len() as f64;
    (0..per_frame[0].len())
        .map(|c| per_frame.iter().map(|f| f[c]).sum::<f64>() / n)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_sampling() {
        assert_eq!(sample_frames(16, 8), vec![0, 2, 4, 6, 8, 10, 12, 14]);
        assert_eq!(sample_frames(8, 8), (0..8).collect::<Vec<_>>());
        assert_eq!(sample_frames(3, 4), vec![0, 0, 1, 2]);
        assert_eq!(sample_frames(1, 3), vec![0, 0, 0]);
    }

    #[test]
    fn single_frame_takes_top_k() {
        let f = vec![vec![
            (BBox::new(0.0, 0.0, 0.1, 0.1), 0.2),
            (BBox::new(0.2, 0.2, 0.3, 0.3), 0.9),
            (BBox::new(0.4, 0.4, 0.5, 0.5), 0.5),
        ]];
        let t = link_tubelets(&f, 1.0, 2);
        assert_eq!(t.iter().map(|x| x.indices[0]).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn two_frame_fixture() {
        let x = BBox::new(0.1, 0.1, 0.3, 0.3);
        let f1 = vec![(x, 0.9), (BBox::new(0.5, 0.5, 0.6, 0.6), 0.5)];
        let f2 = vec![(x, 0.4), (BBox::new(0.7, 0.7, 0.9, 0.9), 0.8)];
        let t = link_tubelets(&[f1, f2], 1.0, 1);
        assert_eq!(t[0].indices, vec![0, 0]);
        assert!((t[0].score - 2.3).abs() < 1e-12);
    }

    #[test]
    fn stops_when_a_frame_runs_out() {
        let b = BBox::new(0.0, 0.0, 0.1, 0.1);
        let f = vec![vec![(b, 0.5)], vec![(b, 0.5), (b, 0.4)]];
        assert_eq!(link_tubelets(&f, 1.0, 5).len(), 1);
        assert!(link_tubelets(&[vec![], vec![(b, 1.0)]], 1.0, 5).is_empty());
    }

    #[test]
    fn pooling() {
        assert_eq!(pool_scores(&[vec![0.3, 0.7]]), vec![0.3, 0.7]);
        assert_eq!(pool_scores(&[vec![0.0], vec![1.0]]), vec![0.5]);
        assert_eq!(pool_scores(&[vec![2.0], vec![2.0], vec![2.0]]), vec![2.0]);
    }
}
