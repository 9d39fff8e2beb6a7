//! Slow, independently written reference implementations shared by the
//! oracle tests and the acceptance harness.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use wsod::geometry::{iou, BBox};

pub fn random_box(rng: &mut ChaCha8Rng) -> BBox {
    let x = rng.random_range(0.0..0.8);
    let y = rng.random_range(0.0..0.8);
    let w = rng.random_range(0.0..0.4);
    let h = rng.random_range(0.0..0.4);
    BBox::new(x, y, (x + w).min(1.0), (y + h).min(1.0))
}

/// Boxes clustered so that suppression actually happens.
pub fn clustered_boxes(n: usize, rng: &mut ChaCha8Rng) -> Vec<BBox> {
    let base = random_box(rng);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.6) {
                let d = |rng: &mut ChaCha8Rng| rng.random_range(-0.05..0.05);
                let (dx, dy) = (d(rng), d(rng));
                BBox::new(base.x1 + dx, base.y1 + dy, base.x2 + dx, base.y2 + dy)
            } else {
                random_box(rng)
            }
        })
        .collect()
}

/// The NMS output is the unique set K (in rank order) where a box belongs to
/// K exactly when no higher-ranked member of K overlaps it above the
/// threshold. Found by testing every subset.
pub fn nms_by_subset_search(dets: &[(BBox, f64)], thr: f64) -> Vec<usize> {
    let n = dets.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| dets[j].1.partial_cmp(&dets[i].1).unwrap().then(i.cmp(&j)));
    let mut found = Vec::new();
    for mask in 0u32..(1 << n) {
        let member = |i: usize| mask & (1 << i) != 0;
        let consistent = order.iter().enumerate().all(|(pos, &i)| {
            let blocked = order[..pos].iter().any(|&j| member(j) && iou(&dets[i].0, &dets[j].0) > thr);
            member(i) == !blocked
        });
        if consistent {
            found.push(order.iter().copied().filter(|&i| member(i)).collect::<Vec<_>>());
        }
    }
    assert_eq!(found.len(), 1, "exactly one self-consistent kept set");
    found.pop().unwrap()
}

pub fn all_paths(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut paths = vec![Vec::new()];
    for &s in sizes {
        paths = paths
            .into_iter()
            .flat_map(|p| {
                (0..s).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    paths
}

/// Repeated exhaustive search: best unused path, remove it, repeat.
pub fn link_by_enumeration(frames: &[Vec<(BBox, f64)>], lambda: f64, k: usize) -> Vec<(Vec<usize>, f64)> {
    let sizes: Vec<usize> = frames.iter().map(|f| f.len()).collect();
    let mut used: Vec<Vec<bool>> = sizes.iter().map(|&s| vec![false; s]).collect();
    let mut out = Vec::new();
    while out.len() < k {
        let mut best: Option<(Vec<usize>, f64)> = None;
        for p in all_paths(&sizes) {
            if p.iter().enumerate().any(|(t, &i)| used[t][i]) {
                continue;
            }
            let conf: f64 = p.iter().enumerate().map(|(t, &i)| frames[t][i].1).sum();
            let link: f64 = (1..p.len()).map(|t| iou(&frames[t - 1][p[t - 1]].0, &frames[t][p[t]].0)).sum();
            let s = conf + lambda * link;
            if best.as_ref().is_none_or(|b| s > b.1) {
                best = Some((p, s));
            }
        }
        let Some((p, s)) = best else { break };
        for (t, &i) in p.iter().enumerate() {
            used[t][i] = true;
        }
        out.push((p, s));
        if used.iter().any(|u| u.iter().all(|&x| x)) {
            break;
        }
    }
    out
}

/// The textbook all-point AP with sentinel recall/precision points.
pub fn voc_ap(flags: &[bool], n_gt: usize) -> f64 {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut rec = vec![0.0];
    let mut prec = vec![0.0];
    for &f in flags {
        if f {
            tp += 1.0
        } else {
            fp += 1.0
        }
        rec.push(tp / n_gt as f64);
        prec.push(tp / (tp + fp));
    }
    rec.push(1.0);
    prec.push(0.0);
    for i in (0..prec.len() - 1).rev() {
        prec[i] = prec[i].max(prec[i + 1]);
    }
    (1..rec.len()).filter(|&i| rec[i] != rec[i - 1]).map(|i| (rec[i] - rec[i - 1]) * prec[i]).sum()
}
