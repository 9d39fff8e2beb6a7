//! Production code checked against slow, independently written oracles.

use std::collections::{BTreeMap, HashMap};

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wsod::eval::{average_precision, corloc, match_detections, ranking, Detection};
use wsod::geometry::{iou, nms_indices, BBox};
use wsod::model::{loss_act, loss_obj, loss_total, HyperWeights, LossStyle};
use wsod::temporal::{link_tubelets, path_score};

use common::{clustered_boxes, link_by_enumeration, nms_by_subset_search, random_box, voc_ap};

// ---------------------------------------------------------------- NMS

#[test]
fn nms_matches_subset_search_on_1000_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..1000 {
        let n = rng.random_range(0..=9);
        let boxes = clustered_boxes(n, &mut rng);
        // a few exact score ties exercise the index tie-break
        let dets: Vec<(BBox, f64)> =
            boxes.into_iter().map(|b| (b, (rng.random_range(0..6) as f64) / 5.0)).collect();
        let thr = [0.3, 0.5, 0.7][case % 3];
        assert_eq!(nms_indices(&dets, thr), nms_by_subset_search(&dets, thr), "case {case}");
    }
}

// ---------------------------------------------------------------- linking

#[test]
fn linking_matches_exhaustive_search_on_500_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..500 {
        let n_frames = rng.random_range(1..=4);
        let frames: Vec<Vec<(BBox, f64)>> = (0..n_frames)
            .map(|_| {
                let n = rng.random_range(1..=5);
                clustered_boxes(n, &mut rng).into_iter().map(|b| (b, rng.random_range(0.0..1.0))).collect()
            })
            .collect();
        let lambda = rng.random_range(0.0..2.0);
        let k = rng.random_range(1..=6);
        let got = link_tubelets(&frames, lambda, k);
        let want = link_by_enumeration(&frames, lambda, k);
        assert_eq!(got.len(), want.len(), "case {case}");
        for (g, (p, s)) in got.iter().zip(&want) {
            assert_eq!(&g.indices, p, "case {case}");
            assert!((g.score - s).abs() < 1e-9, "case {case}: {} vs {s}", g.score);
            assert!((path_score(&frames, p, lambda) - s).abs() < 1e-9);
        }
    }
}

#[test]
fn linking_two_frame_fixture() {
    let x = BBox::new(0.1, 0.1, 0.3, 0.3);
    let far = BBox::new(0.6, 0.6, 0.8, 0.8);
    let frames = vec![vec![(x, 0.9), (far, 0.5)], vec![(x, 0.4), (BBox::new(0.0, 0.7, 0.1, 0.9), 0.8)]];
    let t = link_tubelets(&frames, 1.0, 1);
    assert_eq!(t[0].indices, vec![0, 0]);
    assert!((t[0].score - 2.3).abs() < 1e-12);
}

// ---------------------------------------------------------------- AP

#[test]
fn ap_fixtures_exact() {
    let cases: [(&[bool], usize, f64); 5] = [
        (&[true], 1, 1.0),
        (&[true, false, true], 2, 0.5 + 0.5 * (2.0 / 3.0)),
        (&[false, false], 3, 0.0),
        (&[false, true], 1, 0.5),
        (&[true, true], 4, 0.5),
    ];
    for (flags, n_gt, want) in cases {
        let got = average_precision(flags, n_gt);
        assert!((got - want).abs() <= 1e-12, "{flags:?}/{n_gt}: {got} vs {want}");
    }
}

#[test]
fn ap_matches_textbook_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..2000 {
        let n = rng.random_range(0..30);
        let flags: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let tps = flags.iter().filter(|&&f| f).count();
        let n_gt = tps + rng.random_range(0..5);
        if n_gt == 0 {
            continue;
        }
        assert!((average_precision(&flags, n_gt) - voc_ap(&flags, n_gt)).abs() <= 1e-12);
    }
}

// ---------------------------------------------------------------- matching

fn det(id: &str, object: usize, bbox: BBox, score: f64) -> Detection {
    Detection { sample_id: id.into(), frame: 0, object, bbox, score }
}

/// Straight transcription of greedy matching over flat lists.
fn match_by_scan(ranked: &[&Detection], gts: &[(String, BBox)], thr: f64) -> Vec<bool> {
    let mut taken = vec![false; gts.len()];
    ranked
        .iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for (g, (id, b)) in gts.iter().enumerate() {
                if *id != d.sample_id || taken[g] {
                    continue;
                }
                let v = iou(&d.bbox, b);
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((g, v));
                }
            }
            match best {
                Some((g, v)) if v >= thr => {
                    taken[g] = true;
                    true
                }
                _ => false,
            }
        })
        .collect()
}

#[test]
fn matching_matches_scan_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..500 {
        let ids = ["a", "b", "c"];
        let gts: Vec<(String, BBox)> =
            (0..rng.random_range(0..6)).map(|_| (ids[rng.random_range(0..3)].to_string(), random_box(&mut rng))).collect();
        let dets: Vec<Detection> = (0..rng.random_range(0..10))
            .map(|_| {
                let id = ids[rng.random_range(0..3)];
                let b = if !gts.is_empty() && rng.random_bool(0.5) {
                    let g = gts[rng.random_range(0..gts.len())].1;
                    BBox::new(g.x1 + 0.01, g.y1, g.x2 + 0.01, g.y2)
                } else {
                    random_box(&mut rng)
                };
                det(id, 0, b, rng.random_range(0..4) as f64)
            })
            .collect();
        let order = ranking(&dets);
        let ranked: Vec<&Detection> = order.iter().map(|&i| &dets[i]).collect();
        let mut map: HashMap<(String, usize), Vec<BBox>> = HashMap::new();
        for (id, b) in &gts {
            map.entry((id.clone(), 0)).or_default().push(*b);
        }
        assert_eq!(match_detections(&ranked, &map, 0.5), match_by_scan(&ranked, &gts, 0.5));
    }
}

#[test]
fn corloc_two_sample_fixture() {
    let g = BBox::new(0.1, 0.1, 0.3, 0.3);
    let mut gts = BTreeMap::new();
    gts.insert(("s0".to_string(), 0), vec![(0, g)]);
    gts.insert(("s1".to_string(), 0), vec![(0, g)]);
    let dets = vec![
        det("s0", 0, g, 0.9),
        det("s0", 0, BBox::new(0.6, 0.6, 0.9, 0.9), 0.2),
        det("s1", 0, BBox::new(0.6, 0.6, 0.9, 0.9), 0.8),
        det("s1", 0, g, 0.1),
    ];
    assert_eq!(corloc(&dets, &gts, 1, 0.5), vec![Some(0.5)]);
}

// ---------------------------------------------------------------- losses

/// Direct transcription of the weighted object loss for one action.
fn loss_obj_oracle(p: &[Vec<f64>], w: &[f64], o: usize) -> f64 {
    let n_r = p.len() as f64;
    let n_o = p[0].len() as f64;
    let mut total = 0.0;
    for (row, wr) in p.iter().zip(w) {
        let mut inner = 0.0;
        for (c, &pc) in row.iter().enumerate() {
            let y = if c == o { 1.0 } else { 0.0 };
            inner += y * pc.max(1e-12).ln() + (1.0 - y) * (1.0 - pc).max(1e-12).ln();
        }
        total += wr * inner / n_o;
    }
    -total / n_r
}

fn random_probs(n_r: usize, n_o: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n_r)
        .map(|_| {
            let raw: Vec<f64> = (0..n_o).map(|_| rng.random_range(0.01..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

#[test]
fn loss_obj_matches_transcription() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..300 {
        let (n_r, n_o) = (rng.random_range(1..8), rng.random_range(1..5));
        let p = random_probs(n_r, n_o, &mut rng);
        let w: Vec<f64> = (0..n_r).map(|_| rng.random_range(0.0..1.0)).collect();
        let o = rng.random_range(0..n_o);
        let got = loss_obj(&p, std::slice::from_ref(&w), &[o], &[0]).unwrap();
        assert!((got - loss_obj_oracle(&p, &w, o)).abs() < 1e-12);
    }
}

#[test]
fn loss_obj_averages_over_labeled_actions() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let p = random_probs(4, 3, &mut rng);
    let w0 = vec![0.1, 0.2, 0.3, 0.4];
    let w1 = vec![0.7, 0.1, 0.1, 0.1];
    let got = loss_obj(&p, &[w0.clone(), w1.clone()], &[2, 0, 1], &[0, 2]).unwrap();
    let want = 0.5 * (loss_obj_oracle(&p, &w0, 2) + loss_obj_oracle(&p, &w1, 1));
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn loss_obj_unit_weights_give_mean_bce() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let p = random_probs(5, 3, &mut rng);
    let per: Vec<f64> = p.iter().map(|row| loss_obj_oracle(std::slice::from_ref(row), &[1.0], 1)).collect();
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    let got = loss_obj(&p, &[vec![1.0; 5]], &[1], &[0]).unwrap();
    assert!((got - mean).abs() < 1e-12);
}

#[test]
fn loss_obj_duplicated_proposal_halves() {
    let p = vec![vec![0.7, 0.3]];
    let single = loss_obj(&p, &[vec![1.0]], &[0], &[0]).unwrap();
    let doubled = loss_obj(&[p[0].clone(), p[0].clone()], &[vec![0.5, 0.5]], &[0], &[0]).unwrap();
    assert!((doubled - single / 2.0).abs() < 1e-12);
    assert!((doubled - loss_obj_oracle(&[p[0].clone(), p[0].clone()], &[0.5, 0.5], 0)).abs() < 1e-12);
}

/// Softmax over action logits, then BCE against the multi-hot labels.
fn loss_act_oracle(logits: &[f64], y: &[f64]) -> f64 {
    let m = logits.iter().cloned().fold(f64::MIN, f64::max);
    let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    let n = logits.len() as f64;
    -logits
        .iter()
        .zip(y)
        .map(|(l, yy)| {
            let p = (l - m).exp() / z;
            yy * p.max(1e-12).ln() + (1.0 - yy) * (1.0 - p).max(1e-12).ln()
        })
        .sum::<f64>()
        / n
}

#[test]
fn loss_act_matches_transcription() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..300 {
        let n = rng.random_range(1..6);
        let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.4) { 1.0 } else { 0.0 }).collect();
        assert!((loss_act(&logits, &y, LossStyle::Paper) - loss_act_oracle(&logits, &y)).abs() < 1e-12);
    }
}

#[test]
fn loss_total_is_linear() {
    let hw = HyperWeights { alpha_o: 2.0, alpha_a: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..100 {
        let (a, b, c, d) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
        let sum = loss_total(a + c, b + d, &hw);
        assert!((sum - loss_total(a, b, &hw) - loss_total(c, d, &hw)).abs() < 1e-12);
    }
}
