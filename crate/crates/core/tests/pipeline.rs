//! Training, inference and evaluation end to end through the library.

use wsod::data::{generate_synthetic, Dataset, InferenceSample, SyntheticConfig};
use wsod::eval::{evaluate, Detection, EvalSettings};
use wsod::pipeline::{infer, infer_settings, train, TrainConfig};

fn small_synth(frames: usize) -> SyntheticConfig {
    SyntheticConfig {
        train_per_action: 30,
        val_per_action: 5,
        test_per_action: 10,
        frames_per_clip: frames,
        ..Default::default()
    }
}

fn quick() -> TrainConfig {
    TrainConfig { epochs: 4, prior_warmup: 1, ..Default::default() }
}

fn inference_samples(ds: &Dataset) -> Vec<InferenceSample> {
    ds.samples.iter().map(InferenceSample::from).collect()
}

#[test]
fn training_is_deterministic() {
    let data = generate_synthetic(&small_synth(1)).unwrap();
    let cfg = quick();
    let a = train(&cfg, &data.train, Some(&data.val)).unwrap();
    let b = train(&cfg, &data.train, Some(&data.val)).unwrap();
    assert_eq!(a.checkpoint.to_json(), b.checkpoint.to_json());
    assert_eq!(a.log, b.log);
    let test = inference_samples(&data.test);
    let report = |ck: &wsod::pipeline::Checkpoint| {
        let dets = infer(&ck.params().unwrap(), &test, &infer_settings(&cfg));
        evaluate(&dets, &data.test, &EvalSettings::default()).to_json()
    };
    assert_eq!(report(&a.checkpoint), report(&b.checkpoint));
}

#[test]
fn final_epoch_loss_is_below_the_first_on_the_default_benchmark() {
    let data = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let out = train(&TrainConfig::default(), &data.train, None).unwrap();
    let first = out.log.first().unwrap().loss;
    let last = out.log.last().unwrap().loss;
    assert!(last < first, "first {first} last {last}");
    assert_eq!(out.skipped, 0);
}

#[test]
fn video_clips_train_and_evaluate_per_annotated_frame() {
    let data = generate_synthetic(&small_synth(4)).unwrap();
    let cfg = TrainConfig { n_frames: 3, ..quick() };
    let out = train(&cfg, &data.train, Some(&data.val)).unwrap();
    let dets = infer(&out.checkpoint.params().unwrap(), &inference_samples(&data.test), &infer_settings(&cfg));
    assert!(dets.iter().all(|d| d.frame < 4));
    let r = evaluate(&dets, &data.test, &EvalSettings::default());
    assert!((0.0..=1.0).contains(&r.map));
    assert!(out.log.iter().all(|e| e.loss.is_finite()));
}

#[test]
fn revealed_boxes_add_a_supervised_term() {
    let data = generate_synthetic(&small_synth(1)).unwrap();
    let weak = train(&quick(), &data.train, None).unwrap();
    assert!(weak.log.iter().all(|e| e.sup.is_none()));
    let mixed = train(&TrainConfig { rho: 1.0, ..quick() }, &data.train, None).unwrap();
    assert!(mixed.log.iter().all(|e| e.sup.is_some_and(|s| s.is_finite() && s >= 0.0)));
}

#[test]
fn perfect_and_empty_detections() {
    let data = generate_synthetic(&small_synth(1)).unwrap();
    let perfect: Vec<Detection> = data
        .test
        .samples
        .iter()
        .flat_map(|s| {
            s.gt_boxes.iter().flatten().map(move |g| Detection {
                sample_id: s.id.clone(),
                frame: g.frame,
                object: g.object,
                bbox: g.bbox,
                score: 1.0,
            })
        })
        .collect();
    let r = evaluate(&perfect, &data.test, &EvalSettings::default());
    assert_eq!(r.map, 1.0);
    assert_eq!(r.corloc_mean, 1.0);
    let r = evaluate(&[], &data.test, &EvalSettings::default());
    assert_eq!(r.map, 0.0);
    assert_eq!(r.corloc_mean, 0.0);
}

#[test]
fn inference_ignores_person_and_keypoints() {
    let data = generate_synthetic(&small_synth(1)).unwrap();
    let cfg = quick();
    let params = train(&cfg, &data.train, None).unwrap().checkpoint.params().unwrap();
    let mut stripped = data.test.clone();
    for s in &mut stripped.samples {
        for f in &mut s.frames {
            f.keypoints = None;
            f.person_box = None;
            f.person_feature = None;
        }
    }
    let a = infer(&params, &inference_samples(&data.test), &infer_settings(&cfg));
    let b = infer(&params, &inference_samples(&stripped), &infer_settings(&cfg));
    assert_eq!(a, b);
}

#[test]
fn mismatched_validation_task_is_rejected() {
    let data = generate_synthetic(&small_synth(1)).unwrap();
    let mut val = data.val.clone();
    val.task.objects.push("extra".into());
    assert!(train(&quick(), &data.train, Some(&val)).is_err());
}
