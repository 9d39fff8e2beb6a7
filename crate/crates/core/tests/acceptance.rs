//! Acceptance harness: one PASS/FAIL line per criterion, nonzero exit if any fail.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wsod::data::{generate_synthetic, split_path, InferenceSample, SyntheticConfig, SyntheticData};
use wsod::eval::{average_precision, corloc, evaluate, Detection};
use wsod::geometry::{nms_indices, BBox};
use wsod::model::{loss_act, loss_obj, loss_total, Group, HyperWeights, LossStyle, Params};
use wsod::pipeline::{gradcheck, infer, infer_settings, train, TrainConfig};
use wsod::prior::PriorVariant;
use wsod::temporal::link_tubelets;

use common::{clustered_boxes, link_by_enumeration, nms_by_subset_search};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Check {
    ensure(elapsed < limit, format!("{detail}; {:.1}s of {}s", elapsed.as_secs_f64(), limit.as_secs()))
}

/// Train on `data` and return the test mAP with the learned parameters.
fn run(cfg: &TrainConfig, data: &SyntheticData) -> anyhow::Result<(f64, Params<f64>)> {
    let out = train(cfg, &data.train, Some(&data.val))?;
    let params = out.checkpoint.params()?;
    let test: Vec<InferenceSample> = data.test.samples.iter().map(InferenceSample::from).collect();
    let dets = infer(&params, &test, &infer_settings(cfg));
    Ok((evaluate(&dets, &data.test, &cfg.eval_settings()).map, params))
}

fn gradients() -> anyhow::Result<Check> {
    let start = Instant::now();
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for seed in 0..100 {
        for (group, err) in gradcheck(seed)?.per_group() {
            let w = worst.entry(group).or_insert(0.0);
            *w = w.max(err);
        }
    }
    let missing: Vec<&str> = Group::ALL.iter().map(|g| g.name()).filter(|n| !worst.contains_key(n)).collect();
    let max = worst.values().cloned().fold(0.0, f64::max);
    let detail = format!("100 seeds, worst group error {max:.2e}, unchecked groups {missing:?}");
    let ok = missing.is_empty() && max < 1e-4;
    Ok(ensure(ok, detail.clone()).and_then(|_| within(start.elapsed(), Duration::from_secs(60), detail)))
}

fn argmax(xs: &[f64]) -> usize {
    (0..xs.len()).fold(0, |b, i| if xs[i] > xs[b] { i } else { b })
}

fn prior_recovery(synth: &SyntheticConfig, params: &Params<f64>, elapsed: Duration) -> Check {
    let mut recovered = 0;
    let mut lines = Vec::new();
    for a in 0..synth.n_actions {
        let p = params.action_prior(a);
        let key = argmax(p.key_logits);
        let planted = synth.planted_mu[a];
        let err = (p.mu[0] - planted.x).abs().max((p.mu[1] - planted.y).abs());
        let hit = key == synth.planted_keypoints[a] && err < 0.05;
        recovered += hit as usize;
        lines.push(format!("a{a}: key {key}/{} |mu err| {err:.3}", synth.planted_keypoints[a]));
    }
    let detail = format!("{recovered}/4 recovered ({})", lines.join(", "));
    ensure(recovered >= 3, detail.clone()).and_then(|_| within(elapsed, Duration::from_secs(300), detail))
}

fn ablation(data: &SyntheticData, base: &TrainConfig, full: f64) -> anyhow::Result<Check> {
    let (object_only, _) = run(&TrainConfig { alpha_a: 0.0, ..base.clone() }, data)?;
    let (action_only, _) = run(&TrainConfig { alpha_o: 0.0, ..base.clone() }, data)?;
    let (center, _) = run(&TrainConfig { prior: PriorVariant::Center, ..base.clone() }, data)?;
    let margin = 0.02;
    let ok = full - object_only >= margin && object_only - action_only >= margin && full - center >= margin;
    Ok(ensure(
        ok,
        format!("full {full:.4}, object-only {object_only:.4}, action-only {action_only:.4}, center {center:.4}"),
    ))
}

fn mixing() -> anyhow::Result<Check> {
    let data = generate_synthetic(&SyntheticConfig { feature_noise: 0.3, ..Default::default() })?;
    let base = TrainConfig::default();
    let mut maps = Vec::new();
    for rho in [0.0, 0.1, 0.5, 1.0] {
        maps.push(run(&TrainConfig { rho, ..base.clone() }, &data)?.0);
    }
    let (sup_only, _) = run(&TrainConfig { rho: 1.0, alpha_o: 0.0, alpha_a: 0.0, ..base }, &data)?;
    let monotone = maps.windows(2).all(|w| w[1] >= w[0]);
    let ok = monotone && maps[3] > maps[0] && maps[3] >= sup_only;
    let shown: Vec<String> = maps.iter().map(|m| format!("{m:.4}")).collect();
    Ok(ensure(ok, format!("rho 0/0.1/0.5/1: {}, supervised-only {sup_only:.4}", shown.join("/"))))
}

fn oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..1000 {
        let n = rng.random_range(0..=9);
        let dets: Vec<(BBox, f64)> =
            clustered_boxes(n, &mut rng).into_iter().map(|b| (b, rng.random_range(0..6) as f64 / 5.0)).collect();
        if nms_indices(&dets, 0.5) != nms_by_subset_search(&dets, 0.5) {
            return Err(format!("NMS differs on case {case}"));
        }
    }
    for case in 0..500 {
        let frames: Vec<Vec<(BBox, f64)>> = (0..rng.random_range(1..=4))
            .map(|_| {
                let n = rng.random_range(1..=5);
                clustered_boxes(n, &mut rng).into_iter().map(|b| (b, rng.random_range(0.0..1.0))).collect()
            })
            .collect();
        let lambda = rng.random_range(0.0..2.0);
        let got = link_tubelets(&frames, lambda, 3);
        let want = link_by_enumeration(&frames, lambda, 3);
        let same = got.len() == want.len()
            && got.iter().zip(&want).all(|(g, (p, s))| g.indices == *p && (g.score - s).abs() < 1e-9);
        if !same {
            return Err(format!("linking differs on case {case}"));
        }
    }
    let fixtures: [(&[bool], usize, f64); 4] =
        [(&[true], 1, 1.0), (&[true, false, true], 2, 5.0 / 6.0), (&[false, true], 1, 0.5), (&[true, true], 4, 0.5)];
    for (flags, n_gt, want) in fixtures {
        if (average_precision(flags, n_gt) - want).abs() > 1e-12 {
            return Err(format!("AP fixture {flags:?}/{n_gt}"));
        }
    }
    Ok("NMS 1000 cases, linking 500 instances, AP fixtures".into())
}

fn metric_fixtures() -> Check {
    let ap = average_precision(&[true, false, true], 2);
    let g = BBox::new(0.1, 0.1, 0.3, 0.3);
    let off = BBox::new(0.6, 0.6, 0.9, 0.9);
    let det = |id: &str, bbox, score| Detection { sample_id: id.into(), frame: 0, object: 0, bbox, score };
    let mut gts = BTreeMap::new();
    gts.insert(("s0".to_string(), 0), vec![(0, g)]);
    gts.insert(("s1".to_string(), 0), vec![(0, g)]);
    let dets = [det("s0", g, 0.9), det("s0", off, 0.2), det("s1", off, 0.8), det("s1", g, 0.1)];
    let c = corloc(&dets, &gts, 1, 0.5);
    ensure((ap - 0.8333).abs() <= 1e-4 && (ap - 5.0 / 6.0).abs() <= 1e-9 && c == vec![Some(0.5)], format!("AP {ap:.10}, CorLoc {c:?}"))
}

fn cli(args: &[&str]) -> anyhow::Result<()> {
    let out = Command::new(env!("CARGO_BIN_EXE_wsod")).args(args).env("RUST_LOG", "warn").output()?;
    anyhow::ensure!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim());
    Ok(())
}

fn determinism() -> anyhow::Result<Check> {
    let dir = tempfile::tempdir()?;
    let d = dir.path();
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    fs::write(d.join("synth.conf"), "train_per_action = 40\nval_per_action = 5\ntest_per_action = 10\n")?;
    fs::write(d.join("train.conf"), "epochs = 6\nprior_warmup = 2\n")?;
    let data = d.join("data");
    cli(&["synth", "--config", &s(&d.join("synth.conf")), "--out", &s(&data)])?;
    anyhow::ensure!(split_path(&data, "test").exists(), "synth wrote no test split");
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let (ckpt, dets, report) = (d.join(format!("{run}.ckpt")), d.join(format!("{run}.dets")), d.join(format!("{run}.report")));
        cli(&["train", "--config", &s(&d.join("train.conf")), "--data", &s(&data), "--out", &s(&ckpt)])?;
        cli(&["infer", "--ckpt", &s(&ckpt), "--data", &s(&data), "--out", &s(&dets)])?;
        cli(&["eval", "--data", &s(&data), "--dets", &s(&dets), "--report", &s(&report)])?;
        files.push((fs::read(ckpt)?, fs::read(report)?));
    }
    let same_ckpt = files[0].0 == files[1].0;
    let same_report = files[0].1 == files[1].1;
    Ok(ensure(same_ckpt && same_report, format!("checkpoints identical {same_ckpt}, reports identical {same_report}")))
}

#[allow(clippy::approx_constant)]
fn loss_fixtures() -> Check {
    let obj = loss_obj(&[vec![0.5, 0.5]], &[vec![1.0]], &[0], &[0]).map_err(|e| e.to_string())?;
    let act = loss_act(&[0.2, 0.2], &[1.0, 0.0], LossStyle::Paper);
    let total = loss_total(obj, act, &HyperWeights { alpha_o: 2.0, alpha_a: 1.0 });
    let ok = (obj - 0.6931).abs() <= 1e-4 && (act - 0.6931).abs() <= 1e-4 && (total - 2.0794).abs() <= 1e-4;
    ensure(ok, format!("obj {obj:.6}, act {act:.6}, total {total:.6}"))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, c: anyhow::Result<Check>| {
        let line = match c {
            Ok(Ok(d)) => format!("PASS {n} {name}: {d}"),
            Ok(Err(d)) => format!("FAIL {n} {name}: {d}"),
            Err(e) => format!("FAIL {n} {name}: error {e:#}"),
        };
        failed += line.starts_with("FAIL") as usize;
        println!("{line}");
    };

    report(1, "gradient check", gradients());

    let synth = SyntheticConfig::default();
    let base = TrainConfig::default();
    let start = Instant::now();
    let full = (|| -> anyhow::Result<_> {
        let data = generate_synthetic(&synth)?;
        let (map, params) = run(&base, &data)?;
        Ok((data, map, params))
    })();
    let elapsed = start.elapsed();
    match full {
        Ok((data, map, params)) => {
            report(2, "planted prior recovery", Ok(prior_recovery(&synth, &params, elapsed)));
            report(3, "ablation ordering", ablation(&data, &base, map));
        }
        Err(e) => {
            report(2, "planted prior recovery", Err(anyhow::anyhow!("{e:#}")));
            report(3, "ablation ordering", Err(e));
        }
    }
    report(4, "supervision mixing", mixing());
    report(5, "oracle equivalence", Ok(oracles()));
    report(6, "metric fixtures", Ok(metric_fixtures()));
    report(7, "determinism", determinism());
    report(8, "loss fixtures", Ok(loss_fixtures()));

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
