//! Train the ablation variants on one synthetic benchmark and print test mAP
//! plus the learned prior next to the planted one.
//!
//! Usage: `cargo run --release --example ablation -- [synth.conf] [train.conf] [variant,...]`

use std::fs;

use wsod::data::{generate_synthetic, InferenceSample, SyntheticConfig};
use wsod::eval::evaluate;
use wsod::pipeline::{infer, infer_settings, train, TrainConfig};
use wsod::prior::PriorVariant;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let text = |i: usize| args.get(i).map(fs::read_to_string).transpose();
    let synth = SyntheticConfig::from_kv_text(&text(0)?.unwrap_or_default())?;
    let base = TrainConfig::from_kv_text(&text(1)?.unwrap_or_default())?;
    let data = generate_synthetic(&synth)?;
    let test: Vec<InferenceSample> = data.test.samples.iter().map(InferenceSample::from).collect();

    let variants = [
        ("full", base.clone()),
        ("object_only", TrainConfig { alpha_a: 0.0, ..base.clone() }),
        ("action_only", TrainConfig { alpha_o: 0.0, ..base.clone() }),
        ("center", TrainConfig { prior: PriorVariant::Center, ..base.clone() }),
        ("grid", TrainConfig { prior: PriorVariant::Grid, ..base.clone() }),
    ];
    let only: Option<Vec<String>> = args.get(2).map(|s| s.split(',').map(String::from).collect());
    for (name, cfg) in variants {
        if only.as_ref().is_some_and(|o| !o.iter().any(|x| x == name)) {
            continue;
        }
        let out = train(&cfg, &data.train, Some(&data.val))?;
        let params = out.checkpoint.params()?;
        let dets = infer(&params, &test, &infer_settings(&cfg));
        let r = evaluate(&dets, &data.test, &cfg.eval_settings());
        println!(
            "{name:<12} test mAP {:.4} CorLoc {:.4} (best epoch {}, val {:.4})",
            r.map,
            r.corloc_mean,
            out.checkpoint.epoch,
            out.checkpoint.val_map.unwrap_or(f64::NAN)
        );
        if name == "full" || name == "object_only" {
            for a in 0..synth.n_actions {
                let p = params.action_prior(a);
                let (k, _) = p.key_logits.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
                let z: f64 = p.key_logits.iter().map(|v| v.exp()).sum();
                let wk = p.key_logits[k].exp() / z;
                println!(
                    "  action {a}: key {k} w={wk:.2} (planted {}) mu ({:+.3}, {:+.3}) planted ({:+.3}, {:+.3}) sigma ({:.3}, {:.3})",
                    synth.planted_keypoints[a],
                    p.mu[0],
                    p.mu[1],
                    synth.planted_mu[a].x,
                    synth.planted_mu[a].y,
                    p.log_sigma[0].exp(),
                    p.log_sigma[1].exp()
                );
            }
        }
    }
    Ok(())
}
