use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use wsod::data::{generate_synthetic, load_dataset, load_inference_samples, save_dataset, split_path, SyntheticConfig};
use wsod::eval::{evaluate, Detection, EvalSettings};
use wsod::pipeline::{gradcheck, infer, infer_settings, train, Checkpoint, TrainConfig};

#[derive(Parser)]
#[command(name = "wsod", version, about = "Object detection trained from action labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark (train/val/test splits).
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and write the best checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding train (and optionally val) splits.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-epoch log as JSON.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Detect objects in a split with a trained checkpoint.
    Infer {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Score detections against a split's ground truth.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value_t = 0.5)]
        ap_iou: f64,
        #[arg(long, default_value_t = 0.5)]
        corloc_iou: f64,
    },
    /// Compare analytic and finite-difference gradients on random problems.
    Gradcheck {
        #[arg(long)]
        seed: u64,
        /// Number of consecutive seeds to check.
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
}

const GRADCHECK_TOLERANCE: f64 = 1e-4;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, out } => {
            let cfg = SyntheticConfig::from_kv_text(&read(&config)?)?;
            let data = generate_synthetic(&cfg)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for (name, ds) in [("train", &data.train), ("val", &data.val), ("test", &data.test)] {
                save_dataset(split_path(&out, name), ds)?;
            }
        }
        Command::Train { config, data, out, log } => {
            let cfg = TrainConfig::from_kv_text(&read(&config)?)?;
            let train_ds = load_dataset(split_path(&data, "train"))?;
            let val_path = split_path(&data, "val");
            let val = if val_path.exists() { Some(load_dataset(val_path)?) } else { None };
            let outcome = train(&cfg, &train_ds, val.as_ref())?;
            outcome.checkpoint.save(&out)?;
            if let Some(p) = log {
                write(&p, &serde_json::to_string_pretty(&outcome.log)?)?;
            }
        }
        Command::Infer { ckpt, data, out, split } => {
            let ck = Checkpoint::load(&ckpt)?;
            let cfg = ck.config()?;
            let params = ck.params()?;
            let samples = load_inference_samples(split_path(&data, &split))?;
            let dim = params.dims.feature_dim;
            for s in &samples {
                for f in &s.frames {
                    if let Some(p) = f.proposals.iter().find(|p| p.feature.len() != dim) {
                        bail!("sample {}: feature length {} does not match checkpoint ({dim})", s.id, p.feature.len());
                    }
                }
            }
            let dets = infer(&params, &samples, &infer_settings(&cfg));
            write(&out, &serde_json::to_string_pretty(&dets)?)?;
        }
        Command::Eval { data, dets, report, split, ap_iou, corloc_iou } => {
            let ds = load_dataset(split_path(&data, &split))?;
            let dets: Vec<Detection> =
                serde_json::from_str(&read(&dets)?).with_context(|| format!("parsing {}", dets.display()))?;
            if let Some(d) = dets.iter().find(|d| !d.score.is_finite()) {
                bail!("detection for sample {} has a non-finite score", d.sample_id);
            }
            let r = evaluate(&dets, &ds, &EvalSettings { ap_iou, corloc_iou });
            write(&report, &r.to_json())?;
            println!("mAP {:.4}  CorLoc {:.4}", r.map, r.corloc_mean);
        }
        Command::Gradcheck { seed, count } => {
            let mut worst: f64 = 0.0;
            for s in seed..seed + count {
                let r = gradcheck(s)?;
                for (group, err) in r.per_group() {
                    println!("seed {s} {group:<22} {err:.3e}");
                }
                worst = worst.max(r.max_rel_error);
            }
            println!("max relative error {worst:.3e}");
            if worst.is_nan() || worst >= GRADCHECK_TOLERANCE {
                bail!("gradient check failed: {worst:.3e} >= {GRADCHECK_TOLERANCE:e}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
