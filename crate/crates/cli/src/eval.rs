use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cardiorecon::reconnet::{Model, ModelConfig, ModelParams};
use cardiorecon::tensor::checkpoint::Checkpoint;
use cardiorecon::training::{compare, comparison_csv, evaluate, EvalConfig, EvalReport};
use cardiorecon::viewgen::{parse_view_list, StandardView};
use serde_json::json;

use crate::train::{load_samples, SplitIds, TrainSnapshot};
use crate::util::{create_dir, load_config, provenance, write_snapshot};

#[derive(clap::Args)]
pub struct Args {
    /// Training output directory of the model to evaluate.
    #[arg(long)]
    run: PathBuf,
    /// Second run; adds a comparison CSV with percentage differences against it.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// `final` or `best` (highest validation IoU) weights.
    #[arg(long, default_value = "final")]
    weights: String,
    /// Manifest to evaluate on; defaults to the one the run was trained on.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// `;`-separated view sets, e.g. `a2c,a4c;a4c`; defaults to the run's training views.
    #[arg(long)]
    view_sets: Option<String>,
    /// Evaluation config (JSON); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated threshold sweep.
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
    /// Threshold of the comparison table.
    #[arg(long)]
    threshold: Option<f64>,
    /// Echoed into the outputs; defaults to the run's training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Defaults to `<out-root>/eval`.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Run {
    name: String,
    model: Model,
    snapshot: TrainSnapshot,
    dir: PathBuf,
}

fn load_run(dir: &Path, weights: &str) -> Result<Run> {
    let snap_path = dir.join("train.config.json");
    let text = std::fs::read_to_string(&snap_path).with_context(|| format!("no training run at {}", dir.display()))?;
    let snapshot: TrainSnapshot = serde_json::from_str(&text)?;
    let cfg = ModelConfig::read(dir.join("model.json"))?;
    let ck_path = match weights {
        "final" => dir.join("final.ckpt"),
        "best" => dir.join("best.ckpt"),
        w => anyhow::bail!("unknown weights {w:?} (final | best)"),
    };
    let ck = Checkpoint::read(&ck_path).with_context(|| format!("missing checkpoint {}", ck_path.display()))?;
    let params = ModelParams::from_checkpoint(&ck, &cfg)?;
    let name = format!("{}-{}", cfg.family, cfg.tier);
    Ok(Run { name, model: Model::from_parts(cfg, params)?, snapshot, dir: dir.to_path_buf() })
}

fn test_ids(run: &Run) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(run.dir.join("split.json")).context("reading split.json")?;
    let split: SplitIds = serde_json::from_str(&text)?;
    Ok(split.test)
}

fn eval_run(run: &Run, manifest: &Path, ids: &[String], sets: &[Vec<StandardView>], cfg: &EvalConfig) -> Result<EvalReport> {
    let mut needed: Vec<StandardView> = sets.iter().flatten().copied().collect();
    needed.sort();
    needed.dedup();
    let cases = load_samples(manifest, ids, &needed, run.snapshot.input)?;
    Ok(evaluate(&run.name, &run.model, &cases, sets, cfg)?)
}

pub fn run(a: Args, root: &Path) -> Result<()> {
    let out = a.out.unwrap_or_else(|| root.join("eval"));
    let mut cand = load_run(&a.run, &a.weights)?;
    let mut reference = a.reference.as_deref().map(|d| load_run(d, &a.weights)).transpose()?;
    if let Some(r) = reference.as_mut() {
        if r.name == cand.name {
            r.name.push_str("-ref");
            cand.name.push_str("-cand");
        }
    }
    let manifest = a.manifest.clone().unwrap_or_else(|| cand.snapshot.manifest.clone());
    let sets: Vec<Vec<StandardView>> = match &a.view_sets {
        Some(s) => s.split(';').map(parse_view_list).collect::<cardiorecon::Result<_>>()?,
        None => vec![cand.snapshot.views.clone()],
    };
    let mut cfg: EvalConfig = load_config(a.config.as_deref())?;
    if !a.thresholds.is_empty() {
        cfg.thresholds = a.thresholds.clone();
    }
    if let Some(t) = a.threshold {
        cfg.iou_threshold = t;
    }
    let sweep = cfg.sweep()?;
    let seed = a.seed.unwrap_or(cand.snapshot.train.seed);
    let ids = test_ids(&cand)?;

    create_dir(&out)?;
    let report = eval_run(&cand, &manifest, &ids, &sets, &cfg)?;
    std::fs::write(out.join("eval.csv"), provenance(seed) + &report.to_csv())?;
    print!("{}", report.to_csv());
    let mut snapshot = json!({
        "seed": seed,
        "run": a.run,
        "weights": a.weights,
        "manifest": manifest,
        "view_sets": sets.iter().map(|s| s.iter().map(|v| v.name()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "eval": cfg,
        "test_cases": ids,
    });

    if let Some(r) = &reference {
        let ref_report = eval_run(r, &manifest, &ids, &sets, &cfg)?;
        std::fs::write(out.join("eval_reference.csv"), provenance(seed) + &ref_report.to_csv())?;
        let t = if sweep.contains(&cfg.iou_threshold) { cfg.iou_threshold } else { sweep[0] };
        let rows = compare(&ref_report, &report, t)?;
        std::fs::write(out.join("comparison.csv"), provenance(seed) + &comparison_csv(&rows))?;
        print!("{}", comparison_csv(&rows));
        snapshot["reference"] = json!(r.dir);
        snapshot["comparison_threshold"] = json!(t);
    }
    write_snapshot(&out, "eval", &snapshot)
}
