use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cardiorecon::dataset::{load_case, to_sample, RunManifest, ViewInput};
use cardiorecon::reconnet::{Family, Model, ModelConfig, Tier};
use cardiorecon::tensor::checkpoint::Checkpoint;
use cardiorecon::training::{epoch_row, split_dataset, train_from, Sample, TrainConfig, TrainState, METRICS_HEADER};
use cardiorecon::viewgen::{parse_view_list, StandardView};
use serde::{Deserialize, Serialize};

use crate::util::{create_dir, load_config, provenance, write_snapshot};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    manifest: PathBuf,
    /// Full model configuration (JSON); otherwise a preset from family/tier/resolution.
    #[arg(long)]
    model_config: Option<PathBuf>,
    #[arg(long, default_value = "efficient")]
    family: Family,
    #[arg(long, default_value = "fast")]
    tier: Tier,
    /// Output grid side of the preset (8, 16, 32 or 64).
    #[arg(long, default_value_t = 16)]
    resolution: usize,
    /// Training configuration (JSON); flags override it.
    #[arg(long)]
    train_config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Seeds the split, the weight initialisation and the epoch shuffles.
    #[arg(long)]
    seed: Option<u64>,
    /// Input views in model order.
    #[arg(long, default_value = "a2c,a4c")]
    views: String,
    /// `mask` or `pseudo_us`.
    #[arg(long, default_value = "mask")]
    input: String,
    /// Continue from `state.ckpt` in the output directory.
    #[arg(long)]
    resume: bool,
    /// Defaults to `<out-root>/train`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything `eval` needs to reproduce the data side of a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSnapshot {
    pub manifest: PathBuf,
    pub views: Vec<StandardView>,
    pub input: ViewInput,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Serialize, Deserialize)]
pub struct SplitIds {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

pub fn parse_input(s: &str) -> Result<ViewInput> {
    match s {
        "mask" => Ok(ViewInput::Mask),
        "pseudo_us" | "pseudo-us" => Ok(ViewInput::PseudoUs),
        _ => bail!("unknown input {s:?} (mask | pseudo_us)"),
    }
}

/// Loads the manifest cases with the given views; any case that fails is reported
/// and the whole load is an error.
pub fn load_samples(manifest_path: &Path, ids: &[String], views: &[StandardView], input: ViewInput) -> Result<Vec<cardiorecon::training::EvalCase>> {
    let manifest = RunManifest::read(manifest_path).with_context(|| format!("reading manifest {}", manifest_path.display()))?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    for id in ids {
        let Some(entry) = manifest.cases.iter().find(|c| &c.id == id) else {
            failures.push((id.clone(), "not in manifest".to_string()));
            continue;
        };
        match load_case(root, entry, views, input) {
            Ok(c) => cases.push(c),
            Err(e) => failures.push((id.clone(), e.to_string())),
        }
    }
    crate::util::case_failures(&failures, ids.len())?;
    Ok(cases)
}

fn check_shapes(cfg: &ModelConfig, s: &Sample) -> Result<()> {
    let want = [cfg.image_channels, cfg.image_size[0], cfg.image_size[1]];
    if let Some(img) = s.images.iter().find(|i| i.shape() != want) {
        bail!("view images are {:?} but the model expects {want:?}", img.shape());
    }
    let r = cfg.resolution();
    if s.target.shape() != [r, r, r] {
        bail!("ground truth is {:?} but the model outputs {r}³", s.target.shape());
    }
    Ok(())
}

fn best_from_csv(path: &Path) -> Option<f64> {
    let text = std::fs::read_to_string(path).ok()?;
    text.lines()
        .filter(|l| !l.starts_with('#') && *l != METRICS_HEADER)
        .filter_map(|l| l.split(',').nth(2)?.parse::<f64>().ok())
        .fold(None, |b: Option<f64>, v| Some(b.map_or(v, |b| b.max(v))))
}

pub fn run(a: Args, root: &Path) -> Result<()> {
    let out = a.out.unwrap_or_else(|| root.join("train"));
    let views = parse_view_list(&a.views)?;
    let input = parse_input(&a.input)?;

    let mut tc: TrainConfig = load_config(a.train_config.as_deref())?;
    if let Some(e) = a.epochs {
        tc.epochs = e;
    }
    if let Some(lr) = a.lr {
        tc.learning_rate = lr;
    }
    if let Some(b) = a.batch_size {
        tc.batch_size = b;
    }
    if let Some(s) = a.seed {
        tc.seed = s;
    }
    tc.validate()?;
    let cfg = match &a.model_config {
        Some(p) => ModelConfig::read(p).with_context(|| format!("reading model config {}", p.display()))?.with_seed(tc.seed),
        None => ModelConfig::preset(a.family, a.tier, views.len(), a.resolution)?.with_seed(tc.seed),
    };
    cfg.validate()?;
    if cfg.num_views != views.len() {
        bail!("model expects {} views but {} were requested ({})", cfg.num_views, views.len(), a.views);
    }

    let manifest = RunManifest::read(&a.manifest).with_context(|| format!("reading manifest {}", a.manifest.display()))?;
    let split = split_dataset(manifest.cases.len(), tc.split_ratios, tc.seed)?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| manifest.cases[i].id.clone()).collect::<Vec<_>>();
    let split_ids = SplitIds { seed: tc.seed, train: ids(&split.train), val: ids(&split.val), test: ids(&split.test) };
    let to_samples = |ids: &[String]| -> Result<Vec<Sample>> {
        load_samples(&a.manifest, ids, &views, input)?.iter().map(|c| Ok(to_sample(c, &views)?)).collect()
    };
    let train_set = to_samples(&split_ids.train)?;
    let val_set = to_samples(&split_ids.val)?;
    for s in train_set.iter().chain(&val_set) {
        check_shapes(&cfg, s)?;
    }

    create_dir(&out)?;
    let state_path = out.join("state.ckpt");
    let metrics_path = out.join("metrics.csv");
    let (mut state, mut csv, mut best) = if a.resume && state_path.is_file() {
        let state = TrainState::from_checkpoint(&Checkpoint::read(&state_path)?, &cfg).context("resuming from state.ckpt")?;
        let csv = std::fs::read_to_string(&metrics_path).context("resuming needs the previous metrics.csv")?;
        (state, csv, best_from_csv(&metrics_path))
    } else {
        (TrainState::fresh(&cfg)?, format!("{}{METRICS_HEADER}\n", provenance(tc.seed)), None)
    };
    if state.epochs_done >= tc.epochs {
        println!("already trained for {} epochs", state.epochs_done);
    }

    let snapshot = TrainSnapshot { manifest: a.manifest.clone(), views: views.clone(), input, model: cfg.clone(), train: tc.clone() };
    write_snapshot(&out, "train", &snapshot)?;
    cfg.write(out.join("model.json"))?;
    std::fs::write(out.join("split.json"), serde_json::to_string_pretty(&split_ids)? + "\n")?;

    let metrics = train_from(&cfg, &tc, &mut state, &train_set, &val_set, |em, st| {
        csv.push_str(&epoch_row(em));
        std::fs::write(&metrics_path, &csv)?;
        st.to_checkpoint().write(&state_path)?;
        if let Some(v) = em.val_iou {
            if best.map_or(true, |b| v > b) {
                best = Some(v);
                st.params.to_checkpoint().write(&out.join("best.ckpt"))?;
            }
        }
        Ok(())
    })?;
    std::fs::write(&metrics_path, &csv)?;
    state.params.to_checkpoint().write(&out.join("final.ckpt"))?;
    let model = Model::from_parts(cfg, state.params)?;
    let train_iou = cardiorecon::training::mean_iou(&model, &train_set, tc.iou_threshold)?;
    println!(
        "trained {} epochs (seed {}): final loss {:.5}, train IoU {train_iou:.4}, best val IoU {}",
        state.epochs_done,
        tc.seed,
        metrics.last().map_or(f64::NAN, |e| e.train_loss),
        best.map_or("-".to_string(), |b| format!("{b:.4}")),
    );
    Ok(())
}
