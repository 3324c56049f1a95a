use std::path::{Path, PathBuf};

use anyhow::Result;
use cardiorecon::dataset::{CaseEntry, LandmarkSource, RunManifest};
use cardiorecon::geometry::{generate_phantom, PhantomParams};
use rayon::prelude::*;
use serde_json::json;

use crate::util::{case_failures, create_dir, load_config, write_snapshot};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, default_value_t = 8)]
    count: usize,
    /// Phantom shape parameters (JSON); flags override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    mesh_level: Option<u32>,
    /// Case `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to `<out-root>/phantoms`.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(a: Args, root: &Path) -> Result<()> {
    let out = a.out.unwrap_or_else(|| root.join("phantoms"));
    let mut params: PhantomParams = load_config(a.params.as_deref())?;
    if let Some(l) = a.mesh_level {
        params.mesh_level = l;
    }
    create_dir(&out)?;

    let results: Vec<Result<CaseEntry, (String, String)>> = (0..a.count)
        .into_par_iter()
        .map(|i| {
            let id = format!("case_{i:03}");
            let fail = |e: &dyn std::fmt::Display| (id.clone(), e.to_string());
            let (mesh, lm) = generate_phantom(&params, a.seed.wrapping_add(i as u64)).map_err(|e| fail(&e))?;
            std::fs::create_dir_all(out.join(&id)).map_err(|e| fail(&e))?;
            let entry = CaseEntry {
                id: id.clone(),
                mesh: PathBuf::from(&id).join("mesh.txt"),
                landmarks: PathBuf::from(&id).join("landmarks.json"),
                landmark_source: LandmarkSource::Phantom,
                views: Default::default(),
                voxels: None,
            };
            mesh.write(out.join(&entry.mesh)).map_err(|e| fail(&e))?;
            lm.write(out.join(&entry.landmarks)).map_err(|e| fail(&e))?;
            Ok(entry)
        })
        .collect();

    let mut manifest = RunManifest::new(a.seed);
    manifest.config.insert("phantom".into(), serde_json::to_value(&params)?);
    manifest.config.insert("count".into(), json!(a.count));
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(e) => manifest.cases.push(e),
            Err(f) => failures.push(f),
        }
    }
    manifest.write(out.join("manifest.json"))?;
    write_snapshot(&out, "phantoms", &json!({ "seed": a.seed, "count": a.count, "phantom": params }))?;
    println!("wrote {} phantoms to {}", manifest.cases.len(), out.display());
    case_failures(&failures, a.count)
}
