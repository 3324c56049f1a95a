use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cardiorecon::dataset::{process_mesh, CaseEntry, CaseRecipe, LandmarkSource, RunManifest, ViewFiles};
use cardiorecon::geometry::{LabeledMesh, PhantomParams};
use cardiorecon::viewgen::pgm::{write_gray, write_mask};
use cardiorecon::viewgen::{parse_view_list, PseudoUsParams, StandardView};
use rayon::prelude::*;
use serde_json::json;

use crate::util::{case_failures, load_config, write_snapshot};

#[derive(clap::Args)]
pub struct Args {
    /// Manifest written by `phantoms`; updated in place.
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated view names or `all`.
    #[arg(long, default_value = "all")]
    views: String,
    /// Case recipe (raster, pseudo-US, resolution) as JSON; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ground-truth grid side.
    #[arg(long)]
    resolution: Option<usize>,
    /// Square image side in pixels.
    #[arg(long)]
    image_size: Option<usize>,
    #[arg(long)]
    mm_per_pixel: Option<f64>,
    #[arg(long)]
    apex_directions: Option<usize>,
    /// Also render pseudo-ultrasound images.
    #[arg(long)]
    pseudo_us: bool,
    /// Pseudo-US noise seed (case `i` uses `seed + i`); defaults to the manifest seed.
    #[arg(long)]
    seed: Option<u64>,
}

struct Job<'a> {
    root: &'a Path,
    views: &'a [StandardView],
    recipe: &'a CaseRecipe,
    phantom: &'a PhantomParams,
}

fn process_case(job: &Job, entry: &CaseEntry, seed: u64) -> cardiorecon::Result<CaseEntry> {
    let mesh = LabeledMesh::read(job.root.join(&entry.mesh))?;
    let mut recipe = job.recipe.clone();
    if let Some(us) = recipe.pseudo_us.as_mut() {
        us.seed = seed;
    }
    let data = process_mesh(&mesh, job.phantom, job.views, &recipe)?;
    let dir = PathBuf::from(&entry.id);
    std::fs::create_dir_all(job.root.join(&dir))?;
    let mut out = entry.clone();
    out.landmarks = dir.join("landmarks_computed.json");
    out.landmark_source = LandmarkSource::Computed;
    data.landmarks.write(job.root.join(&out.landmarks))?;
    for v in &data.views {
        let mask = dir.join(format!("{}.pgm", v.view.name()));
        write_mask(job.root.join(&mask), &v.mask)?;
        let pseudo_us = match &v.pseudo_us {
            Some(img) => {
                let p = dir.join(format!("{}_us.pgm", v.view.name()));
                write_gray(job.root.join(&p), img, Some(recipe.raster.mm_per_pixel))?;
                Some(p)
            }
            None => None,
        };
        out.views.insert(v.view, ViewFiles { mask, pseudo_us });
    }
    let vox = dir.join("gt.vox");
    data.voxels.write(job.root.join(&vox))?;
    out.voxels = Some(vox);
    Ok(out)
}

pub fn run(a: Args) -> Result<()> {
    let mut manifest = RunManifest::read(&a.manifest).with_context(|| format!("reading manifest {}", a.manifest.display()))?;
    let root = a.manifest.parent().unwrap_or(Path::new("."));
    let views = parse_view_list(&a.views)?;
    anyhow::ensure!(!views.is_empty(), "no views requested");

    let mut recipe: CaseRecipe = load_config(a.config.as_deref())?;
    if let Some(r) = a.resolution {
        recipe.resolution = r;
    }
    if let Some(s) = a.image_size {
        recipe.raster.width = s;
        recipe.raster.height = s;
    }
    if let Some(m) = a.mm_per_pixel {
        recipe.raster.mm_per_pixel = m;
    }
    if let Some(n) = a.apex_directions {
        recipe.apex_directions = n;
    }
    if a.pseudo_us && recipe.pseudo_us.is_none() {
        recipe.pseudo_us = Some(PseudoUsParams::default_for(recipe.raster.width, recipe.raster.height));
    }
    let seed = a.seed.unwrap_or(manifest.seed);
    let phantom: PhantomParams = match manifest.config.get("phantom") {
        Some(v) => serde_json::from_value(v.clone())?,
        None => PhantomParams::default(),
    };

    let job = Job { root, views: &views, recipe: &recipe, phantom: &phantom };
    let results: Vec<_> = manifest
        .cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| process_case(&job, c, seed.wrapping_add(i as u64)).map_err(|e| (c.id.clone(), e.to_string())))
        .collect();
    let mut failures = Vec::new();
    for (entry, r) in manifest.cases.iter_mut().zip(results) {
        match r {
            Ok(e) => *entry = e,
            Err(f) => failures.push(f),
        }
    }
    let names: Vec<&str> = views.iter().map(|v| v.name()).collect();
    let snapshot = json!({ "seed": seed, "views": names, "recipe": recipe });
    manifest.config.insert("views".into(), snapshot.clone());
    manifest.write(&a.manifest)?;
    write_snapshot(root, "views", &snapshot)?;
    println!("{} of {} cases processed ({} views each)", manifest.cases.len() - failures.len(), manifest.cases.len(), views.len());
    case_failures(&failures, manifest.cases.len())
}
