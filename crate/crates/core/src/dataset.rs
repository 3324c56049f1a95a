//! Run manifests and conversion of on-disk or synthesised cases into training samples.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{compute_landmarks, generate_phantom, phantom_labels, voxelize, LabeledMesh, LandmarkSet, PhantomParams, VoxelGrid};
use crate::tensor::Tensor;
use crate::training::{EvalCase, Sample};
use crate::viewgen::pgm::read_pgm;
use crate::viewgen::{build_view_set, PseudoUsParams, RasterParams, StandardView, ViewImage};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Image files of one view; paths are relative to the manifest directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewFiles {
    pub mask: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudo_us: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkSource {
    /// Written by the phantom generator from its construction.
    Phantom,
    /// Recomputed from the mesh (centres of mass and ray-cast apex).
    Computed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub id: String,
    pub mesh: PathBuf,
    pub landmarks: PathBuf,
    pub landmark_source: LandmarkSource,
    #[serde(default)]
    pub views: BTreeMap<StandardView, ViewFiles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voxels: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    /// Merged configuration of the commands that produced the manifest.
    #[serde(default)]
    pub config: BTreeMap<String, serde_json::Value>,
    pub cases: Vec<CaseEntry>,
}

impl RunManifest {
    pub fn new(seed: u64) -> Self {
        RunManifest { tool_version: TOOL_VERSION.to_string(), seed, config: BTreeMap::new(), cases: Vec::new() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks that every referenced file exists below `root`.
    pub fn check_paths(&self, root: &Path) -> Result<()> {
        for c in &self.cases {
            let mut paths = vec![&c.mesh, &c.landmarks];
            paths.extend(c.voxels.iter());
            for f in c.views.values() {
                paths.push(&f.mask);
                paths.extend(f.pseudo_us.iter());
            }
            for p in paths {
                if !root.join(p).is_file() {
                    return Err(Error::InvalidParams(format!("case {}: missing file {}", c.id, p.display())));
                }
            }
        }
        Ok(())
    }
}

/// Which rendering of a view feeds the network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewInput {
    #[default]
    Mask,
    PseudoUs,
}

/// `[1, H, W]` tensor of a PGM scaled to [0, 1].
pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let pgm = read_pgm(path)?;
    let scale = 1.0 / pgm.maxval.max(1) as f64;
    Tensor::new(vec![1, pgm.height, pgm.width], pgm.values.iter().map(|v| v * scale).collect())
}

/// `[R, R, R]` tensor of a cubic grid (x fastest, so the axes read `[z, y, x]`).
pub fn grid_tensor(grid: &VoxelGrid) -> Result<Tensor> {
    let [nx, ny, nz] = grid.dims;
    Tensor::new(vec![nz, ny, nx], grid.values.clone())
}

pub fn view_tensor(v: &ViewImage, input: ViewInput) -> Result<Tensor> {
    let (w, h) = (v.mask.width, v.mask.height);
    let data = match input {
        ViewInput::Mask => v.mask.pixels.iter().map(|&p| if p != 0 { 1.0 } else { 0.0 }).collect(),
        ViewInput::PseudoUs => v
            .pseudo_us
            .as_ref()
            .ok_or_else(|| Error::InvalidParams(format!("view {} has no pseudo-US rendering", v.view.name())))?
            .pixels
            .clone(),
    };
    Tensor::new(vec![1, h, w], data)
}

/// Loads the views of `case` in the order of `views` plus its ground truth.
pub fn load_case(root: &Path, case: &CaseEntry, views: &[StandardView], input: ViewInput) -> Result<EvalCase> {
    let mut imgs = BTreeMap::new();
    for &v in views {
        let files = case
            .views
            .get(&v)
            .ok_or_else(|| Error::InvalidParams(format!("case {} has no {} view", case.id, v.name())))?;
        let path = match input {
            ViewInput::Mask => &files.mask,
            ViewInput::PseudoUs => files
                .pseudo_us
                .as_ref()
                .ok_or_else(|| Error::InvalidParams(format!("case {} view {} has no pseudo-US image", case.id, v.name())))?,
        };
        imgs.insert(v, load_image(root.join(path))?);
    }
    let vox = case.voxels.as_ref().ok_or_else(|| Error::InvalidParams(format!("case {} has no ground-truth grid", case.id)))?;
    let target = grid_tensor(&VoxelGrid::read(root.join(vox))?)?;
    Ok(EvalCase { id: case.id.clone(), views: imgs, target })
}

pub fn to_sample(case: &EvalCase, views: &[StandardView]) -> Result<Sample> {
    let images = views
        .iter()
        .map(|v| case.views.get(v).cloned().ok_or_else(|| Error::InvalidParams(format!("case {} lacks {}", case.id, v.name()))))
        .collect::<Result<_>>()?;
    Ok(Sample { images, target: case.target.clone() })
}

/// Settings for turning a mesh into network inputs and ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseRecipe {
    pub raster: RasterParams,
    pub pseudo_us: Option<PseudoUsParams>,
    /// Ground-truth grid side.
    pub resolution: usize,
    /// Ray directions of the apex search when landmarks are recomputed.
    pub apex_directions: usize,
}

impl Default for CaseRecipe {
    fn default() -> Self {
        CaseRecipe {
            raster: RasterParams { width: 64, height: 64, mm_per_pixel: 2.5, ..Default::default() },
            pseudo_us: None,
            resolution: 32,
            apex_directions: crate::geometry::raycast::DEFAULT_APEX_DIRECTIONS,
        }
    }
}

/// In-memory product of the view pipeline for one mesh.
#[derive(Clone, Debug)]
pub struct CaseData {
    pub landmarks: LandmarkSet,
    pub views: Vec<ViewImage>,
    pub voxels: VoxelGrid,
}

/// Ground truth: union of every phantom structure inside the phantom bounds.
pub fn ground_truth(mesh: &LabeledMesh, params: &PhantomParams, resolution: usize) -> Result<VoxelGrid> {
    let labels: Vec<_> = phantom_labels().into_iter().filter(|l| mesh.structures.contains_key(l)).collect();
    voxelize(mesh, &labels, [resolution; 3], params.ground_truth_bounds())
}

/// Landmarks (recomputed from the mesh), views and ground truth of one mesh.
pub fn process_mesh(mesh: &LabeledMesh, params: &PhantomParams, views: &[StandardView], recipe: &CaseRecipe) -> Result<CaseData> {
    let (landmarks, _) = compute_landmarks(mesh, recipe.apex_directions)?;
    let imgs = build_view_set(mesh, &landmarks, views, &recipe.raster, recipe.pseudo_us.as_ref())?;
    let voxels = ground_truth(mesh, params, recipe.resolution)?;
    Ok(CaseData { landmarks, views: imgs, voxels })
}

/// Phantom `seed` run straight through the view pipeline.
pub fn synth_case(params: &PhantomParams, seed: u64, views: &[StandardView], recipe: &CaseRecipe) -> Result<CaseData> {
    let (mesh, _) = generate_phantom(params, seed)?;
    process_mesh(&mesh, params, views, recipe)
}

impl CaseData {
    pub fn to_eval_case(&self, id: impl Into<String>, input: ViewInput) -> Result<EvalCase> {
        let mut views = BTreeMap::new();
        for v in &self.views {
            views.insert(v.view, view_tensor(v, input)?);
        }
        Ok(EvalCase { id: id.into(), views, target: grid_tensor(&self.voxels)? })
    }
}
