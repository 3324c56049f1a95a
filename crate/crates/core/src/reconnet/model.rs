use super::config::{Family, ModelConfig};
use super::params::{BoundParams, ModelParams};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};

/// Output of one decoder branch.
#[derive(Clone, Copy, Debug)]
pub struct Decoded {
    /// `[1, R, R, R]` occupancy in (0, 1).
    pub volume: Var,
    /// Last hidden feature map, input of the baseline fusion scorer.
    pub features: Var,
}

fn conv_block2d(g: &mut Graph, p: &BoundParams, name: &str, x: Var, k: usize, alpha: f64) -> Result<Var> {
    let y = g.conv2d(x, p.get(&format!("{name}/weight"))?, Some(p.get(&format!("{name}/bias"))?), 1, k / 2)?;
    let y = g.elu(y, alpha)?;
    g.maxpool(y, 2, 2)
}

fn conv3(g: &mut Graph, p: &BoundParams, name: &str, x: Var, stride: usize, pad: usize) -> Result<Var> {
    g.conv3d(x, p.get(&format!("{name}/weight"))?, Some(p.get(&format!("{name}/bias"))?), [stride; 3], [pad; 3])
}

fn up3(g: &mut Graph, p: &BoundParams, name: &str, x: Var, pad: usize) -> Result<Var> {
    g.conv_transpose3d(x, p.get(&format!("{name}/weight"))?, Some(p.get(&format!("{name}/bias"))?), [2; 3], [pad; 3])
}

/// Shared-weight 2D encoder applied to every view, reshaped into the 3D latent grid.
pub fn encode(g: &mut Graph, cfg: &ModelConfig, p: &BoundParams, images: &[Var]) -> Result<Vec<Var>> {
    let expect = [cfg.image_channels, cfg.image_size[0], cfg.image_size[1]];
    images
        .iter()
        .map(|&img| {
            if g.shape(img) != expect {
                return Err(Error::ShapeMismatch(format!("input view {:?}, expected {expect:?}", g.shape(img))));
            }
            let mut x = img;
            for i in 0..cfg.encoder_widths.len() {
                x = conv_block2d(g, p, &format!("encoder/conv{i}"), x, cfg.encoder_kernel, cfg.elu_alpha)?;
            }
            g.reshape(x, &cfg.latent)
        })
        .collect()
}

/// Mean-pools `n > v` latents into `v` contiguous groups; view `i` joins group `⌊i·v/n⌋`.
fn pool_views(g: &mut Graph, latents: &[Var], v: usize) -> Result<Vec<Var>> {
    let n = latents.len();
    let mut out = Vec::with_capacity(v);
    for grp in 0..v {
        let members: Vec<Var> = (0..n).filter(|i| i * v / n == grp).map(|i| latents[i]).collect();
        if members.len() == 1 {
            out.push(members[0]);
            continue;
        }
        let s = g.stack(&members)?;
        let s = g.sum0(s)?;
        out.push(g.scale(s, 1.0 / members.len() as f64)?);
    }
    Ok(out)
}

/// Stacks the view latents as `[C_l, V, D·H, W]` and collapses the view axis with one
/// 3D convolution of depth `V` (3×3 spatial, padding 1). More views than the kernel depth
/// are mean-pooled in groups first; fewer are an error.
pub fn fuse_views_efficient(g: &mut Graph, cfg: &ModelConfig, p: &BoundParams, latents: &[Var]) -> Result<Var> {
    let v = cfg.num_views;
    if latents.len() < v {
        return Err(Error::ViewCountMismatch { expected: v, got: latents.len() });
    }
    let latents = if latents.len() > v { pool_views(g, latents, v)? } else { latents.to_vec() };
    let [c, d, h, w] = cfg.latent;
    let flat = latents.iter().map(|&l| g.reshape(l, &[c, d * h, w])).collect::<Result<Vec<_>>>()?;
    let stacked = g.stack(&flat)?; // [V, C, DH, W]
    let stacked = g.swap01(stacked)?; // [C, V, DH, W]
    let fused = g.conv3d(stacked, p.get("viewfuse/weight")?, Some(p.get("viewfuse/bias")?), [1; 3], [0, 1, 1])?;
    g.reshape(fused, &cfg.latent)
}

/// Upsampling decoder producing one `[1, R, R, R]` occupancy volume.
pub fn decode(g: &mut Graph, cfg: &ModelConfig, p: &BoundParams, latent: Var) -> Result<Decoded> {
    if g.shape(latent) != cfg.latent {
        return Err(Error::ShapeMismatch(format!("latent {:?}, expected {:?}", g.shape(latent), cfg.latent)));
    }
    let mut x = latent;
    for i in 0..cfg.decoder_widths.len() {
        x = up3(g, p, &format!("decoder/up{i}"), x, cfg.decoder_padding)?;
        x = g.elu(x, cfg.elu_alpha)?;
    }
    let logits = conv3(g, p, "decoder/head", x, 1, cfg.head_kernel / 2)?;
    Ok(Decoded { volume: g.sigmoid(logits)?, features: x })
}

/// Per-voxel softmax across views of the score maps, then the weighted sum of volumes.
pub fn context_fusion(g: &mut Graph, volumes: &[Var], scores: &[Var]) -> Result<Var> {
    if volumes.is_empty() || volumes.len() != scores.len() {
        return Err(Error::ShapeMismatch(format!("{} volumes vs {} score maps", volumes.len(), scores.len())));
    }
    let vs = g.stack(volumes)?;
    let ss = g.stack(scores)?;
    if g.shape(vs) != g.shape(ss) {
        return Err(Error::ShapeMismatch(format!("volumes {:?} vs scores {:?}", g.shape(vs), g.shape(ss))));
    }
    let wts = g.softmax0(ss)?;
    let weighted = g.mul(wts, vs)?;
    g.sum0(weighted)
}

/// Lower/upper bound applied before taking the logit of a fused volume.
pub const REFINE_CLAMP: f64 = 1e-7;

/// Residual 3D encoder-decoder acting on logits: `σ(logit(v) + offset(v))`.
pub fn refine(g: &mut Graph, cfg: &ModelConfig, p: &BoundParams, volume: Var) -> Result<Var> {
    if !cfg.refiner_enabled {
        return Err(Error::RefinerDisabled);
    }
    let a = conv3(g, p, "refiner/in", volume, 1, 1)?;
    let a = g.elu(a, cfg.elu_alpha)?;
    let b = conv3(g, p, "refiner/down", a, 2, 1)?;
    let b = g.elu(b, cfg.elu_alpha)?;
    let u = up3(g, p, "refiner/up", b, 1)?;
    let u = g.add(u, a)?;
    let u = g.elu(u, cfg.elu_alpha)?;
    let offset = conv3(g, p, "refiner/out", u, 1, 1)?;
    let clamped = g.clamp(volume, REFINE_CLAMP, 1.0 - REFINE_CLAMP)?;
    let logit = g.logit(clamped)?;
    let z = g.add(logit, offset)?;
    g.sigmoid(z)
}

/// Full network on graph-resident views; returns `[R, R, R]`.
pub fn forward(g: &mut Graph, cfg: &ModelConfig, p: &BoundParams, images: &[Var]) -> Result<Var> {
    if images.is_empty() {
        return Err(Error::ViewCountMismatch { expected: cfg.num_views, got: 0 });
    }
    let latents = encode(g, cfg, p, images)?;
    let fused = match cfg.family {
        Family::Efficient => {
            let latent = fuse_views_efficient(g, cfg, p, &latents)?;
            decode(g, cfg, p, latent)?.volume
        }
        Family::Baseline => {
            let mut volumes = Vec::with_capacity(latents.len());
            let mut scores = Vec::with_capacity(latents.len());
            for &l in &latents {
                let d = decode(g, cfg, p, l)?;
                volumes.push(d.volume);
                scores.push(conv3(g, p, "scorer", d.features, 1, 1)?);
            }
            context_fusion(g, &volumes, &scores)?
        }
    };
    let out = if cfg.refiner_enabled { refine(g, cfg, p, fused)? } else { fused };
    let r = cfg.resolution();
    g.reshape(out, &[r, r, r])
}

/// A configuration with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        let params = ModelParams::init(&config)?;
        Ok(Model { config, params })
    }

    pub fn from_parts(config: ModelConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        params.check(&config)?;
        Ok(Model { config, params })
    }

    /// Inference on `[C, H, W]` views; returns the `[R, R, R]` occupancy.
    pub fn predict(&self, images: &[Tensor]) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let xs: Vec<Var> = images.iter().map(|t| g.constant(t.clone())).collect();
        let out = forward(&mut g, &self.config, &p, &xs)?;
        Ok(g.value(out).clone())
    }
}
