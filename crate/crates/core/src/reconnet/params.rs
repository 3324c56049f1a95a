use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Family, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::{Graph, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Init {
    /// Uniform in ±sqrt(3 / fan_in).
    FanIn(usize),
    Zeros,
    /// `1/V` on the spatial centre of every diagonal channel pair.
    ViewMean,
}

/// Names, shapes and initialisers of every parameter, in creation order.
pub(crate) fn param_layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let mut out = Vec::new();
    let conv = |out: &mut Vec<_>, name: &str, shape: Vec<usize>, fan_in: usize, zero: bool| {
        let co = if name.ends_with("transposed") { shape[1] } else { shape[0] };
        let base = name.trim_end_matches("transposed").trim_end_matches('/');
        let init = if zero { Init::Zeros } else { Init::FanIn(fan_in) };
        out.push((format!("{base}/weight"), shape, init));
        out.push((format!("{base}/bias"), vec![co], Init::Zeros));
    };

    let k = cfg.encoder_kernel;
    let mut c = cfg.image_channels;
    for (i, &w) in cfg.encoder_widths.iter().enumerate() {
        conv(&mut out, &format!("encoder/conv{i}"), vec![w, c, k, k], c * k * k, false);
        c = w;
    }
    let cl = cfg.latent[0];
    if cfg.family == Family::Efficient {
        let v = cfg.num_views;
        out.push(("viewfuse/weight".into(), vec![cl, cl, v, 3, 3], Init::ViewMean));
        out.push(("viewfuse/bias".into(), vec![cl], Init::Zeros));
    }
    let dk = cfg.decoder_kernel;
    let mut c = cl;
    for (i, &w) in cfg.decoder_widths.iter().enumerate() {
        let fan = (c * dk * dk * dk / 8).max(1);
        conv(&mut out, &format!("decoder/up{i}/transposed"), vec![c, w, dk, dk, dk], fan, false);
        c = w;
    }
    let hk = cfg.head_kernel;
    conv(&mut out, "decoder/head", vec![1, c, hk, hk, hk], c * hk.pow(3), false);
    if cfg.family == Family::Baseline {
        conv(&mut out, "scorer", vec![1, c, 3, 3, 3], c * 27, false);
    }
    if cfg.refiner_enabled {
        let r = cfg.refiner_width;
        conv(&mut out, "refiner/in", vec![r, 1, 3, 3, 3], 27, false);
        conv(&mut out, "refiner/down", vec![2 * r, r, 4, 4, 4], r * 64, false);
        conv(&mut out, "refiner/up/transposed", vec![2 * r, r, 4, 4, 4], 2 * r * 8, false);
        conv(&mut out, "refiner/out", vec![1, r, 3, 3, 3], r * 27, true);
    }
    out
}

/// Named parameter tensors of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub tensors: BTreeMap<String, Tensor>,
}

/// Graph handles of bound parameters.
pub struct BoundParams(pub BTreeMap<String, Var>);

impl BoundParams {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.0.get(name).copied().ok_or_else(|| Error::MissingParam(name.to_string()))
    }
}

impl ModelParams {
    /// Seed-deterministic initialisation.
    pub fn init(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut tensors = BTreeMap::new();
        for (name, shape, init) in param_layout(cfg) {
            let t = match init {
                Init::Zeros => Tensor::zeros(&shape),
                Init::FanIn(fan) => {
                    let b = (3.0 / fan as f64).sqrt();
                    Tensor::uniform(&shape, -b, b, &mut rng)
                }
                Init::ViewMean => {
                    let (c, v) = (shape[0], shape[2]);
                    let mut t = Tensor::zeros(&shape);
                    for ch in 0..c {
                        for d in 0..v {
                            // [co, ci, d, 1, 1]
                            let idx = (((ch * c + ch) * v + d) * 3 + 1) * 3 + 1;
                            t.data_mut()[idx] = 1.0 / v as f64;
                        }
                    }
                    t
                }
            };
            tensors.insert(name, t);
        }
        Ok(ModelParams { tensors })
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors.get(name).ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn count(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Places every tensor on the graph, as leaves when `trainable`.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundParams {
        BoundParams(
            self.tensors
                .iter()
                .map(|(n, t)| (n.clone(), if trainable { g.leaf(t.clone()) } else { g.constant(t.clone()) }))
                .collect(),
        )
    }

    /// Checks names and shapes against the layout implied by `cfg`.
    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        let layout = param_layout(cfg);
        for (name, shape, _) in &layout {
            let t = self.get(name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch(format!("parameter {name}: {:?}, expected {shape:?}", t.shape())));
            }
        }
        if layout.len() != self.tensors.len() {
            let extra: Vec<_> = self.tensors.keys().filter(|k| !layout.iter().any(|(n, _, _)| n == *k)).collect();
            return Err(Error::ShapeMismatch(format!("unexpected parameters {extra:?}")));
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        for (n, t) in &self.tensors {
            ck.push(n.clone(), t.clone());
        }
        ck
    }

    /// Reads the tensors named by `cfg`'s layout, ignoring any other records.
    pub fn from_checkpoint(ck: &Checkpoint, cfg: &ModelConfig) -> Result<Self> {
        let mut tensors = BTreeMap::new();
        for (name, _, _) in param_layout(cfg) {
            tensors.insert(name.clone(), ck.require(&name)?.clone());
        }
        let p = ModelParams { tensors };
        p.check(cfg)?;
        Ok(p)
    }
}
