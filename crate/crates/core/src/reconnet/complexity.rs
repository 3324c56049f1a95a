use serde::{Deserialize, Serialize};

use super::config::{Family, ModelConfig, Tier};
use crate::error::Result;
use crate::tensor::{layer_cost, LayerCost, LayerSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    Encoder,
    ViewFusion,
    Decoder,
    Scorer,
    Refiner,
}

impl Module {
    pub const ALL: [Module; 5] = [Module::Encoder, Module::ViewFusion, Module::Decoder, Module::Scorer, Module::Refiner];

    pub fn name(self) -> &'static str {
        match self {
            Module::Encoder => "encoder",
            Module::ViewFusion => "view_fusion",
            Module::Decoder => "decoder",
            Module::Scorer => "scorer",
            Module::Refiner => "refiner",
        }
    }
}

/// One layer the forward pass instantiates, executed `count` times with shared weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedLayer {
    pub module: Module,
    pub spec: LayerSpec,
    pub count: u64,
}

/// Every layer of `cfg`'s forward pass at `cfg.num_views` input views.
pub fn layer_plan(cfg: &ModelConfig) -> Result<Vec<PlannedLayer>> {
    cfg.validate()?;
    let v = cfg.num_views as u64;
    let mut plan = Vec::new();
    let mut add = |module, spec, count| plan.push(PlannedLayer { module, spec, count });

    let [mut h, mut w] = cfg.image_size;
    let mut c = cfg.image_channels;
    let k = cfg.encoder_kernel;
    for &wd in &cfg.encoder_widths {
        add(Module::Encoder, LayerSpec::conv2d(c, wd, [h, w], k, 1, k / 2)?, v);
        add(Module::Encoder, LayerSpec::elementwise(wd, [1, h, w]), v);
        add(Module::Encoder, LayerSpec::maxpool(wd, [1, h, w], 2, 2, false)?, v);
        c = wd;
        h /= 2;
        w /= 2;
    }

    let [cl, d, lh, lw] = cfg.latent;
    if cfg.family == Family::Efficient {
        let n = cfg.num_views;
        add(Module::ViewFusion, LayerSpec::conv3d(cl, cl, [n, d * lh, lw], [n, 3, 3], [1; 3], [0, 1, 1])?, 1);
    }

    let branches = match cfg.family {
        Family::Baseline => v,
        Family::Efficient => 1,
    };
    let sides = cfg.decoder_sides();
    let dk = cfg.decoder_kernel;
    let mut c = cl;
    for (i, &wd) in cfg.decoder_widths.iter().enumerate() {
        let spec = LayerSpec::conv_transpose3d(c, wd, [sides[i]; 3], [dk; 3], [2; 3], [cfg.decoder_padding; 3])?;
        add(Module::Decoder, spec, branches);
        add(Module::Decoder, LayerSpec::elementwise(wd, [sides[i + 1]; 3]), branches);
        c = wd;
    }
    let r = cfg.resolution();
    let hk = cfg.head_kernel;
    add(Module::Decoder, LayerSpec::conv3d(c, 1, [r; 3], [hk; 3], [1; 3], [hk / 2; 3])?, branches);
    add(Module::Decoder, LayerSpec::elementwise(1, [r; 3]), branches);

    if cfg.family == Family::Baseline {
        add(Module::Scorer, LayerSpec::conv3d(c, 1, [r; 3], [3; 3], [1; 3], [1; 3])?, v);
        // softmax weights and the weighted sum
        add(Module::Scorer, LayerSpec::elementwise(1, [r; 3]), 2 * v);
    }

    if cfg.refiner_enabled {
        let rw = cfg.refiner_width;
        add(Module::Refiner, LayerSpec::conv3d(1, rw, [r; 3], [3; 3], [1; 3], [1; 3])?, 1);
        add(Module::Refiner, LayerSpec::elementwise(rw, [r; 3]), 1);
        add(Module::Refiner, LayerSpec::conv3d(rw, 2 * rw, [r; 3], [4; 3], [2; 3], [1; 3])?, 1);
        add(Module::Refiner, LayerSpec::elementwise(2 * rw, [r / 2; 3]), 1);
        add(Module::Refiner, LayerSpec::conv_transpose3d(2 * rw, rw, [r / 2; 3], [4; 3], [2; 3], [1; 3])?, 1);
        add(Module::Refiner, LayerSpec::elementwise(rw, [r; 3]), 2);
        add(Module::Refiner, LayerSpec::conv3d(rw, 1, [r; 3], [3; 3], [1; 3], [1; 3])?, 1);
        add(Module::Refiner, LayerSpec::elementwise(1, [r; 3]), 3);
    }
    Ok(plan)
}

/// Parameter and MAC breakdown of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub family: Family,
    pub tier: Tier,
    pub views: usize,
    pub resolution: usize,
    pub encoder: LayerCost,
    pub view_fusion: LayerCost,
    pub decoder: LayerCost,
    pub scorer: LayerCost,
    pub refiner: LayerCost,
    pub total: LayerCost,
}

impl ComplexityReport {
    pub fn module(&self, m: Module) -> LayerCost {
        match m {
            Module::Encoder => self.encoder,
            Module::ViewFusion => self.view_fusion,
            Module::Decoder => self.decoder,
            Module::Scorer => self.scorer,
            Module::Refiner => self.refiner,
        }
    }

    /// `module,params,macs` rows followed by a `total` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("module,params,macs\n");
        for m in Module::ALL {
            let c = self.module(m);
            s.push_str(&format!("{},{},{}\n", m.name(), c.params, c.macs));
        }
        s.push_str(&format!("total,{},{}\n", self.total.params, self.total.macs));
        s
    }
}

/// Sums parameters (once per shared layer) and MACs (per execution) over [`layer_plan`].
pub fn report_complexity(cfg: &ModelConfig) -> Result<ComplexityReport> {
    let mut per = [LayerCost::default(); 5];
    for layer in layer_plan(cfg)? {
        let c = layer_cost(&layer.spec)?;
        let slot = &mut per[Module::ALL.iter().position(|&m| m == layer.module).expect("listed")];
        *slot = *slot + LayerCost { params: c.params, macs: c.macs * layer.count, ops: c.ops * layer.count };
    }
    let total = per.iter().copied().sum();
    let [encoder, view_fusion, decoder, scorer, refiner] = per;
    Ok(ComplexityReport {
        family: cfg.family,
        tier: cfg.tier,
        views: cfg.num_views,
        resolution: cfg.resolution(),
        encoder,
        view_fusion,
        decoder,
        scorer,
        refiner,
        total,
    })
}
