use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Per-view decoders merged by context-aware fusion.
    Baseline,
    /// View-collapsing 3D convolution in front of a single decoder.
    Efficient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Fast,
    Accurate,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Baseline => "baseline",
            Family::Efficient => "efficient",
        })
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Tier::Fast => "fast",
            Tier::Accurate => "accurate",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Family::Baseline),
            "efficient" => Ok(Family::Efficient),
            _ => Err(Error::Parse(format!("unknown model family {s:?} (baseline | efficient)"))),
        }
    }
}

impl std::str::FromStr for Tier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fast" => Ok(Tier::Fast),
            "accurate" => Ok(Tier::Accurate),
            _ => Err(Error::Parse(format!("unknown tier {s:?} (fast | accurate)"))),
        }
    }
}

/// Architecture of one network variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: Family,
    pub tier: Tier,
    pub num_views: usize,
    /// `[H, W]` of every input view.
    pub image_size: [usize; 2],
    pub image_channels: usize,
    /// One conv → ELU → maxpool block per entry.
    pub encoder_widths: Vec<usize>,
    pub encoder_kernel: usize,
    /// `[C_l, D_l, H_l, W_l]`; must hold exactly the encoder output elements.
    pub latent: [usize; 4],
    /// One stride-2 transposed conv → ELU block per entry.
    pub decoder_widths: Vec<usize>,
    pub decoder_kernel: usize,
    pub decoder_padding: usize,
    /// Kernel of the final 1-channel conv before the sigmoid.
    pub head_kernel: usize,
    pub refiner_enabled: bool,
    pub refiner_width: usize,
    pub elu_alpha: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// Default widths for a family/tier at 64² inputs and output resolution `r`
    /// (16, 32 or 64, i.e. 2–4 upsampling blocks from the 4³ latent).
    pub fn preset(family: Family, tier: Tier, num_views: usize, r: usize) -> Result<Self> {
        let blocks = match r {
            8 => 1,
            16 => 2,
            32 => 3,
            64 => 4,
            _ => return Err(Error::InvalidParams(format!("preset resolution must be 8, 16, 32 or 64, got {r}"))),
        };
        let decoder_widths = (0..blocks).map(|i| 16 << (blocks - 1 - i)).collect();
        let cfg = match tier {
            Tier::Fast => ModelConfig {
                family,
                tier,
                num_views,
                image_size: [64, 64],
                image_channels: 1,
                encoder_widths: vec![8, 16, 2],
                encoder_kernel: 3,
                latent: [2, 4, 4, 4],
                decoder_widths,
                decoder_kernel: 2,
                decoder_padding: 0,
                head_kernel: 1,
                refiner_enabled: false,
                refiner_width: 8,
                elu_alpha: 1.0,
                seed: 0,
            },
            Tier::Accurate => ModelConfig {
                family,
                tier,
                num_views,
                image_size: [64, 64],
                image_channels: 1,
                encoder_widths: vec![8, 16, 32, 8],
                encoder_kernel: 5,
                latent: [2, 4, 4, 4],
                decoder_widths,
                decoder_kernel: 4,
                decoder_padding: 1,
                head_kernel: 3,
                refiner_enabled: true,
                refiner_width: 8,
                elu_alpha: 1.0,
                seed: 0,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_views(mut self, v: usize) -> Self {
        self.num_views = v;
        self
    }

    /// Spatial dims after the encoder blocks.
    pub fn encoder_out_dims(&self) -> [usize; 2] {
        let f = 1 << self.encoder_widths.len();
        [self.image_size[0] / f, self.image_size[1] / f]
    }

    /// Side of each decoder stage, starting at the latent.
    pub fn decoder_sides(&self) -> Vec<usize> {
        let mut sides = vec![self.latent[1]];
        for _ in &self.decoder_widths {
            let d = *sides.last().expect("non-empty");
            sides.push((d - 1) * 2 + self.decoder_kernel - 2 * self.decoder_padding);
        }
        sides
    }

    /// Output occupancy grid side `R`.
    pub fn resolution(&self) -> usize {
        *self.decoder_sides().last().expect("non-empty")
    }

    pub fn decoder_out_channels(&self) -> usize {
        *self.decoder_widths.last().unwrap_or(&self.latent[0])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.num_views == 0 {
            return bad("num_views must be at least 1".into());
        }
        if self.tier == Tier::Fast && self.refiner_enabled {
            return bad("the fast tier has no refiner; set refiner_enabled = false".into());
        }
        if self.image_channels == 0 || self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) {
            return bad("encoder needs at least one block and positive widths".into());
        }
        if self.encoder_kernel % 2 == 0 || self.head_kernel % 2 == 0 {
            return bad("encoder and head kernels must be odd for same-size padding".into());
        }
        let f = 1 << self.encoder_widths.len();
        if self.image_size.iter().any(|&s| s == 0 || s % f != 0) {
            return bad(format!("image size {:?} must be divisible by {f}", self.image_size));
        }
        let [h, w] = self.encoder_out_dims();
        let enc = self.encoder_widths.last().expect("non-empty") * h * w;
        let lat: usize = self.latent.iter().product();
        if enc != lat {
            return bad(format!("encoder output holds {enc} elements but latent {:?} holds {lat}", self.latent));
        }
        if self.latent.contains(&0) || self.latent[1] != self.latent[2] || self.latent[2] != self.latent[3] {
            return bad(format!("latent grid {:?} must be cubic", self.latent));
        }
        if self.decoder_widths.contains(&0) || self.decoder_kernel == 0 || self.decoder_kernel < 2 * self.decoder_padding {
            return bad("invalid decoder widths, kernel or padding".into());
        }
        if self.decoder_kernel <= 2 * self.decoder_padding && self.latent[1] == 1 {
            return bad("decoder would produce an empty volume".into());
        }
        // The transposed conv must invert a stride-2 conv exactly.
        let mut side = self.latent[1];
        for _ in &self.decoder_widths {
            let big = (side - 1) * 2 + self.decoder_kernel - 2 * self.decoder_padding;
            if big == 0 || (big + 2 * self.decoder_padding - self.decoder_kernel) % 2 != 0 {
                return bad("decoder kernel/padding do not form an exact stride-2 upsampling".into());
            }
            side = big;
        }
        if self.refiner_enabled && (self.refiner_width == 0 || side % 2 != 0) {
            return bad("refiner needs a positive width and an even resolution".into());
        }
        if !(self.elu_alpha > 0.0) {
            return bad("elu_alpha must be positive".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}
