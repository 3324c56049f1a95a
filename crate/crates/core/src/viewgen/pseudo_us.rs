use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::raster::MaskImage;
use crate::error::{Error, Result};

/// Grayscale image with values in [0, 1]; row-major, row 0 at the top.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseOrder {
    NoiseThenBlur,
    BlurThenNoise,
}

/// Imaging sector: pixels whose distance from `apex` lies in `[min_radius, max_radius]`
/// and whose direction is within `half_angle_deg` of image-down (+row).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub apex: [f64; 2],
    pub half_angle_deg: f64,
    pub min_radius: f64,
    pub max_radius: f64,
}

impl Cone {
    /// Sector with its apex at the top centre reaching the bottom edge.
    pub fn default_for(width: usize, height: usize, half_angle_deg: f64) -> Self {
        Cone {
            apex: [width as f64 / 2.0, 0.0],
            half_angle_deg,
            min_radius: 0.03 * height as f64,
            max_radius: height as f64,
        }
    }

    /// Evaluated at pixel centres.
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let dx = x as f64 + 0.5 - self.apex[0];
        let dy = y as f64 + 0.5 - self.apex[1];
        let r = dx.hypot(dy);
        if r < self.min_radius || r > self.max_radius {
            return false;
        }
        dx.atan2(dy).abs() <= self.half_angle_deg.to_radians()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoUsParams {
    /// `None` disables cropping.
    pub cone: Option<Cone>,
    pub noise_std: f64,
    pub blur_sigma: f64,
    pub blur_kernel_size: usize,
    pub order: NoiseOrder,
    pub tissue_gain: f64,
    pub background_level: f64,
    pub seed: u64,
}

impl PseudoUsParams {
    pub fn default_for(width: usize, height: usize) -> Self {
        PseudoUsParams {
            cone: Some(Cone::default_for(width, height, 38.0)),
            noise_std: 0.08,
            blur_sigma: 1.5,
            blur_kernel_size: 7,
            order: NoiseOrder::NoiseThenBlur,
            tissue_gain: 0.7,
            background_level: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blur_kernel_size % 2 == 0 {
            return Err(Error::BadKernel(self.blur_kernel_size));
        }
        if !(self.noise_std >= 0.0) || !(self.blur_sigma >= 0.0) {
            return Err(Error::InvalidParams("noise_std and blur_sigma must be non-negative".into()));
        }
        for (name, v) in [("tissue_gain", self.tissue_gain), ("background_level", self.background_level)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParams(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if let Some(c) = &self.cone {
            if !(c.half_angle_deg > 0.0 && c.half_angle_deg < 90.0) {
                return Err(Error::InvalidParams(format!("cone half-angle {} outside (0, 90)", c.half_angle_deg)));
            }
            if !(c.min_radius >= 0.0 && c.min_radius <= c.max_radius) {
                return Err(Error::InvalidParams("cone radii must satisfy 0 <= min <= max".into()));
            }
        }
        Ok(())
    }
}

/// Normalized 1-D Gaussian taps. `sigma == 0` gives a centred delta.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if size % 2 == 0 {
        return Err(Error::BadKernel(size));
    }
    let r = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - r;
            if sigma > 0.0 {
                (-x * x / (2.0 * sigma * sigma)).exp()
            } else if x == 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    Ok(k)
}

/// Separable blur with edge clamping.
pub fn separable_blur(pixels: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; pixels.len()];
    for y in 0..height {
        let row = &pixels[y * width..(y + 1) * width];
        for x in 0..width {
            tmp[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * row[clamp(x as isize + k as isize - r, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; pixels.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[clamp(y as isize + k as isize - r, height) * width + x])
                .sum();
        }
    }
    out
}

fn add_noise(pixels: &mut [f64], std: f64, rng: &mut ChaCha8Rng) {
    if std == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, std).expect("std is finite and non-negative");
    for p in pixels {
        *p += normal.sample(rng);
    }
}

/// Mask-derived ultrasound-like image: intensity mapping, seeded Gaussian noise and
/// Gaussian blur in the configured order, sector crop, clamp to [0, 1].
pub fn pseudo_us(mask: &MaskImage, p: &PseudoUsParams) -> Result<GrayImage> {
    p.validate()?;
    let (w, h) = (mask.width, mask.height);
    let kernel = gaussian_kernel(p.blur_kernel_size, p.blur_sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut img: Vec<f64> = mask
        .pixels
        .iter()
        .map(|&m| p.background_level + p.tissue_gain * f64::from(m.min(1)))
        .collect();
    match p.order {
        NoiseOrder::NoiseThenBlur => {
            add_noise(&mut img, p.noise_std, &mut rng);
            img = separable_blur(&img, w, h, &kernel);
        }
        NoiseOrder::BlurThenNoise => {
            img = separable_blur(&img, w, h, &kernel);
            add_noise(&mut img, p.noise_std, &mut rng);
        }
    }
    for y in 0..h {
        for x in 0..w {
            let v = &mut img[y * w + x];
            let inside = p.cone.as_ref().map_or(true, |c| c.contains(x, y));
            *v = if inside { v.clamp(0.0, 1.0) } else { 0.0 };
        }
    }
    Ok(GrayImage { width: w, height: h, pixels: img })
}
