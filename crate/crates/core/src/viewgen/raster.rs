use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{slice_mesh, CrossSection, LabeledMesh, StructureId, ViewPlane};

/// Binary segmentation image; row 0 is the top (+v) edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub mm_per_pixel: f64,
}

impl MaskImage {
    pub fn zeros(width: usize, height: usize, mm_per_pixel: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParams(format!("image dims must be positive, got {width}x{height}")));
        }
        if !(mm_per_pixel > 0.0) {
            return Err(Error::InvalidParams(format!("mm_per_pixel must be positive, got {mm_per_pixel}")));
        }
        Ok(MaskImage { width, height, pixels: vec![0; width * height], mm_per_pixel })
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }
}

/// Per-pixel structure ids (0 = background), the multi-label alternative to [`MaskImage`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<StructureId>,
    pub mm_per_pixel: f64,
}

/// Pixel-centre coordinates in the plane frame for column `i` / row `j`.
fn pixel_uv(i: usize, j: usize, width: usize, height: usize, mpp: f64, center: [f64; 2]) -> [f64; 2] {
    [
        center[0] + (i as f64 + 0.5 - width as f64 / 2.0) * mpp,
        center[1] - (j as f64 + 0.5 - height as f64 / 2.0) * mpp,
    ]
}

/// Even-odd fill of the section's loops: a pixel is set when its centre lies inside
/// an odd number of loops. `center` (plane coordinates) maps to the image midpoint.
pub fn rasterize_section(section: &CrossSection, width: usize, height: usize, mm_per_pixel: f64, center: [f64; 2]) -> Result<MaskImage> {
    let mut mask = MaskImage::zeros(width, height, mm_per_pixel)?;
    let mut crossings = Vec::new();
    for j in 0..height {
        let v = pixel_uv(0, j, width, height, mm_per_pixel, center)[1];
        crossings.clear();
        for lp in &section.polylines {
            for k in 0..lp.len() {
                let (a, b) = (lp[k], lp[(k + 1) % lp.len()]);
                if (a[1] > v) != (b[1] > v) {
                    crossings.push(a[0] + (v - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
                }
            }
        }
        if crossings.is_empty() {
            continue;
        }
        crossings.sort_by(f64::total_cmp);
        for i in 0..width {
            let u = pixel_uv(i, j, width, height, mm_per_pixel, center)[0];
            let right = crossings.len() - crossings.partition_point(|&x| x <= u);
            if right % 2 == 1 {
                mask.pixels[j * width + i] = 1;
            }
        }
    }
    Ok(mask)
}

/// Multi-label raster: each structure is filled even-odd on its own loops; later ids overwrite earlier ones.
pub fn rasterize_labels(
    mesh: &LabeledMesh,
    plane: &ViewPlane,
    labels: &[StructureId],
    width: usize,
    height: usize,
    mm_per_pixel: f64,
    center: [f64; 2],
) -> Result<LabelImage> {
    let mut out = LabelImage { width, height, labels: vec![0; width * height], mm_per_pixel };
    for &label in labels {
        let section = slice_mesh(mesh, plane, &[label]);
        let mask = rasterize_section(&section, width, height, mm_per_pixel, center)?;
        for (o, &m) in out.labels.iter_mut().zip(&mask.pixels) {
            if m != 0 {
                *o = label;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{plane_from_axis, Vec3};

    fn section(loops: Vec<Vec<[f64; 2]>>) -> CrossSection {
        CrossSection { polylines: loops, plane: plane_from_axis(Vec3::ZERO, Vec3::Z, 0.0).unwrap() }
    }

    fn square(half: f64, c: [f64; 2]) -> Vec<[f64; 2]> {
        vec![[c[0] - half, c[1] - half], [c[0] + half, c[1] - half], [c[0] + half, c[1] + half], [c[0] - half, c[1] + half]]
    }

    fn circle(r: f64, c: [f64; 2], n: usize) -> Vec<[f64; 2]> {
        (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                [c[0] + r * t.cos(), c[1] + r * t.sin()]
            })
            .collect()
    }

    #[test]
    fn square_pixel_count() {
        let m = rasterize_section(&section(vec![square(5.0, [0.0, 0.0])]), 256, 256, 0.1, [0.0, 0.0]).unwrap();
        let n = m.count() as f64;
        assert!((n - 10000.0).abs() <= 100.0, "{n}");
    }

    #[test]
    fn annulus_hole() {
        let m = rasterize_section(&section(vec![square(5.0, [0.0, 0.0]), square(2.0, [0.0, 0.0])]), 64, 64, 0.25, [0.0, 0.0]).unwrap();
        assert_eq!(m.get(32, 32), 0);
        assert_eq!(m.get(32, 32 - 14), 1);
        let expect = (100.0 - 16.0) / 0.0625;
        assert!((m.count() as f64 - expect).abs() / expect < 0.02);
    }

    #[test]
    fn empty_section() {
        let m = rasterize_section(&section(vec![]), 16, 8, 1.0, [0.0, 0.0]).unwrap();
        assert_eq!(m.count(), 0);
        assert_eq!(m.pixels.len(), 128);
        assert!(rasterize_section(&section(vec![]), 16, 8, 0.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn image_orientation() {
        // Loop in the +u, +v quadrant lands in the right half, top half.
        let m = rasterize_section(&section(vec![square(1.0, [3.0, 3.0])]), 10, 10, 1.0, [0.0, 0.0]).unwrap();
        assert_eq!(m.get(7, 1), 1);
        assert_eq!(m.get(2, 8), 0);
    }

    #[test]
    fn area_converges_with_resolution() {
        // Mean absolute area error over a set of sub-pixel placements, per loop.
        for r in [7.3, 4.1, 9.9] {
            let offsets: Vec<[f64; 2]> = (0..16).map(|k| [0.137 * k as f64, 0.291 * k as f64 - 1.7]).collect();
            let mut last = f64::INFINITY;
            for mpp in [1.0, 0.5, 0.25, 0.125] {
                let n = (40.0 / mpp) as usize;
                let mut err = 0.0;
                for &c in &offsets {
                    let lp = circle(r, c, 720);
                    let exact = crate::geometry::slice::polygon_area(&lp).abs();
                    let m = rasterize_section(&section(vec![lp]), n, n, mpp, [0.0, 0.0]).unwrap();
                    err += (m.count() as f64 * mpp * mpp - exact).abs() / offsets.len() as f64;
                }
                assert!(err < last, "r={r} mpp={mpp}: {err} !< {last}");
                last = err;
            }
        }
    }
}
