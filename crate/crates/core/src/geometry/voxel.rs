use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::{LabeledMesh, StructureId};
use super::vec3::{Point3, Vec3};
use crate::error::{Error, Result};

/// Occupancy volume over an axis-aligned box, values stored x-fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub dims: [usize; 3],
    pub bounds_min: Point3,
    pub bounds_max: Point3,
    pub values: Vec<f64>,
}

impl VoxelGrid {
    pub fn zeros(dims: [usize; 3], bounds_min: Point3, bounds_max: Point3) -> Result<Self> {
        check_grid(dims, bounds_min, bounds_max)?;
        Ok(VoxelGrid { dims, bounds_min, bounds_max, values: vec![0.0; dims.iter().product()] })
    }

    pub fn from_values(dims: [usize; 3], bounds_min: Point3, bounds_max: Point3, values: Vec<f64>) -> Result<Self> {
        check_grid(dims, bounds_min, bounds_max)?;
        if values.len() != dims.iter().product::<usize>() {
            return Err(Error::ShapeMismatch(format!("{} values for dims {dims:?}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParams(format!("voxel value {v} outside [0, 1]")));
        }
        Ok(VoxelGrid { dims, bounds_min, bounds_max, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.index(x, y, z)]
    }

    pub fn voxel_size(&self) -> Vec3 {
        let e = self.bounds_max - self.bounds_min;
        Vec3::new(e.x / self.dims[0] as f64, e.y / self.dims[1] as f64, e.z / self.dims[2] as f64)
    }

    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Point3 {
        let s = self.voxel_size();
        self.bounds_min + Vec3::new((x as f64 + 0.5) * s.x, (y as f64 + 0.5) * s.y, (z as f64 + 0.5) * s.z)
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.values.iter().filter(|&&v| v >= 0.5).count() as f64 / self.values.len() as f64
    }

    /// `VOXGRID 1 nx ny nz xmin ymin zmin xmax ymax zmax` header, then values x-fastest.
    pub fn to_text(&self) -> String {
        let (lo, hi) = (self.bounds_min, self.bounds_max);
        let mut out = format!(
            "VOXGRID 1 {} {} {} {} {} {} {} {} {}\n",
            self.dims[0], self.dims[1], self.dims[2], lo.x, lo.y, lo.z, hi.x, hi.y, hi.z
        );
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                out.push(if i % self.dims[0] == 0 { '\n' } else { ' ' });
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tok = text.split_whitespace();
        if tok.next() != Some("VOXGRID") || tok.next() != Some("1") {
            return Err(Error::Parse("missing VOXGRID 1 header".into()));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = tok.next().and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse("bad dims".into()))?;
        }
        let mut b = [0f64; 6];
        for v in &mut b {
            *v = tok.next().and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse("bad bounds".into()))?;
        }
        let values: Vec<f64> = tok
            .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad value {s:?}"))))
            .collect::<Result<_>>()?;
        VoxelGrid::from_values(dims, Vec3::new(b[0], b[1], b[2]), Vec3::new(b[3], b[4], b[5]), values)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn check_grid(dims: [usize; 3], lo: Point3, hi: Point3) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidParams(format!("grid dims must be positive, got {dims:?}")));
    }
    if !(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z) {
        return Err(Error::InvalidParams(format!("bounds_min {lo:?} must be below bounds_max {hi:?}")));
    }
    Ok(())
}

/// Triangles bucketed by their (y, z) footprint for rays along +x.
struct YzBuckets {
    lo: [f64; 2],
    cell: [f64; 2],
    n: [usize; 2],
    buckets: Vec<Vec<[Point3; 3]>>,
}

impl YzBuckets {
    fn new(tris: Vec<[Point3; 3]>, lo: [f64; 2], hi: [f64; 2], n: [usize; 2]) -> Self {
        let cell = [(hi[0] - lo[0]) / n[0] as f64, (hi[1] - lo[1]) / n[1] as f64];
        let mut buckets = vec![Vec::new(); n[0] * n[1]];
        let clamp = |v: f64, axis: usize| -> usize { (((v - lo[axis]) / cell[axis]).floor().max(0.0) as usize).min(n[axis] - 1) };
        for t in tris {
            let (ymin, ymax) = (t.iter().map(|p| p.y).fold(f64::INFINITY, f64::min), t.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max));
            let (zmin, zmax) = (t.iter().map(|p| p.z).fold(f64::INFINITY, f64::min), t.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max));
            if ymax < lo[0] || ymin > hi[0] || zmax < lo[1] || zmin > hi[1] {
                continue;
            }
            // One-cell margin absorbs the jitter applied to degenerate rays.
            let (y0, y1) = (clamp(ymin, 0).saturating_sub(1), (clamp(ymax, 0) + 1).min(n[0] - 1));
            let (z0, z1) = (clamp(zmin, 1).saturating_sub(1), (clamp(zmax, 1) + 1).min(n[1] - 1));
            for iz in z0..=z1 {
                for iy in y0..=y1 {
                    buckets[iy + n[0] * iz].push(t);
                }
            }
        }
        YzBuckets { lo, cell, n, buckets }
    }

    fn get(&self, y: f64, z: f64) -> &[[Point3; 3]] {
        let iy = ((y - self.lo[0]) / self.cell[0]).floor();
        let iz = ((z - self.lo[1]) / self.cell[1]).floor();
        if iy < 0.0 || iz < 0.0 || iy as usize >= self.n[0] || iz as usize >= self.n[1] {
            return &[];
        }
        &self.buckets[iy as usize + self.n[0] * iz as usize]
    }
}

/// x-coordinates where the line {(·, y, z)} crosses the triangles, or `None` if the
/// line grazes an edge or vertex closely enough to make parity ambiguous.
fn line_crossings(tris: &[[Point3; 3]], y: f64, z: f64) -> Option<Vec<f64>> {
    const EDGE_EPS: f64 = 1e-12;
    let mut xs = Vec::new();
    for t in tris {
        let e = |a: Point3, b: Point3| (b.y - a.y) * (z - a.z) - (b.z - a.z) * (y - a.y);
        let w = [e(t[1], t[2]), e(t[2], t[0]), e(t[0], t[1])];
        let area = w[0] + w[1] + w[2];
        if area.abs() < 1e-300 {
            // Triangle parallel to the line: does not count as a crossing.
            continue;
        }
        let scale = area.abs();
        if w.iter().any(|&wi| wi.abs() <= EDGE_EPS * scale) {
            let inside_closed = w.iter().all(|&wi| wi * area.signum() >= -EDGE_EPS * scale);
            if inside_closed {
                return None;
            }
            continue;
        }
        if w.iter().all(|&wi| wi.signum() == area.signum()) {
            let x = (w[0] * t[0].x + w[1] * t[1].x + w[2] * t[2].x) / area;
            xs.push(x);
        }
    }
    xs.sort_by(f64::total_cmp);
    Some(xs)
}

/// Deterministic sub-micron offsets tried in order when a row ray is degenerate.
fn jitter(k: usize) -> (f64, f64) {
    let k = k as f64;
    (1e-7 * (k * 0.754_877_666).fract() * k, 1e-7 * (k * 0.569_840_291).fract() * k)
}

/// Binary occupancy: a voxel is 1 when its center lies inside any of the
/// selected closed structures, by ray parity along +x.
pub fn voxelize(mesh: &LabeledMesh, labels: &[StructureId], dims: [usize; 3], bounds: (Point3, Point3)) -> Result<VoxelGrid> {
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidParams(format!("voxelize needs at least 2 cells per axis, got {dims:?}")));
    }
    let mut grid = VoxelGrid::zeros(dims, bounds.0, bounds.1)?;
    let [nx, ny, nz] = dims;
    let centers_x: Vec<f64> = (0..nx).map(|i| grid.voxel_center(i, 0, 0).x).collect();

    for &label in labels {
        if !mesh.is_closed(label) {
            return Err(Error::OpenSurface(label));
        }
        let tris: Vec<[Point3; 3]> = mesh.faces_with_labels(&[label]).into_iter().map(|f| mesh.triangle(f)).collect();
        let buckets = YzBuckets::new(tris, [bounds.0.y, bounds.0.z], [bounds.1.y, bounds.1.z], [ny, nz]);
        let rows: Vec<Vec<bool>> = (0..ny * nz)
            .into_par_iter()
            .map(|row| {
                let (iy, iz) = (row % ny, row / ny);
                let c = grid.voxel_center(0, iy, iz);
                let bucket = buckets.get(c.y, c.z);
                let xs = (0..64)
                    .find_map(|k| {
                        let (dy, dz) = jitter(k);
                        line_crossings(bucket, c.y + dy, c.z + dz)
                    })
                    .expect("64 jittered rays all degenerate");
                centers_x
                    .iter()
                    .map(|&x| xs.iter().filter(|&&hit| hit > x).count() % 2 == 1)
                    .collect()
            })
            .collect();
        for (row, inside) in rows.into_iter().enumerate() {
            let base = row * nx;
            for (i, occ) in inside.into_iter().enumerate() {
                if occ {
                    grid.values[base + i] = 1.0;
                }
            }
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::{icosphere, unit_cube};
    use std::f64::consts::PI;

    #[test]
    fn unit_cube_fills_its_bounds() {
        let g = voxelize(&unit_cube(1), &[1], [4, 4, 4], (Vec3::ZERO, Vec3::new(1., 1., 1.))).unwrap();
        assert!(g.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn sphere_volume_fraction() {
        let sphere = icosphere(Vec3::ZERO, 10.0, 4, 1);
        let b = Vec3::new(12., 12., 12.);
        let g = voxelize(&sphere, &[1], [64, 64, 64], (-b, b)).unwrap();
        let exact = 4.0 / 3.0 * PI * 1000.0 / 24f64.powi(3);
        assert!((exact - 0.303).abs() < 1e-3);
        let frac = g.occupied_fraction();
        assert!((frac - exact).abs() / exact < 0.02, "{frac}");
    }

    #[test]
    fn disjoint_grid_is_empty() {
        let g = voxelize(&unit_cube(1), &[1], [3, 3, 3], (Vec3::new(5., 5., 5.), Vec3::new(6., 6., 6.))).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_aligned_faces_use_jitter() {
        // Voxel centers of this grid line up with the cube's edges and diagonals in (y, z).
        let g = voxelize(&unit_cube(1), &[1], [4, 4, 4], (Vec3::new(-0.5, -0.5, -0.5), Vec3::new(1.5, 1.5, 1.5))).unwrap();
        // centers at -0.25, 0.25, 0.75, 1.25 → 2 per axis inside
        assert_eq!(g.values.iter().filter(|&&v| v == 1.0).count(), 8);
        let g2 = voxelize(&unit_cube(1), &[1], [3, 3, 3], (Vec3::new(-1., -1., -1.), Vec3::new(2., 2., 2.))).unwrap();
        // centers at -0.5, 0.5, 1.5: only the middle voxel
        assert_eq!(g2.values.iter().filter(|&&v| v == 1.0).count(), 1);
    }

    #[test]
    fn open_surface_rejected() {
        let mut m = unit_cube(1);
        m.faces.pop();
        m.face_labels.pop();
        let r = voxelize(&m, &[1], [2, 2, 2], (Vec3::ZERO, Vec3::new(1., 1., 1.)));
        assert!(matches!(r, Err(Error::OpenSurface(1))));
    }

    #[test]
    fn text_roundtrip() {
        let g = VoxelGrid::from_values([2, 1, 2], Vec3::new(-1., 0., 0.), Vec3::new(1., 0.5, 3.), vec![0.0, 0.25, 1.0, 0.1]).unwrap();
        let t = g.to_text();
        assert!(t.starts_with("VOXGRID 1 2 1 2 -1 0 0 1 0.5 3\n"));
        assert_eq!(VoxelGrid::from_text(&t).unwrap(), g);
        assert!(VoxelGrid::from_text("VOXGRID 2 1 1 1 0 0 0 1 1 1 0").is_err());
        assert!(VoxelGrid::from_text("VOXGRID 1 1 1 1 0 0 0 1 1 1 2").is_err());
    }
}
