use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::{LabeledMesh, StructureId};
use super::vec3::{Point3, Vec3};
use crate::error::{Error, Result};

/// Default number of sampled directions for the thinnest-wall search.
pub const DEFAULT_APEX_DIRECTIONS: usize = 2048;

/// Hits closer than this along a ray are treated as the same crossing (shared edges).
const HIT_MERGE: f64 = 1e-9;

/// Möller-Trumbore ray/triangle intersection. Returns the ray parameter of a hit with `t > t_min`.
pub fn ray_triangle(origin: Point3, dir: Vec3, tri: [Point3; 3], t_min: f64) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > t_min).then_some(t)
}

/// Quasi-uniform unit directions on the Fibonacci sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Wall crossing along one ray: distance to the first hit and to the next one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallSample {
    pub direction: Vec3,
    pub first_hit: f64,
    pub thickness: f64,
}

/// Sorted, merged hit distances of a ray against the selected faces.
pub fn ray_hits(mesh: &LabeledMesh, faces: &[usize], origin: Point3, dir: Vec3) -> Vec<f64> {
    let mut hits: Vec<f64> = faces
        .iter()
        .filter_map(|&f| ray_triangle(origin, dir, mesh.triangle(f), 1e-12))
        .collect();
    hits.sort_by(f64::total_cmp);
    hits.dedup_by(|b, a| *b - *a < HIT_MERGE);
    hits
}

/// Wall samples along each direction: `None` where the ray crosses the wall fewer than twice.
pub fn wall_thickness_samples(
    mesh: &LabeledMesh,
    labels: &[StructureId],
    origin: Point3,
    directions: &[Vec3],
) -> Result<Vec<Option<WallSample>>> {
    let faces = mesh.faces_with_labels(labels);
    let dirs: Vec<Vec3> = directions
        .iter()
        .map(|d| d.normalized().ok_or(Error::DegenerateRay))
        .collect::<Result<_>>()?;
    Ok(dirs
        .par_iter()
        .map(|&d| {
            let hits = ray_hits(mesh, &faces, origin, d);
            (hits.len() >= 2).then(|| WallSample { direction: d, first_hit: hits[0], thickness: hits[1] - hits[0] })
        })
        .collect())
}

/// Result of the thinnest-wall apex search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApexHit {
    /// Inner (first) hit of the thinnest wall pair.
    pub point: Point3,
    pub thickness: f64,
    pub direction: Vec3,
}

/// Thinnest-wall search over explicit directions. Ties keep the earliest direction.
pub fn ray_cast_apex_with(
    mesh: &LabeledMesh,
    labels: &[StructureId],
    origin: Point3,
    directions: &[Vec3],
) -> Result<ApexHit> {
    let samples = wall_thickness_samples(mesh, labels, origin, directions)?;
    let best = samples
        .into_iter()
        .flatten()
        .fold(None::<WallSample>, |best, s| match best {
            Some(b) if b.thickness <= s.thickness => Some(b),
            _ => Some(s),
        })
        .ok_or(Error::NoWallPair)?;
    Ok(ApexHit {
        point: origin + best.direction * best.first_hit,
        thickness: best.thickness,
        direction: best.direction,
    })
}

/// Left-ventricular apex as the thinnest wall seen from the mitral valve centre,
/// sampled over `n_dirs` Fibonacci-sphere rays.
pub fn ray_cast_apex(mesh: &LabeledMesh, lv_labels: &[StructureId], mv_center: Point3, n_dirs: usize) -> Result<ApexHit> {
    if n_dirs < 64 {
        return Err(Error::InvalidParams(format!("need at least 64 ray directions, got {n_dirs}")));
    }
    ray_cast_apex_with(mesh, lv_labels, mv_center, &fibonacci_sphere(n_dirs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::icosphere;

    #[test]
    fn fibonacci_directions_are_unit() {
        for d in fibonacci_sphere(100) {
            assert!((d.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_hit() {
        let tri = [Vec3::ZERO, Vec3::X, Vec3::Y];
        let t = ray_triangle(Vec3::new(0.2, 0.2, -3.0), Vec3::Z, tri, 0.0).unwrap();
        assert!((t - 3.0).abs() < 1e-12);
        assert!(ray_triangle(Vec3::new(0.8, 0.8, -3.0), Vec3::Z, tri, 0.0).is_none());
        assert!(ray_triangle(Vec3::new(0.2, 0.2, 3.0), Vec3::Z, tri, 0.0).is_none());
    }

    #[test]
    fn concentric_shells_uniform_thickness() {
        let mut mesh = icosphere(Vec3::ZERO, 10.0, 4, 1);
        mesh.append(&icosphere(Vec3::ZERO, 12.0, 4, 2));
        let apex = ray_cast_apex(&mesh, &[1, 2], Vec3::ZERO, 256).unwrap();
        assert!((apex.thickness - 2.0).abs() < 0.05, "{}", apex.thickness);
        assert!((apex.point.norm() - 10.0).abs() < 0.05);
    }

    #[test]
    fn outside_shells_no_pair() {
        let mesh = icosphere(Vec3::ZERO, 1.0, 2, 1);
        let r = ray_cast_apex(&mesh, &[1], Vec3::new(100.0, 0.0, 0.0), 64);
        assert!(matches!(r, Err(Error::NoWallPair)));
    }

    #[test]
    fn degenerate_direction() {
        let mesh = icosphere(Vec3::ZERO, 1.0, 1, 1);
        let r = ray_cast_apex_with(&mesh, &[1], Vec3::ZERO, &[Vec3::ZERO]);
        assert!(matches!(r, Err(Error::DegenerateRay)));
        assert!(ray_cast_apex(&mesh, &[1], Vec3::ZERO, 10).is_err());
    }
}
