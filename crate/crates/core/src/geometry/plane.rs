use serde::{Deserialize, Serialize};

use super::vec3::{triangle_area, Point3, Vec3};
use crate::error::{Error, Result};

/// Oriented slicing plane with a right-handed in-plane frame `(u, v, normal)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewPlane {
    pub origin: Point3,
    pub normal: Vec3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
}

impl ViewPlane {
    pub fn signed_distance(&self, p: Point3) -> f64 {
        (p - self.origin).dot(self.normal)
    }

    /// In-plane coordinates `(u, v)` of the orthogonal projection of `p`.
    pub fn to_plane(&self, p: Point3) -> [f64; 2] {
        let d = p - self.origin;
        [d.dot(self.u_axis), d.dot(self.v_axis)]
    }

    pub fn to_world(&self, uv: [f64; 2]) -> Point3 {
        self.origin + self.u_axis * uv[0] + self.v_axis * uv[1]
    }

    /// Largest deviation from an orthonormal right-handed frame.
    pub fn frame_error(&self) -> f64 {
        let (n, u, v) = (self.normal, self.u_axis, self.v_axis);
        [
            (n.norm() - 1.0).abs(),
            (u.norm() - 1.0).abs(),
            (v.norm() - 1.0).abs(),
            u.dot(v).abs(),
            u.dot(n).abs(),
            v.dot(n).abs(),
            (u.cross(v).dot(n) - 1.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Plane through three landmarks, origin at their centroid.
pub fn plane_from_points(p0: Point3, p1: Point3, p2: Point3) -> Result<ViewPlane> {
    let area = triangle_area(p0, p1, p2);
    if !(area > 1e-9) {
        return Err(Error::CollinearLandmarks { area });
    }
    let normal = (p1 - p0).cross(p2 - p0).normalized().ok_or(Error::CollinearLandmarks { area })?;
    let u_axis = (p1 - p0).normalized().ok_or(Error::CollinearLandmarks { area })?;
    let v_axis = normal.cross(u_axis);
    Ok(ViewPlane { origin: (p0 + p1 + p2) / 3.0, normal, u_axis, v_axis })
}

/// Plane orthogonal to the axis `p0 -> p1`, placed at fraction `level` along it.
pub fn plane_from_axis(p0: Point3, p1: Point3, level: f64) -> Result<ViewPlane> {
    let axis = p1 - p0;
    let distance = axis.norm();
    if !(distance > 1e-6) {
        return Err(Error::CoincidentLandmarks { distance });
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::InvalidParams(format!("axis level {level} outside [0, 1]")));
    }
    let normal = axis / distance;
    let project = |g: Vec3| (g - normal * g.dot(normal)).normalized().filter(|_| g.cross(normal).norm() > 1e-9);
    let u_axis = project(Vec3::X).or_else(|| project(Vec3::Y)).expect("x and y cannot both be parallel to the axis");
    let v_axis = normal.cross(u_axis);
    Ok(ViewPlane { origin: p0 + axis * level, normal, u_axis, v_axis })
}
