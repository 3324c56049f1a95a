//! Closed test and construction surfaces: cubes, octahedra and icospheres.

use std::collections::{BTreeMap, HashMap};

use super::mesh::{LabeledMesh, StructureId};
use super::vec3::{Point3, Vec3};

fn single_structure(vertices: Vec<Point3>, faces: Vec<[usize; 3]>, label: StructureId, name: &str) -> LabeledMesh {
    let n = faces.len();
    LabeledMesh {
        vertices,
        faces,
        face_labels: vec![label; n],
        structures: BTreeMap::from([(label, name.to_string())]),
    }
}

/// Axis-aligned box `[min, max]` as 12 outward-facing triangles.
pub fn cuboid(min: Point3, max: Point3, label: StructureId) -> LabeledMesh {
    let v = |i: usize| {
        Vec3::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        )
    };
    let vertices = (0..8).map(v).collect();
    let faces = vec![
        [0, 2, 1], [1, 2, 3], // z = min
        [4, 5, 6], [5, 7, 6], // z = max
        [0, 1, 4], [1, 5, 4], // y = min
        [2, 6, 3], [3, 6, 7], // y = max
        [0, 4, 2], [2, 4, 6], // x = min
        [1, 3, 5], [3, 7, 5], // x = max
    ];
    single_structure(vertices, faces, label, "cube")
}

pub fn unit_cube(label: StructureId) -> LabeledMesh {
    cuboid(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0), label)
}

/// Regular octahedron with vertices at distance `r` from the origin.
pub fn octahedron(r: f64, label: StructureId) -> LabeledMesh {
    let vertices = vec![
        Vec3::X * r, -Vec3::X * r, Vec3::Y * r, -Vec3::Y * r, Vec3::Z * r, -Vec3::Z * r,
    ];
    let faces = vec![
        [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
        [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
    ];
    single_structure(vertices, faces, label, "octahedron")
}

/// Unit-sphere icosphere: vertex directions and outward-wound faces.
///
/// `level` subdivisions give `20 * 4^level` faces.
pub fn unit_icosphere(level: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized().unwrap())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalized().unwrap());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}

/// Sphere of radius `r` around `center`.
pub fn icosphere(center: Point3, r: f64, level: u32, label: StructureId) -> LabeledMesh {
    let (dirs, faces) = unit_icosphere(level);
    let vertices = dirs.into_iter().map(|d| center + d * r).collect();
    single_structure(vertices, faces, label, "sphere")
}

/// Axis-aligned ellipsoid with semi-axes `radii`.
pub fn ellipsoid(center: Point3, radii: Vec3, level: u32, label: StructureId) -> LabeledMesh {
    let (dirs, faces) = unit_icosphere(level);
    let vertices = dirs.into_iter().map(|d| center + d.component_mul(radii)).collect();
    single_structure(vertices, faces, label, "ellipsoid")
}
