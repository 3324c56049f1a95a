use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::mesh::{LabeledMesh, StructureId};
use super::plane::ViewPlane;
use super::vec3::Point3;

/// Endpoint snap tolerance when chaining segments, in mm.
pub const SNAP_TOLERANCE: f64 = 1e-6;

/// Closed planar loops in the `(u, v)` frame of `plane`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub polylines: Vec<Vec<[f64; 2]>>,
    pub plane: ViewPlane,
}

impl CrossSection {
    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    /// Unsigned shoelace area of each loop.
    pub fn loop_areas(&self) -> Vec<f64> {
        self.polylines.iter().map(|l| polygon_area(l).abs()).collect()
    }

    /// Area enclosed under the even-odd rule, assuming loops are nested, not crossing.
    pub fn enclosed_area(&self) -> f64 {
        let areas = self.loop_areas();
        let mut total = 0.0;
        for (i, lp) in self.polylines.iter().enumerate() {
            let depth = self
                .polylines
                .iter()
                .enumerate()
                .filter(|&(j, other)| j != i && point_in_polygon(lp[0], other))
                .count();
            total += if depth % 2 == 0 { areas[i] } else { -areas[i] };
        }
        total
    }

    pub fn perimeters(&self) -> Vec<f64> {
        self.polylines
            .iter()
            .map(|l| {
                (0..l.len())
                    .map(|i| {
                        let (a, b) = (l[i], l[(i + 1) % l.len()]);
                        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
                    })
                    .sum()
            })
            .collect()
    }

    /// Loop points mapped back to world coordinates.
    pub fn world_points(&self) -> impl Iterator<Item = Point3> + '_ {
        self.polylines.iter().flatten().map(|&uv| self.plane.to_world(uv))
    }
}

/// Signed shoelace area.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

/// Crossing-number test with the half-open rule on `v`.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let u = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < u {
                inside = !inside;
            }
        }
    }
    inside
}

/// Spatial hash that merges points closer than the snap tolerance.
struct PointWelder {
    cells: HashMap<[i64; 3], Vec<usize>>,
    points: Vec<Point3>,
}

impl PointWelder {
    fn new() -> Self {
        PointWelder { cells: HashMap::new(), points: Vec::new() }
    }

    fn key(p: Point3) -> [i64; 3] {
        [p.x, p.y, p.z].map(|c| (c / SNAP_TOLERANCE).floor() as i64)
    }

    fn insert(&mut self, p: Point3) -> usize {
        let k = Self::key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if let Some(&id) = ids.iter().find(|&&id| self.points[id].distance(p) <= SNAP_TOLERANCE) {
                            return id;
                        }
                    }
                }
            }
        }
        self.points.push(p);
        let id = self.points.len() - 1;
        self.cells.entry(k).or_default().push(id);
        id
    }
}

/// Intersects the faces labeled with any of `labels` with `plane` and chains the
/// segments into closed loops. Open chains (from open surfaces) are dropped.
pub fn slice_mesh(mesh: &LabeledMesh, plane: &ViewPlane, labels: &[StructureId]) -> CrossSection {
    let dist: Vec<f64> = mesh.vertices.iter().map(|&v| plane.signed_distance(v)).collect();
    // Vertices on the plane count as positive; shared edges are interpolated in
    // index order so neighbouring faces produce identical endpoints.
    let crossing = |i: usize, j: usize| -> Point3 {
        let (i, j) = (i.min(j), i.max(j));
        let (di, dj) = (dist[i], dist[j]);
        if di == 0.0 {
            return mesh.vertices[i];
        }
        if dj == 0.0 {
            return mesh.vertices[j];
        }
        let t = di / (di - dj);
        mesh.vertices[i] + (mesh.vertices[j] - mesh.vertices[i]) * t
    };

    let mut welder = PointWelder::new();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    for (f, face) in mesh.faces.iter().enumerate() {
        if !labels.contains(&mesh.face_labels[f]) {
            continue;
        }
        let pos = face.map(|v| dist[v] >= 0.0);
        if pos[0] == pos[1] && pos[1] == pos[2] {
            continue;
        }
        let mut ends = Vec::with_capacity(2);
        for k in 0..3 {
            let (a, b) = (face[k], face[(k + 1) % 3]);
            if pos[k] != pos[(k + 1) % 3] {
                ends.push(welder.insert(crossing(a, b)));
            }
        }
        if ends[0] != ends[1] {
            edges.push([ends[0], ends[1]]);
        }
    }

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); welder.points.len()];
    for (e, &[a, b]) in edges.iter().enumerate() {
        adjacency[a].push(e);
        adjacency[b].push(e);
    }
    let mut used = vec![false; edges.len()];
    let mut polylines = Vec::new();
    for start_edge in 0..edges.len() {
        if used[start_edge] {
            continue;
        }
        used[start_edge] = true;
        let [start, mut current] = edges[start_edge];
        let mut chain = vec![start, current];
        let closed = loop {
            if current == start {
                chain.pop();
                break true;
            }
            let Some(&next_edge) = adjacency[current].iter().find(|&&e| !used[e]) else {
                break false;
            };
            used[next_edge] = true;
            let [a, b] = edges[next_edge];
            current = if a == current { b } else { a };
            chain.push(current);
        };
        if closed && chain.len() >= 3 {
            polylines.push(chain.iter().map(|&id| plane.to_plane(welder.points[id])).collect());
        }
    }
    CrossSection { polylines, plane: *plane }
}
