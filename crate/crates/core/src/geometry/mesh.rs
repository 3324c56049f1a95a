use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::vec3::{triangle_area, Point3, Vec3};
use crate::error::{Error, Result};

pub type StructureId = u32;

/// Minimum admissible face area in mm².
pub const MIN_FACE_AREA: f64 = 1e-9;

/// Triangulated surface whose faces carry anatomical structure labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
    pub face_labels: Vec<StructureId>,
    pub structures: BTreeMap<StructureId, String>,
}

impl LabeledMesh {
    /// Builds a mesh and checks index, area and label invariants.
    pub fn new(
        vertices: Vec<Point3>,
        faces: Vec<[usize; 3]>,
        face_labels: Vec<StructureId>,
        structures: BTreeMap<StructureId, String>,
    ) -> Result<Self> {
        let mesh = LabeledMesh { vertices, faces, face_labels, structures };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn empty() -> Self {
        LabeledMesh {
            vertices: Vec::new(),
            faces: Vec::new(),
            face_labels: Vec::new(),
            structures: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.faces.len() != self.face_labels.len() {
            return Err(Error::InvalidMesh(format!(
                "{} faces but {} labels",
                self.faces.len(),
                self.face_labels.len()
            )));
        }
        if let Some(v) = self.vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not finite")));
        }
        for (fi, (face, label)) in self.faces.iter().zip(&self.face_labels).enumerate() {
            if face.iter().any(|&i| i >= self.vertices.len()) {
                return Err(Error::InvalidMesh(format!("face {fi} indexes past the vertex list")));
            }
            if !self.structures.contains_key(label) {
                return Err(Error::InvalidMesh(format!("face {fi} has unknown label {label}")));
            }
            let area = self.face_area(fi);
            if area <= MIN_FACE_AREA {
                return Err(Error::InvalidMesh(format!("face {fi} is degenerate (area {area:e})")));
            }
        }
        Ok(())
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        triangle_area(a, b, c)
    }

    /// Looks up a structure id by name.
    pub fn structure_id(&self, name: &str) -> Option<StructureId> {
        self.structures.iter().find(|(_, n)| n.as_str() == name).map(|(&id, _)| id)
    }

    pub fn labels(&self) -> Vec<StructureId> {
        self.structures.keys().copied().collect()
    }

    /// Indices of faces whose label is in `labels`.
    pub fn faces_with_labels(&self, labels: &[StructureId]) -> Vec<usize> {
        (0..self.faces.len()).filter(|&f| labels.contains(&self.face_labels[f])).collect()
    }

    /// A structure is closed when every undirected edge of its faces is shared by exactly two faces.
    pub fn is_closed(&self, label: StructureId) -> bool {
        let mut edges: HashMap<(usize, usize), u32> = HashMap::new();
        let mut any = false;
        for (face, &l) in self.faces.iter().zip(&self.face_labels) {
            if l != label {
                continue;
            }
            any = true;
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        any && edges.values().all(|&n| n == 2)
    }

    /// Appends another mesh, remapping its vertex indices. Labels are kept as-is.
    pub fn append(&mut self, other: &LabeledMesh) {
        let offset = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces.extend(other.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
        self.face_labels.extend_from_slice(&other.face_labels);
        for (id, name) in &other.structures {
            self.structures.entry(*id).or_insert_with(|| name.clone());
        }
    }

    pub fn translated(&self, t: Vec3) -> LabeledMesh {
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v += t;
        }
        out
    }

    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (
                Vec3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z)),
                Vec3::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z)),
            )
        }))
    }

    /// Serializes to the line-oriented ASCII mesh format:
    /// `structure id name`, `v x y z`, `f i j k label_id` with 0-based indices.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, name) in &self.structures {
            let _ = writeln!(out, "structure {id} {name}");
        }
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for (f, l) in self.faces.iter().zip(&self.face_labels) {
            let _ = writeln!(out, "f {} {} {} {}", f[0], f[1], f[2], l);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut mesh = LabeledMesh::empty();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |what: &str| Error::Parse(format!("line {}: {what}: {raw:?}", lineno + 1));
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("structure") => {
                    let id = tok.next().and_then(|s| s.parse().ok()).ok_or_else(|| err("bad id"))?;
                    let name: Vec<&str> = tok.collect();
                    if name.is_empty() {
                        return Err(err("missing structure name"));
                    }
                    mesh.structures.insert(id, name.join(" "));
                }
                Some("v") => {
                    let xyz: Vec<f64> = tok.map(|s| s.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| err("bad coordinate"))?;
                    if xyz.len() != 3 {
                        return Err(err("vertex needs 3 coordinates"));
                    }
                    mesh.vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
                }
                Some("f") => {
                    let ids: Vec<usize> = tok.map(|s| s.parse::<usize>()).collect::<Result<_, _>>().map_err(|_| err("bad index"))?;
                    if ids.len() != 4 {
                        return Err(err("face needs 3 indices and a label"));
                    }
                    mesh.faces.push([ids[0], ids[1], ids[2]]);
                    mesh.face_labels.push(ids[3] as StructureId);
                }
                _ => return Err(err("unknown record")),
            }
        }
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Area-weighted centroid of the faces labeled `structure`.
pub fn center_of_mass(mesh: &LabeledMesh, structure: StructureId) -> Result<Point3> {
    let mut weighted = Vec3::ZERO;
    let mut total = 0.0;
    for (f, &l) in mesh.face_labels.iter().enumerate() {
        if l != structure {
            continue;
        }
        let [a, b, c] = mesh.triangle(f);
        let area = triangle_area(a, b, c);
        weighted += (a + b + c) * (area / 3.0);
        total += area;
    }
    if total == 0.0 {
        return Err(Error::UnknownStructure(structure));
    }
    Ok(weighted / total)
}
