use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mesh::{center_of_mass, LabeledMesh};
use super::raycast::{ray_cast_apex, ApexHit};
use super::vec3::Point3;
use crate::error::{Error, Result};

/// Structure names used by the phantom and expected in loaded meshes.
pub mod names {
    pub const LV_ENDO: &str = "LV_endo";
    pub const LV_EPI: &str = "LV_epi";
    pub const RV: &str = "RV";
    pub const LA: &str = "LA";
    pub const RA: &str = "RA";
    pub const MV: &str = "MV";
    pub const AV: &str = "AV";
    pub const PV: &str = "PV";
    pub const TV: &str = "TV";
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Landmark {
    #[serde(rename = "MV_center")]
    MvCenter,
    #[serde(rename = "AV_center")]
    AvCenter,
    #[serde(rename = "PV_center")]
    PvCenter,
    #[serde(rename = "LA_center")]
    LaCenter,
    #[serde(rename = "RA_center")]
    RaCenter,
    #[serde(rename = "RV_center")]
    RvCenter,
    #[serde(rename = "LV_apex")]
    LvApex,
}

impl Landmark {
    pub const ALL: [Landmark; 7] = [
        Landmark::MvCenter,
        Landmark::AvCenter,
        Landmark::PvCenter,
        Landmark::LaCenter,
        Landmark::RaCenter,
        Landmark::RvCenter,
        Landmark::LvApex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Landmark::MvCenter => "MV_center",
            Landmark::AvCenter => "AV_center",
            Landmark::PvCenter => "PV_center",
            Landmark::LaCenter => "LA_center",
            Landmark::RaCenter => "RA_center",
            Landmark::RvCenter => "RV_center",
            Landmark::LvApex => "LV_apex",
        }
    }

    /// Structure whose centre of mass defines this landmark (the apex has none).
    fn structure(self) -> Option<&'static str> {
        match self {
            Landmark::MvCenter => Some(names::MV),
            Landmark::AvCenter => Some(names::AV),
            Landmark::PvCenter => Some(names::PV),
            Landmark::LaCenter => Some(names::LA),
            Landmark::RaCenter => Some(names::RA),
            Landmark::RvCenter => Some(names::RV),
            Landmark::LvApex => None,
        }
    }
}

impl fmt::Display for Landmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LandmarkSet(pub BTreeMap<Landmark, Point3>);

impl LandmarkSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, lm: Landmark, p: Point3) -> Result<()> {
        if !p.is_finite() {
            return Err(Error::InvalidParams(format!("landmark {lm} is not finite")));
        }
        self.0.insert(lm, p);
        Ok(())
    }

    pub fn get(&self, lm: Landmark) -> Result<Point3> {
        self.0.get(&lm).copied().ok_or_else(|| Error::MissingLandmark(lm.name().to_string()))
    }

    pub fn remove(&mut self, lm: Landmark) -> Option<Point3> {
        self.0.remove(&lm)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let set: LandmarkSet = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if let Some((lm, _)) = set.0.iter().find(|(_, p)| !p.is_finite()) {
            return Err(Error::InvalidParams(format!("landmark {lm} is not finite")));
        }
        Ok(set)
    }
}

/// Landmarks measured on a mesh: structure centres of mass for the valves and
/// chambers, and the ray-cast thinnest-wall apex from the mitral valve centre.
pub fn compute_landmarks(mesh: &LabeledMesh, n_dirs: usize) -> Result<(LandmarkSet, ApexHit)> {
    let id = |name: &str| mesh.structure_id(name).ok_or_else(|| Error::MissingLandmark(format!("structure {name}")));
    let mut set = LandmarkSet::new();
    for lm in Landmark::ALL {
        if let Some(name) = lm.structure() {
            set.insert(lm, center_of_mass(mesh, id(name)?)?)?;
        }
    }
    let lv = [id(names::LV_ENDO)?, id(names::LV_EPI)?];
    let apex = ray_cast_apex(mesh, &lv, set.get(Landmark::MvCenter)?, n_dirs)?;
    set.insert(Landmark::LvApex, apex.point)?;
    Ok((set, apex))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::vec3::Vec3;

    #[test]
    fn json_uses_landmark_names() {
        let mut s = LandmarkSet::new();
        s.insert(Landmark::LvApex, Vec3::new(1.0, 2.0, 3.0)).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"LV_apex\""), "{j}");
        let back: LandmarkSet = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn missing_landmark_error() {
        let s = LandmarkSet::new();
        assert!(matches!(s.get(Landmark::RaCenter), Err(Error::MissingLandmark(n)) if n == "RA_center"));
        assert!(LandmarkSet::new().insert(Landmark::LaCenter, Vec3::new(f64::NAN, 0., 0.)).is_err());
    }
}
