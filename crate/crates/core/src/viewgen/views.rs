use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{plane_from_axis, plane_from_points, Landmark, LandmarkSet, ViewPlane};

/// The nine standard echocardiographic views.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StandardView {
    #[serde(rename = "RV_inflow")]
    RvInflow,
    #[serde(rename = "PLAX")]
    Plax,
    #[serde(rename = "PSAX_AV")]
    PsaxAv,
    #[serde(rename = "PSAX_MV")]
    PsaxMv,
    #[serde(rename = "PSAX_PM")]
    PsaxPm,
    #[serde(rename = "PSAX_apex")]
    PsaxApex,
    #[serde(rename = "A4C")]
    A4c,
    #[serde(rename = "A5C")]
    A5c,
    #[serde(rename = "A2C")]
    A2c,
}

/// How a view's plane is built from landmarks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlaneRecipe {
    /// Plane through three landmarks, in this order.
    ThreePoint([Landmark; 3]),
    /// Plane orthogonal to the MV-centre to LV-apex axis at a fraction along it.
    Axis { level: f64 },
}

impl StandardView {
    pub const ALL: [StandardView; 9] = [
        StandardView::RvInflow,
        StandardView::Plax,
        StandardView::PsaxAv,
        StandardView::PsaxMv,
        StandardView::PsaxPm,
        StandardView::PsaxApex,
        StandardView::A4c,
        StandardView::A5c,
        StandardView::A2c,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StandardView::RvInflow => "RV_inflow",
            StandardView::Plax => "PLAX",
            StandardView::PsaxAv => "PSAX_AV",
            StandardView::PsaxMv => "PSAX_MV",
            StandardView::PsaxPm => "PSAX_PM",
            StandardView::PsaxApex => "PSAX_apex",
            StandardView::A4c => "A4C",
            StandardView::A5c => "A5C",
            StandardView::A2c => "A2C",
        }
    }

    pub fn recipe(self) -> PlaneRecipe {
        use Landmark::*;
        match self {
            StandardView::RvInflow => PlaneRecipe::ThreePoint([RvCenter, RaCenter, PvCenter]),
            StandardView::Plax => PlaneRecipe::ThreePoint([LvApex, MvCenter, AvCenter]),
            StandardView::PsaxAv => PlaneRecipe::ThreePoint([LaCenter, RaCenter, AvCenter]),
            StandardView::PsaxMv => PlaneRecipe::Axis { level: 0.2 },
            StandardView::PsaxPm => PlaneRecipe::Axis { level: 0.5 },
            StandardView::PsaxApex => PlaneRecipe::Axis { level: 0.8 },
            StandardView::A4c => PlaneRecipe::ThreePoint([LaCenter, RaCenter, LvApex]),
            StandardView::A5c => PlaneRecipe::ThreePoint([LaCenter, AvCenter, LvApex]),
            StandardView::A2c => PlaneRecipe::ThreePoint([LvApex, MvCenter, RvCenter]),
        }
    }

    pub fn required_landmarks(self) -> Vec<Landmark> {
        match self.recipe() {
            PlaneRecipe::ThreePoint(lms) => lms.to_vec(),
            PlaneRecipe::Axis { .. } => vec![Landmark::MvCenter, Landmark::LvApex],
        }
    }
}

impl fmt::Display for StandardView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StandardView {
    type Err = Error;

    /// Case-insensitive; accepts the canonical names with or without underscores.
    fn from_str(s: &str) -> Result<Self> {
        let key = |v: &str| v.to_ascii_lowercase().replace(['_', '-'], "");
        let wanted = key(s.trim());
        StandardView::ALL
            .into_iter()
            .find(|v| key(v.name()) == wanted)
            .ok_or_else(|| Error::Parse(format!("unknown view {s:?}")))
    }
}

/// Parses a comma-separated view list; `all` expands to the nine views.
pub fn parse_view_list(s: &str) -> Result<Vec<StandardView>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(StandardView::ALL.to_vec());
    }
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

/// Slicing plane of a standard view.
pub fn standard_view_plane(view: StandardView, lm: &LandmarkSet) -> Result<ViewPlane> {
    match view.recipe() {
        PlaneRecipe::ThreePoint([a, b, c]) => plane_from_points(lm.get(a)?, lm.get(b)?, lm.get(c)?),
        PlaneRecipe::Axis { level } => plane_from_axis(lm.get(Landmark::MvCenter)?, lm.get(Landmark::LvApex)?, level),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn landmarks() -> LandmarkSet {
        let mut lm = LandmarkSet::new();
        let pts = [
            (Landmark::MvCenter, Vec3::new(0.0, 0.0, 32.0)),
            (Landmark::AvCenter, Vec3::new(10.0, -20.0, 52.0)),
            (Landmark::PvCenter, Vec3::new(30.0, -23.0, 46.0)),
            (Landmark::LaCenter, Vec3::new(-1.0, 2.0, 70.0)),
            (Landmark::RaCenter, Vec3::new(37.0, 10.0, 68.0)),
            (Landmark::RvCenter, Vec3::new(36.0, 9.0, 4.0)),
            (Landmark::LvApex, Vec3::new(0.5, -0.3, -40.0)),
        ];
        for (k, p) in pts {
            lm.insert(k, p).unwrap();
        }
        lm
    }

    #[test]
    fn a4c_contains_its_landmarks() {
        let lm = landmarks();
        let p = standard_view_plane(StandardView::A4c, &lm).unwrap();
        for k in [Landmark::LaCenter, Landmark::RaCenter, Landmark::LvApex] {
            assert!(p.signed_distance(lm.get(k).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn three_point_views_contain_their_landmarks() {
        let lm = landmarks();
        for v in StandardView::ALL {
            if let PlaneRecipe::ThreePoint(ks) = v.recipe() {
                let p = standard_view_plane(v, &lm).unwrap();
                for k in ks {
                    assert!(p.signed_distance(lm.get(k).unwrap()).abs() < 1e-9, "{v} {k}");
                }
            }
        }
    }

    #[test]
    fn psax_levels() {
        let lm = landmarks();
        let mv = lm.get(Landmark::MvCenter).unwrap();
        let apex = lm.get(Landmark::LvApex).unwrap();
        let axis = (apex - mv).normalized().unwrap();
        for (v, level) in [(StandardView::PsaxMv, 0.2), (StandardView::PsaxPm, 0.5), (StandardView::PsaxApex, 0.8)] {
            let p = standard_view_plane(v, &lm).unwrap();
            assert!((p.normal - axis).norm() < 1e-12);
            assert!((p.origin - (mv + (apex - mv) * level)).norm() < 1e-12);
        }
    }

    #[test]
    fn missing_landmark() {
        let mut lm = landmarks();
        lm.remove(Landmark::RaCenter);
        let r = standard_view_plane(StandardView::A4c, &lm);
        assert!(matches!(r, Err(Error::MissingLandmark(n)) if n == "RA_center"));
    }

    #[test]
    fn parse_names() {
        assert_eq!("a2c".parse::<StandardView>().unwrap(), StandardView::A2c);
        assert_eq!("psax_apex".parse::<StandardView>().unwrap(), StandardView::PsaxApex);
        assert_eq!("RV_inflow".parse::<StandardView>().unwrap(), StandardView::RvInflow);
        assert_eq!(parse_view_list("a2c,a4c").unwrap(), vec![StandardView::A2c, StandardView::A4c]);
        assert_eq!(parse_view_list("all").unwrap().len(), 9);
        assert!("a3c".parse::<StandardView>().is_err());
        for v in StandardView::ALL {
            let j = serde_json::to_string(&v).unwrap();
            assert_eq!(j, format!("\"{}\"", v.name()));
        }
    }
}
