//! Standard-view planes, mask rasterization and pseudo-ultrasound rendering.

pub mod pgm;
pub mod pseudo_us;
pub mod raster;
pub mod views;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use pseudo_us::{pseudo_us, Cone, GrayImage, NoiseOrder, PseudoUsParams};
pub use raster::{rasterize_labels, rasterize_section, LabelImage, MaskImage};
pub use views::{parse_view_list, standard_view_plane, PlaneRecipe, StandardView};

use crate::error::{Error, Result};
use crate::geometry::{slice_mesh, LabeledMesh, LandmarkSet, StructureId, ViewPlane};

/// Where the image midpoint sits in the view plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RasterCenter {
    /// The plane origin (landmark centroid or axis point).
    PlaneOrigin,
    /// Projection of a fixed world point onto the plane.
    World([f64; 3]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RasterParams {
    pub width: usize,
    pub height: usize,
    pub mm_per_pixel: f64,
    pub center: RasterCenter,
    /// Structures to slice; `None` uses every structure of the mesh.
    pub labels: Option<Vec<StructureId>>,
}

impl Default for RasterParams {
    fn default() -> Self {
        RasterParams { width: 128, height: 128, mm_per_pixel: 1.0, center: RasterCenter::PlaneOrigin, labels: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewImage {
    pub view: StandardView,
    pub plane: ViewPlane,
    pub mask: MaskImage,
    pub pseudo_us: Option<GrayImage>,
}

/// Per-view noise seed so views of one case get independent noise.
pub fn view_seed(base: u64, view: StandardView) -> u64 {
    base ^ (view as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn render_view(
    mesh: &LabeledMesh,
    lm: &LandmarkSet,
    view: StandardView,
    labels: &[StructureId],
    raster: &RasterParams,
    us: Option<&PseudoUsParams>,
) -> Result<ViewImage> {
    let plane = standard_view_plane(view, lm)?;
    let section = slice_mesh(mesh, &plane, labels);
    let center = match raster.center {
        RasterCenter::PlaneOrigin => [0.0, 0.0],
        RasterCenter::World(p) => plane.to_plane(crate::geometry::Vec3::from_array(p)),
    };
    let mask = rasterize_section(&section, raster.width, raster.height, raster.mm_per_pixel, center)?;
    let pseudo_us = us
        .map(|p| pseudo_us::pseudo_us(&mask, &PseudoUsParams { seed: view_seed(p.seed, view), ..p.clone() }))
        .transpose()?;
    Ok(ViewImage { view, plane, mask, pseudo_us })
}

/// Plane, slice, raster and optional pseudo-US for each requested view, in input order.
/// The first failing view (in input order) is reported.
pub fn build_view_set(
    mesh: &LabeledMesh,
    lm: &LandmarkSet,
    views: &[StandardView],
    raster: &RasterParams,
    us: Option<&PseudoUsParams>,
) -> Result<Vec<ViewImage>> {
    if views.is_empty() {
        return Err(Error::InvalidParams("no views requested".into()));
    }
    let labels = raster.labels.clone().unwrap_or_else(|| mesh.labels());
    let results: Vec<Result<ViewImage>> = views
        .par_iter()
        .map(|&v| render_view(mesh, lm, v, &labels, raster, us).map_err(|e| e.in_view(v.name())))
        .collect();
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{compute_landmarks, generate_phantom, Landmark, PhantomParams};

    fn phantom() -> (LabeledMesh, LandmarkSet) {
        generate_phantom(&PhantomParams { mesh_level: 3, ..Default::default() }, 5).unwrap()
    }

    #[test]
    fn nine_views_all_nonzero() {
        let (mesh, _) = phantom();
        let (lm, _) = compute_landmarks(&mesh, 512).unwrap();
        let out = build_view_set(&mesh, &lm, &StandardView::ALL, &RasterParams::default(), None).unwrap();
        assert_eq!(out.len(), 9);
        for v in &out {
            assert!(v.mask.count() > 100, "{} has {} pixels", v.view, v.mask.count());
        }
    }

    #[test]
    fn order_and_pseudo_us() {
        let (mesh, lm) = phantom();
        let raster = RasterParams { width: 64, height: 64, mm_per_pixel: 2.5, ..Default::default() };
        let us = PseudoUsParams::default_for(64, 64);
        let out = build_view_set(&mesh, &lm, &[StandardView::A2c, StandardView::A4c], &raster, Some(&us)).unwrap();
        assert_eq!(out.iter().map(|v| v.view).collect::<Vec<_>>(), vec![StandardView::A2c, StandardView::A4c]);
        assert!(out.iter().all(|v| v.pseudo_us.as_ref().is_some_and(|g| g.width == 64)));
        assert_ne!(out[0].pseudo_us, out[1].pseudo_us);
    }

    #[test]
    fn error_names_first_failing_view() {
        let (mesh, mut lm) = phantom();
        lm.remove(Landmark::LvApex);
        let views = [StandardView::PsaxAv, StandardView::Plax, StandardView::A4c];
        let err = build_view_set(&mesh, &lm, &views, &RasterParams::default(), None).unwrap_err();
        match err {
            Error::View { view, source } => {
                assert_eq!(view, "PLAX");
                assert!(matches!(*source, Error::MissingLandmark(_)));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn multi_label_raster() {
        let (mesh, lm) = phantom();
        let plane = standard_view_plane(StandardView::A4c, &lm).unwrap();
        let labels = rasterize_labels(&mesh, &plane, &mesh.labels(), 96, 96, 1.6, [0.0, 0.0]).unwrap();
        let distinct: std::collections::BTreeSet<_> = labels.labels.iter().copied().collect();
        assert!(distinct.len() >= 4, "{distinct:?}");
    }
}
