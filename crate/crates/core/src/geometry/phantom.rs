//! Seeded procedural heart phantom: LV as nested prolate spheroids, a crescent RV
//! wrapped around it, spherical atria and disc-like valve annuli.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::landmarks::{names, Landmark, LandmarkSet};
use super::mesh::{LabeledMesh, StructureId};
use super::primitives::unit_icosphere;
use super::vec3::{Point3, Vec3};
use crate::error::{Error, Result};

/// Shape parameters in millimetres and degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomParams {
    pub lv_cavity_radius: f64,
    pub lv_cavity_half_length: f64,
    pub lv_wall: f64,
    pub lv_apex_wall: f64,
    pub rv_gap: f64,
    pub rv_thickness: f64,
    pub rv_half_angle_deg: f64,
    pub rv_half_length: f64,
    pub rv_center_z: f64,
    pub rv_azimuth_deg: f64,
    pub la_radius: f64,
    pub ra_radius: f64,
    pub atrial_gap: f64,
    pub valve_radius: f64,
    pub valve_half_thickness: f64,
    /// Peak smooth radial displacement applied to each chamber surface.
    pub perturbation: f64,
    /// Relative amplitude of the uniform random global scale.
    pub scale_jitter: f64,
    /// Icosphere subdivision level of every structure.
    pub mesh_level: u32,
}

impl Default for PhantomParams {
    fn default() -> Self {
        PhantomParams {
            lv_cavity_radius: 20.0,
            lv_cavity_half_length: 40.0,
            lv_wall: 8.0,
            lv_apex_wall: 4.0,
            rv_gap: 3.0,
            rv_thickness: 14.0,
            rv_half_angle_deg: 55.0,
            rv_half_length: 34.0,
            rv_center_z: 4.0,
            rv_azimuth_deg: 15.0,
            la_radius: 17.0,
            ra_radius: 15.0,
            atrial_gap: 3.0,
            valve_radius: 8.0,
            valve_half_thickness: 1.5,
            perturbation: 1.0,
            scale_jitter: 0.05,
            mesh_level: 4,
        }
    }
}

/// Structure ids assigned by the generator.
pub const LV_ENDO: StructureId = 1;
pub const LV_EPI: StructureId = 2;
pub const RV: StructureId = 3;
pub const LA: StructureId = 4;
pub const RA: StructureId = 5;
pub const MV: StructureId = 6;
pub const AV: StructureId = 7;
pub const PV: StructureId = 8;
pub const TV: StructureId = 9;

impl PhantomParams {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("lv_cavity_radius", self.lv_cavity_radius),
            ("lv_cavity_half_length", self.lv_cavity_half_length),
            ("lv_wall", self.lv_wall),
            ("lv_apex_wall", self.lv_apex_wall),
            ("rv_gap", self.rv_gap),
            ("rv_thickness", self.rv_thickness),
            ("rv_half_angle_deg", self.rv_half_angle_deg),
            ("rv_half_length", self.rv_half_length),
            ("la_radius", self.la_radius),
            ("ra_radius", self.ra_radius),
            ("atrial_gap", self.atrial_gap),
            ("valve_radius", self.valve_radius),
            ("valve_half_thickness", self.valve_half_thickness),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.perturbation >= 0.0) || !(0.0..0.5).contains(&self.scale_jitter) {
            return Err(Error::InvalidParams("perturbation must be >= 0 and scale_jitter in [0, 0.5)".into()));
        }
        if self.rv_half_angle_deg >= 170.0 {
            return Err(Error::InvalidParams("rv_half_angle_deg must stay below 170".into()));
        }
        // Independent displacements of two neighbouring surfaces may close a gap of 2·amplitude.
        let tightest = [
            self.lv_apex_wall,
            self.lv_wall,
            self.rv_gap,
            self.atrial_gap,
            self.rv_thickness / 2.0,
            self.lv_cavity_radius / 2.0,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        if 2.0 * self.perturbation >= tightest {
            return Err(Error::InvalidParams(format!(
                "perturbation {} would let shells intersect (tightest clearance {tightest})",
                self.perturbation
            )));
        }
        if self.mesh_level > 6 {
            return Err(Error::InvalidParams("mesh_level above 6 is unreasonably large".into()));
        }
        Ok(())
    }

    fn epi_semi_axes(&self) -> (f64, f64, f64) {
        let l = self.lv_cavity_half_length;
        let long = (2.0 * l + self.lv_wall + self.lv_apex_wall) / 2.0;
        let center_z = l + self.lv_wall - long;
        (self.lv_cavity_radius + self.lv_wall, long, center_z)
    }

    fn rv_mid_radius(&self) -> f64 {
        self.lv_cavity_radius + self.lv_wall + self.rv_gap + self.rv_thickness / 2.0
    }

    fn atrial_z(&self, radius: f64) -> f64 {
        self.lv_cavity_half_length + self.lv_wall + self.atrial_gap + radius
    }

    /// Axis-aligned box holding any phantom from these parameters, for ground-truth grids.
    pub fn ground_truth_bounds(&self) -> (Point3, Point3) {
        let s = 1.0 + self.scale_jitter;
        let pad = 2.0 * self.perturbation + 2.0;
        let reach_xy = (self.rv_mid_radius() + self.rv_thickness / 2.0).max(self.rv_mid_radius() + self.ra_radius) + pad;
        let (_, long, cz) = self.epi_semi_axes();
        let zmin = cz - long - pad;
        let zmax = self.atrial_z(self.la_radius).max(self.atrial_z(self.ra_radius)) + self.la_radius.max(self.ra_radius) + pad;
        let xmin = -(self.lv_cavity_radius + self.lv_wall + pad);
        let lo = Vec3::new(xmin, -reach_xy, zmin);
        let hi = Vec3::new(reach_xy, reach_xy, zmax);
        // Cube around the box so voxels are isotropic.
        let center = (lo + hi) * 0.5;
        let half = (hi - lo).to_array().into_iter().fold(0.0, f64::max) * 0.5 * s;
        let h = Vec3::new(half, half, half);
        (center * s - h, center * s + h)
    }
}

/// Smooth bounded scalar field on the unit sphere, |f| ≤ 1.
struct RadialField {
    terms: Vec<(f64, f64, Vec3, f64)>,
}

impl RadialField {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut terms: Vec<(f64, f64, Vec3, f64)> = (0..4)
            .map(|_| {
                let w = loop {
                    let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    if v.norm() > 0.1 && v.norm() <= 1.0 {
                        break v.normalized().unwrap();
                    }
                };
                (rng.gen_range(0.5..1.0), rng.gen_range(1.0..3.0), w, rng.gen_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        let total: f64 = terms.iter().map(|t| t.0).sum();
        for t in &mut terms {
            t.0 /= total;
        }
        RadialField { terms }
    }

    fn eval(&self, d: Vec3) -> f64 {
        self.terms.iter().map(|&(a, k, w, phase)| a * (k * d.dot(w) + phase).sin()).sum()
    }
}

struct Builder {
    mesh: LabeledMesh,
    dirs: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl Builder {
    fn add(&mut self, label: StructureId, name: &str, place: impl Fn(Vec3) -> Point3) {
        let offset = self.mesh.vertices.len();
        self.mesh.vertices.extend(self.dirs.iter().map(|&d| place(d)));
        self.mesh.faces.extend(self.faces.iter().map(|f| f.map(|i| i + offset)));
        self.mesh.face_labels.extend(std::iter::repeat(label).take(self.faces.len()));
        self.mesh.structures.insert(label, name.to_string());
    }
}

/// Orthonormal pair spanning the plane orthogonal to `n`.
fn disc_frame(n: Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
    let a = (helper - n * helper.dot(n)).normalized().unwrap();
    (a, n.cross(a))
}

/// Generates a labeled phantom mesh and its construction landmarks.
///
/// Identical `(params, seed)` give bitwise-identical output.
pub fn generate_phantom(params: &PhantomParams, seed: u64) -> Result<(LabeledMesh, LandmarkSet)> {
    params.validate()?;
    let p = params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 + p.scale_jitter * rng.gen_range(-1.0..=1.0);
    let amp = p.perturbation;
    let fields: Vec<RadialField> = (0..5).map(|_| RadialField::random(&mut rng)).collect();
    let (dirs, faces) = unit_icosphere(p.mesh_level);
    let mut b = Builder { mesh: LabeledMesh::empty(), dirs, faces };

    let spheroid = |center: Vec3, semi: Vec3, field: &RadialField, d: Vec3| -> Point3 {
        let base = center + d.component_mul(semi);
        let normal = Vec3::new(d.x / semi.x, d.y / semi.y, d.z / semi.z).normalized().unwrap();
        (base + normal * (amp * field.eval(d))) * scale
    };

    // Left ventricle.
    let r = p.lv_cavity_radius;
    let l = p.lv_cavity_half_length;
    let endo_semi = Vec3::new(r, r, l);
    b.add(LV_ENDO, names::LV_ENDO, |d| spheroid(Vec3::ZERO, endo_semi, &fields[0], d));
    let (epi_r, epi_long, epi_cz) = p.epi_semi_axes();
    let epi_semi = Vec3::new(epi_r, epi_r, epi_long);
    b.add(LV_EPI, names::LV_EPI, |d| spheroid(Vec3::new(0.0, 0.0, epi_cz), epi_semi, &fields[1], d));

    // Right ventricle: a slab bent around the LV axis.
    let rho_mid = p.rv_mid_radius();
    let az = p.rv_azimuth_deg.to_radians();
    let half_angle = p.rv_half_angle_deg.to_radians();
    let rv_field = &fields[2];
    b.add(RV, names::RV, |d: Vec3| {
        let rho = rho_mid + d.x * p.rv_thickness / 2.0 + amp * rv_field.eval(d);
        let phi = az + d.y * half_angle;
        let z = p.rv_center_z + d.z * p.rv_half_length;
        Vec3::new(rho * phi.cos(), rho * phi.sin(), z) * scale
    });

    // Atria.
    let la_center = Vec3::new(0.0, 0.0, p.atrial_z(p.la_radius));
    let ra_center = Vec3::new(rho_mid * az.cos(), rho_mid * az.sin(), p.atrial_z(p.ra_radius));
    b.add(LA, names::LA, |d| spheroid(la_center, Vec3::new(p.la_radius, p.la_radius, p.la_radius), &fields[3], d));
    b.add(RA, names::RA, |d| spheroid(ra_center, Vec3::new(p.ra_radius, p.ra_radius, p.ra_radius), &fields[4], d));

    // Valve annuli as flat oblate spheroids.
    let disc = |center: Vec3, normal: Vec3, radius: f64| {
        let n = normal.normalized().unwrap();
        let (a, c) = disc_frame(n);
        let t = p.valve_half_thickness;
        move |d: Vec3| (center + a * (d.x * radius) + c * (d.y * radius) + n * (d.z * t)) * scale
    };
    let mv_radius = p.valve_radius.min(0.75 * r * (1.0f64 - 0.64).sqrt());
    let mv_center = Vec3::new(0.0, 0.0, 0.8 * l);
    let av_center = Vec3::new(0.5 * r, -r, l + p.lv_wall + 4.0);
    let av_radius = 0.85 * p.valve_radius;
    let pv_az = az - 0.95 * half_angle;
    let pv_center = Vec3::new(rho_mid * pv_az.cos(), rho_mid * pv_az.sin(), l + p.lv_wall - 2.0);
    let rv_top = p.rv_center_z + p.rv_half_length;
    let ra_bottom = ra_center.z - p.ra_radius;
    let tv_center = Vec3::new(ra_center.x, ra_center.y, 0.5 * (rv_top + ra_bottom));
    b.add(MV, names::MV, disc(mv_center, Vec3::Z, mv_radius));
    b.add(AV, names::AV, disc(av_center, Vec3::new(0.3, -0.5, 0.8), av_radius));
    b.add(PV, names::PV, disc(pv_center, Vec3::new(0.3, -0.3, 0.9), av_radius));
    b.add(TV, names::TV, disc(tv_center, Vec3::Z, p.valve_radius.min(0.6 * p.ra_radius)));

    let mesh = b.mesh;
    mesh.validate()?;

    // Construction landmarks. The apex is the perturbed endocardial vertex on the -z pole.
    let apex_dir = -Vec3::Z;
    let apex = spheroid(Vec3::ZERO, endo_semi, &fields[0], apex_dir);
    let mut lm = LandmarkSet::new();
    lm.insert(Landmark::MvCenter, mv_center * scale)?;
    lm.insert(Landmark::AvCenter, av_center * scale)?;
    lm.insert(Landmark::PvCenter, pv_center * scale)?;
    lm.insert(Landmark::LaCenter, la_center * scale)?;
    lm.insert(Landmark::RaCenter, ra_center * scale)?;
    lm.insert(Landmark::RvCenter, Vec3::new(rho_mid * az.cos(), rho_mid * az.sin(), p.rv_center_z) * scale)?;
    lm.insert(Landmark::LvApex, apex)?;
    Ok((mesh, lm))
}

/// Structure ids present in a phantom, in id order.
pub fn phantom_labels() -> Vec<StructureId> {
    vec![LV_ENDO, LV_EPI, RV, LA, RA, MV, AV, PV, TV]
}
