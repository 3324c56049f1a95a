//! Heart meshes, landmarks, slicing planes, cross sections and voxel grids.

pub mod landmarks;
pub mod mesh;
pub mod phantom;
pub mod plane;
pub mod primitives;
pub mod raycast;
pub mod slice;
pub mod vec3;
pub mod voxel;

pub use landmarks::{compute_landmarks, Landmark, LandmarkSet};
pub use mesh::{center_of_mass, LabeledMesh, StructureId};
pub use phantom::{generate_phantom, phantom_labels, PhantomParams};
pub use plane::{plane_from_axis, plane_from_points, ViewPlane};
pub use raycast::{ray_cast_apex, ray_cast_apex_with, wall_thickness_samples, ApexHit, WallSample};
pub use slice::{slice_mesh, CrossSection};
pub use vec3::{Point3, Vec3};
pub use voxel::{voxelize, VoxelGrid};
