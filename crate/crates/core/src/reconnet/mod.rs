//! Multi-view occupancy networks.
//!
//! Two families share one toy 2D encoder: the baseline decodes every view
//! separately and merges the volumes with a per-voxel softmax over learned
//! score maps; the efficient family collapses the stacked view latents with a
//! single 3D convolution and runs one decoder. The accurate tier of either
//! family adds a residual refiner.

mod complexity;
mod config;
mod model;
mod params;

pub use complexity::{layer_plan, report_complexity, ComplexityReport, Module, PlannedLayer};
pub use config::{Family, ModelConfig, Tier};
pub use model::{context_fusion, decode, encode, forward, fuse_views_efficient, refine, Decoded, Model, REFINE_CLAMP};
pub use params::{BoundParams, ModelParams};
