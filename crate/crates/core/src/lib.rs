//! Multi-view 3D cardiac occupancy reconstruction from 2D standard echo views.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] labeled heart meshes, landmarks, slicing planes, cross sections,
//!   voxelization and a seeded procedural heart phantom.
//! * [`viewgen`] the nine standard echocardiographic views, mask rasterization
//!   and pseudo-ultrasound rendering.
//! * [`tensor`] a small dense tensor engine with reverse-mode differentiation,
//!   a finite-difference checker and multiply-accumulate accounting.
//! * [`reconnet`] the multi-decoder baseline networks and the single-decoder
//!   efficient variants with a view-collapsing 3D convolution.
//! * [`training`] dataset splits, Adam, BCE training and thresholded IoU evaluation.
//! * [`dataset`] the on-disk manifest tying cases, images and ground truth together.

pub mod dataset;
pub mod error;
pub mod geometry;
pub mod reconnet;
pub mod tensor;
pub mod training;
pub mod viewgen;

pub use error::{Error, Result};
