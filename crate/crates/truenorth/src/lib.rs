//! Camera-path estimation, stabilization and direction for spherical and
//! wide-angle video, working on feature tracks rather than pixels.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! 1. [`motion`] — direct spherical estimation of relative rotation and
//!    translation direction between frame pairs, with 7-point RANSAC
//!    prefiltering and analytic-Jacobian refinement.
//! 2. [`path`] — joint optimization of a virtual camera path that smooths
//!    the motion while honoring positive/negative viewing constraints.
//! 3. [`warp`] — per-frame spherical mesh warps realizing the optimized
//!    path, plus equirectangular still-image remapping.
//! 4. [`synth`] — synthetic scene and clip generators with a benchmark
//!    runner for quantitative evaluation of the estimators.
//!
//! Supporting modules: [`sphere`] (geometry primitives and conventions),
//! [`tracks`] (feature-trajectory model and file format), [`constraints`]
//! (directional constraints and the robust negative loss), [`image`]
//! (PPM/PGM/PFM rasters), and [`cli`] (the command-line front end).

pub mod cli;
pub mod constraints;
pub mod error;
pub mod image;
mod linalg;
pub mod motion;
pub mod path;
pub mod sphere;
pub mod synth;
mod textio;
pub mod tracks;
pub mod warp;

pub use error::{Error, Result};
pub use sphere::{Bearing, ErGeometry, Rotation, TranslationDir};
