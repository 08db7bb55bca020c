//! Geometry, supervision grading, losses, evaluation metrics and prism
//! reconstruction for building extraction from off-nadir imagery.
//!
//! The modules build on each other bottom-up:
//!
//! - [`geometry`]: height/pose/offset relation, polygons and boxes
//! - [`dataset`]: annotated samples, supervision levels, JSON I/O
//! - [`synth`]: seeded synthetic scenes, rasterization, annotation degradation
//! - [`pbc`]: pseudo building boxes from footprint + height + pose
//! - [`rofe`]: roof mask → footprint mask translation
//! - [`losses`]: per-head losses and per-level objectives
//! - [`metrics`]: instance matching, F1, EPE, height and angle errors
//! - [`reconstruct`]: Douglas–Peucker, prism extrusion, OBJ export
//!
//! Families of interchangeable algorithms are exposed through
//! [`registry::Registry`] and resolved by name.

pub mod dataset;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod pbc;
pub mod reconstruct;
pub mod registry;
pub mod rofe;
pub mod synth;

pub use error::{Error, Result};
