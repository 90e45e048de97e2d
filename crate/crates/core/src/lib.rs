//! Design optimization for single-propeller spinning UAVs whose motion-blurred
//! appearance should be as hard to see as possible.
//!
//! The crate is organised bottom-up: [`geometry`] (solids, poses, mass
//! properties), [`aero`] (drag-torque coefficient and spin rate),
//! [`feasibility`] (the ten flight constraints), [`render`] (orthographic
//! ray casting and yaw-averaged blur), [`perceptual`] (backgrounds and image
//! distances), [`visibility`] (the solid-angle weighted objective), then the
//! two pipeline stages in [`sampler`] and [`refine`].

pub mod error;
pub mod aero;
pub mod design;
pub mod feasibility;
pub mod geometry;
pub mod optim;
pub mod perceptual;
pub mod raster;
pub mod refine;
pub mod render;
pub mod sampler;
pub mod visibility;

pub use error::{Error, Result};
