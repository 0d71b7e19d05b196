//! Photon/magnon coupling between a superconducting coplanar resonator and
//! the gyrotropic mode of a magnetic vortex disc.

// validation comparisons are written so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod coupling;
pub mod cpw;
pub mod error;
pub mod micromag;
pub mod physics;
pub mod scalar;
pub mod spectroscopy;

pub use error::{Error, Result};
pub use scalar::{Real, Vec3};

pub type Engine = micromag::Engine<f64>;
pub type EngineF32 = micromag::Engine<f32>;
pub type Material = physics::MaterialParams<f64>;
pub type Disc = physics::DiscGeometry<f64>;
pub type Resonator = physics::ResonatorSpec<f64>;
