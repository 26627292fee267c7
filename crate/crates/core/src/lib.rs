//! Room-mode analysis: box-model modes and tuning bounds, voxel FDTD
//! simulation, sine-sweep deconvolution and spectral peak extraction.

pub mod dataset;
pub mod fdtd;
pub mod geometry;
pub mod io;
pub mod modal;
pub mod signal;
pub mod spectral;
pub mod sweep;

pub use signal::ImpulseResponse;
