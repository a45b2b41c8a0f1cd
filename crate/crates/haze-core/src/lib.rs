//! Atmospheric-scattering haze toolkit.
//!
//! Everything needed to synthesize, remove and evaluate haze on RGB-D
//! data: the scattering model and its inversion, a Dark Channel Prior
//! dehazer, a progressive depth↔transmission refinement cascade, the
//! associated loss functions and quality metrics, and a procedural
//! RGB-D scene generator for self-contained experiments.
//!
//! The math is generic over the [`Real`] scalar (`f32` or `f64`); the
//! aliases below fix the common instantiations. File I/O uses `f32`.

pub mod dataset;
pub mod dcp;
pub mod error;
pub mod filters;
pub mod losses;
pub mod metrics;
pub mod progressive;
pub mod raster;
pub mod scalar;
pub mod scattering;

pub use error::{Error, Result};
pub use scalar::Real;

/// Single-precision raster aliases, the default for file-backed pipelines.
pub type PlaneF32 = raster::ImagePlane<f32>;
pub type RgbF32 = raster::RgbImage<f32>;
pub type DepthF32 = raster::DepthMap<f32>;
pub type InverseDepthF32 = raster::InverseDepthMap<f32>;
pub type TransmissionF32 = raster::TransmissionMap<f32>;

/// Double-precision raster aliases for oracle-grade numerics.
pub type PlaneF64 = raster::ImagePlane<f64>;
pub type RgbF64 = raster::RgbImage<f64>;
pub type DepthF64 = raster::DepthMap<f64>;
pub type InverseDepthF64 = raster::InverseDepthMap<f64>;
pub type TransmissionF64 = raster::TransmissionMap<f64>;
