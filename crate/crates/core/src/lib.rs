//! Surrogate pipeline for injection-moulding simulation: geodesic gate
//! features feed a gradient-boosted fill-time regressor, whose field is
//! projected to an image and passed through a convolutional network that
//! predicts part deflection.
//!
//! The numeric code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below name the instantiations the pipeline uses.

pub mod cnn;
pub mod features;
pub mod gbm;
pub mod harness;
pub mod mesh;
pub mod pipeline;
pub mod projection;
pub mod scalar;

pub type MeshF64 = mesh::Mesh<f64>;
pub type MeshGraphF64 = mesh::MeshGraph<f64>;
pub type GbmModelF64 = gbm::GbmModel<f64>;
pub type RasterMapF64 = projection::RasterMap<f64>;
pub type DeflectionNet = cnn::Network<f32>;
/// Network instantiation used by gradient checks.
pub type DeflectionNetF64 = cnn::Network<f64>;
pub type Sample = harness::SimulationSample<f64>;
