//! Generative-model quantum state tomography.
//!
//! Simulates few-qubit state preparation and informationally complete Pauli
//! measurements, fits an autoregressive recurrent model to the measurement
//! records, and reconstructs and scores the resulting state.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod dist;
pub mod error;
pub mod generative;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod mle;
pub mod povm;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result, StageContext};
pub use scalar::Real;

pub type CMatrix64 = linalg::CMatrix<f64>;
pub type DensityMatrix64 = sim::DensityMatrix<f64>;
pub type StateVector64 = sim::StateVector<f64>;
pub type ProbDist64 = dist::ProbDist<f64>;
pub type PovmSet64 = povm::PovmSet<f64>;
pub type RnnParams64 = generative::RnnParams<f64>;
pub type RnnParams32 = generative::RnnParams<f32>;
