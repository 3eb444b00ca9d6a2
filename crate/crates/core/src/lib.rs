//! Constant-modulus MIMO radar waveform design with spatial, spectral and
//! similarity constraints, solved by an iterative rank-one constrained SDP.

extern crate openblas_src;

pub mod baselines;
pub mod error;
pub mod lifting;
pub mod metrics;
pub mod refwave;
pub mod scenario;
pub mod sdp;
pub mod spatial;
pub mod spectral;
pub mod waveform;
pub mod wise;

pub use error::{Result, WiseError};
pub use scenario::Scenario;
pub use waveform::WaveformMatrix;
