//! Desk-scale time-domain full-waveform inversion built around Lagrange
//! multipliers: standard adjoint-state FWI, quadratic-penalty (WRI) and
//! augmented-Lagrangian (IR-WRI) iterations in both wavefield-oriented and
//! multiplier-oriented form, and the scattering-based Gauss-Newton,
//! Gauss-Seidel and split iterations that reproduce them.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases below name the double-precision instantiations used by the CLI.

pub mod error;
pub mod harness;
pub mod iterations;
pub mod linalg;
pub mod saddle;
pub mod scalar;
pub mod oracle;
pub mod wavecore;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use wavecore::{
    AcquisitionGeometry, GridSpec, ModelGrid, SourceField, SpaceTimeField, TraceData, Wavefield,
};

pub type GridSpecF64 = GridSpec<f64>;
pub type ModelGridF64 = ModelGrid<f64>;
pub type WavefieldF64 = Wavefield<f64>;
pub type TraceDataF64 = TraceData<f64>;
pub type GridSpecF32 = GridSpec<f32>;
pub type ModelGridF32 = ModelGrid<f32>;
pub type WavefieldF32 = Wavefield<f32>;
pub type TraceDataF32 = TraceData<f32>;
