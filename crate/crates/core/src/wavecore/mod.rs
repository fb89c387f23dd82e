//! Space-time finite-difference discretization of `m ∂tt u − ∇²u = b`, its
//! forward/adjoint solves, sampling, and the scattering and model-update
//! primitives built on it.

mod field;
mod geometry;
mod grid;
pub mod io;
mod operator;
mod update;

pub use field::{SourceField, SpaceTimeField, Wavefield};
pub use geometry::{inject, sample, AcquisitionGeometry, TraceData};
pub use grid::{build_model, GridSpec, ModelGrid};
pub use operator::{
    adjoint_solve, apply_wave_operator, apply_wave_operator_transpose, born_adjoint, born_apply,
    forward_solve, laplacian, scattering_source, second_time_derivative,
};
pub use update::{
    model_update_correlation, model_update_sources, CorrelationTerms, SourceCombination,
    DENOMINATOR_FLOOR,
};
