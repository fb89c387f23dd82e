//! Inversion schemes: reduced-space FWI, penalty and augmented-Lagrangian
//! iterations in both orientations, the scattering-based Gauss-Newton,
//! Gauss-Seidel and split iterations, the refined scattering iterations, and
//! the outer driver.

mod driver;
mod scheme;
mod state;
mod steps;

pub use driver::{run_inversion, InversionConfig, InversionOutcome, StopReason};
pub use scheme::{Scheme, StepSettings};
pub use state::{Diagnostics, IterationState, Problem};
pub use steps::{
    al_step, born_model_update, gauss_newton_step, gauss_seidel_step, penalty_step,
    reduced_objective_and_gradient, refined_step, saddle_pairs, scattered_data_defect,
    split_gn_step, split_gs_step, standard_fwi_step, wri_scaled_step, BornSolver,
    MultiplierEstimate, RefinedVariant,
};
