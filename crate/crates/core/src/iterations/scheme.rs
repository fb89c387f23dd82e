use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::CgSettings;
use crate::saddle::{Orientation, PenaltyConfig};
use crate::scalar::Scalar;

use super::state::{IterationState, Problem};
use super::steps::{
    al_step, gauss_newton_step, gauss_seidel_step, penalty_step, refined_step, split_gn_step,
    split_gs_step, standard_fwi_step, wri_scaled_step, BornSolver, MultiplierEstimate,
    RefinedVariant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Fwi,
    Penalty(Orientation),
    WriScaled,
    Al(Orientation),
    GaussNewton,
    GaussSeidel,
    SplitGn,
    SplitGs,
    Refined(RefinedVariant),
}

impl Scheme {
    pub const ALL: [Scheme; 13] = [
        Scheme::Fwi,
        Scheme::Penalty(Orientation::Wavefield),
        Scheme::Penalty(Orientation::Multiplier),
        Scheme::WriScaled,
        Scheme::Al(Orientation::Wavefield),
        Scheme::Al(Orientation::Multiplier),
        Scheme::GaussNewton,
        Scheme::GaussSeidel,
        Scheme::SplitGn,
        Scheme::SplitGs,
        Scheme::Refined(RefinedVariant::Direct),
        Scheme::Refined(RefinedVariant::Rearranged),
        Scheme::Refined(RefinedVariant::Epsilon),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Fwi => "fwi",
            Scheme::Penalty(Orientation::Wavefield) => "penalty-wavefield",
            Scheme::Penalty(Orientation::Multiplier) => "penalty-multiplier",
            Scheme::WriScaled => "wri-scaled",
            Scheme::Al(Orientation::Wavefield) => "al-wavefield",
            Scheme::Al(Orientation::Multiplier) => "al-multiplier",
            Scheme::GaussNewton => "gauss-newton",
            Scheme::GaussSeidel => "gauss-seidel",
            Scheme::SplitGn => "split-gn",
            Scheme::SplitGs => "split-gs",
            Scheme::Refined(RefinedVariant::Direct) => "refined-direct",
            Scheme::Refined(RefinedVariant::Rearranged) => "refined-rearranged",
            Scheme::Refined(RefinedVariant::Epsilon) => "refined-epsilon",
        }
    }

    /// Whether the scheme's multiplier is the scattering source `λ` (with
    /// error `ε`) rather than `v` (with running multiplier `w`).
    pub fn uses_lambda(self) -> bool {
        matches!(
            self,
            Scheme::WriScaled | Scheme::SplitGn | Scheme::SplitGs | Scheme::Refined(_)
        )
    }

    /// Whether `μ` enters the scheme as a penalty weight (continuation
    /// applies) rather than only as a damping default.
    pub fn is_penalty_type(self) -> bool {
        matches!(self, Scheme::Penalty(_) | Scheme::WriScaled | Scheme::Al(_))
    }

    pub fn step<T: Scalar>(
        self,
        state: &IterationState<T>,
        problem: &Problem<T>,
        settings: &StepSettings<T>,
    ) -> Result<IterationState<T>> {
        let cfg = &settings.penalty;
        match self {
            Scheme::Fwi => standard_fwi_step(state, problem, cfg.alpha),
            Scheme::Penalty(o) => penalty_step(state, problem, cfg, o),
            Scheme::WriScaled => wri_scaled_step(state, problem, cfg),
            Scheme::Al(o) => al_step(state, problem, cfg, o),
            Scheme::GaussNewton => {
                gauss_newton_step(state, problem, settings.damping, settings.born_solver)
            }
            Scheme::GaussSeidel => {
                gauss_seidel_step(state, problem, settings.damping, settings.born_solver)
            }
            Scheme::SplitGn => split_gn_step(state, problem, settings.damping, settings.estimate),
            Scheme::SplitGs => split_gs_step(state, problem, settings.damping),
            Scheme::Refined(v) => refined_step(state, problem, settings.damping, v, cfg.cg()),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

/// Parameters of a single step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings<T> {
    /// `μ`, `α` and CG settings for the penalty/AL family; `α` is also the
    /// FWI step length.
    pub penalty: PenaltyConfig<T>,
    /// Damping of the multiplier and Born least-squares solves.
    pub damping: T,
    pub born_solver: BornSolver<T>,
    pub estimate: MultiplierEstimate,
}

impl<T: Scalar> StepSettings<T> {
    /// `α = 1/μ`, damping `μ`, dense Born solves, damped-LS multipliers.
    pub fn new(mu: T) -> Self {
        Self {
            penalty: PenaltyConfig::new(mu),
            damping: mu,
            born_solver: BornSolver::Dense,
            estimate: MultiplierEstimate::DampedLs,
        }
    }

    pub fn with_cg(mut self, tol: T, maxiter: usize) -> Self {
        self.penalty = self.penalty.with_cg(tol, maxiter);
        self
    }

    pub fn born_cg(&self) -> BornSolver<T> {
        BornSolver::Cg(CgSettings::new(self.penalty.cg_tol, self.penalty.cg_maxiter))
    }
}
