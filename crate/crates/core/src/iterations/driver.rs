use std::time::Instant;

use crate::error::{Error, Result};
use crate::saddle::PenaltyConfig;
use crate::scalar::Scalar;
use crate::wavecore::ModelGrid;

use super::scheme::{Scheme, StepSettings};
use super::state::{Diagnostics, IterationState, Problem};
use super::steps::{BornSolver, MultiplierEstimate};

/// Outer-loop configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConfig<T> {
    pub scheme: Scheme,
    pub mu: T,
    /// Step length; `None` means `1/μ` (tracking `μ` under continuation).
    pub alpha: Option<T>,
    /// Multiplier / Born damping; `None` means `μ`.
    pub damping: Option<T>,
    pub cg_tol: T,
    pub cg_maxiter: usize,
    pub max_iter: usize,
    /// Stop once both the relative misfit and the relative constraint
    /// violation are at or below their tolerances.
    pub misfit_tol: f64,
    pub constraint_tol: f64,
    /// Continuation factor `μ ← γμ` after each iteration of penalty-type
    /// schemes.
    pub gamma: T,
    pub born_cg: bool,
    pub estimate: MultiplierEstimate,
}

impl<T: Scalar> InversionConfig<T> {
    pub fn new(scheme: Scheme, mu: T) -> Self {
        Self {
            scheme,
            mu,
            alpha: None,
            damping: None,
            cg_tol: T::lit(1e-6),
            cg_maxiter: 2000,
            max_iter: 50,
            misfit_tol: 1e-10,
            constraint_tol: 1e-10,
            gamma: T::one(),
            born_cg: false,
            estimate: MultiplierEstimate::DampedLs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= T::one()) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("gamma must be >= 1, got {}", self.gamma)));
        }
        if let Some(d) = self.damping {
            if !(d > T::zero()) {
                return Err(Error::Config(format!("damping must be positive, got {d}")));
            }
        }
        if !(self.misfit_tol >= 0.0 && self.constraint_tol >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        self.settings(self.mu).penalty.validate()
    }

    /// Step settings at penalty weight `mu`.
    pub fn settings(&self, mu: T) -> StepSettings<T> {
        let mut penalty = PenaltyConfig::new(mu).with_cg(self.cg_tol, self.cg_maxiter);
        if let Some(a) = self.alpha {
            penalty = penalty.with_alpha(a);
        }
        let mut s = StepSettings {
            penalty,
            damping: self.damping.unwrap_or(mu),
            born_solver: BornSolver::Dense,
            estimate: self.estimate,
        };
        if self.born_cg {
            s.born_solver = s.born_cg();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    MaxIter,
    Converged,
    /// The next iterate was unusable; the outcome holds the last valid one.
    Diverged(String),
}

#[derive(Debug, Clone)]
pub struct InversionOutcome<T> {
    pub state: IterationState<T>,
    pub history: Vec<Diagnostics>,
    pub stop: StopReason,
}

impl<T> InversionOutcome<T> {
    pub fn model(&self) -> &ModelGrid<T> {
        &self.state.m
    }
}

fn converged(d: &Diagnostics, cfg_misfit: f64, cfg_constraint: f64) -> bool {
    d.misfit <= cfg_misfit && d.constraint <= cfg_constraint
}

/// Runs `cfg.scheme` from `m0`, recording diagnostics for the initial state
/// (`iter = 0`) and after every step.
pub fn run_inversion<T: Scalar>(
    cfg: &InversionConfig<T>,
    problem: &Problem<T>,
    m0: ModelGrid<T>,
) -> Result<InversionOutcome<T>> {
    cfg.validate()?;
    let scheme = cfg.scheme;
    let mut state = IterationState::initial(problem, m0)?;
    let mut history = vec![Diagnostics::measure(problem, &state, scheme.uses_lambda(), 0.0)?];
    if converged(&history[0], cfg.misfit_tol, cfg.constraint_tol) {
        return Ok(InversionOutcome { state, history, stop: StopReason::Converged });
    }
    let mut mu = cfg.mu;
    for _ in 0..cfg.max_iter {
        let start = Instant::now();
        let attempt = scheme
            .step(&state, problem, &cfg.settings(mu))
            .and_then(|next| {
                if !next.is_finite() {
                    return Err(Error::Divergence(format!("{scheme} iterate")));
                }
                let seconds = start.elapsed().as_secs_f64();
                let d = Diagnostics::measure(problem, &next, scheme.uses_lambda(), seconds)?;
                if !d.is_finite() {
                    return Err(Error::Divergence("diagnostics".into()));
                }
                Ok((next, d))
            });
        let (next, d) = match attempt {
            Ok(x) => x,
            Err(e) if e.is_divergence() => {
                return Ok(InversionOutcome {
                    state,
                    history,
                    stop: StopReason::Diverged(e.to_string()),
                })
            }
            Err(e) => return Err(e),
        };
        state = next;
        history.push(d);
        if converged(&d, cfg.misfit_tol, cfg.constraint_tol) {
            return Ok(InversionOutcome { state, history, stop: StopReason::Converged });
        }
        if scheme.is_penalty_type() {
            mu *= cfg.gamma;
        }
    }
    Ok(InversionOutcome { state, history, stop: StopReason::MaxIter })
}
