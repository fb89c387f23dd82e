//! One pure step function per scheme: `(state, problem, settings) → state`.
//! Per-source work runs on the rayon pool; reductions over sources are
//! sequential and in source order, so results do not depend on scheduling.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, CgSettings, DenseMatrix};
use crate::oracle::{assemble_born_kernel, damped_ls_solve};
use crate::saddle::{
    back_project, companion_wavefield, multiplier_from_wavefield, solve_augmented_wavefield,
    solve_ls_multiplier, DampedHessian, DataSpaceHessian, Orientation, PenaltyConfig,
};
use crate::scalar::Scalar;
use crate::wavecore::{
    apply_wave_operator, born_adjoint, born_apply, forward_solve, model_update_sources, sample,
    scattering_source, ModelGrid, TraceData, Wavefield,
};

use super::state::{IterationState, Problem};

/// How the damped Born system `(JᵀJ + δI)δm = Jᵀδd` is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BornSolver<T> {
    /// Dense kernel assembly and Cholesky (size-guarded).
    Dense,
    /// Matrix-free CG with `born_apply` / `born_adjoint` products.
    Cg(CgSettings<T>),
}

/// How the multiplier equation `Sλ = δd` is solved in the split
/// Gauss-Newton step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiplierEstimate {
    /// `λ = Sᵀ(SSᵀ + δI)⁻¹δd`.
    #[default]
    DampedLs,
    /// `λ = Sᵀδd / δ`.
    Adjoint,
}

/// Variant of the refined scattering iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefinedVariant {
    /// Solve for the increment `λ⁺ − λ` against the unexplained data.
    Direct,
    /// Solve for `λ⁺` against `δd + S(λ − φ)`.
    Rearranged,
    /// Carry only the error `ε = λ − φ(u, m − m⁻)`.
    Epsilon,
}

fn per_source<T, R, F>(problem: &Problem<T>, f: F) -> Result<Vec<R>>
where
    T: Scalar,
    R: Send,
    F: Fn(usize) -> Result<R> + Sync + Send,
{
    (0..problem.n_sources()).into_par_iter().map(f).collect()
}

fn update<T: Scalar>(
    problem: &Problem<T>,
    m: &ModelGrid<T>,
    multipliers: &[Wavefield<T>],
    wavefields: &[Wavefield<T>],
    alpha: T,
) -> Result<ModelGrid<T>> {
    let pairs: Vec<_> = multipliers.iter().zip(wavefields).collect();
    model_update_sources(&pairs, alpha, m, problem.combination)
}

/// Successor state with every multiplier reset to zero.
fn successor<T: Scalar>(
    prev: &IterationState<T>,
    m: ModelGrid<T>,
    u: Vec<Wavefield<T>>,
) -> IterationState<T> {
    let zeros = vec![Wavefield::zeros(*m.spec()); u.len()];
    IterationState {
        m_prev: prev.m.clone(),
        m,
        u,
        v: zeros.clone(),
        w: zeros.clone(),
        lambda: zeros.clone(),
        eps: zeros,
        iteration: prev.iteration + 1,
    }
}

fn factor<T: Scalar>(problem: &Problem<T>, m: &ModelGrid<T>, damping: T) -> Result<DampedHessian<T>> {
    DataSpaceHessian::assemble(m, &problem.geometry)?.factor_damped(damping)
}

/// `S φ = P A⁻¹ φ`
fn scatter<T: Scalar>(problem: &Problem<T>, m: &ModelGrid<T>, phi: &Wavefield<T>) -> Result<TraceData<T>> {
    sample(&forward_solve(m, phi)?, &problem.geometry)
}

/// Reduced objective `½ Σ_s ‖PA(m)⁻¹b_s − d_s‖²` and its gradient
/// `Σ_s ⟨v_s, ∂tt u_s⟩_t` with `u = A⁻¹b`, `v = A⁻ᵀPᵀ(d − Pu)`. Descent is
/// along the negative gradient.
pub fn reduced_objective_and_gradient<T: Scalar>(
    m: &ModelGrid<T>,
    problem: &Problem<T>,
) -> Result<(T, Vec<T>)> {
    let (u, r) = problem.background(m)?;
    let v = per_source(problem, |s| back_project(m, &r[s], &problem.geometry))?;
    let objective = r.iter().map(|x| x.inner(x)).sum::<T>() * T::lit(0.5);
    let mut terms = crate::wavecore::CorrelationTerms::zeros(m.spec().nodes());
    for (vs, us) in v.iter().zip(&u) {
        terms.accumulate(vs, us)?;
    }
    Ok((objective, terms.numerator))
}

/// Reduced-space adjoint-state step: `u⁺ = A⁻¹b`, `v⁺ = A⁻ᵀPᵀ(d − Pu⁺)`,
/// correlation update with step `alpha`.
pub fn standard_fwi_step<T: Scalar>(
    state: &IterationState<T>,
    problem: &Problem<T>,
    alpha: T,
) -> Result<IterationState<T>> {
    let m = &state.m;
    let (u, r) = problem.background(m)?;
    let v = per_source(problem, |s| back_project(m, &r[s], &problem.geometry))?;
    let m_next = update(problem, m, &v, &u, alpha)?;
    let mut next = successor(state, m_next, u);
    next.v = v;
    Ok(next)
}

/// `(u⁺, v⁺)` of the regularized saddle system for every source.
pub fn saddle_pairs<T: Scalar>(
    m: &ModelGrid<T>,
    problem: &Problem<T>,
    cfg: &PenaltyConfig<T>,
    orientation: Orientation,
    w: Option<&[Wavefield<T>]>,
) -> Result<(Vec<Wavefield<T>>, Vec<Wavefield<T>>)> {
    let g = &problem.geometry;
    let ws = |s: usize| w.map(|w| &w[s]);
    let pairs = match orientation {
        Orientation::Multiplier => {
            let f = factor(problem, m, cfg.mu)?;
            per_source(problem, |s| {
                let (b, d) = (&problem.sources[s], &problem.data[s]);
                let v = solve_ls_multiplier(m, b, d, g, cfg, ws(s), &f)?;
                let u = companion_wavefield(m, b, &v, cfg, ws(s))?;
                Ok((u, v))
            })?
        }
        Orientation::Wavefield => per_source(problem, |s| {
            let (b, d) = (&problem.sources[s], &problem.data[s]);
            let u = solve_augmented_wavefield(m, b, d, g, cfg, ws(s))?.wavefield;
            let v = multiplier_from_wavefield(m, &u, b, cfg.mu, ws(s))?;
            Ok((u, v))
        })?,
    };
    Ok(pairs.into_iter().unzip())
}

/// Quadratic-penalty step: saddle solve at `w = 0`, then the correlation
/// update with `cfg.alpha`.
pub fn penalty_step<T: Scalar>(
    state: &IterationState<T>,
    problem: &Problem<T>,
    cfg: &PenaltyConfig<T>,
    orientation: Orientation,
) -> Result<IterationState<T>> {
    cfg.validate()?;
    let (u, v) = saddle_pairs(&state.m, problem, cfg, orientation, None)?;
    let m_next = update(problem, &state.m, &v, &u, cfg.alpha)?;
    let mut next = successor(state, m_next, u);
    next.v = v;
    Ok(next)
}

/// Augmented-Lagrangian step: saddle solve with the running multiplier `w`,
/// correlation update, then `w⁺ = w + μ(A(m⁺)u⁺ − b)`.
pub fn al_step<T: Scalar>(
    state: &IterationState<T>,
    problem: &Problem<T>,
    cfg: &PenaltyConfig<T>,
    orientation: Orientation,
) -> Result<IterationState<T>> {
    cfg.validate()?;
    let (u, v) = saddle_pairs(&state.m, problem, cfg, orientation, Some(&state.w))?;
    let m_next = update(problem, &state.m, &v, &u, cfg.alpha)?;
    let w = per_source(problem, |s| {
        multiplier_from_wavefield(&m_next, &u[s], &problem.sources[s], cfg.mu, Some(&state.w[s]))
    })?;
    let mut next = successor(state, m_next, u);
    next.v = v;
    next.w = w;
    Ok(next)
}

/// Penalty step in the scaled variable `λ = v/μ`:
/// `λ⁺ = A⁻ᵀPᵀ(SSᵀ + μI)⁻¹δd`, `u⁺ = A⁻¹(b + λ⁺)`, update with step `αμ`
/// (unit when `α = 1/μ`). Also records `v⁺ = μλ⁺`.
pub fn wri_scaled_step<T: Scalar>(
    state: &IterationState<T>,
    problem: &Problem<T>,
    cfg: &PenaltyConfig<T>,
) -> Result<IterationState<T>> {
    cfg.validate()?;
    let m = &state.m;
    let (_, r) = problem.background(m)?;
    let f = factor(problem, m, cfg.mu)?;
    let lambda = per_source(problem, |s| f.scattering_source(m, &r[s], &problem.geometry))?;
    let u = per_source(problem, |s| {
        let mut src = problem.sources[s].clone();
        src.axpy(T::one(), &lambda[s]);
        forward_solve(m, &src)
    })?;
    let m_next = update(problem, m, &lambda, &u, cfg.alpha * cfg.mu)?;
    let mut next = successor(state, m_next, u);
    next.v = lambda.iter().map(|l| l.scaled(cfg.mu)).collect();
    next.lambda = lambda;
    Ok(next)
}

/// Damped LS model perturbation for the stacked Born systems
/// `J_s δm = δd_s`, each kernel built on the incident field `u_s`.
pub fn born_model_update<T: Scalar>(
    m: &ModelGrid<T>,
    problem: &Problem<T>,
    incident: &[Wavefield<T>],
    residuals: &[TraceData<T>],
    damping: T,
    solver: BornSolver<T>,
) -> Result<Vec<T>> {
    let g = &problem.geometry;
    match solver {
        BornSolver::Dense => {
            let kernels = per_source(problem, |s| assemble_born_kernel(m, &incident[s], g))?;
            let nm = m.spec().nodes();
            let rows: usize = kernels.iter().map(|k| k.matrix.rows()).sum();
            let mut stacked = Vec::with_capacity(rows * nm);
            let mut rhs = Vec::with_capacity(rows);
            for (k, r) in kernels.iter().zip(residuals) {
                stacked.extend_from_slice(k.matrix.as_slice());
                rhs.extend_from_slice(r.values());
            }
            let k = DenseMatrix::from_row_major(rows, nm, stacked)?;
            damped_ls_solve(&k, &rhs, damping)
        }
        BornSolver::Cg(settings) => {
            let nm = m.spec().nodes();
            let sum = |parts: Vec<Vec<T>>| -> Vec<T> {
                let mut out = vec![T::zero(); nm];
                for p in parts {
                    for (o, x) in out.iter_mut().zip(p) {
                        *o += x;
                    }
                }
                out
            };
            let rhs = sum(per_source(problem, |s| born_adjoint(m, &incident[s], &residuals[s], g))?);
            let normal = |x: &[T]| -> Result<Vec<T>> {
                let parts = per_source(problem, |s| {
                    let jx = born_apply(m, &incident[s], x, g)?;
                    born_adjoint(m, &incident[s], &jx, g)
                })?;
                let mut out = sum(parts);
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o += damping * xi;
                }
                Ok(out)
            };
            let out = conjugate_gradient(normal, &rhs, None, settings)?;
            Ok(out.solution)
        }
    }
}

fn perturb<T: Scalar>(m: &ModelGrid<T>, dm: &[T]) -> Result<ModelGrid<T>> {
    if dm.iter().any(|x| !x.is_finite()) {
        return Err(Error::Divergence("Born model update".into()));
    }
    m.perturbed(dm)
}

/// `u⁺ = A⁻¹b`, `m⁺ = m + δm` with `δm` the damped LS solution of the Born
/// system built on `u⁺`.
pub fn gauss_newton_step<T: Scalar>(
    state: &IterationState<T>,
    problem: &Problem<T>,
    damping: T,
    solver: BornSolver<T>,
) -> Result<IterationState<T>> {
    let m = &state.m;
    let (u, r) = problem.background(m)?;
    let dm = born_model_update(m, problem, &u, &r, damping, solver)?;
    Ok(successor(state, perturb(m, &dm)?, u))
}

/// `u⁺ = A⁻¹(b + φ(u, m − m⁻))`, then `m⁺ = m + δm` with `δm` the damped LS
/// solution of the Born system built on `u⁺` against `δd(m)`.
pub fn gauss_seidel_step<T: Scalar>(
    state: &IterationState<T>,
    problem: &Problem<T>,
    damping: T,
    solver: BornSolver<T>,
) -> Result<IterationState<T>> {
    let m = &state.m;
    let dm_prev = m.difference(&state.m_prev);
    let u = per_source(problem, |s| {
        let mut src = problem.sources[s].clone();
        src.axpy(T::one(), &scattering_source(&state.u[s], &dm_prev)?);
        forward_solve(m, &src)
    })?;
    let (_, r) = problem.background(m)?;
    let dm = born_model_update(m, problem, &u, &r, damping, solver)?;
    Ok(successor(state, perturb(m, &dm)?, u))
}

/// `u⁺ = A⁻¹b`, `λ⁺` from `Sλ = δd`, unit-step update with `λ⁺` in place
/// of `v⁺`.
pub fn split_gn_step<T: Scalar>(
    state: &IterationState<T>,
    problem: &Problem<T>,
    damping: T,
    estimate: MultiplierEstimate,
) -> Result<IterationState<T>> {
    if !(damping > T::zero()) {
        return Err(Error::Config(format!("damping must be positive, got {damping}")));
    }
    let m = &state.m;
    let g = &problem.geometry;
    let (u, r) = problem.background(m)?;
    let lambda = match estimate {
        MultiplierEstimate::DampedLs => {
            let f = factor(problem, m, damping)?;
            per_source(problem, |s| f.scattering_source(m, &r[s], g))?
        }
        MultiplierEstimate::Adjoint => {
            per_source(problem, |s| Ok(back_project(m, &r[s], g)?.scaled(T::one() / damping)))?
        }
    };
    let m_next = update(problem, m, &lambda, &u, T::one())?;
    let mut next = successor(state, m_next, u);
    next.lambda = lambda;
    Ok(next)
}

/// `λ⁺ = Sᵀ(SSᵀ + δI)⁻¹δd`, `u⁺ = A⁻¹(b + λ⁺)`, unit-step update.
pub fn split_gs_step<T: Scalar>(
    state: &IterationState<T>,
    problem: &Problem<T>,
    damping: T,
) -> Result<IterationState<T>> {
    let m = &state.m;
    let (_, r) = problem.background(m)?;
    let f = factor(problem, m, damping)?;
    let lambda = per_source(problem, |s| f.scattering_source(m, &r[s], &problem.geometry))?;
    let u = per_source(problem, |s| {
        let mut src = problem.sources[s].clone();
        src.axpy(T::one(), &lambda[s]);
        forward_solve(m, &src)
    })?;
    let m_next = update(problem, m, &lambda, &u, T::one())?;
    let mut next = successor(state, m_next, u);
    next.lambda = lambda;
    Ok(next)
}

/// Data left unexplained by the previous scattering estimate,
/// `δd(m) − Sφ(u, m − m⁻)`, per source. Vanishes at a fixed point of the
/// refined iteration.
pub fn scattered_data_defect<T: Scalar>(
    state: &IterationState<T>,
    problem: &Problem<T>,
) -> Result<Vec<TraceData<T>>> {
    let m = &state.m;
    let dm_prev = m.difference(&state.m_prev);
    let (_, r) = problem.background(m)?;
    per_source(problem, |s| {
        let phi = scattering_source(&state.u[s], &dm_prev)?;
        Ok(&r[s] - &scatter(problem, m, &phi)?)
    })
}

/// Refined scattering iteration. All variants damp `‖λ⁺‖²` with weight
/// `damping` and take a unit model step; they differ only in which unknown
/// is solved for and which state they read.
///
/// * `Direct` reads `(λ, u, m⁻)` and solves
///   `(SᵀS + δI)Δ = Sᵀ(δd − Sφ) − δλ` for `Δ = λ⁺ − λ` by source-space CG
///   (`cfg` supplies the CG settings).
/// * `Rearranged` reads `(λ, u, m⁻)` and solves for `λ⁺` against
///   `δd + S(λ − φ)` through the data-space factor.
/// * `Epsilon` reads only `ε` and solves for `λ⁺` against `δd + Sε`.
///
/// Every variant records `λ⁺`, `u⁺` and `ε⁺ = λ⁺ − φ(u⁺, m⁺ − m)`.
pub fn refined_step<T: Scalar>(
    state: &IterationState<T>,
    problem: &Problem<T>,
    damping: T,
    variant: RefinedVariant,
    cg: CgSettings<T>,
) -> Result<IterationState<T>> {
    if !(damping > T::zero()) {
        return Err(Error::Config(format!("damping must be positive, got {damping}")));
    }
    let m = &state.m;
    let g = &problem.geometry;
    let (_, r) = problem.background(m)?;
    let dm_prev = m.difference(&state.m_prev);
    let phi_prev = || per_source(problem, |s| scattering_source(&state.u[s], &dm_prev));

    // (λ⁺, extended source of the wave equation for u⁺)
    let (lambda, sources): (Vec<Wavefield<T>>, Vec<Wavefield<T>>) = match variant {
        RefinedVariant::Direct => {
            let phi = phi_prev()?;
            per_source(problem, |s| {
                let defect = &r[s] - &scatter(problem, m, &phi[s])?;
                let delta = source_space_increment(m, problem, &defect, &state.lambda[s], damping, cg)?;
                let mut lam = state.lambda[s].clone();
                lam.axpy(T::one(), &delta);
                let mut src = &problem.sources[s] + &phi[s];
                src.axpy(T::one(), &delta);
                Ok((lam, src))
            })?
            .into_iter()
            .unzip()
        }
        RefinedVariant::Rearranged => {
            let phi = phi_prev()?;
            let f = factor(problem, m, damping)?;
            per_source(problem, |s| {
                let carry = &state.lambda[s] - &phi[s];
                let mut rhs = r[s].clone();
                rhs.axpy(T::one(), &scatter(problem, m, &carry)?);
                let lam = f.scattering_source(m, &rhs, g)?;
                let src = &(&problem.sources[s] + &lam) - &carry;
                Ok((lam, src))
            })?
            .into_iter()
            .unzip()
        }
        RefinedVariant::Epsilon => {
            let f = factor(problem, m, damping)?;
            per_source(problem, |s| {
                let mut rhs = r[s].clone();
                rhs.axpy(T::one(), &scatter(problem, m, &state.eps[s])?);
                let lam = f.scattering_source(m, &rhs, g)?;
                let src = &(&problem.sources[s] + &lam) - &state.eps[s];
                Ok((lam, src))
            })?
            .into_iter()
            .unzip()
        }
    };
    let u = per_source(problem, |s| forward_solve(m, &sources[s]))?;
    let m_next = update(problem, m, &lambda, &u, T::one())?;
    let eps = match variant {
        // ε⁺ = ε + A(m⁺)u⁺ − b
        RefinedVariant::Epsilon => per_source(problem, |s| {
            let mut e = &apply_wave_operator(&m_next, &u[s])? - &problem.sources[s];
            e.axpy(T::one(), &state.eps[s]);
            Ok(e)
        })?,
        _ => {
            let step = m_next.difference(m);
            per_source(problem, |s| Ok(&lambda[s] - &scattering_source(&u[s], &step)?))?
        }
    };
    let mut next = successor(state, m_next, u);
    next.lambda = lambda;
    next.eps = eps;
    Ok(next)
}

/// `Δ = argmin ‖SΔ − defect‖² + δ‖λ + Δ‖²` by CG on
/// `(SᵀS + δI)Δ = Sᵀdefect − δλ`, with `S = PA⁻¹`.
fn source_space_increment<T: Scalar>(
    m: &ModelGrid<T>,
    problem: &Problem<T>,
    defect: &TraceData<T>,
    lambda: &Wavefield<T>,
    damping: T,
    cg: CgSettings<T>,
) -> Result<Wavefield<T>> {
    let spec = *m.spec();
    let g = &problem.geometry;
    let mut rhs = back_project(m, defect, g)?;
    rhs.axpy(-damping, lambda);
    let normal = |x: &[T]| -> Result<Vec<T>> {
        let xf = Wavefield::from_values(spec, x.to_vec())?;
        let mut out = back_project(m, &scatter(problem, m, &xf)?, g)?;
        out.axpy(damping, &xf);
        Ok(out.into_values())
    };
    let out = conjugate_gradient(normal, rhs.values(), None, cg)?;
    Wavefield::from_values(spec, out.solution)
}
