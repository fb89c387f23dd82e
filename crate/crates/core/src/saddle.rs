//! Regularized saddle-point solves for the penalty and augmented-Lagrangian
//! min-max subproblem
//!
//! ```text
//! [ A     −I/μ ] [u]   [ b − w/μ ]
//! [ PᵀP    Aᵀ  ] [v] = [ Pᵀd     ]
//! ```
//!
//! Wavefield-oriented: solve `(PᵀP + μAᵀA)u = Pᵀd + μAᵀb − Aᵀw` matrix-free
//! with CG, then read `v` off the first block row. Multiplier-oriented:
//! factor the dense data-space system `I + (1/μ)PA⁻¹A⁻ᵀPᵀ`, form `v`, then
//! time-step `u = A⁻¹(b + v/μ − w/μ)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, CgSettings, Cholesky, DenseMatrix};
use crate::scalar::Scalar;
use crate::wavecore::{
    adjoint_solve, apply_wave_operator, apply_wave_operator_transpose, forward_solve, inject,
    sample, AcquisitionGeometry, ModelGrid, SourceField, TraceData, Wavefield,
};

/// Which block of the saddle system is solved first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// CG on the augmented normal equations for `u`, then `v` from the
    /// constraint residual.
    Wavefield,
    /// Dense data-space solve for `v`, then `u` by time stepping.
    Multiplier,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig<T> {
    /// Penalty / multiplier-damping parameter μ.
    pub mu: T,
    /// Model-update step length α.
    pub alpha: T,
    pub cg_tol: T,
    pub cg_maxiter: usize,
}

impl<T: Scalar> PenaltyConfig<T> {
    /// `α = 1/μ` and oracle-grade CG settings.
    pub fn new(mu: T) -> Self {
        Self {
            mu,
            alpha: T::one() / mu,
            cg_tol: T::lit(1e-10),
            cg_maxiter: 5000,
        }
    }

    pub fn with_alpha(mut self, alpha: T) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_cg(mut self, tol: T, maxiter: usize) -> Self {
        self.cg_tol = tol;
        self.cg_maxiter = maxiter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > T::zero()) || !self.mu.is_finite() {
            return Err(Error::Config(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.cg_tol > T::zero() && self.cg_tol < T::one()) {
            return Err(Error::Config(format!("cg_tol must be in (0, 1), got {}", self.cg_tol)));
        }
        Ok(())
    }

    pub fn cg(&self) -> CgSettings<T> {
        CgSettings::new(self.cg_tol, self.cg_maxiter)
    }
}

/// `b − w/μ`, the extended source of the AL system.
pub fn extended_source<T: Scalar>(
    b: &SourceField<T>,
    mu: T,
    w: Option<&Wavefield<T>>,
) -> Result<SourceField<T>> {
    let mut s = b.clone();
    if let Some(w) = w {
        w.ensure_same_shape(b, "extended source")?;
        s.axpy(-T::one() / mu, w);
    }
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct AugmentedSolution<T> {
    pub wavefield: Wavefield<T>,
    pub iterations: usize,
    pub relative_residual: T,
    pub converged: bool,
}

/// LS wavefield `(PᵀP + μAᵀA)⁻¹(Pᵀd + μAᵀb − Aᵀw)`.
///
/// CG runs on the correction from `u₀ = A⁻¹(b − w/μ)`, whose right-hand side
/// reduces to `Pᵀ(d − Pu₀)`; `cg_tol` applies to that residual. An exhausted
/// iteration budget returns the best iterate with `converged = false`.
pub fn solve_augmented_wavefield<T: Scalar>(
    m: &ModelGrid<T>,
    b: &SourceField<T>,
    d: &TraceData<T>,
    g: &AcquisitionGeometry,
    cfg: &PenaltyConfig<T>,
    w: Option<&Wavefield<T>>,
) -> Result<AugmentedSolution<T>> {
    cfg.validate()?;
    let spec = *m.spec();
    let u0 = forward_solve(m, &extended_source(b, cfg.mu, w)?)?;
    let resid = d - &sample(&u0, g)?;
    let rhs = inject(&resid, g, &spec)?;
    let normal = |x: &[T]| -> Result<Vec<T>> {
        let xf = Wavefield::from_values(spec, x.to_vec())?;
        let ax = apply_wave_operator(m, &xf)?;
        let mut out = apply_wave_operator_transpose(m, &ax)?.scaled(cfg.mu);
        out.axpy(T::one(), &inject(&sample(&xf, g)?, g, &spec)?);
        Ok(out.into_values())
    };
    let out = conjugate_gradient(normal, rhs.values(), None, cfg.cg())?;
    let mut u = u0;
    u.axpy(T::one(), &Wavefield::from_values(spec, out.solution)?);
    Ok(AugmentedSolution {
        wavefield: u,
        iterations: out.iterations,
        relative_residual: out.relative_residual,
        converged: out.converged,
    })
}

/// `v = w + μ(A(m)u − b)`: the multiplier from the first block row.
pub fn multiplier_from_wavefield<T: Scalar>(
    m: &ModelGrid<T>,
    u: &Wavefield<T>,
    b: &SourceField<T>,
    mu: T,
    w: Option<&Wavefield<T>>,
) -> Result<Wavefield<T>> {
    let mut v = &apply_wave_operator(m, u)? - b;
    v = v.scaled(mu);
    if let Some(w) = w {
        v.axpy(T::one(), w);
    }
    Ok(v)
}

/// Dense data-space Gram matrix `H = P A⁻¹ A⁻ᵀ Pᵀ` (`M × M`) for one model
/// and receiver spread. Source-independent.
#[derive(Debug, Clone)]
pub struct DataSpaceHessian<T> {
    matrix: DenseMatrix<T>,
    n_receivers: usize,
    nt: usize,
}

impl<T: Scalar> DataSpaceHessian<T> {
    /// Column j is `P A⁻¹ A⁻ᵀ Pᵀ e_j`: one adjoint and one forward solve.
    pub fn assemble(m: &ModelGrid<T>, g: &AcquisitionGeometry) -> Result<Self> {
        let spec = *m.spec();
        g.validate(&spec)?;
        m.check_cfl()?;
        let nr = g.n_receivers();
        let size = nr * spec.nt;
        let columns: Vec<Vec<T>> = (0..size)
            .into_par_iter()
            .map(|j| -> Result<Vec<T>> {
                let mut e = TraceData::zeros(nr, spec.nt);
                e.values_mut()[j] = T::one();
                let back = adjoint_solve(m, &inject(&e, g, &spec)?)?;
                Ok(sample(&forward_solve(m, &back)?, g)?.into_values())
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            matrix: DenseMatrix::from_columns(size, &columns)?,
            n_receivers: nr,
            nt: spec.nt,
        })
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.matrix
    }

    pub fn apply(&self, y: &TraceData<T>) -> Result<TraceData<T>> {
        TraceData::from_values(self.n_receivers, self.nt, self.matrix.matvec(y.values()))
    }

    /// Cholesky factor of `H + damping·I` (lower triangle of the symmetrized
    /// `H`).
    pub fn factor_damped(&self, damping: T) -> Result<DampedHessian<T>> {
        if !(damping > T::zero()) {
            return Err(Error::Config(format!("damping must be positive, got {damping}")));
        }
        let mut sym = self.matrix.clone();
        let n = sym.rows();
        let half = T::lit(0.5);
        for i in 0..n {
            for j in 0..i {
                let s = half * (sym[(i, j)] + sym[(j, i)]);
                sym[(i, j)] = s;
                sym[(j, i)] = s;
            }
        }
        sym.add_diagonal(damping);
        let chol = Cholesky::factor(&sym)
            .map_err(|_| Error::Singular("data-space system H + damping·I".into()))?;
        Ok(DampedHessian {
            chol,
            damping,
            n_receivers: self.n_receivers,
            nt: self.nt,
        })
    }

    /// Whitespace-delimited rows, for debugging dumps.
    pub fn to_text(&self) -> String {
        let mut out = format!("# data-space Hessian {} x {}\n", self.size(), self.size());
        for i in 0..self.size() {
            let row: Vec<String> = self
                .matrix
                .row(i)
                .iter()
                .map(|v| v.to_f64_lossy().to_string())
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Factored `H + δ·I`; solves the damped multiplier equation
/// `min ‖S λ − r‖² + δ‖λ‖²` with `S = P A⁻¹` as `λ = Sᵀ(H + δI)⁻¹ r`.
#[derive(Debug, Clone)]
pub struct DampedHessian<T> {
    chol: Cholesky<T>,
    damping: T,
    n_receivers: usize,
    nt: usize,
}

impl<T: Scalar> DampedHessian<T> {
    pub fn damping(&self) -> T {
        self.damping
    }

    /// `(H + δI)⁻¹ r`
    pub fn solve(&self, r: &TraceData<T>) -> Result<TraceData<T>> {
        if r.values().len() != self.chol.dim() {
            return Err(Error::ShapeMismatch(format!(
                "data-space vector has {} entries, system is {}",
                r.values().len(),
                self.chol.dim()
            )));
        }
        TraceData::from_values(self.n_receivers, self.nt, self.chol.solve(r.values()))
    }

    /// Damped LS source `λ = A⁻ᵀPᵀ(H + δI)⁻¹ r`.
    pub fn scattering_source(
        &self,
        m: &ModelGrid<T>,
        r: &TraceData<T>,
        g: &AcquisitionGeometry,
    ) -> Result<SourceField<T>> {
        back_project(m, &self.solve(r)?, g)
    }
}

/// `A⁻ᵀ Pᵀ y`
pub fn back_project<T: Scalar>(
    m: &ModelGrid<T>,
    y: &TraceData<T>,
    g: &AcquisitionGeometry,
) -> Result<Wavefield<T>> {
    adjoint_solve(m, &inject(y, g, m.spec())?)
}

/// `d − P A⁻¹(b − w/μ)`
pub fn ls_residual<T: Scalar>(
    m: &ModelGrid<T>,
    b: &SourceField<T>,
    d: &TraceData<T>,
    g: &AcquisitionGeometry,
    mu: T,
    w: Option<&Wavefield<T>>,
) -> Result<TraceData<T>> {
    let u0 = forward_solve(m, &extended_source(b, mu, w)?)?;
    Ok(d - &sample(&u0, g)?)
}

/// LS multiplier `v = A⁻ᵀPᵀ(I + H/μ)⁻¹(d − PA⁻¹b + (1/μ)PA⁻¹w)`, with
/// `factored` holding `H + μI` for the same model and `μ`.
pub fn solve_ls_multiplier<T: Scalar>(
    m: &ModelGrid<T>,
    b: &SourceField<T>,
    d: &TraceData<T>,
    g: &AcquisitionGeometry,
    cfg: &PenaltyConfig<T>,
    w: Option<&Wavefield<T>>,
    factored: &DampedHessian<T>,
) -> Result<Wavefield<T>> {
    cfg.validate()?;
    if factored.damping() != cfg.mu {
        return Err(Error::Config(format!(
            "data-space factor was built with damping {} but mu = {}",
            factored.damping(),
            cfg.mu
        )));
    }
    let r = ls_residual(m, b, d, g, cfg.mu, w)?;
    // (I + H/μ)⁻¹ = μ (H + μI)⁻¹
    let y = factored.solve(&r)?.scaled(cfg.mu);
    back_project(m, &y, g)
}

/// Companion wavefield `u = A⁻¹(b + v/μ − w/μ)`.
pub fn companion_wavefield<T: Scalar>(
    m: &ModelGrid<T>,
    b: &SourceField<T>,
    v: &Wavefield<T>,
    cfg: &PenaltyConfig<T>,
    w: Option<&Wavefield<T>>,
) -> Result<Wavefield<T>> {
    cfg.validate()?;
    let mut src = extended_source(b, cfg.mu, w)?;
    v.ensure_same_shape(b, "companion wavefield")?;
    src.axpy(T::one() / cfg.mu, v);
    forward_solve(m, &src)
}

/// Residuals of both block rows, relative to the right-hand side blocks:
/// `‖Au − v/μ − (b − w/μ)‖/‖b − w/μ‖` and `‖PᵀPu + Aᵀv − Pᵀd‖/‖Pᵀd‖`.
pub fn saddle_residuals<T: Scalar>(
    m: &ModelGrid<T>,
    u: &Wavefield<T>,
    v: &Wavefield<T>,
    b: &SourceField<T>,
    d: &TraceData<T>,
    g: &AcquisitionGeometry,
    mu: T,
    w: Option<&Wavefield<T>>,
) -> Result<(T, T)> {
    let spec = *m.spec();
    let top_rhs = extended_source(b, mu, w)?;
    let mut top = apply_wave_operator(m, u)?;
    top.axpy(-T::one() / mu, v);
    let r1 = (&top - &top_rhs).norm() / top_rhs.norm().max(T::min_positive_value());
    let ptd = inject(d, g, &spec)?;
    let mut bottom = inject(&sample(u, g)?, g, &spec)?;
    bottom.axpy(T::one(), &apply_wave_operator_transpose(m, v)?);
    let r2 = (&bottom - &ptd).norm() / ptd.norm().max(T::min_positive_value());
    Ok((r1, r2))
}
