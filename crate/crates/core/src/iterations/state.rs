use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::wavecore::{
    apply_wave_operator, forward_solve, sample, AcquisitionGeometry, ModelGrid, SourceCombination,
    SourceField, TraceData, Wavefield,
};

/// Everything an iteration needs besides its state: one source field and one
/// observed trace set per shot, sharing a receiver spread.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    pub geometry: AcquisitionGeometry,
    pub sources: Vec<SourceField<T>>,
    pub data: Vec<TraceData<T>>,
    pub true_model: Option<ModelGrid<T>>,
    pub combination: SourceCombination,
}

impl<T: Scalar> Problem<T> {
    pub fn new(
        geometry: AcquisitionGeometry,
        sources: Vec<SourceField<T>>,
        data: Vec<TraceData<T>>,
    ) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Geometry("at least one source is required".into()));
        }
        if sources.len() != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} sources but {} trace sets",
                sources.len(),
                data.len()
            )));
        }
        let spec = *sources[0].spec();
        geometry.validate(&spec)?;
        for (b, d) in sources.iter().zip(&data) {
            if !b.spec().same_shape(&spec) {
                return Err(Error::ShapeMismatch("sources on different grids".into()));
            }
            if d.n_receivers() != geometry.n_receivers() || d.nt() != spec.nt {
                return Err(Error::ShapeMismatch(format!(
                    "traces are {}x{}, geometry expects {}x{}",
                    d.n_receivers(),
                    d.nt(),
                    geometry.n_receivers(),
                    spec.nt
                )));
            }
        }
        Ok(Self {
            geometry,
            sources,
            data,
            true_model: None,
            combination: SourceCombination::default(),
        })
    }

    pub fn with_true_model(mut self, m: ModelGrid<T>) -> Self {
        self.true_model = Some(m);
        self
    }

    pub fn with_combination(mut self, c: SourceCombination) -> Self {
        self.combination = c;
        self
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    /// Background wavefields `A(m)⁻¹b` and residuals `δd(m) = d − PA(m)⁻¹b`,
    /// one per source.
    pub fn background(&self, m: &ModelGrid<T>) -> Result<(Vec<Wavefield<T>>, Vec<TraceData<T>>)> {
        let pairs: Vec<(Wavefield<T>, TraceData<T>)> = self
            .sources
            .par_iter()
            .zip(self.data.par_iter())
            .map(|(b, d)| {
                let u = forward_solve(m, b)?;
                let r = d - &sample(&u, &self.geometry)?;
                Ok((u, r))
            })
            .collect::<Result<_>>()?;
        Ok(pairs.into_iter().unzip())
    }

    /// `‖PA(m)⁻¹b − d‖ / ‖d‖` over all sources.
    pub fn relative_misfit(&self, m: &ModelGrid<T>) -> Result<T> {
        let (_, residuals) = self.background(m)?;
        let num: T = residuals.iter().map(|r| r.inner(r)).sum();
        let den: T = self.data.iter().map(|d| d.inner(d)).sum();
        Ok(ratio(num.sqrt(), den.sqrt()))
    }

    /// `‖A(m)u − b‖ / ‖b‖` over all sources.
    pub fn relative_constraint(&self, m: &ModelGrid<T>, u: &[Wavefield<T>]) -> Result<T> {
        let mut num = T::zero();
        let mut den = T::zero();
        for (us, b) in u.iter().zip(&self.sources) {
            let e = &apply_wave_operator(m, us)? - b;
            num += e.inner(&e);
            den += b.inner(b);
        }
        Ok(ratio(num.sqrt(), den.sqrt()))
    }
}

pub(crate) fn ratio<T: Scalar>(num: T, den: T) -> T {
    if den > T::zero() {
        num / den
    } else {
        num
    }
}

/// Variables carried between iterations. Fields a scheme does not use stay
/// at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationState<T> {
    pub m: ModelGrid<T>,
    /// Model of the previous iteration, `m⁻`.
    pub m_prev: ModelGrid<T>,
    /// Wavefield per source.
    pub u: Vec<Wavefield<T>>,
    /// Source-space multiplier per source.
    pub v: Vec<Wavefield<T>>,
    /// Running AL multiplier per source.
    pub w: Vec<Wavefield<T>>,
    /// Scaled multiplier / scattering-source estimate per source.
    pub lambda: Vec<Wavefield<T>>,
    /// Scattering-source error per source.
    pub eps: Vec<Wavefield<T>>,
    pub iteration: usize,
}

impl<T: Scalar> IterationState<T> {
    /// `u = A(m0)⁻¹b`, `m⁻ = m0`, all multipliers zero.
    pub fn initial(problem: &Problem<T>, m0: ModelGrid<T>) -> Result<Self> {
        let spec = *m0.spec();
        if !spec.same_shape(problem.sources[0].spec()) {
            return Err(Error::ShapeMismatch("initial model vs source grid".into()));
        }
        m0.check_cfl()?;
        let (u, _) = problem.background(&m0)?;
        let zeros = vec![Wavefield::zeros(spec); problem.n_sources()];
        Ok(Self {
            m_prev: m0.clone(),
            m: m0,
            u,
            v: zeros.clone(),
            w: zeros.clone(),
            lambda: zeros.clone(),
            eps: zeros,
            iteration: 0,
        })
    }

    pub fn is_finite(&self) -> bool {
        let fields = [&self.u, &self.v, &self.w, &self.lambda, &self.eps];
        self.m.values().iter().all(|x| x.is_finite())
            && fields.iter().all(|fs| fs.iter().all(|f| f.is_finite()))
    }
}

pub(crate) fn stacked_norm<T: Scalar>(fields: &[Wavefield<T>]) -> T {
    fields.iter().map(|f| f.inner(f)).sum::<T>().sqrt()
}

/// Per-iteration record.
///
/// `misfit` is the relative data misfit of the current model,
/// `‖PA(m)⁻¹b − d‖/‖d‖`; `constraint` is `‖A(m)u − b‖/‖b‖` for the carried
/// wavefield. `v_norm` is the norm of the scheme's multiplier (`v`, or `λ`
/// for the scattering-source schemes) and `w_norm` that of its auxiliary
/// multiplier (`w`, or `ε`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub iter: usize,
    pub misfit: f64,
    pub constraint: f64,
    pub model_error: Option<f64>,
    pub v_norm: f64,
    pub w_norm: f64,
    pub seconds: f64,
}

impl Diagnostics {
    /// Same record ignoring wall time.
    pub fn same_values(&self, other: &Self) -> bool {
        self.iter == other.iter
            && self.misfit.to_bits() == other.misfit.to_bits()
            && self.constraint.to_bits() == other.constraint.to_bits()
            && self.model_error.map(f64::to_bits) == other.model_error.map(f64::to_bits)
            && self.v_norm.to_bits() == other.v_norm.to_bits()
            && self.w_norm.to_bits() == other.w_norm.to_bits()
    }

    pub fn is_finite(&self) -> bool {
        self.misfit.is_finite()
            && self.constraint.is_finite()
            && self.model_error.is_none_or(f64::is_finite)
            && self.v_norm.is_finite()
            && self.w_norm.is_finite()
    }

    pub fn measure<T: Scalar>(
        problem: &Problem<T>,
        state: &IterationState<T>,
        uses_lambda: bool,
        seconds: f64,
    ) -> Result<Self> {
        let model_error = match &problem.true_model {
            Some(truth) => {
                let diff: T = state
                    .m
                    .difference(truth)
                    .iter()
                    .map(|&d| d * d)
                    .sum::<T>()
                    .sqrt();
                let scale: T = truth.values().iter().map(|&x| x * x).sum::<T>().sqrt();
                Some(ratio(diff, scale).to_f64_lossy())
            }
            None => None,
        };
        let (primary, aux) = if uses_lambda {
            (&state.lambda, &state.eps)
        } else {
            (&state.v, &state.w)
        };
        Ok(Self {
            iter: state.iteration,
            misfit: problem.relative_misfit(&state.m)?.to_f64_lossy(),
            constraint: problem.relative_constraint(&state.m, &state.u)?.to_f64_lossy(),
            model_error,
            v_norm: stacked_norm(primary).to_f64_lossy(),
            w_norm: stacked_norm(aux).to_f64_lossy(),
            seconds,
        })
    }
}
