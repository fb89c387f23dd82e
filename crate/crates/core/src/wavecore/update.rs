//! Correlation-based model update `m⁺ = m − α ⟨v, ∂tt u⟩_t / ⟨∂tt u, ∂tt u⟩_t`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::field::Wavefield;
use super::grid::ModelGrid;
use super::operator::second_time_derivative;

/// Nodes whose illumination `⟨∂tt u, ∂tt u⟩_t` falls below this fraction of
/// the maximum over space are left unchanged.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

/// How per-source correlations are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SourceCombination {
    /// Sum numerators and denominators over sources, then divide.
    #[default]
    SumCorrelations,
    /// Form each source's preconditioned update and sum the updates.
    SumUpdates,
}

/// Per-node `Σ_t v ∂tt u` and `Σ_t (∂tt u)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTerms<T> {
    pub numerator: Vec<T>,
    pub denominator: Vec<T>,
}

impl<T: Scalar> CorrelationTerms<T> {
    pub fn zeros(nodes: usize) -> Self {
        Self {
            numerator: vec![T::zero(); nodes],
            denominator: vec![T::zero(); nodes],
        }
    }

    pub fn of(v: &Wavefield<T>, u: &Wavefield<T>) -> Result<Self> {
        let mut t = Self::zeros(u.spec().nodes());
        t.accumulate(v, u)?;
        Ok(t)
    }

    pub fn accumulate(&mut self, v: &Wavefield<T>, u: &Wavefield<T>) -> Result<()> {
        v.ensure_same_shape(u, "model update")?;
        let dtt = second_time_derivative(u);
        let spec = u.spec();
        if self.numerator.len() != spec.nodes() {
            return Err(Error::ShapeMismatch("correlation terms vs grid".into()));
        }
        for k in 0..spec.nt {
            let (vk, dk) = (v.level(k), dtt.level(k));
            for x in 0..spec.nodes() {
                self.numerator[x] += vk[x] * dk[x];
                self.denominator[x] += dk[x] * dk[x];
            }
        }
        Ok(())
    }

    /// Preconditioned increment `−α num/den`, zero where the denominator is
    /// below the floor.
    pub fn increment(&self, alpha: T) -> Vec<T> {
        let max_den = self
            .denominator
            .iter()
            .copied()
            .fold(T::zero(), T::max);
        let floor = T::lit(DENOMINATOR_FLOOR) * max_den;
        self.numerator
            .iter()
            .zip(&self.denominator)
            .map(|(&num, &den)| {
                if den > T::zero() && den >= floor {
                    -alpha * num / den
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    pub fn apply(&self, m: &ModelGrid<T>, alpha: T) -> Result<ModelGrid<T>> {
        apply_increment(m, &self.increment(alpha))
    }
}

fn apply_increment<T: Scalar>(m: &ModelGrid<T>, dm: &[T]) -> Result<ModelGrid<T>> {
    if dm.iter().any(|d| !d.is_finite()) {
        return Err(Error::Divergence("model update".into()));
    }
    m.perturbed(dm)
}

/// Single-source update.
pub fn model_update_correlation<T: Scalar>(
    v: &Wavefield<T>,
    u: &Wavefield<T>,
    alpha: T,
    m: &ModelGrid<T>,
) -> Result<ModelGrid<T>> {
    model_update_sources(&[(v, u)], alpha, m, SourceCombination::SumCorrelations)
}

/// Multi-source update from `(multiplier, wavefield)` pairs.
pub fn model_update_sources<T: Scalar>(
    pairs: &[(&Wavefield<T>, &Wavefield<T>)],
    alpha: T,
    m: &ModelGrid<T>,
    combination: SourceCombination,
) -> Result<ModelGrid<T>> {
    if !(alpha > T::zero()) {
        return Err(Error::Config(format!("step length must be positive, got {alpha}")));
    }
    let nodes = m.spec().nodes();
    for (v, u) in pairs {
        if !m.spec().same_shape(u.spec()) || !m.spec().same_shape(v.spec()) {
            return Err(Error::ShapeMismatch("model update: model vs fields".into()));
        }
    }
    match combination {
        SourceCombination::SumCorrelations => {
            let mut terms = CorrelationTerms::zeros(nodes);
            for (v, u) in pairs {
                terms.accumulate(v, u)?;
            }
            terms.apply(m, alpha)
        }
        SourceCombination::SumUpdates => {
            let mut total = vec![T::zero(); nodes];
            for (v, u) in pairs {
                let inc = CorrelationTerms::of(v, u)?.increment(alpha);
                for (t, d) in total.iter_mut().zip(inc) {
                    *t += d;
                }
            }
            apply_increment(m, &total)
        }
    }
}
