use std::ops::{Add, Sub};

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, norm, Scalar};

use super::grid::GridSpec;

/// One scalar per (spatial node, time level), time-slowest.
///
/// Wavefields, physical and extended sources, and every source-space
/// multiplier (v, w, λ, ε) share this representation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField<T> {
    spec: GridSpec<T>,
    values: Vec<T>,
}

pub type Wavefield<T> = SpaceTimeField<T>;
pub type SourceField<T> = SpaceTimeField<T>;

impl<T: Scalar> SpaceTimeField<T> {
    pub fn zeros(spec: GridSpec<T>) -> Self {
        Self {
            spec,
            values: vec![T::zero(); spec.len()],
        }
    }

    pub fn from_values(spec: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} values, grid needs {} x {} = {}",
                values.len(),
                spec.nodes(),
                spec.nt,
                spec.len()
            )));
        }
        Ok(Self { spec, values })
    }

    /// Point source at `node` with the given time signature.
    pub fn point_source(spec: GridSpec<T>, node: usize, wavelet: &[T]) -> Result<Self> {
        if node >= spec.nodes() {
            return Err(Error::IndexOutOfGrid {
                index: node,
                nodes: spec.nodes(),
            });
        }
        if wavelet.len() != spec.nt {
            return Err(Error::ShapeMismatch(format!(
                "wavelet has {} samples, grid has nt = {}",
                wavelet.len(),
                spec.nt
            )));
        }
        let mut f = Self::zeros(spec);
        for (n, &w) in wavelet.iter().enumerate() {
            f.values[n * spec.nodes() + node] = w;
        }
        Ok(f)
    }

    pub fn spec(&self) -> &GridSpec<T> {
        &self.spec
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, node: usize, n: usize) -> T {
        self.values[n * self.spec.nodes() + node]
    }

    pub fn level(&self, n: usize) -> &[T] {
        let nm = self.spec.nodes();
        &self.values[n * nm..(n + 1) * nm]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [T] {
        let nm = self.spec.nodes();
        &mut self.values[n * nm..(n + 1) * nm]
    }

    /// Time series recorded at one node.
    pub fn trace(&self, node: usize) -> Vec<T> {
        (0..self.spec.nt).map(|n| self.at(node, n)).collect()
    }

    pub fn norm(&self) -> T {
        norm(&self.values)
    }

    /// Space-time inner product `⟨a, b⟩_{t,x}`.
    pub fn inner(&self, other: &Self) -> T {
        dot(&self.values, &other.values)
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|&v| v * s).collect(),
        }
    }

    /// `self += alpha · x`
    pub fn axpy(&mut self, alpha: T, x: &Self) {
        axpy(alpha, &x.values, &mut self.values);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if !self.spec.same_shape(&other.spec) || self.values.len() != other.values.len() {
            return Err(Error::ShapeMismatch(format!("{what}: fields on different grids")));
        }
        Ok(())
    }
}

impl<T: Scalar> Add for &SpaceTimeField<T> {
    type Output = SpaceTimeField<T>;
    fn add(self, rhs: Self) -> SpaceTimeField<T> {
        assert_eq!(self.values.len(), rhs.values.len(), "field add shape");
        SpaceTimeField {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }
}

impl<T: Scalar> Sub for &SpaceTimeField<T> {
    type Output = SpaceTimeField<T>;
    fn sub(self, rhs: Self) -> SpaceTimeField<T> {
        assert_eq!(self.values.len(), rhs.values.len(), "field sub shape");
        SpaceTimeField {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}
