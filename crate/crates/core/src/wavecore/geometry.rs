use std::collections::HashSet;
use std::ops::{Add, Sub};

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, norm, Scalar};

use super::field::{SourceField, Wavefield};
use super::grid::GridSpec;

/// Source and receiver node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcquisitionGeometry {
    pub sources: Vec<usize>,
    pub receivers: Vec<usize>,
}

impl AcquisitionGeometry {
    pub fn new<T: Scalar>(
        spec: &GridSpec<T>,
        sources: Vec<usize>,
        receivers: Vec<usize>,
    ) -> Result<Self> {
        let g = Self { sources, receivers };
        g.validate(spec)?;
        Ok(g)
    }

    pub fn validate<T: Scalar>(&self, spec: &GridSpec<T>) -> Result<()> {
        let nodes = spec.nodes();
        for &index in self.sources.iter().chain(&self.receivers) {
            if index >= nodes {
                return Err(Error::IndexOutOfGrid { index, nodes });
            }
        }
        if self.receivers.is_empty() {
            return Err(Error::Geometry("no receivers".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.receivers.iter().find(|r| !seen.insert(**r)) {
            return Err(Error::Geometry(format!("receiver node {dup} listed twice")));
        }
        Ok(())
    }

    pub fn n_receivers(&self) -> usize {
        self.receivers.len()
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    /// Data-space size `M = N_r · N_t`.
    pub fn data_len(&self, nt: usize) -> usize {
        self.receivers.len() * nt
    }
}

/// Receiver samples, time-slowest: index `n · N_r + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceData<T> {
    n_receivers: usize,
    nt: usize,
    values: Vec<T>,
}

impl<T: Scalar> TraceData<T> {
    pub fn zeros(n_receivers: usize, nt: usize) -> Self {
        Self {
            n_receivers,
            nt,
            values: vec![T::zero(); n_receivers * nt],
        }
    }

    pub fn from_values(n_receivers: usize, nt: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n_receivers * nt {
            return Err(Error::ShapeMismatch(format!(
                "trace data has {} values, expected {} x {}",
                values.len(),
                n_receivers,
                nt
            )));
        }
        Ok(Self {
            n_receivers,
            nt,
            values,
        })
    }

    pub fn n_receivers(&self) -> usize {
        self.n_receivers
    }

    pub fn nt(&self) -> usize {
        self.nt
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

    pub fn at(&self, receiver: usize, n: usize) -> T {
        self.values[n * self.n_receivers + receiver]
    }

    pub fn receiver_trace(&self, receiver: usize) -> Vec<T> {
        (0..self.nt).map(|n| self.at(receiver, n)).collect()
    }

    pub fn norm(&self) -> T {
        norm(&self.values)
    }

    pub fn inner(&self, other: &Self) -> T {
        dot(&self.values, &other.values)
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            n_receivers: self.n_receivers,
            nt: self.nt,
            values: self.values.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn axpy(&mut self, alpha: T, x: &Self) {
        axpy(alpha, &x.values, &mut self.values);
    }
}

impl<T: Scalar> Add for &TraceData<T> {
    type Output = TraceData<T>;
    fn add(self, rhs: Self) -> TraceData<T> {
        assert_eq!(self.values.len(), rhs.values.len(), "trace add shape");
        TraceData {
            n_receivers: self.n_receivers,
            nt: self.nt,
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }
}

impl<T: Scalar> Sub for &TraceData<T> {
    type Output = TraceData<T>;
    fn sub(self, rhs: Self) -> TraceData<T> {
        assert_eq!(self.values.len(), rhs.values.len(), "trace sub shape");
        TraceData {
            n_receivers: self.n_receivers,
            nt: self.nt,
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

/// `P u`: the wavefield at the receiver nodes.
pub fn sample<T: Scalar>(u: &Wavefield<T>, g: &AcquisitionGeometry) -> Result<TraceData<T>> {
    let spec = u.spec();
    g.validate(spec)?;
    let nr = g.n_receivers();
    let mut values = Vec::with_capacity(nr * spec.nt);
    for n in 0..spec.nt {
        let level = u.level(n);
        values.extend(g.receivers.iter().map(|&r| level[r]));
    }
    TraceData::from_values(nr, spec.nt, values)
}

/// `Pᵀ d`: traces spread back onto the receiver nodes, zero elsewhere.
pub fn inject<T: Scalar>(
    d: &TraceData<T>,
    g: &AcquisitionGeometry,
    spec: &GridSpec<T>,
) -> Result<SourceField<T>> {
    g.validate(spec)?;
    if d.n_receivers() != g.n_receivers() || d.nt() != spec.nt {
        return Err(Error::ShapeMismatch(format!(
            "traces are {} x {}, geometry/grid expect {} x {}",
            d.n_receivers(),
            d.nt(),
            g.n_receivers(),
            spec.nt
        )));
    }
    let mut f = SourceField::zeros(*spec);
    for n in 0..spec.nt {
        let level = f.level_mut(n);
        for (r, &node) in g.receivers.iter().enumerate() {
            level[node] += d.at(r, n);
        }
    }
    Ok(f)
}
