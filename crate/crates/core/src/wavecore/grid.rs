use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Regular space-time grid. Nodes are ordered x-fastest; a space-time field
/// stores all nodes of time level 0, then level 1, and so on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub ndim: usize,
    pub nx: usize,
    pub nz: usize,
    pub dx: T,
    pub dz: T,
    pub nt: usize,
    pub dt: T,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new_1d(nx: usize, dx: T, nt: usize, dt: T) -> Result<Self> {
        let spec = Self {
            ndim: 1,
            nx,
            nz: 1,
            dx,
            dz: dx,
            nt,
            dt,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn new_2d(nx: usize, nz: usize, dx: T, dz: T, nt: usize, dt: T) -> Result<Self> {
        let spec = Self {
            ndim: 2,
            nx,
            nz,
            dx,
            dz,
            nt,
            dt,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGrid(msg));
        match self.ndim {
            1 if self.nz != 1 => return bad(format!("1D grid needs nz = 1, got {}", self.nz)),
            2 if self.nz < 3 => return bad(format!("2D grid needs nz >= 3, got {}", self.nz)),
            1 | 2 => {}
            n => return bad(format!("ndim must be 1 or 2, got {n}")),
        }
        if self.nx < 3 {
            return bad(format!("nx must be >= 3, got {}", self.nx));
        }
        if self.nt < 3 {
            return bad(format!("nt must be >= 3, got {}", self.nt));
        }
        for (name, v) in [("dx", self.dx), ("dz", self.dz), ("dt", self.dt)] {
            if !(v > T::zero()) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }

    /// Spatial node count `N_m`.
    pub fn nodes(&self) -> usize {
        self.nx * self.nz
    }

    /// Space-time unknown count `N = N_m · N_t`.
    pub fn len(&self) -> usize {
        self.nodes() * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, ix: usize, iz: usize) -> usize {
        ix + self.nx * iz
    }

    /// `sqrt(Σ 1/h²)` over the active axes.
    fn inverse_spacing(&self) -> T {
        let mut s = T::one() / (self.dx * self.dx);
        if self.ndim == 2 {
            s += T::one() / (self.dz * self.dz);
        }
        s.sqrt()
    }

    pub fn courant(&self, velocity: T) -> T {
        velocity * self.dt * self.inverse_spacing()
    }

    /// Largest velocity the explicit scheme accepts on this grid.
    pub fn max_stable_velocity(&self) -> T {
        T::one() / (self.dt * self.inverse_spacing())
    }

    pub fn check_cfl(&self, velocity: T) -> Result<()> {
        let courant = self.courant(velocity);
        // A hair of slack so exactly-critical configurations are not
        // rejected because of rounding in the formula itself.
        if courant > T::one() + T::lit(1e-12) {
            return Err(Error::Cfl {
                velocity: velocity.to_f64_lossy(),
                courant: courant.to_f64_lossy(),
            });
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.ndim == other.ndim && self.nx == other.nx && self.nz == other.nz && self.nt == other.nt
    }
}

/// Squared slowness (s²/m²) per spatial node.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrid<T> {
    spec: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Scalar> ModelGrid<T> {
    /// Wraps squared-slowness values; they must be positive and finite.
    pub fn new(spec: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.nodes() {
            return Err(Error::ShapeMismatch(format!(
                "model has {} values, grid has {} nodes",
                values.len(),
                spec.nodes()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > T::zero()) || !v.is_finite())
        {
            return Err(Error::InvalidModel(format!(
                "squared slowness at node {i} is {v}"
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn uniform(spec: GridSpec<T>, value: T) -> Result<Self> {
        Self::new(spec, vec![value; spec.nodes()])
    }

    pub fn spec(&self) -> &GridSpec<T> {
        &self.spec
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn velocities(&self) -> Vec<T> {
        self.values.iter().map(|&m| T::one() / m.sqrt()).collect()
    }

    pub fn max_velocity(&self) -> T {
        let min_m = self.values.iter().copied().fold(T::infinity(), T::min);
        T::one() / min_m.sqrt()
    }

    pub fn check_cfl(&self) -> Result<()> {
        self.spec.check_cfl(self.max_velocity())
    }

    /// `m + δm`, validated.
    pub fn perturbed(&self, dm: &[T]) -> Result<Self> {
        if dm.len() != self.values.len() {
            return Err(Error::ShapeMismatch(format!(
                "perturbation has {} values, model has {}",
                dm.len(),
                self.values.len()
            )));
        }
        let values = self.values.iter().zip(dm).map(|(&m, &d)| m + d).collect();
        Self::new(self.spec, values)
    }

    /// `self − other` as a plain per-node vector.
    pub fn difference(&self, other: &Self) -> Vec<T> {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a - b)
            .collect()
    }
}

/// Squared slowness from velocities, `m = 1/c²`, rejecting any velocity the
/// explicit scheme cannot step stably.
pub fn build_model<T: Scalar>(spec: GridSpec<T>, velocity: &[T]) -> Result<ModelGrid<T>> {
    spec.validate()?;
    if velocity.len() != spec.nodes() {
        return Err(Error::ShapeMismatch(format!(
            "{} velocities for {} nodes",
            velocity.len(),
            spec.nodes()
        )));
    }
    let mut c_max = T::zero();
    for (i, &c) in velocity.iter().enumerate() {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidModel(format!("velocity at node {i} is {c}")));
        }
        c_max = c_max.max(c);
    }
    spec.check_cfl(c_max)?;
    ModelGrid::new(spec, velocity.iter().map(|&c| T::one() / (c * c)).collect())
}
