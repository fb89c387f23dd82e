//! The discrete wave operator `A(m)` and everything derived from it.
//!
//! Row layout (per spatial node x, time level k):
//!
//! ```text
//! k = 0, 1 : (A u)ₓᵏ = uₓᵏ                                   (quiescent start)
//! k ≥ 2    : (A u)ₓᵏ = m(x)(uₓᵏ − 2uₓᵏ⁻¹ + uₓᵏ⁻²)/dt² − (∇²u)ₓᵏ⁻¹
//! ```
//!
//! Row k holds the centred stencil about level k−1, so `A` is block
//! lower-triangular with diagonal blocks `I` or `diag(m)/dt²` and forward
//! solves are explicit leapfrog steps. The Laplacian is the 3-point (1D) or
//! 5-point (2D) stencil with zero values outside the grid.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::field::{SourceField, Wavefield};
use super::geometry::{inject, sample, AcquisitionGeometry, TraceData};
use super::grid::{GridSpec, ModelGrid};

/// `dst = ∇² src` on one time level.
pub(crate) fn laplacian_level<T: Scalar>(spec: &GridSpec<T>, src: &[T], dst: &mut [T]) {
    let (nx, nz) = (spec.nx, spec.nz);
    let idx2 = T::one() / (spec.dx * spec.dx);
    let two = T::lit(2.0);
    if spec.ndim == 1 {
        for ix in 0..nx {
            let left = if ix > 0 { src[ix - 1] } else { T::zero() };
            let right = if ix + 1 < nx { src[ix + 1] } else { T::zero() };
            dst[ix] = (left - two * src[ix] + right) * idx2;
        }
        return;
    }
    let idz2 = T::one() / (spec.dz * spec.dz);
    for iz in 0..nz {
        for ix in 0..nx {
            let i = ix + nx * iz;
            let c = src[i];
            let left = if ix > 0 { src[i - 1] } else { T::zero() };
            let right = if ix + 1 < nx { src[i + 1] } else { T::zero() };
            let up = if iz > 0 { src[i - nx] } else { T::zero() };
            let down = if iz + 1 < nz { src[i + nx] } else { T::zero() };
            dst[i] = (left - two * c + right) * idx2 + (up - two * c + down) * idz2;
        }
    }
}

fn check_pair<T: Scalar>(m: &ModelGrid<T>, f: &Wavefield<T>, what: &str) -> Result<()> {
    if !m.spec().same_shape(f.spec()) {
        return Err(Error::ShapeMismatch(format!(
            "{what}: model grid and field grid differ"
        )));
    }
    Ok(())
}

/// `A(m) u`.
pub fn apply_wave_operator<T: Scalar>(m: &ModelGrid<T>, u: &Wavefield<T>) -> Result<SourceField<T>> {
    check_pair(m, u, "apply_wave_operator")?;
    let spec = *u.spec();
    let nm = spec.nodes();
    let inv_dt2 = T::one() / (spec.dt * spec.dt);
    let two = T::lit(2.0);
    let mut out = SourceField::zeros(spec);
    let mut lap = vec![T::zero(); nm];
    for k in 0..spec.nt.min(2) {
        out.level_mut(k).copy_from_slice(u.level(k));
    }
    for k in 2..spec.nt {
        laplacian_level(&spec, u.level(k - 1), &mut lap);
        let (u0, u1, u2) = (u.level(k), u.level(k - 1), u.level(k - 2));
        let row = out.level_mut(k);
        for x in 0..nm {
            row[x] = m.values()[x] * (u0[x] - two * u1[x] + u2[x]) * inv_dt2 - lap[x];
        }
    }
    Ok(out)
}

/// `A(m)ᵀ v`.
pub fn apply_wave_operator_transpose<T: Scalar>(
    m: &ModelGrid<T>,
    v: &Wavefield<T>,
) -> Result<Wavefield<T>> {
    check_pair(m, v, "apply_wave_operator_transpose")?;
    let spec = *v.spec();
    let nt = spec.nt;
    let nm = spec.nodes();
    let inv_dt2 = T::one() / (spec.dt * spec.dt);
    let two = T::lit(2.0);
    let mv = m.values();
    let mut out = Wavefield::zeros(spec);
    let mut lap = vec![T::zero(); nm];
    for j in 0..nt {
        let row = out.level_mut(j);
        let vj = v.level(j);
        if j < 2 {
            row.copy_from_slice(vj);
        } else {
            for x in 0..nm {
                row[x] = mv[x] * vj[x] * inv_dt2;
            }
        }
        if j >= 1 && j + 1 < nt {
            let v1 = v.level(j + 1);
            laplacian_level(&spec, v1, &mut lap);
            for x in 0..nm {
                row[x] += -two * mv[x] * v1[x] * inv_dt2 - lap[x];
            }
        }
        if j + 2 < nt {
            let v2 = v.level(j + 2);
            for x in 0..nm {
                row[x] += mv[x] * v2[x] * inv_dt2;
            }
        }
    }
    Ok(out)
}

/// `A(m)⁻¹ b` by explicit time stepping.
pub fn forward_solve<T: Scalar>(m: &ModelGrid<T>, b: &SourceField<T>) -> Result<Wavefield<T>> {
    check_pair(m, b, "forward_solve")?;
    m.check_cfl()?;
    let spec = *b.spec();
    let nm = spec.nodes();
    let dt2 = spec.dt * spec.dt;
    let two = T::lit(2.0);
    let step: Vec<T> = m.values().iter().map(|&mx| dt2 / mx).collect();
    let mut u = Wavefield::zeros(spec);
    let mut lap = vec![T::zero(); nm];
    for k in 0..spec.nt.min(2) {
        u.level_mut(k).copy_from_slice(b.level(k));
    }
    for k in 2..spec.nt {
        laplacian_level(&spec, u.level(k - 1), &mut lap);
        let values = u.values_mut();
        let (past, cur) = values.split_at_mut(k * nm);
        let u1 = &past[(k - 1) * nm..k * nm];
        let u2 = &past[(k - 2) * nm..(k - 1) * nm];
        let row = &mut cur[..nm];
        let bk = b.level(k);
        for x in 0..nm {
            row[x] = two * u1[x] - u2[x] + step[x] * (bk[x] + lap[x]);
        }
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence(format!("forward time step {k}")));
        }
    }
    Ok(u)
}

/// `A(m)⁻ᵀ r` by reverse time stepping.
pub fn adjoint_solve<T: Scalar>(m: &ModelGrid<T>, r: &SourceField<T>) -> Result<Wavefield<T>> {
    check_pair(m, r, "adjoint_solve")?;
    m.check_cfl()?;
    let spec = *r.spec();
    let nt = spec.nt;
    let nm = spec.nodes();
    let dt2 = spec.dt * spec.dt;
    let inv_dt2 = T::one() / dt2;
    let two = T::lit(2.0);
    let mv = m.values();
    let mut v = Wavefield::zeros(spec);
    let mut lap = vec![T::zero(); nm];
    let mut acc = vec![T::zero(); nm];
    for j in (0..nt).rev() {
        acc.copy_from_slice(r.level(j));
        if j >= 1 && j + 1 < nt {
            let v1 = v.level(j + 1);
            laplacian_level(&spec, v1, &mut lap);
            for x in 0..nm {
                acc[x] -= -two * mv[x] * v1[x] * inv_dt2 - lap[x];
            }
        }
        if j + 2 < nt {
            let v2 = v.level(j + 2);
            for x in 0..nm {
                acc[x] -= mv[x] * v2[x] * inv_dt2;
            }
        }
        let row = v.level_mut(j);
        if j < 2 {
            row.copy_from_slice(&acc);
        } else {
            for x in 0..nm {
                row[x] = acc[x] * dt2 / mv[x];
            }
        }
        if !row.iter().all(|x| x.is_finite()) {
            return Err(Error::Divergence(format!("adjoint time step {j}")));
        }
    }
    Ok(v)
}

/// `∂A/∂m · u`: the second time difference in the row alignment of `A`.
///
/// Index k ≥ 2 holds `(uᵏ − 2uᵏ⁻¹ + uᵏ⁻²)/dt²`; levels 0 and 1 are zero
/// because the initial-condition rows of `A` do not depend on `m`.
pub fn second_time_derivative<T: Scalar>(u: &Wavefield<T>) -> Wavefield<T> {
    let spec = *u.spec();
    let inv_dt2 = T::one() / (spec.dt * spec.dt);
    let two = T::lit(2.0);
    let mut out = Wavefield::zeros(spec);
    for k in 2..spec.nt {
        let (u0, u1, u2) = (u.level(k), u.level(k - 1), u.level(k - 2));
        let row = out.level_mut(k);
        for x in 0..row.len() {
            row[x] = (u0[x] - two * u1[x] + u2[x]) * inv_dt2;
        }
    }
    out
}

/// Spatial Laplacian in the row alignment of `A`: index k ≥ 2 holds `∇²uᵏ⁻¹`.
pub fn laplacian<T: Scalar>(u: &Wavefield<T>) -> Wavefield<T> {
    let spec = *u.spec();
    let mut out = Wavefield::zeros(spec);
    for k in 2..spec.nt {
        let src = u.level(k - 1).to_vec();
        laplacian_level(&spec, &src, out.level_mut(k));
    }
    out
}

/// Scattering (secondary Born) source `φ(u, δm) = −δm ∘ ∂tt u`, exact in the
/// sense `A(m + δm) u = A(m) u − φ(u, δm)`.
pub fn scattering_source<T: Scalar>(u: &Wavefield<T>, dm: &[T]) -> Result<SourceField<T>> {
    let spec = *u.spec();
    if dm.len() != spec.nodes() {
        return Err(Error::ShapeMismatch(format!(
            "perturbation has {} values, grid has {} nodes",
            dm.len(),
            spec.nodes()
        )));
    }
    let mut out = second_time_derivative(u);
    for k in 0..spec.nt {
        for (o, &d) in out.level_mut(k).iter_mut().zip(dm) {
            *o = -d * *o;
        }
    }
    Ok(out)
}

/// Linearized data `J δm = P A(m)⁻¹ φ(u, δm)` for a fixed incident field.
pub fn born_apply<T: Scalar>(
    m: &ModelGrid<T>,
    u: &Wavefield<T>,
    dm: &[T],
    g: &AcquisitionGeometry,
) -> Result<TraceData<T>> {
    let phi = scattering_source(u, dm)?;
    sample(&forward_solve(m, &phi)?, g)
}

/// `Jᵀ y = −Σ_t ∂tt u ∘ A(m)⁻ᵀ Pᵀ y` per node.
pub fn born_adjoint<T: Scalar>(
    m: &ModelGrid<T>,
    u: &Wavefield<T>,
    y: &TraceData<T>,
    g: &AcquisitionGeometry,
) -> Result<Vec<T>> {
    let spec = *u.spec();
    let back = adjoint_solve(m, &inject(y, g, &spec)?)?;
    let dtt = second_time_derivative(u);
    let mut out = vec![T::zero(); spec.nodes()];
    for k in 0..spec.nt {
        for ((o, &a), &b) in out.iter_mut().zip(back.level(k)).zip(dtt.level(k)) {
            *o -= a * b;
        }
    }
    Ok(out)
}
