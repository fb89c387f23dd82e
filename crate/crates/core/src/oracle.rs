//! Brute-force dense references for tiny grids.
//!
//! Everything here materializes `A(m)` (or another operator) as an explicit
//! matrix and solves with dense factorizations. Cost is cubic in the number
//! of unknowns; [`DENSE_SIZE_LIMIT`] hard-fails anything bigger.

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DenseMatrix, Lu};
use crate::scalar::Scalar;
use crate::wavecore::{
    forward_solve, sample, scattering_source, AcquisitionGeometry, GridSpec, ModelGrid,
    SourceField, TraceData, Wavefield, DENOMINATOR_FLOOR,
};

/// Largest `N = N_m · N_t` any dense routine accepts.
pub const DENSE_SIZE_LIMIT: usize = 20_000;

fn guard(n: usize) -> Result<()> {
    if n > DENSE_SIZE_LIMIT {
        return Err(Error::SizeGuard {
            size: n,
            limit: DENSE_SIZE_LIMIT,
        });
    }
    Ok(())
}

/// `A(m)` as an explicit `N × N` matrix, unknowns ordered like
/// [`Wavefield`] values (node-fastest, time-slowest).
#[derive(Debug, Clone)]
pub struct DenseOperator<T> {
    spec: GridSpec<T>,
    matrix: DenseMatrix<T>,
}

impl<T: Scalar> DenseOperator<T> {
    pub fn assemble(m: &ModelGrid<T>) -> Result<Self> {
        let spec = *m.spec();
        let n = spec.len();
        guard(n)?;
        let nm = spec.nodes();
        let mut a = DenseMatrix::zeros(n, n);
        let inv_dt2 = T::one() / (spec.dt * spec.dt);
        let inv_dx2 = T::one() / (spec.dx * spec.dx);
        let inv_dz2 = T::one() / (spec.dz * spec.dz);
        let two = T::lit(2.0);
        let idx = |k: usize, x: usize| k * nm + x;
        for k in 0..spec.nt {
            for iz in 0..spec.nz {
                for ix in 0..spec.nx {
                    let x = spec.node(ix, iz);
                    let row = idx(k, x);
                    if k < 2 {
                        a[(row, row)] = T::one();
                        continue;
                    }
                    let mx = m.values()[x];
                    // m (uᵏ − 2uᵏ⁻¹ + uᵏ⁻²)/dt²
                    a[(row, idx(k, x))] += mx * inv_dt2;
                    a[(row, idx(k - 1, x))] -= two * mx * inv_dt2;
                    a[(row, idx(k - 2, x))] += mx * inv_dt2;
                    // −∇² at level k−1, neighbours outside the grid are zero
                    a[(row, idx(k - 1, x))] += two * inv_dx2;
                    if ix > 0 {
                        a[(row, idx(k - 1, spec.node(ix - 1, iz)))] -= inv_dx2;
                    }
                    if ix + 1 < spec.nx {
                        a[(row, idx(k - 1, spec.node(ix + 1, iz)))] -= inv_dx2;
                    }
                    if spec.ndim == 2 {
                        a[(row, idx(k - 1, x))] += two * inv_dz2;
                        if iz > 0 {
                            a[(row, idx(k - 1, spec.node(ix, iz - 1)))] -= inv_dz2;
                        }
                        if iz + 1 < spec.nz {
                            a[(row, idx(k - 1, spec.node(ix, iz + 1)))] -= inv_dz2;
                        }
                    }
                }
            }
        }
        Ok(Self { spec, matrix: a })
    }

    pub fn spec(&self) -> &GridSpec<T> {
        &self.spec
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.matrix
    }

    pub fn apply(&self, u: &Wavefield<T>) -> Result<SourceField<T>> {
        SourceField::from_values(self.spec, self.matrix.matvec(u.values()))
    }

    pub fn factor(&self) -> Result<Lu<T>> {
        Lu::factor(&self.matrix)
    }

    pub fn solve(&self, b: &SourceField<T>) -> Result<Wavefield<T>> {
        Wavefield::from_values(self.spec, self.factor()?.solve(b.values()))
    }

    pub fn solve_transpose(&self, r: &SourceField<T>) -> Result<Wavefield<T>> {
        Wavefield::from_values(self.spec, self.factor()?.solve_transpose(r.values()))
    }
}

/// `P` as an explicit `M × N` 0/1 matrix.
pub fn dense_sampling<T: Scalar>(spec: &GridSpec<T>, g: &AcquisitionGeometry) -> Result<DenseMatrix<T>> {
    g.validate(spec)?;
    guard(spec.len())?;
    let nr = g.n_receivers();
    let mut p = DenseMatrix::zeros(nr * spec.nt, spec.len());
    for n in 0..spec.nt {
        for (r, &node) in g.receivers.iter().enumerate() {
            p[(n * nr + r, n * spec.nodes() + node)] = T::one();
        }
    }
    Ok(p)
}

/// Extended source `b − w/μ` (or `b` when `w` is absent).
fn extended_source<T: Scalar>(b: &SourceField<T>, mu: T, w: Option<&Wavefield<T>>) -> SourceField<T> {
    match w {
        Some(w) => {
            let mut s = b.clone();
            s.axpy(-T::one() / mu, w);
            s
        }
        None => b.clone(),
    }
}

/// Solves the regularized saddle-point system
///
/// ```text
/// [ A     −I/μ ] [u]   [ b − w/μ ]
/// [ PᵀP    Aᵀ  ] [v] = [ Pᵀd     ]
/// ```
///
/// directly with a `2N × 2N` LU factorization.
pub fn dense_saddle_solve<T: Scalar>(
    m: &ModelGrid<T>,
    b: &SourceField<T>,
    d: &TraceData<T>,
    g: &AcquisitionGeometry,
    mu: T,
    w: Option<&Wavefield<T>>,
) -> Result<(Wavefield<T>, Wavefield<T>)> {
    if !(mu > T::zero()) {
        return Err(Error::Config(format!("mu must be positive, got {mu}")));
    }
    let spec = *m.spec();
    let n = spec.len();
    guard(2 * n)?;
    let a = DenseOperator::assemble(m)?;
    let p = dense_sampling(&spec, g)?;
    let ptp = p.gram();
    let mut k = DenseMatrix::zeros(2 * n, 2 * n);
    let inv_mu = T::one() / mu;
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = a.matrix[(i, j)];
            k[(n + i, j)] = ptp[(i, j)];
            k[(n + i, n + j)] = a.matrix[(j, i)];
        }
        k[(i, n + i)] = -inv_mu;
    }
    let top = extended_source(b, mu, w);
    let mut rhs = top.into_values();
    rhs.extend(p.matvec_transpose(d.values()));
    let sol = Lu::factor(&k)?.solve(&rhs);
    let (us, vs) = sol.split_at(n);
    Ok((
        Wavefield::from_values(spec, us.to_vec())?,
        Wavefield::from_values(spec, vs.to_vec())?,
    ))
}

/// `K = A⁻ᵀPᵀ` (`N × M`) and the residual `r = d − P A⁻¹(b − w/μ)`.
fn multiplier_ingredients<T: Scalar>(
    m: &ModelGrid<T>,
    b: &SourceField<T>,
    d: &TraceData<T>,
    g: &AcquisitionGeometry,
    mu: T,
    w: Option<&Wavefield<T>>,
) -> Result<(DenseMatrix<T>, Vec<T>)> {
    let spec = *m.spec();
    let a = DenseOperator::assemble(m)?;
    let lu = a.factor()?;
    let p = dense_sampling(&spec, g)?;
    let cols: Vec<Vec<T>> = (0..p.rows())
        .map(|i| lu.solve_transpose(p.row(i)))
        .collect();
    let k = DenseMatrix::from_columns(spec.len(), &cols)?;
    let u0 = lu.solve(extended_source(b, mu, w).values());
    let pu0 = p.matvec(&u0);
    let r = d.values().iter().zip(&pu0).map(|(&x, &y)| x - y).collect();
    Ok((k, r))
}

/// LS multiplier through the `N × N` source-space inverse,
/// `v = (I + (1/μ)A⁻ᵀPᵀPA⁻¹)⁻¹ A⁻ᵀPᵀ r`.
pub fn multiplier_source_space_form<T: Scalar>(
    m: &ModelGrid<T>,
    b: &SourceField<T>,
    d: &TraceData<T>,
    g: &AcquisitionGeometry,
    mu: T,
    w: Option<&Wavefield<T>>,
) -> Result<Wavefield<T>> {
    let (k, r) = multiplier_ingredients(m, b, d, g, mu, w)?;
    let mut sys = k.matmul(&k.transpose());
    sys.scale(T::one() / mu);
    sys.add_diagonal(T::one());
    let v = Lu::factor(&sys)?.solve(&k.matvec(&r));
    Wavefield::from_values(*m.spec(), v)
}

/// LS multiplier through the `M × M` data-space inverse,
/// `v = A⁻ᵀPᵀ (I + (1/μ)PA⁻¹A⁻ᵀPᵀ)⁻¹ r`.
pub fn multiplier_data_space_form<T: Scalar>(
    m: &ModelGrid<T>,
    b: &SourceField<T>,
    d: &TraceData<T>,
    g: &AcquisitionGeometry,
    mu: T,
    w: Option<&Wavefield<T>>,
) -> Result<Wavefield<T>> {
    let (k, r) = multiplier_ingredients(m, b, d, g, mu, w)?;
    let mut sys = k.gram();
    sys.scale(T::one() / mu);
    sys.add_diagonal(T::one());
    let y = Lu::factor(&sys)?.solve(&r);
    Wavefield::from_values(*m.spec(), k.matvec(&y))
}

/// Dense `M × N_m` linearized-data kernel for a fixed incident field.
#[derive(Debug, Clone)]
pub struct BornKernel<T> {
    pub matrix: DenseMatrix<T>,
}

impl<T: Scalar> BornKernel<T> {
    pub fn apply(&self, dm: &[T]) -> Vec<T> {
        self.matrix.matvec(dm)
    }
}

/// Column x is the scattered data `S(m) φ(u, e_x)` of a unit point scatterer.
pub fn assemble_born_kernel<T: Scalar>(
    m: &ModelGrid<T>,
    u: &Wavefield<T>,
    g: &AcquisitionGeometry,
) -> Result<BornKernel<T>> {
    let spec = *m.spec();
    guard(spec.len())?;
    let nm = spec.nodes();
    let mut cols = Vec::with_capacity(nm);
    let mut e = vec![T::zero(); nm];
    for x in 0..nm {
        e[x] = T::one();
        let phi = scattering_source(u, &e)?;
        cols.push(sample(&forward_solve(m, &phi)?, g)?.into_values());
        e[x] = T::zero();
    }
    Ok(BornKernel {
        matrix: DenseMatrix::from_columns(g.data_len(spec.nt), &cols)?,
    })
}

/// `argmin ‖Kx − rhs‖² + damping·‖x‖²` via Cholesky of `KᵀK + damping·I`.
pub fn damped_ls_solve<T: Scalar>(k: &DenseMatrix<T>, rhs: &[T], damping: T) -> Result<Vec<T>> {
    if damping < T::zero() {
        return Err(Error::Config(format!("damping must be >= 0, got {damping}")));
    }
    if rhs.len() != k.rows() {
        return Err(Error::ShapeMismatch(format!(
            "rhs has {} entries, kernel has {} rows",
            rhs.len(),
            k.rows()
        )));
    }
    let mut normal = k.gram();
    normal.add_diagonal(damping);
    let chol = Cholesky::factor(&normal)
        .map_err(|_| Error::Singular("damped least squares (rank-deficient kernel)".into()))?;
    Ok(chol.solve(&k.matvec_transpose(rhs)))
}

/// `½ Σ_s ‖P A(m)⁻¹ b_s − d_s‖²` by time stepping.
pub fn reduced_objective<T: Scalar>(
    m: &ModelGrid<T>,
    sources: &[SourceField<T>],
    data: &[TraceData<T>],
    g: &AcquisitionGeometry,
) -> Result<T> {
    let mut f = T::zero();
    for (b, d) in sources.iter().zip(data) {
        let pred = sample(&forward_solve(m, b)?, g)?;
        let r = &pred - d;
        f += T::lit(0.5) * r.inner(&r);
    }
    Ok(f)
}

/// Central-difference gradient of the reduced objective with step
/// `h = rel_step · m(x)` at each node.
pub fn fd_gradient<T: Scalar>(
    m: &ModelGrid<T>,
    sources: &[SourceField<T>],
    data: &[TraceData<T>],
    g: &AcquisitionGeometry,
    rel_step: T,
) -> Result<Vec<T>> {
    if !(rel_step > T::zero()) {
        return Err(Error::Config("finite-difference step must be positive".into()));
    }
    let nm = m.spec().nodes();
    let mut grad = Vec::with_capacity(nm);
    let mut dm = vec![T::zero(); nm];
    for x in 0..nm {
        let h = rel_step * m.values()[x];
        dm[x] = h;
        let fp = reduced_objective(&m.perturbed(&dm)?, sources, data, g)?;
        dm[x] = -h;
        let fm = reduced_objective(&m.perturbed(&dm)?, sources, data, g)?;
        dm[x] = T::zero();
        grad.push((fp - fm) / (T::lit(2.0) * h));
    }
    Ok(grad)
}

/// One step of the quadratic-penalty alternating minimization (`w` absent)
/// or its ADMM counterpart with running multipliers `w`, evaluated by direct
/// minimization:
///
/// ```text
/// u⁺ = argmin_u ½‖Pu − d‖² + μ/2‖A(m)u − b‖² + ⟨w, A(m)u − b⟩
/// m⁺ = argmin_m μ/2‖A(m)u⁺ − b‖² + ⟨w, A(m)u⁺ − b⟩
/// w⁺ = w + μ(A(m⁺)u⁺ − b)
/// ```
///
/// The `m`-objective is separable per node; each node's column of
/// `∂(A(m)u)/∂m` is read off the difference of two dense assemblies.
#[derive(Debug, Clone)]
pub struct AlternatingStep<T> {
    pub wavefields: Vec<Wavefield<T>>,
    pub model: ModelGrid<T>,
    pub multipliers: Vec<Wavefield<T>>,
}

pub fn alternating_minimization_step<T: Scalar>(
    m: &ModelGrid<T>,
    sources: &[SourceField<T>],
    data: &[TraceData<T>],
    g: &AcquisitionGeometry,
    mu: T,
    w: Option<&[Wavefield<T>]>,
) -> Result<AlternatingStep<T>> {
    let spec = *m.spec();
    let n = spec.len();
    let nm = spec.nodes();
    let a = DenseOperator::assemble(m)?;
    let p = dense_sampling(&spec, g)?;
    let mut normal = a.matrix.gram();
    normal.scale(mu);
    normal.add(&p.gram());
    let lu = Lu::factor(&normal)?;

    let shifted = ModelGrid::new(spec, m.values().iter().map(|&v| v + T::one()).collect())?;
    let a_shift = DenseOperator::assemble(&shifted)?;

    let mut wavefields = Vec::with_capacity(sources.len());
    let mut num = vec![T::zero(); nm];
    let mut den = vec![T::zero(); nm];
    for (s, (b, d)) in sources.iter().zip(data).enumerate() {
        let mut rhs = a.matrix.matvec_transpose(b.values());
        for v in rhs.iter_mut() {
            *v *= mu;
        }
        let ptd = p.matvec_transpose(d.values());
        for (r, &x) in rhs.iter_mut().zip(&ptd) {
            *r += x;
        }
        if let Some(ws) = w {
            let atw = a.matrix.matvec_transpose(ws[s].values());
            for (r, &x) in rhs.iter_mut().zip(&atw) {
                *r -= x;
            }
        }
        let u = lu.solve(&rhs);
        let au = a.matrix.matvec(&u);
        let col = a_shift.matrix.matvec(&u);
        for row in 0..n {
            let x = row % nm;
            let c = col[row] - au[row];
            let e = au[row] - b.values()[row];
            let wv = w.map_or(T::zero(), |ws| ws[s].values()[row]);
            num[x] += (mu * e + wv) * c;
            den[x] += mu * c * c;
        }
        wavefields.push(Wavefield::from_values(spec, u)?);
    }
    let max_den = den.iter().copied().fold(T::zero(), T::max);
    let floor = T::lit(DENOMINATOR_FLOOR) * max_den;
    let dm: Vec<T> = num
        .iter()
        .zip(&den)
        .map(|(&nu, &de)| if de > T::zero() && de >= floor { -nu / de } else { T::zero() })
        .collect();
    let model = m.perturbed(&dm)?;

    let a_new = DenseOperator::assemble(&model)?;
    let mut multipliers = Vec::with_capacity(sources.len());
    for (s, (u, b)) in wavefields.iter().zip(sources).enumerate() {
        let mut wn = match w {
            Some(ws) => ws[s].clone(),
            None => Wavefield::zeros(spec),
        };
        let resid = &a_new.apply(u)? - b;
        wn.axpy(mu, &resid);
        multipliers.push(wn);
    }
    Ok(AlternatingStep {
        wavefields,
        model,
        multipliers,
    })
}
