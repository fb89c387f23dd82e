//! Small dense linear algebra and a matrix-free conjugate-gradient solver.
//!
//! The dense routines serve desk-scale systems (data-space Hessians, Born
//! kernels and the brute-force oracle); nothing here is tuned for size.

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, norm, Scalar};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from its columns, all of length `rows`.
    pub fn from_columns(rows: usize, columns: &[Vec<T>]) -> Result<Self> {
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::ShapeMismatch(format!(
                    "column {j} has length {} but matrix has {rows} rows",
                    col.len()
                )));
            }
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "matvec dimension");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matvec_transpose(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.rows, "matvec_transpose dimension");
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != T::zero() {
                axpy(yi, self.row(i), &mut out);
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                axpy(a, src, dst);
            }
        }
        out
    }

    /// `KᵀK`
    pub fn gram(&self) -> Self {
        self.transpose().matmul(self)
    }

    pub fn scale(&mut self, s: T) {
        for v in self.data.iter_mut() {
            *v *= s;
        }
    }

    /// `self += other`
    pub fn add(&mut self, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add dimension");
        axpy(T::one(), &other.data, &mut self.data);
    }

    pub fn add_diagonal(&mut self, shift: T) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] += shift;
        }
    }

    pub fn frobenius_norm(&self) -> T {
        norm(&self.data)
    }

    /// `‖M − Mᵀ‖_F / ‖M‖_F`
    pub fn asymmetry(&self) -> T {
        assert_eq!(self.rows, self.cols);
        let mut acc = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = self[(i, j)] - self[(j, i)];
                acc += d * d;
            }
        }
        let scale = self.frobenius_norm();
        if scale > T::zero() {
            acc.sqrt() / scale
        } else {
            acc.sqrt()
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Cholesky factor `L` of a symmetric positive-definite matrix (`M = LLᵀ`).
/// Only the lower triangle of the input is read.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: DenseMatrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(m: &DenseMatrix<T>) -> Result<Self> {
        let n = m.rows();
        if m.cols() != n {
            return Err(Error::ShapeMismatch("Cholesky needs a square matrix".into()));
        }
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut diag = m[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::Singular(format!(
                    "Cholesky pivot {j} is {diag:e}"
                )));
            }
            let d = diag.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let s = m[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let s = dot(&self.l.row(i)[..i], &y[..i]);
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Smallest diagonal entry of `L`, squared; a cheap lower-bound proxy used in
    /// diagnostics.
    pub fn min_pivot(&self) -> T {
        (0..self.dim())
            .map(|i| self.l[(i, i)] * self.l[(i, i)])
            .fold(T::infinity(), T::min)
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn factor(m: &DenseMatrix<T>) -> Result<Self> {
        let n = m.rows();
        if m.cols() != n {
            return Err(Error::ShapeMismatch("LU needs a square matrix".into()));
        }
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = lu
            .as_slice()
            .iter()
            .fold(T::zero(), |acc, x| acc.max(x.abs()));
        let tiny = scale * T::epsilon() * T::lit(n.max(1) as f64);
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > tiny) {
                return Err(Error::Singular(format!("LU pivot {k} is {pivot:e}")));
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let inv = T::one() / lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] * inv;
                if f == T::zero() {
                    continue;
                }
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= f * v;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu.row(i)[..i], &y[..i]);
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu.row(i)[i + 1..], &y[i + 1..]);
            y[i] = (y[i] - s) / self.lu[(i, i)];
        }
        y
    }

    /// Solves `Mᵀx = b`.
    pub fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        // Uᵀz = b
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.lu[(k, i)] * z[k];
            }
            z[i] = s / self.lu[(i, i)];
        }
        // Lᵀy = z
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= self.lu[(k, i)] * z[k];
            }
            z[i] = s;
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    pub fn inverse(&self) -> DenseMatrix<T> {
        let n = self.lu.rows();
        let mut cols = Vec::with_capacity(n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            cols.push(self.solve(&e));
            e[j] = T::zero();
        }
        DenseMatrix::from_columns(n, &cols).expect("square")
    }
}

/// Stopping rule for conjugate gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings<T> {
    /// Relative residual `‖r‖/‖rhs‖` at which iteration stops.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> CgSettings<T> {
    pub fn new(tol: T, max_iter: usize) -> Self {
        Self { tol, max_iter }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub solution: Vec<T>,
    pub iterations: usize,
    pub relative_residual: T,
    pub converged: bool,
}

/// Conjugate gradients for a symmetric positive-definite operator given only
/// through its action. Returns the lowest-residual iterate seen, flagged as
/// unconverged when `max_iter` runs out first.
pub fn conjugate_gradient<T, F>(
    mut apply: F,
    rhs: &[T],
    x0: Option<&[T]>,
    settings: CgSettings<T>,
) -> Result<CgOutcome<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    let n = rhs.len();
    let rhs_norm = norm(rhs);
    if rhs_norm == T::zero() {
        return Ok(CgOutcome {
            solution: vec![T::zero(); n],
            iterations: 0,
            relative_residual: T::zero(),
            converged: true,
        });
    }

    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![T::zero(); n],
    };
    let mut r = rhs.to_vec();
    if x0.is_some() {
        let ax = apply(&x)?;
        axpy(-T::one(), &ax, &mut r);
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut best = (rr.sqrt() / rhs_norm, x.clone());

    for it in 0..settings.max_iter {
        let rel = rr.sqrt() / rhs_norm;
        if rel <= settings.tol {
            return Ok(CgOutcome {
                solution: x,
                iterations: it,
                relative_residual: rel,
                converged: true,
            });
        }
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::Singular(format!(
                "CG curvature pᵀAp = {pap:e} at iteration {it}"
            )));
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(Error::Divergence("conjugate gradient".into()));
        }
        let rel_new = rr_new.sqrt() / rhs_norm;
        if rel_new < best.0 {
            best = (rel_new, x.clone());
        }
        let beta = rr_new / rr;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }

    let rel = rr.sqrt() / rhs_norm;
    if rel <= settings.tol {
        return Ok(CgOutcome {
            solution: x,
            iterations: settings.max_iter,
            relative_residual: rel,
            converged: true,
        });
    }
    Ok(CgOutcome {
        solution: best.1,
        iterations: settings.max_iter,
        relative_residual: best.0,
        converged: false,
    })
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
/// Only the symmetric part is used.
pub fn symmetric_eigenvalues<T: Scalar>(m: &DenseMatrix<T>) -> Result<Vec<T>> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::ShapeMismatch(format!("eigenvalues need a square matrix, got {}x{}", n, m.cols())));
    }
    let half = T::lit(0.5);
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = half * (m[(i, j)] + m[(j, i)]);
        }
    }
    let scale = a.frobenius_norm();
    if scale == T::zero() {
        return Ok(vec![T::zero(); n]);
    }
    let tol = T::epsilon() * scale;
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DenseMatrix<f64> {
        let mut k = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4;
            }
        }
        let mut g = k.gram();
        g.add_diagonal(0.5);
        g
    }

    #[test]
    fn cholesky_and_lu_agree() {
        let a = spd(9);
        let b: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let x1 = Cholesky::factor(&a).unwrap().solve(&b);
        let x2 = Lu::factor(&a).unwrap().solve(&b);
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-12);
        }
        let r = a.matvec(&x1);
        for (p, q) in r.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn lu_transpose_solve() {
        let mut a = spd(6);
        a[(0, 5)] += 3.0;
        a[(4, 1)] -= 2.0;
        let b = vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.5];
        let x = Lu::factor(&a).unwrap().solve_transpose(&b);
        let r = a.matvec_transpose(&x);
        for (p, q) in r.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = DenseMatrix::<f64>::identity(3);
        a[(2, 2)] = -1.0;
        assert!(matches!(Cholesky::factor(&a), Err(Error::Singular(_))));
    }

    #[test]
    fn lu_rejects_singular() {
        let a = DenseMatrix::<f64>::zeros(3, 3);
        assert!(Lu::factor(&a).is_err());
    }

    #[test]
    fn cg_matches_direct_solve() {
        let a = spd(12);
        let b: Vec<f64> = (0..12).map(|i| 1.0 + i as f64).collect();
        let out = conjugate_gradient(
            |x| Ok(a.matvec(x)),
            &b,
            None,
            CgSettings::new(1e-13, 200),
        )
        .unwrap();
        assert!(out.converged);
        let exact = Cholesky::factor(&a).unwrap().solve(&b);
        for (p, q) in out.solution.iter().zip(&exact) {
            assert!((p - q).abs() < 1e-9 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn cg_flags_non_convergence() {
        let a = spd(12);
        let b = vec![1.0; 12];
        let out = conjugate_gradient(|x| Ok(a.matvec(x)), &b, None, CgSettings::new(1e-14, 2))
            .unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn jacobi_eigenvalues_of_known_spectrum() {
        let mut m = DenseMatrix::<f64>::zeros(3, 3);
        m[(0, 0)] = 2.0;
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 1.0;
        m[(1, 1)] = 2.0;
        m[(2, 2)] = -1.0;
        let e = symmetric_eigenvalues(&m).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-14);
        assert!((e[1] - 1.0).abs() < 1e-14);
        assert!((e[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_trace_and_positivity_on_spd() {
        let g = spd(9);
        let e = symmetric_eigenvalues(&g).unwrap();
        let trace: f64 = (0..9).map(|i| g[(i, i)]).sum();
        assert!((e.iter().sum::<f64>() - trace).abs() < 1e-12 * trace);
        assert!(e[0] >= 0.5 - 1e-12);
    }
}
