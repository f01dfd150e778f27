//! Small dense complex linear algebra: LU with partial pivoting for the
//! scattering systems and a cyclic Jacobi eigensolver for Hermitian
//! matrices (oracles, Krylov projections, triplon band).
//!
//! Matrices are stored row-major in a flat `Vec`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{czero, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    pub n: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![czero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex::new(T::one(), T::zero());
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex<T>) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: Complex<T>) {
        self.data[i * self.n + j] += v;
    }

    pub fn matvec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .fold(czero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == czero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// Maximum-column-sum norm.
    pub fn norm1(&self) -> T {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn max_hermitian_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }
}

/// LU factorization `P A = L U` with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    n: usize,
    lu: Vec<Complex<T>>,
    perm: Vec<usize>,
    anorm: T,
}

impl<T: Real> Lu<T> {
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self> {
        let n = a.n;
        let anorm = a.norm1();
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].norm();
            for i in k + 1..n {
                let v = lu[i * n + k].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::SingularSystem {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != czero() {
                    for j in k + 1..n {
                        let u = lu[k * n + j];
                        lu[i * n + j] -= f * u;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm, anorm })
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.n;
        let mut x: Vec<Complex<T>> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// 1-norm condition number computed from the explicit inverse. The
    /// systems handled here have at most a few dozen unknowns, so the exact
    /// value is cheaper to reason about than an estimator.
    pub fn condition(&self) -> T {
        let n = self.n;
        let mut inv_norm = T::zero();
        let mut e = vec![czero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = czero());
            e[j] = Complex::new(T::one(), T::zero());
            let col = self.solve(&e);
            inv_norm = inv_norm.max(col.iter().map(|z| z.norm()).sum());
        }
        self.anorm * inv_norm
    }
}

/// Solves `A x = b`, refusing systems whose condition number exceeds
/// `max_condition`.
pub fn solve_checked<T: Real>(
    a: &DenseMatrix<T>,
    b: &[Complex<T>],
    max_condition: T,
) -> Result<Vec<Complex<T>>> {
    let lu = Lu::factor(a)?;
    let cond = lu.condition();
    if !(cond <= max_condition) {
        return Err(Error::SingularSystem {
            condition: cond.as_f64(),
        });
    }
    Ok(lu.solve(b))
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matrix of eigenvectors (column `j` belongs to eigenvalue `j`).
#[derive(Debug, Clone)]
pub struct HermitianEigen<T> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn vector(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.vectors.n).map(|i| self.vectors.get(i, j)).collect()
    }

    /// `f(A) = V diag(f(lambda)) V^dagger`.
    pub fn apply_function(&self, f: impl Fn(T) -> Complex<T>) -> DenseMatrix<T> {
        let n = self.vectors.n;
        let fv: Vec<Complex<T>> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = czero();
                for k in 0..n {
                    s += self.vectors.get(i, k) * fv[k] * self.vectors.get(j, k).conj();
                }
                out.set(i, j, s);
            }
        }
        out
    }
}

/// Cyclic Jacobi diagonalization of a Hermitian matrix. Each rotation first
/// removes the phase of the pivot element with a diagonal unitary and then
/// applies a real Givens rotation.
pub fn hermitian_eigen<T: Real>(a: &DenseMatrix<T>) -> Result<HermitianEigen<T>> {
    let n = a.n;
    let mut m = a.clone();
    // Symmetrize so tiny Hermiticity defects of the input do not leak into
    // the rotations.
    for i in 0..n {
        let d = m.get(i, i).re;
        m.set(i, i, Complex::new(d, T::zero()));
        for j in i + 1..n {
            let v = (m.get(i, j) + m.get(j, i).conj()) * T::lit(0.5);
            m.set(i, j, v);
            m.set(j, i, v.conj());
        }
    }
    let mut v = DenseMatrix::identity(n);
    let scale = m.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    let tiny = T::epsilon() * T::epsilon() * scale * scale;
    let max_sweeps = 100;
    let mut converged = n <= 1;
    for _sweep in 0..max_sweeps {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).norm_sqr())
            .sum();
        if off <= tiny || off == T::zero() {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                let r = apq.norm();
                if r == T::zero() {
                    continue;
                }
                // Diagonal unitary D = diag(.., e^{-i theta} at q, ..) makes
                // the (p, q) element real and positive.
                let ph = apq / r;
                let phc = ph.conj();
                for k in 0..n {
                    let x = m.get(k, q) * phc;
                    m.set(k, q, x);
                }
                for k in 0..n {
                    let x = m.get(q, k) * ph;
                    m.set(q, k, x);
                }
                for k in 0..n {
                    let x = v.get(k, q) * phc;
                    v.set(k, q, x);
                }
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let theta = (aqq - app) / (T::lit(2.0) * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let xp = m.get(k, p);
                    let xq = m.get(k, q);
                    m.set(k, p, xp * c - xq * s);
                    m.set(k, q, xp * s + xq * c);
                }
                for k in 0..n {
                    let xp = m.get(p, k);
                    let xq = m.get(q, k);
                    m.set(p, k, xp * c - xq * s);
                    m.set(q, k, xp * s + xq * c);
                }
                for k in 0..n {
                    let xp = v.get(k, p);
                    let xq = v.get(k, q);
                    v.set(k, p, xp * c - xq * s);
                    v.set(k, q, xp * s + xq * c);
                }
                m.set(p, q, czero());
                m.set(q, p, czero());
                m.set(p, p, Complex::new(app - t * r, T::zero()));
                m.set(q, q, Complex::new(aqq + t * r, T::zero()));
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: max_sweeps,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).re.partial_cmp(&m.get(j, j).re).unwrap());
    let values = order.iter().map(|&i| m.get(i, i).re).collect();
    let mut vectors = DenseMatrix::zeros(n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, new, v.get(k, old));
        }
    }
    Ok(HermitianEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn random_matrix(n: usize, seed: u64) -> DenseMatrix<f64> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, c(next(), next()));
            }
        }
        m
    }

    #[test]
    fn lu_solves_random_systems() {
        for seed in 0..5 {
            let a = random_matrix(12, seed);
            let x: Vec<_> = (0..12).map(|i| c(i as f64, -(i as f64) * 0.5)).collect();
            let b = a.matvec(&x);
            let sol = solve_checked(&a, &b, 1e12).unwrap();
            for (u, v) in sol.iter().zip(&x) {
                assert!((u - v).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn lu_detects_singular() {
        let mut a = DenseMatrix::<f64>::zeros(3);
        a.set(0, 0, c(1.0, 0.0));
        a.set(1, 1, c(1.0, 0.0));
        assert!(matches!(
            solve_checked(&a, &[c(1.0, 0.0); 3], 1e12),
            Err(Error::SingularSystem { .. })
        ));
        a.set(2, 2, c(1e-14, 0.0));
        assert!(matches!(
            solve_checked(&a, &[c(1.0, 0.0); 3], 1e12),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn jacobi_diagonalizes_hermitian() {
        for seed in 0..4 {
            let r = random_matrix(15, seed + 10);
            let mut h = DenseMatrix::zeros(15);
            for i in 0..15 {
                for j in 0..15 {
                    h.set(i, j, r.get(i, j) + r.get(j, i).conj());
                }
            }
            let eig = hermitian_eigen(&h).unwrap();
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
            for j in 0..15 {
                let v = eig.vector(j);
                let hv = h.matvec(&v);
                for k in 0..15 {
                    assert!((hv[k] - v[k] * eig.values[j]).norm() < 1e-12);
                }
            }
            let back = eig.apply_function(|l| c(l, 0.0));
            for (a, b) in back.data.iter().zip(&h.data) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_two_by_two_closed_form() {
        let mut h = DenseMatrix::zeros(2);
        h.set(0, 0, c(1.0, 0.0));
        h.set(1, 1, c(-1.0, 0.0));
        h.set(0, 1, c(0.0, 1.0));
        h.set(1, 0, c(0.0, -1.0));
        let eig = hermitian_eigen(&h).unwrap();
        assert!((eig.values[0] + 2f64.sqrt()).abs() < 1e-14);
        assert!((eig.values[1] - 2f64.sqrt()).abs() < 1e-14);
    }
}

/// Number of eigenvalues of the symmetric tridiagonal matrix
/// `(diag, off)` strictly below `x` (Sturm sequence).
pub fn sturm_count<T: Real>(diag: &[T], off: &[T], x: T) -> usize {
    let tiny = T::min_positive_value().sqrt();
    let mut count = 0;
    let mut q = T::one();
    for i in 0..diag.len() {
        let b2 = if i == 0 { T::zero() } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { T::zero() } else { b2 / q };
        if q == T::zero() {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) of a symmetric tridiagonal matrix by
/// bisection.
pub fn tridiagonal_eigenvalue<T: Real>(diag: &[T], off: &[T], k: usize) -> T {
    let n = diag.len();
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..n {
        let r = (if i > 0 { off[i - 1].abs() } else { T::zero() })
            + (if i + 1 < n { off[i].abs() } else { T::zero() });
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) * T::lit(0.5)
}

/// Result of a Lanczos run for extreme eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosExtremes<T> {
    pub min: T,
    pub max: T,
    /// Residual-based accuracy bound on the two Ritz values.
    pub residual: T,
    pub iterations: usize,
}

/// Extreme eigenvalues of the Hermitian operator `apply` (`y = A x`) by the
/// Lanczos method from the deterministic start vector `start`.
///
/// With `reorthogonalize` every new vector is orthogonalized against all
/// previous ones (small problems, exact Ritz values); without it only three
/// vectors are stored, which suffices for bounding the spectrum.
pub fn lanczos_extremes<T, F>(
    start: &[Complex<T>],
    mut apply: F,
    max_iter: usize,
    tol: T,
    reorthogonalize: bool,
) -> Result<LanczosExtremes<T>>
where
    T: Real,
    F: FnMut(&[Complex<T>], &mut [Complex<T>]),
{
    use crate::scalar::{inner, norm_sqr};
    let n = start.len();
    let nrm = norm_sqr(start).sqrt();
    if !(nrm > T::zero()) {
        return Err(Error::InvalidParameter("zero Lanczos start vector".into()));
    }
    let mut basis: Vec<Vec<Complex<T>>> = Vec::new();
    let mut v: Vec<Complex<T>> = start.iter().map(|z| z / nrm).collect();
    let mut v_prev = vec![czero(); n];
    let mut w = vec![czero(); n];
    let mut alphas: Vec<T> = Vec::new();
    let mut betas: Vec<T> = Vec::new();
    let mut last = (T::infinity(), T::neg_infinity());
    let max_iter = max_iter.min(n).max(1);
    for it in 0..max_iter {
        apply(&v, &mut w);
        let a = inner(&v, &w).re;
        let b_prev = betas.last().cloned().unwrap_or(T::zero());
        for i in 0..n {
            w[i] = w[i] - v[i] * a - v_prev[i] * b_prev;
        }
        if reorthogonalize {
            basis.push(v.clone());
            for _pass in 0..2 {
                for q in &basis {
                    let c = inner(q, &w);
                    for i in 0..n {
                        w[i] -= q[i] * c;
                    }
                }
            }
        }
        alphas.push(a);
        let b = norm_sqr(&w).sqrt();
        let m = alphas.len();
        let check = reorthogonalize || it % 5 == 4 || it + 1 == max_iter || b == T::zero();
        if check {
            let lo = tridiagonal_eigenvalue(&alphas, &betas, 0);
            let hi = tridiagonal_eigenvalue(&alphas, &betas, m - 1);
            let scale = lo.abs().max(hi.abs()).max(T::one());
            let converged = (lo - last.0).abs() <= tol * scale && (hi - last.1).abs() <= tol * scale;
            if b <= tol * scale || converged || m == n {
                return Ok(LanczosExtremes {
                    min: lo,
                    max: hi,
                    residual: b.min((lo - last.0).abs().max((hi - last.1).abs())),
                    iterations: m,
                });
            }
            last = (lo, hi);
        }
        betas.push(b);
        std::mem::swap(&mut v_prev, &mut v);
        for i in 0..n {
            v[i] = w[i] / b;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
    })
}

#[cfg(test)]
mod lanczos_tests {
    use super::*;

    #[test]
    fn tridiagonal_bisection_matches_jacobi() {
        let diag = [1.0f64, -2.0, 0.5, 3.0, 0.0];
        let off = [0.7f64, 1.1, -0.3, 0.9];
        let mut m = DenseMatrix::zeros(5);
        for i in 0..5 {
            m.set(i, i, Complex::new(diag[i], 0.0));
        }
        for i in 0..4 {
            m.set(i, i + 1, Complex::new(off[i], 0.0));
            m.set(i + 1, i, Complex::new(off[i], 0.0));
        }
        let eig = hermitian_eigen(&m).unwrap();
        for k in 0..5 {
            assert!((tridiagonal_eigenvalue(&diag, &off, k) - eig.values[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn lanczos_finds_extremes_of_a_chain() {
        let n = 200;
        let apply = |x: &[Complex<f64>], y: &mut [Complex<f64>]| {
            for i in 0..n {
                let mut s = Complex::new(0.0, 0.0);
                if i > 0 {
                    s -= x[i - 1];
                }
                if i + 1 < n {
                    s -= x[i + 1];
                }
                y[i] = s;
            }
        };
        let start: Vec<_> = (0..n)
            .map(|i| Complex::new(1.0 + (i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let r = lanczos_extremes(&start, apply, 400, 1e-12, true).unwrap();
        let exact = 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((r.min + exact).abs() < 1e-9);
        assert!((r.max - exact).abs() < 1e-9);
    }
}
