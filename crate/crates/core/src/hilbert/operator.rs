use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::Result;
use crate::hilbert::basis::{Configuration, SectorBasis};
use crate::linalg::DenseMatrix;
use crate::scalar::{cis, czero, Real};

/// Rows processed per rayon task in matrix-vector products. Each output
/// element is computed by exactly one task with a fixed summation order, so
/// results are bit-identical for any thread count.
const ROW_CHUNK: usize = 2048;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<Complex<T>>,
}

impl<T: Real> SparseOperator<T> {
    /// Builds from per-row entry lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(u32, Complex<T>)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<u32> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(m: &DenseMatrix<T>) -> Self {
        let rows = (0..m.n)
            .map(|i| {
                (0..m.n)
                    .filter(|&j| m.get(i, j) != czero())
                    .map(|j| (j as u32, m.get(i, j)))
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_rows(vec![Vec::new(); dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex<T>)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b]
            .iter()
            .zip(&self.vals[a..b])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[a..b].binary_search(&(j as u32)) {
            Ok(k) => self.vals[a + k],
            Err(_) => czero(),
        }
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.par_chunks_mut(ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, out)| {
                let base = chunk * ROW_CHUNK;
                for (k, yi) in out.iter_mut().enumerate() {
                    let i = base + k;
                    let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
                    let mut s = czero();
                    for (c, v) in self.cols[a..b].iter().zip(&self.vals[a..b]) {
                        s += v * x[*c as usize];
                    }
                    *yi = s;
                }
            });
    }

    pub fn matvec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut y = vec![czero(); self.dim];
        self.apply(x, &mut y);
        y
    }

    /// `<x|H|x>` (real part; `H` is Hermitian).
    pub fn expectation(&self, x: &[Complex<T>]) -> T {
        let hx = self.matvec(x);
        crate::scalar::inner(x, &hx).re
    }

    /// Largest entrywise defect `|H_ij - conj(H_ji)|`.
    pub fn hermitian_defect(&self) -> T {
        (0..self.dim)
            .into_par_iter()
            .map(|i| {
                self.row(i)
                    .map(|(j, v)| (v - self.get(j, i).conj()).norm())
                    .fold(T::zero(), T::max)
            })
            .reduce(T::zero, T::max)
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin_bounds(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..self.dim {
            let mut d = T::zero();
            let mut radius = T::zero();
            for (j, v) in self.row(i) {
                if j == i {
                    d = v.re;
                } else {
                    radius += v.norm();
                }
            }
            lo = lo.min(d - radius);
            hi = hi.max(d + radius);
        }
        if self.dim == 0 {
            (T::zero(), T::zero())
        } else {
            (lo, hi)
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut m = DenseMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m.set(i, j, v);
            }
        }
        m
    }

    /// Matrix Market coordinate export (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(out, "{} {} {}", self.dim, self.dim, self.nnz())?;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                writeln!(
                    out,
                    "{} {} {:.17e} {:.17e}",
                    i + 1,
                    j + 1,
                    v.re.as_f64(),
                    v.im.as_f64()
                )?;
            }
        }
        Ok(())
    }
}

fn photon_sites(cfg: &Configuration) -> impl Iterator<Item = (u32, usize)> + '_ {
    let p = cfg.photons();
    (0..p.len())
        .filter(move |&i| i == 0 || p[i] != p[i - 1])
        .map(move |i| (p[i], cfg.occupation(p[i])))
}

/// Waveguide plus emitter Hamiltonian on the sector:
/// `-J sum (a+_n a_{n+1} + h.c.) - U/2 sum a+a+aa + sum Delta_i/2 sigma^z_i
///  + sum_{i,tau} (g e^{i phi} sigma^-_i a+_{n_tau} + h.c.)`.
pub fn assemble_hamiltonian<T: Real>(basis: &SectorBasis<T>) -> SparseOperator<T> {
    let lattice = &basis.lattice;
    let j = lattice.hopping;
    let half_u = lattice.nonlinearity * T::lit(0.5);
    let half = T::lit(0.5);
    let couplings: Vec<Vec<(u32, Complex<T>)>> = basis
        .emitters
        .iter()
        .map(|e| {
            e.couplings
                .iter()
                .map(|c| (c.site as u32, cis(c.phase) * c.strength))
                .collect()
        })
        .collect();
    let sqrt = |n: usize| T::from_usize_lossy(n).sqrt();
    let rows: Vec<Vec<(u32, Complex<T>)>> = basis
        .states()
        .par_iter()
        .map(|cfg| {
            let mut row: Vec<(u32, Complex<T>)> = Vec::with_capacity(8);
            let mut diag = T::zero();
            for (_, n) in photon_sites(cfg) {
                diag -= half_u * T::from_usize_lossy(n * (n - 1));
            }
            for (i, e) in basis.emitters.iter().enumerate() {
                if cfg.excited(i) {
                    diag += half * e.detuning;
                } else {
                    diag -= half * e.detuning;
                }
            }
            if diag != T::zero() {
                row.push((basis.index_of(cfg).unwrap() as u32, Complex::new(diag, T::zero())));
            }
            for (site, n) in photon_sites(cfg) {
                for step in [-1isize, 1] {
                    let Some(to) = lattice.neighbor(site as usize, step) else {
                        continue;
                    };
                    let to = to as u32;
                    let target = cfg.hop(site, to);
                    if let Some(col) = basis.index_of(&target) {
                        // <cfg| H |target>: a photon hops from `to` back to `site`.
                        let amp = -j * sqrt(n) * sqrt(cfg.occupation(to) + 1);
                        row.push((col as u32, Complex::new(amp, T::zero())));
                    }
                }
            }
            for (i, points) in couplings.iter().enumerate() {
                let bit = 1u8 << i;
                for &(site, g) in points {
                    if g.re == T::zero() && g.im == T::zero() {
                        continue;
                    }
                    if cfg.excited(i) {
                        // Partner has emitter i in the ground state and one
                        // more photon at `site`; <cfg|H|partner> = conj(g) sqrt(n+1).
                        let partner = cfg.with_added(site, cfg.pattern & !bit);
                        if let Some(col) = basis.index_of(&partner) {
                            let amp = g.conj() * sqrt(cfg.occupation(site) + 1);
                            row.push((col as u32, amp));
                        }
                    } else {
                        let n = cfg.occupation(site);
                        if n > 0 {
                            let partner = cfg.with_removed(site, cfg.pattern | bit);
                            if let Some(col) = basis.index_of(&partner) {
                                row.push((col as u32, g * sqrt(n)));
                            }
                        }
                    }
                }
            }
            row
        })
        .collect();
    SparseOperator::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::basis::TruncationRule;
    use crate::lattice::{Boundary, EmitterSpec, LatticeSpec};
    use crate::linalg::hermitian_eigen;

    #[test]
    fn two_site_two_photon_block() {
        // Smallest valid lattice is 8 sites; take two sites out of an open
        // chain by checking the block restricted to sites {0, 1} of the
        // explicit 3x3 oracle.
        let mut m = DenseMatrix::<f64>::zeros(3);
        let s2 = 2f64.sqrt();
        // |2,0>, |1,1>, |0,2>
        m.set(0, 0, Complex::new(-6.0, 0.0));
        m.set(2, 2, Complex::new(-6.0, 0.0));
        for (a, b) in [(0, 1), (1, 2)] {
            m.set(a, b, Complex::new(-s2, 0.0));
            m.set(b, a, Complex::new(-s2, 0.0));
        }
        let eig = hermitian_eigen(&m).unwrap();
        // Symmetric combination of |2,0> and |0,2> couples to |1,1> with -2.
        let expected = -(3.0 + 13f64.sqrt());
        assert!((eig.values[0] - expected).abs() < 1e-12);

        let lat = LatticeSpec::new(8, 1.0, 6.0).unwrap();
        let b = SectorBasis::enumerate(&lat, &[], 2, TruncationRule::default()).unwrap();
        let h = assemble_hamiltonian(&b);
        let i20 = b.index_of(&Configuration::new(0, &[0, 0])).unwrap();
        let i11 = b.index_of(&Configuration::new(0, &[0, 1])).unwrap();
        let i02 = b.index_of(&Configuration::new(0, &[1, 1])).unwrap();
        assert_eq!(h.get(i20, i20).re, -6.0);
        assert!((h.get(i20, i11).re + s2).abs() < 1e-15);
        assert!((h.get(i11, i02).re + s2).abs() < 1e-15);
        assert_eq!(h.get(i20, i02), Complex::new(0.0, 0.0));
    }

    #[test]
    fn hermitian_with_phases_and_ring() {
        for boundary in [Boundary::Open, Boundary::Ring] {
            let lat = LatticeSpec::new(12, 1.0, 6.0).unwrap().with_boundary(boundary);
            let e1 = EmitterSpec::giant(4, -6.6, &[(-1, 0.3, -0.4), (0, 0.2, 0.0), (1, 0.3, 0.7)])
                .unwrap();
            let e2 = EmitterSpec::small_atom(9, 0.1, -11.8);
            let rule = TruncationRule {
                max_pairwise_photon_spread: Some(3),
            };
            let b = SectorBasis::enumerate(&lat, &[e1, e2], 3, rule).unwrap();
            let h = assemble_hamiltonian(&b);
            assert!(h.hermitian_defect() < 1e-14);
            assert_eq!(h.dim(), b.dim());
        }
    }

    #[test]
    fn zero_coupling_decouples_photon_numbers() {
        let lat = LatticeSpec::new(10, 1.0, 6.0).unwrap();
        let e = EmitterSpec::small_atom(5, 0.0, -6.6);
        let b = SectorBasis::enumerate(&lat, &[e], 2, TruncationRule::default()).unwrap();
        let h = assemble_hamiltonian(&b);
        for i in 0..b.dim() {
            for (jj, _) in h.row(i) {
                assert_eq!(b.state(i).photon_count(), b.state(jj).photon_count());
            }
        }
    }

    #[test]
    fn matrix_market_header() {
        let lat = LatticeSpec::new(8, 1.0, 6.0).unwrap();
        let b = SectorBasis::enumerate(&lat, &[], 1, TruncationRule::default()).unwrap();
        let h = assemble_hamiltonian(&b);
        let mut buf = Vec::new();
        h.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate complex general\n8 8 14\n"));
    }
}
