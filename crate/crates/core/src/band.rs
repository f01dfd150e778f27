//! Dispersion relations, group velocities and bound-state shapes of the
//! single-photon, doublon and triplon bands.

use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::linalg::{lanczos_extremes, DenseMatrix};
use crate::scalar::{cis, Real};

/// `E_k = -2J cos k`.
pub fn single_photon_energy<T: Real>(k: T, lattice: &LatticeSpec<T>) -> T {
    -T::lit(2.0) * lattice.hopping * k.cos()
}

/// `dE_k/dk = 2J sin k`.
pub fn single_photon_velocity<T: Real>(k: T, lattice: &LatticeSpec<T>) -> T {
    T::lit(2.0) * lattice.hopping * k.sin()
}

/// `E_K = -sqrt(U^2 + (4J cos(K/2))^2)`.
pub fn doublon_energy<T: Real>(k: T, lattice: &LatticeSpec<T>) -> T {
    let u = lattice.nonlinearity;
    let c = T::lit(4.0) * lattice.hopping * (k * T::lit(0.5)).cos();
    -(u * u + c * c).sqrt()
}

/// Analytic derivative of [`doublon_energy`]:
/// `4J^2 sin K / sqrt(U^2 + 16 J^2 cos^2(K/2))`.
pub fn doublon_velocity<T: Real>(k: T, lattice: &LatticeSpec<T>) -> T {
    let j = lattice.hopping;
    let u = lattice.nonlinearity;
    let c = T::lit(4.0) * j * (k * T::lit(0.5)).cos();
    T::lit(4.0) * j * j * k.sin() / (u * u + c * c).sqrt()
}

/// `(bottom, top)` of the doublon band.
pub fn doublon_band_edges<T: Real>(lattice: &LatticeSpec<T>) -> (T, T) {
    let u = lattice.nonlinearity;
    let c = T::lit(4.0) * lattice.hopping;
    (-(u * u + c * c).sqrt(), -u)
}

/// Relative-coordinate wavefunction `u_K(r) = u0 alpha^{|r|}` of a doublon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublonShape<T> {
    pub momentum: T,
    pub decay_factor: T,
    pub localization_length: T,
    pub normalization: T,
}

impl<T: Real> DoublonShape<T> {
    /// Amplitude at relative distance `r` (sign of `r` irrelevant).
    pub fn amplitude(&self, r: i64) -> T {
        self.normalization * self.decay_factor.powi(r.unsigned_abs() as i32)
    }
}

/// Bound-state shape from the lattice two-body problem: `alpha` is the root
/// in `(0, 1)` of `J_K alpha^2 + U alpha - J_K = 0` with `J_K = 2J cos(K/2)`.
pub fn doublon_shape<T: Real>(k: T, lattice: &LatticeSpec<T>) -> Result<DoublonShape<T>> {
    let u = lattice.nonlinearity;
    if !(u > T::zero()) {
        return Err(Error::InvalidParameter(
            "doublon shape needs a positive nonlinearity".into(),
        ));
    }
    let cos_half = (k * T::lit(0.5)).cos();
    if cos_half.abs() < T::lit(1e-12) {
        return Err(Error::DegenerateMomentum {
            momentum: k.as_f64(),
        });
    }
    let jk = (T::lit(2.0) * lattice.hopping * cos_half).abs();
    // Rationalized root, free of cancellation for small J_K.
    let alpha = T::lit(2.0) * jk / (u + (u * u + T::lit(4.0) * jk * jk).sqrt());
    let a2 = alpha * alpha;
    Ok(DoublonShape {
        momentum: k,
        decay_factor: alpha,
        localization_length: -T::one() / alpha.ln(),
        normalization: ((T::one() - a2) / (T::one() + a2)).sqrt(),
    })
}

/// Doublon momentum `K_r in (0, pi]` resonant with an emitter absorbing a
/// photon of momentum `k0`: `E_{K_r} = detuning + E_{k0}`. Bisection on the
/// monotone half-band.
pub fn resonant_doublon_momentum<T: Real>(
    detuning: T,
    k0: T,
    lattice: &LatticeSpec<T>,
) -> Result<T> {
    let target = detuning + single_photon_energy(k0, lattice);
    let (lower, upper) = doublon_band_edges(lattice);
    if !(target >= lower && target <= upper) {
        return Err(Error::OffResonant {
            target: target.as_f64(),
            lower: lower.as_f64(),
            upper: upper.as_f64(),
        });
    }
    let f = |kk: T| doublon_energy(kk, lattice) - target;
    let (mut lo, mut hi) = (T::zero(), T::PI());
    if f(hi) == T::zero() {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}

/// Shape-preserving cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic<T> {
    x: Vec<T>,
    y: Vec<T>,
    slope: Vec<T>,
}

impl<T: Real> MonotoneCubic<T> {
    /// `end_slopes`: fixed derivatives at the two ends, or `None` for
    /// one-sided secants.
    pub fn new(x: Vec<T>, y: Vec<T>, end_slopes: Option<(T, T)>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "interpolation nodes must be strictly increasing, at least two".into(),
            ));
        }
        let delta: Vec<T> = (0..n - 1)
            .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
            .collect();
        let mut slope = vec![T::zero(); n];
        for i in 1..n - 1 {
            let (d0, d1) = (delta[i - 1], delta[i]);
            if d0 * d1 <= T::zero() {
                slope[i] = T::zero();
            } else {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w1 = T::lit(2.0) * h1 + h0;
                let w2 = h1 + T::lit(2.0) * h0;
                slope[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
            }
        }
        match end_slopes {
            Some((a, b)) => {
                slope[0] = a;
                slope[n - 1] = b;
            }
            None => {
                slope[0] = delta[0];
                slope[n - 1] = delta[n - 2];
            }
        }
        Ok(Self { x, y, slope })
    }

    pub fn domain(&self) -> (T, T) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn segment(&self, xq: T) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&xq).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        }
    }

    pub fn eval(&self, xq: T) -> T {
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = three * t2 - two * t3;
        let h11 = t3 - t2;
        h00 * self.y[i] + h10 * h * self.slope[i] + h01 * self.y[i + 1] + h11 * h * self.slope[i + 1]
    }

    pub fn derivative(&self, xq: T) -> T {
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let t2 = t * t;
        let six = T::lit(6.0);
        let d00 = six * t2 - six * t;
        let d10 = T::lit(3.0) * t2 - T::lit(4.0) * t + T::one();
        let d01 = six * t - six * t2;
        let d11 = T::lit(3.0) * t2 - T::lit(2.0) * t;
        (d00 * self.y[i] + d01 * self.y[i + 1]) / h + d10 * self.slope[i] + d11 * self.slope[i + 1]
    }

    /// Solves `eval(x) = target` on a monotone interpolant.
    pub fn invert(&self, target: T) -> Option<T> {
        if let Some(i) = self.y.iter().position(|&v| v == target) {
            return Some(self.x[i]);
        }
        let n = self.x.len();
        for i in 0..n - 1 {
            let (a, b) = (self.y[i], self.y[i + 1]);
            if (a - target) * (b - target) < T::zero() {
                let (mut lo, mut hi) = (self.x[i], self.x[i + 1]);
                let up = b > a;
                for _ in 0..200 {
                    let mid = (lo + hi) * T::lit(0.5);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if (self.eval(mid) < target) == up {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some((lo + hi) * T::lit(0.5));
            }
        }
        None
    }
}

/// Sampled triplon dispersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriplonTable<T> {
    pub momenta: Vec<T>,
    pub energies: Vec<T>,
    pub group_velocities: Vec<T>,
    pub r_max: usize,
    half_band: MonotoneCubic<T>,
}

impl<T: Real> TriplonTable<T> {
    pub fn energy(&self, k: T) -> T {
        self.half_band.eval(k.abs())
    }

    pub fn velocity(&self, k: T) -> T {
        self.half_band.derivative(k.abs()) * k.signum()
    }

    pub fn range(&self) -> (T, T) {
        let lo = self.energies.iter().cloned().fold(T::infinity(), T::min);
        let hi = self.energies.iter().cloned().fold(T::neg_infinity(), T::max);
        (lo, hi)
    }
}

/// Band structure evaluators for one lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandModel<T> {
    pub lattice: LatticeSpec<T>,
    pub triplon_table: Option<TriplonTable<T>>,
}

impl<T: Real> BandModel<T> {
    pub fn new(lattice: LatticeSpec<T>) -> Self {
        Self {
            lattice,
            triplon_table: None,
        }
    }

    pub fn single_photon_energy(&self, k: T) -> T {
        single_photon_energy(k, &self.lattice)
    }

    pub fn single_photon_velocity(&self, k: T) -> T {
        single_photon_velocity(k, &self.lattice)
    }

    pub fn doublon_energy(&self, k: T) -> T {
        doublon_energy(k, &self.lattice)
    }

    pub fn doublon_velocity(&self, k: T) -> T {
        doublon_velocity(k, &self.lattice)
    }

    pub fn doublon_shape(&self, k: T) -> Result<DoublonShape<T>> {
        doublon_shape(k, &self.lattice)
    }
}

/// Lowest eigenvalue of the three-boson problem at total momentum `k`,
/// with relative coordinates truncated to a spread of at most `r_max`.
pub fn triplon_energy<T: Real>(k: T, lattice: &LatticeSpec<T>, r_max: usize) -> Result<T> {
    let h = triplon_relative_hamiltonian(k, lattice, r_max);
    let n = h.n;
    // Sparse rows of the (at most seven-entry-per-column) matrix.
    let rows: Vec<Vec<(usize, Complex<T>)>> = (0..n)
        .map(|i| {
            (0..n)
                .filter_map(|j| {
                    let v = h.get(i, j);
                    (v.re != T::zero() || v.im != T::zero()).then_some((j, v))
                })
                .collect()
        })
        .collect();
    let apply = |x: &[Complex<T>], y: &mut [Complex<T>]| {
        for (yi, row) in y.iter_mut().zip(&rows) {
            *yi = row.iter().fold(Complex::new(T::zero(), T::zero()), |acc, &(j, v)| acc + v * x[j]);
        }
    };
    // Start on the triply occupied configuration, which dominates the
    // bound state, plus a small deterministic spread.
    let start: Vec<Complex<T>> = (0..n)
        .map(|i| {
            let w = T::one() / T::from_usize_lossy(i + 1);
            Complex::new(if i == 0 { T::one() } else { w * T::lit(1e-3) }, T::zero())
        })
        .collect();
    let res = lanczos_extremes(&start, apply, n, T::lit(1e-14), true)?;
    Ok(res.min)
}

/// Relative-coordinate Hamiltonian at fixed total momentum. Basis states are
/// Bloch sums of Fock states with bosons at `x, x + a, x + b`
/// (`0 <= a <= b <= r_max`), with the phase referred to the centre of mass.
pub fn triplon_relative_hamiltonian<T: Real>(
    k: T,
    lattice: &LatticeSpec<T>,
    r_max: usize,
) -> DenseMatrix<T> {
    let r = r_max as i64;
    let mut index = std::collections::HashMap::new();
    let mut states = Vec::new();
    for a in 0..=r {
        for b in a..=r {
            index.insert((a, b), states.len());
            states.push((a, b));
        }
    }
    let dim = states.len();
    let mut h = DenseMatrix::zeros(dim);
    let half_u = lattice.nonlinearity * T::lit(0.5);
    let j = lattice.hopping;
    for (col, &(a, b)) in states.iter().enumerate() {
        let pos = [0i64, a, b];
        let mut sites: Vec<(i64, usize)> = Vec::new();
        for &p in &pos {
            match sites.iter_mut().find(|(s, _)| *s == p) {
                Some(e) => e.1 += 1,
                None => sites.push((p, 1)),
            }
        }
        let diag: T = sites
            .iter()
            .map(|&(_, n)| T::from_usize_lossy(n * n.saturating_sub(1)))
            .sum::<T>()
            * half_u;
        h.add(col, col, Complex::new(-diag, T::zero()));
        for &(site, occ) in &sites {
            for step in [-1i64, 1] {
                let target = site + step;
                let occ_target = sites
                    .iter()
                    .find(|(s, _)| *s == target)
                    .map_or(0, |e| e.1);
                let mut new = pos;
                let idx = new.iter().position(|&p| p == site).unwrap();
                new[idx] = target;
                new.sort_unstable();
                let (na, nb) = (new[1] - new[0], new[2] - new[0]);
                if nb > r {
                    continue;
                }
                let row = index[&(na, nb)];
                let amp = -j
                    * T::from_usize_lossy(occ).sqrt()
                    * T::from_usize_lossy(occ_target + 1).sqrt();
                // Centre of mass moves by step/3.
                let phase = cis(-k * T::from_i64(step).unwrap() / T::lit(3.0));
                h.add(row, col, phase * amp);
            }
        }
    }
    h
}

/// Samples the triplon band on `grid` (which must span `[-pi, pi]`) and
/// checks truncation convergence by doubling `r_max`.
pub fn triplon_band<T: Real>(
    lattice: &LatticeSpec<T>,
    grid: &[T],
    r_max: usize,
) -> Result<BandModel<T>> {
    let eps = T::lit(1e-9);
    let lo = grid.iter().cloned().fold(T::infinity(), T::min);
    let hi = grid.iter().cloned().fold(T::neg_infinity(), T::max);
    if grid.len() < 3 || lo > -T::PI() + eps || hi < T::PI() - eps {
        return Err(Error::InvalidParameter(
            "triplon momentum grid must cover [-pi, pi]".into(),
        ));
    }
    if r_max < 2 {
        return Err(Error::InvalidParameter("triplon r_max must be >= 2".into()));
    }
    let mut momenta: Vec<T> = grid.to_vec();
    momenta.sort_by(|a, b| a.partial_cmp(b).unwrap());
    momenta.dedup();
    let tol = T::lit(1e-8) * lattice.hopping;
    let results: Vec<Result<(T, T)>> = momenta
        .par_iter()
        .map(|&k| {
            let e = triplon_energy(k, lattice, r_max)?;
            let e2 = triplon_energy(k, lattice, 2 * r_max)?;
            Ok((e, (e - e2).abs()))
        })
        .collect();
    let mut energies = Vec::with_capacity(momenta.len());
    let mut worst = T::zero();
    for r in results {
        let (e, shift) = r?;
        energies.push(e);
        worst = worst.max(shift);
    }
    if worst > tol {
        return Err(Error::TruncationNotConverged {
            shift: worst.as_f64(),
            tolerance: tol.as_f64(),
        });
    }
    let n = momenta.len();
    let group_velocities = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (energies[b] - energies[a]) / (momenta[b] - momenta[a])
        })
        .collect();
    let (hx, hy): (Vec<T>, Vec<T>) = momenta
        .iter()
        .zip(&energies)
        .filter(|(k, _)| **k >= -eps)
        .map(|(k, e)| (k.max(T::zero()), *e))
        .unzip();
    // Even, 2pi-periodic band: flat at 0 and pi.
    let half_band = MonotoneCubic::new(hx, hy, Some((T::zero(), T::zero())))?;
    Ok(BandModel {
        lattice: *lattice,
        triplon_table: Some(TriplonTable {
            momenta,
            energies,
            group_velocities,
            r_max,
            half_band,
        }),
    })
}

/// Triplon momentum `K3 >= 0` with `E_{K3} = detuning2 + E_{K_r}`.
pub fn resonant_triplon_momentum<T: Real>(
    detuning2: T,
    doublon_momentum: T,
    band: &BandModel<T>,
) -> Result<T> {
    let table = band.triplon_table.as_ref().ok_or_else(|| {
        Error::InvalidParameter("band model has no triplon table".into())
    })?;
    let target = detuning2 + doublon_energy(doublon_momentum, &band.lattice);
    let (lo, hi) = (
        table.half_band.y.iter().cloned().fold(T::infinity(), T::min),
        table.half_band.y.iter().cloned().fold(T::neg_infinity(), T::max),
    );
    if !(target >= lo && target <= hi) {
        return Err(Error::OffResonant {
            target: target.as_f64(),
            lower: lo.as_f64(),
            upper: hi.as_f64(),
        });
    }
    table.half_band.invert(target).ok_or(Error::OffResonant {
        target: target.as_f64(),
        lower: lo.as_f64(),
        upper: hi.as_f64(),
    })
}

/// Which band to tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandKind {
    SinglePhoton,
    Doublon,
    Triplon,
}

/// Writes `momentum,energy,group_velocity` rows.
pub fn write_band_csv<T: Real, W: Write + ?Sized>(
    out: &mut W,
    band: &BandModel<T>,
    kind: BandKind,
    grid: &[T],
) -> Result<()> {
    writeln!(out, "momentum,energy,group_velocity")?;
    let rows: Vec<(T, T, T)> = match kind {
        BandKind::SinglePhoton => grid
            .iter()
            .map(|&k| (k, band.single_photon_energy(k), band.single_photon_velocity(k)))
            .collect(),
        BandKind::Doublon => grid
            .iter()
            .map(|&k| (k, band.doublon_energy(k), band.doublon_velocity(k)))
            .collect(),
        BandKind::Triplon => {
            let t = band.triplon_table.as_ref().ok_or_else(|| {
                Error::InvalidParameter("band model has no triplon table".into())
            })?;
            t.momenta
                .iter()
                .zip(&t.energies)
                .zip(&t.group_velocities)
                .map(|((&k, &e), &v)| (k, e, v))
                .collect()
        }
    };
    for (k, e, v) in rows {
        writeln!(
            out,
            "{:.12e},{:.12e},{:.12e}",
            k.as_f64(),
            e.as_f64(),
            v.as_f64()
        )?;
    }
    Ok(())
}

/// `n + 1` equally spaced momenta from `-pi` to `pi`.
pub fn momentum_grid<T: Real>(n: usize) -> Vec<T> {
    let n = n.max(2);
    (0..=n)
        .map(|i| -T::PI() + T::lit(2.0) * T::PI() * T::from_usize_lossy(i) / T::from_usize_lossy(n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn lat(u: f64) -> LatticeSpec<f64> {
        LatticeSpec::new(64, 1.0, u).unwrap()
    }

    #[test]
    fn single_photon_values() {
        let l = lat(6.0);
        assert!(single_photon_energy(PI / 2.0, &l).abs() < 1e-15);
        assert!((single_photon_energy(0.0, &l) + 2.0).abs() < 1e-15);
        assert!((single_photon_energy(PI / 3.0, &l) + 1.0).abs() < 1e-15);
        assert!((single_photon_velocity(PI / 2.0, &l) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn doublon_values() {
        let l = lat(6.0);
        assert!((doublon_energy(PI / 2.0, &l) + 44f64.sqrt()).abs() < 1e-12);
        assert!((doublon_energy(PI, &l) + 6.0).abs() < 1e-12);
        assert!((doublon_energy(0.0, &l) + 52f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn doublon_velocity_matches_finite_difference() {
        let l = lat(6.0);
        for i in 1..40 {
            let k = -PI + i as f64 * 0.15;
            let h = 1e-6;
            let fd = (doublon_energy(k + h, &l) - doublon_energy(k - h, &l)) / (2.0 * h);
            assert!((fd - doublon_velocity(k, &l)).abs() < 1e-8);
        }
    }

    #[test]
    fn doublon_shape_values() {
        let l = lat(6.0);
        let s = doublon_shape(PI / 2.0, &l).unwrap();
        assert!((s.decay_factor - 0.22387).abs() < 5e-5);
        assert!((s.localization_length - 0.6683).abs() < 5e-4);
        let s0 = doublon_shape(0.0, &l).unwrap();
        assert!((s0.decay_factor - (-6.0 + 52f64.sqrt()) / 4.0).abs() < 1e-14);
        let a2 = s.decay_factor * s.decay_factor;
        let closed = (1.0 - a2) / (1.0 + a2);
        assert!((s.normalization.powi(2) - closed).abs() < 1e-14);
        let total: f64 = (-60..=60).map(|r| s.amplitude(r).powi(2)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(matches!(
            doublon_shape(PI, &l),
            Err(Error::DegenerateMomentum { .. })
        ));
        let near = doublon_shape(PI - 1e-6, &l).unwrap();
        assert!(near.decay_factor < 1e-6);
    }

    #[test]
    fn resonance_solver() {
        let l = lat(6.0);
        let k = resonant_doublon_momentum(-6.633, PI / 2.0, &l).unwrap();
        assert!((k - PI / 2.0).abs() < 1e-3);
        // Closed-form inversion of the band as an independent check.
        let target: f64 = -6.633;
        let closed = 2.0 * ((target * target - 36.0) / 16.0).sqrt().acos();
        assert!((k - closed).abs() < 1e-12);
        assert!((resonant_doublon_momentum(-6.0, PI / 2.0, &l).unwrap() - PI).abs() < 1e-12);
        assert!(matches!(
            resonant_doublon_momentum(-20.0, PI / 2.0, &l),
            Err(Error::OffResonant { .. })
        ));
    }

    #[test]
    fn band_ordering() {
        let l = lat(6.0);
        for i in 0..=64 {
            let k = -PI + 2.0 * PI * i as f64 / 64.0;
            let (bottom, top) = doublon_band_edges(&l);
            let e = doublon_energy(k, &l);
            assert!(e <= top + 1e-12 && e >= bottom - 1e-12);
            assert!(e <= -6.0 + 1e-12);
            assert!(single_photon_energy(k, &l) >= -2.0 - 1e-12);
        }
    }

    #[test]
    fn monotone_cubic_properties() {
        let x = vec![0.0, 0.5, 1.0, 2.0, 3.0];
        let y = vec![0.0, 0.1, 0.9, 1.0, 3.0];
        let m = MonotoneCubic::new(x.clone(), y.clone(), None).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(m.eval(*xi), *yi);
            assert_eq!(m.invert(*yi), Some(*xi));
        }
        let mut prev = -1.0;
        for i in 0..=300 {
            let v = m.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        let q = m.invert(0.5).unwrap();
        assert!((m.eval(q) - 0.5).abs() < 1e-12);
        let h = 1e-6;
        let fd = (m.eval(1.3 + h) - m.eval(1.3 - h)) / (2.0 * h);
        assert!((fd - m.derivative(1.3)).abs() < 1e-6);
    }

    #[test]
    fn triplon_strong_coupling_limit() {
        let l = LatticeSpec::new(64, 1.0, 50.0).unwrap();
        for k in [0.0, PI / 2.0, PI] {
            let e = triplon_energy(k, &l, 6).unwrap();
            // Second-order perturbation theory: -3U - 3J^2/U.
            let pert = -150.0 - 3.0 / 50.0;
            assert!((e - pert).abs() < 10.0 / 2500.0, "{k} {e}");
        }
    }

    #[test]
    fn triplon_band_u6() {
        let l = lat(6.0);
        let grid = momentum_grid::<f64>(16);
        let band = triplon_band(&l, &grid, 12).unwrap();
        let t = band.triplon_table.as_ref().unwrap();
        let n = t.momenta.len();
        for i in 0..n {
            assert!((t.energies[i] - t.energies[n - 1 - i]).abs() < 1e-10);
            assert!(t.energies[i] < -12.0);
        }
        assert!((t.energy(0.0) + 18.5857).abs() < 1e-3);
        let kr = resonant_doublon_momentum(-6.633, PI / 2.0, &l).unwrap();
        let k3 = resonant_triplon_momentum(-11.869, kr, &band).unwrap();
        assert!((t.energy(k3) - (-11.869 + doublon_energy(kr, &l))).abs() < 1e-9);
        let v1 = single_photon_velocity(PI / 2.0, &l);
        let v2 = doublon_velocity(kr, &l);
        let v3 = t.velocity(k3);
        assert!(v1 > v2 && v2 > v3 && v3 > 0.0);
        assert!(matches!(
            resonant_triplon_momentum(-30.0, kr, &band),
            Err(Error::OffResonant { .. })
        ));
        let node = t.momenta[n - 3];
        let target_detuning = t.energies[n - 3] - doublon_energy(kr, &l);
        let got = resonant_triplon_momentum(target_detuning, kr, &band).unwrap();
        assert!((got - node).abs() < 1e-12);
    }
}
