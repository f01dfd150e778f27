use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::{doublon_shape, DoublonShape};
use crate::error::{Error, Result};
use crate::hilbert::basis::{Configuration, SectorBasis};
use crate::hilbert::StateVector;
use crate::lattice::{Boundary, EmitterSpec, LatticeSpec};
use crate::scalar::{cis, czero, Real};
use crate::wavepacket::{fft_momenta, to_momentum_space};

/// States per reduction block; partial sums are combined in block order so
/// the result does not depend on the thread count.
const REDUCE_CHUNK: usize = 8192;

/// How single photons are assigned to the transmitted/reflected channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PhotonSplit {
    /// By position relative to the emitter region.
    #[default]
    Position,
    /// By the sign of the momentum (right movers are transmitted).
    Momentum,
}

/// Region and cutoff conventions for splitting the final state into
/// channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry<T> {
    pub left_divider: T,
    pub right_divider: T,
    /// Sites beyond each divider still counted as the emitter region.
    pub margin: T,
    pub photon_split: PhotonSplit,
    pub doublon_cutoff: usize,
    pub triplon_cutoff: usize,
    /// Largest single-photon weight tolerated inside the emitter region.
    pub overlap_threshold: T,
}

impl<T: Real> ChannelGeometry<T> {
    pub fn for_emitter(emitter: &EmitterSpec<T>, margin: T) -> Self {
        Self {
            left_divider: T::from_usize_lossy(emitter.leftmost_site()),
            right_divider: T::from_usize_lossy(emitter.rightmost_site()),
            margin,
            photon_split: PhotonSplit::Position,
            doublon_cutoff: 2,
            triplon_cutoff: 2,
            overlap_threshold: T::lit(1e-2),
        }
    }

    pub fn with_split(mut self, split: PhotonSplit) -> Self {
        self.photon_split = split;
        self
    }

    fn center(&self) -> T {
        (self.left_divider + self.right_divider) * T::lit(0.5)
    }

    /// -1 left of the region, 0 inside, +1 right of it.
    fn side(&self, lattice: &LatticeSpec<T>, x: T) -> i8 {
        let c = self.center();
        let d = wrapped_offset(lattice, x - c);
        let half = (self.right_divider - self.left_divider) * T::lit(0.5) + self.margin;
        if d > half {
            1
        } else if d < -half {
            -1
        } else {
            0
        }
    }
}

fn wrapped_offset<T: Real>(lattice: &LatticeSpec<T>, d: T) -> T {
    match lattice.boundary {
        Boundary::Open => d,
        Boundary::Ring => {
            let n = T::from_usize_lossy(lattice.n_sites);
            let mut d = d % n;
            if d > n * T::lit(0.5) {
                d -= n;
            } else if d <= -n * T::lit(0.5) {
                d += n;
            }
            d
        }
    }
}

/// Photon positions unwrapped onto the shortest arc (ring) so that centres
/// of mass and relative distances are meaningful.
pub fn unwrapped_positions<T: Real>(lattice: &LatticeSpec<T>, cfg: &Configuration) -> Vec<i64> {
    let p: Vec<i64> = cfg.photons().iter().map(|&s| s as i64).collect();
    if lattice.boundary == Boundary::Open || p.len() < 2 {
        return p;
    }
    let n = lattice.n_sites as i64;
    // Start after the largest cyclic gap.
    let m = p.len();
    let mut best = (n - p[m - 1] + p[0], 0usize);
    for i in 1..m {
        let gap = p[i] - p[i - 1];
        if gap > best.0 {
            best = (gap, i);
        }
    }
    let start = best.1;
    (0..m)
        .map(|k| {
            let idx = (start + k) % m;
            if idx < start {
                p[idx] + n
            } else {
                p[idx]
            }
        })
        .collect()
}

/// Centre of mass (wrapped into `[0, N)` on a ring) and spread.
pub fn center_and_spread<T: Real>(lattice: &LatticeSpec<T>, cfg: &Configuration) -> (T, usize) {
    let u = unwrapped_positions(lattice, cfg);
    if u.is_empty() {
        return (T::zero(), 0);
    }
    let sum: i64 = u.iter().sum();
    let mut c = T::from_i64(sum).unwrap() / T::from_usize_lossy(u.len());
    if lattice.boundary == Boundary::Ring {
        let n = T::from_usize_lossy(lattice.n_sites);
        if c >= n {
            c -= n;
        }
    }
    (c, (u[u.len() - 1] - u[0]) as usize)
}

/// Channel-resolved populations of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationReport<T> {
    pub time: T,
    /// One photon, all emitters excited.
    pub p_single: T,
    pub p_two: T,
    pub p_doublon: T,
    pub p_unbound: T,
    pub p_three: T,
    pub p_triplon: T,
    pub p_zero: T,
    pub emitter_excited: Vec<T>,
    pub transmitted: T,
    pub reflected: T,
    pub single_inside: T,
    pub doublon_forward: T,
    pub doublon_backward: T,
    /// Bound pairs whose centre sits in the emitter region.
    pub doublon_baseline: T,
    pub triplon_forward: T,
    pub triplon_backward: T,
    pub triplon_baseline: T,
    pub total: T,
}

impl<T: Real> PopulationReport<T> {
    pub fn csv_header(n_emitters: usize) -> String {
        let mut h = String::from("time,P_I,P_II,P_D,t2,r2,u_plus2,u_minus2,P_III,P_T");
        for i in 0..n_emitters {
            h.push_str(&format!(",emitter{}", i + 1));
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut s = format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.time.as_f64(),
            self.p_single.as_f64(),
            self.p_two.as_f64(),
            self.p_doublon.as_f64(),
            self.transmitted.as_f64(),
            self.reflected.as_f64(),
            self.doublon_forward.as_f64(),
            self.doublon_backward.as_f64(),
            self.p_three.as_f64(),
            self.p_triplon.as_f64(),
        );
        for e in &self.emitter_excited {
            s.push_str(&format!(",{:.12e}", e.as_f64()));
        }
        s
    }

    /// Sum of all photon-number sectors (should be one).
    pub fn partition_sum(&self) -> T {
        self.p_zero + self.p_single + self.p_two + self.p_three
    }
}

pub fn write_population_csv<T: Real, W: Write + ?Sized>(
    out: &mut W,
    reports: &[PopulationReport<T>],
    n_emitters: usize,
) -> Result<()> {
    writeln!(out, "{}", PopulationReport::<T>::csv_header(n_emitters))?;
    for r in reports {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

#[derive(Clone)]
struct Accum<T> {
    by_count: [T; 4],
    doublon: [T; 3],
    triplon: [T; 3],
    single_side: [T; 3],
    emitters: Vec<T>,
}

impl<T: Real> Accum<T> {
    fn new(m: usize) -> Self {
        Self {
            by_count: [T::zero(); 4],
            doublon: [T::zero(); 3],
            triplon: [T::zero(); 3],
            single_side: [T::zero(); 3],
            emitters: vec![T::zero(); m],
        }
    }

    fn merge(mut self, o: Self) -> Self {
        for i in 0..4 {
            self.by_count[i] += o.by_count[i];
        }
        for i in 0..3 {
            self.doublon[i] += o.doublon[i];
            self.triplon[i] += o.triplon[i];
            self.single_side[i] += o.single_side[i];
        }
        for (a, b) in self.emitters.iter_mut().zip(&o.emitters) {
            *a += *b;
        }
        self
    }
}

/// Populations without the region-overlap check (time series).
pub fn populations_unchecked<T: Real>(
    state: &StateVector<T>,
    basis: &SectorBasis<T>,
    geometry: &ChannelGeometry<T>,
) -> PopulationReport<T> {
    let lattice = &basis.lattice;
    let m = basis.emitters.len();
    let side_index = |s: i8| (s + 1) as usize;
    let acc = state
        .amplitudes
        .par_chunks(REDUCE_CHUNK)
        .enumerate()
        .map(|(chunk, amps)| {
            let mut acc = Accum::new(m);
            let base = chunk * REDUCE_CHUNK;
            for (k, a) in amps.iter().enumerate() {
                let w = a.norm_sqr();
                if w == T::zero() {
                    continue;
                }
                let cfg = basis.state(base + k);
                let n = cfg.photon_count();
                acc.by_count[n] += w;
                for (i, e) in acc.emitters.iter_mut().enumerate() {
                    if cfg.excited(i) {
                        *e += w;
                    }
                }
                match n {
                    1 => {
                        let x = T::from_u32(cfg.photons()[0]).unwrap();
                        acc.single_side[side_index(geometry.side(lattice, x))] += w;
                    }
                    2 | 3 => {
                        let (c, spread) = center_and_spread(lattice, cfg);
                        let cutoff = if n == 2 {
                            geometry.doublon_cutoff
                        } else {
                            geometry.triplon_cutoff
                        };
                        if spread <= cutoff {
                            let s = side_index(geometry.side(lattice, c));
                            if n == 2 {
                                acc.doublon[s] += w;
                            } else {
                                acc.triplon[s] += w;
                            }
                        }
                    }
                    _ => {}
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Accum::new(m), Accum::merge);

    let (transmitted, reflected) = match geometry.photon_split {
        PhotonSplit::Position => (acc.single_side[2], acc.single_side[0]),
        PhotonSplit::Momentum => momentum_split(state, basis),
    };
    let p_doublon = acc.doublon.iter().cloned().sum::<T>();
    let p_triplon = acc.triplon.iter().cloned().sum::<T>();
    PopulationReport {
        time: state.time,
        p_zero: acc.by_count[0],
        p_single: acc.by_count[1],
        p_two: acc.by_count[2],
        p_three: acc.by_count[3],
        p_doublon,
        p_unbound: acc.by_count[2] - p_doublon,
        p_triplon,
        emitter_excited: acc.emitters,
        transmitted,
        reflected,
        single_inside: acc.single_side[1],
        doublon_forward: acc.doublon[2],
        doublon_backward: acc.doublon[0],
        doublon_baseline: acc.doublon[1],
        triplon_forward: acc.triplon[2],
        triplon_backward: acc.triplon[0],
        triplon_baseline: acc.triplon[1],
        total: acc.by_count.iter().cloned().sum(),
    }
}

/// Final-state populations. Fails with `RegionOverlap` when single-photon
/// weight is still inside the emitter region (position split only).
pub fn populations<T: Real>(
    state: &StateVector<T>,
    basis: &SectorBasis<T>,
    geometry: &ChannelGeometry<T>,
) -> Result<PopulationReport<T>> {
    let r = populations_unchecked(state, basis, geometry);
    if geometry.photon_split == PhotonSplit::Position && r.single_inside > geometry.overlap_threshold
    {
        return Err(Error::RegionOverlap {
            weight: r.single_inside.as_f64(),
        });
    }
    Ok(r)
}

/// Right- and left-moving single-photon weight from the Fourier transform
/// of each one-photon block.
fn momentum_split<T: Real>(state: &StateVector<T>, basis: &SectorBasis<T>) -> (T, T) {
    let n = basis.lattice.n_sites;
    let ks = fft_momenta::<T>(n);
    let (mut right, mut left) = (T::zero(), T::zero());
    for sec in basis.sectors().iter().filter(|s| s.photons == 1) {
        let amps = &state.amplitudes[sec.offset..sec.offset + sec.len];
        let phi = to_momentum_space(amps);
        for (p, &k) in phi.iter().zip(&ks) {
            let w = p.norm_sqr();
            if k == T::zero() || k.abs() == T::PI() {
                right += w * T::lit(0.5);
                left += w * T::lit(0.5);
            } else if k > T::zero() {
                right += w;
            } else {
                left += w;
            }
        }
    }
    (right, left)
}

/// `<n_x>` for every site.
pub fn photon_number_map<T: Real>(state: &StateVector<T>, basis: &SectorBasis<T>) -> Vec<T> {
    let n = basis.lattice.n_sites;
    state
        .amplitudes
        .par_chunks(REDUCE_CHUNK)
        .enumerate()
        .map(|(chunk, amps)| {
            let mut local = vec![T::zero(); n];
            let base = chunk * REDUCE_CHUNK;
            for (k, a) in amps.iter().enumerate() {
                let w = a.norm_sqr();
                if w == T::zero() {
                    continue;
                }
                for &s in basis.state(base + k).photons() {
                    local[s as usize] += w;
                }
            }
            local
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![T::zero(); n], |mut acc, v| {
            acc.iter_mut().zip(&v).for_each(|(a, b)| *a += *b);
            acc
        })
}

/// Density of the photon in one-photon configurations, per site.
pub fn single_photon_density<T: Real>(state: &StateVector<T>, basis: &SectorBasis<T>) -> Vec<T> {
    let mut out = vec![T::zero(); basis.lattice.n_sites];
    for sec in basis.sectors().iter().filter(|s| s.photons == 1) {
        for i in sec.offset..sec.offset + sec.len {
            out[basis.state(i).photons()[0] as usize] += state.amplitudes[i].norm_sqr();
        }
    }
    out
}

/// Weight of `photons`-photon configurations with spread `<= cutoff`,
/// binned by centre of mass on a grid of spacing `1/photons` (index
/// `round(photons * x_c)`).
pub fn bound_cluster_density<T: Real>(
    state: &StateVector<T>,
    basis: &SectorBasis<T>,
    photons: usize,
    cutoff: usize,
) -> Vec<T> {
    let lattice = &basis.lattice;
    let bins = photons * lattice.n_sites;
    let mut out = vec![T::zero(); bins];
    for sec in basis.sectors().iter().filter(|s| s.photons == photons) {
        for i in sec.offset..sec.offset + sec.len {
            let cfg = basis.state(i);
            let (c, spread) = center_and_spread(lattice, cfg);
            if spread <= cutoff {
                let b = ((c * T::from_usize_lossy(photons)).round().as_f64() as i64)
                    .rem_euclid(bins as i64) as usize;
                out[b] += state.amplitudes[i].norm_sqr();
            }
        }
    }
    out
}

/// Two-photon weight versus relative distance `r = 0..=r_max`.
pub fn relative_profile<T: Real>(
    state: &StateVector<T>,
    basis: &SectorBasis<T>,
    r_max: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); r_max + 1];
    for sec in basis.sectors().iter().filter(|s| s.photons == 2) {
        for i in sec.offset..sec.offset + sec.len {
            let (_, r) = center_and_spread(&basis.lattice, basis.state(i));
            if r <= r_max {
                out[r] += state.amplitudes[i].norm_sqr();
            }
        }
    }
    out
}

fn shape_or_limit<T: Real>(k: T, lattice: &LatticeSpec<T>) -> Result<DoublonShape<T>> {
    match doublon_shape(k, lattice) {
        Err(Error::DegenerateMomentum { .. }) => Ok(DoublonShape {
            momentum: k,
            decay_factor: T::zero(),
            localization_length: T::zero(),
            normalization: T::one(),
        }),
        other => other,
    }
}

/// Overlaps `<K|Psi>` with the analytic doublon states
/// `Psi_K(n1, n2) = e^{i K x_c} u_K(r) / sqrt(N)` within the two-photon
/// block of emitter pattern `pattern`.
pub fn project_onto_doublon_modes<T: Real>(
    state: &StateVector<T>,
    basis: &SectorBasis<T>,
    momenta: &[T],
    pattern: u8,
) -> Result<Vec<Complex<T>>> {
    let sec = basis
        .sectors()
        .iter()
        .find(|s| s.pattern == pattern && s.photons == 2)
        .ok_or_else(|| Error::InvalidParameter("no two-photon block for pattern".into()))?;
    let lattice = &basis.lattice;
    let inv_sqrt_n = T::one() / T::from_usize_lossy(lattice.n_sites).sqrt();
    let sqrt2 = T::lit(2.0).sqrt();
    // Precompute (centre, r, amplitude) once; the alpha^r factor makes
    // distant pairs irrelevant, keep r up to where it underflows.
    let entries: Vec<(T, usize, Complex<T>)> = (sec.offset..sec.offset + sec.len)
        .filter_map(|i| {
            let a = state.amplitudes[i];
            if a == czero() {
                return None;
            }
            let (c, r) = center_and_spread(lattice, basis.state(i));
            (r <= 64).then_some((c, r, a))
        })
        .collect();
    momenta
        .par_iter()
        .map(|&k| {
            let shape = shape_or_limit(k, lattice)?;
            let mut s = czero();
            for &(c, r, a) in &entries {
                let u = shape.amplitude(r as i64);
                if u == T::zero() {
                    continue;
                }
                let mult = if r == 0 { T::one() } else { sqrt2 };
                s += cis(-k * c) * (u * inv_sqrt_n * mult) * a;
            }
            Ok(s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::basis::TruncationRule;
    use crate::hilbert::initial_state;
    use crate::scalar::cone;
    use std::f64::consts::PI;

    #[test]
    fn unwrapping_on_ring() {
        let lat = LatticeSpec::<f64>::ring(20, 1.0, 6.0).unwrap();
        let cfg = Configuration::new(0, &[0, 1, 19]);
        assert_eq!(unwrapped_positions(&lat, &cfg), vec![19, 20, 21]);
        let (c, s) = center_and_spread(&lat, &cfg);
        assert_eq!(s, 2);
        assert!((c - 0.0).abs() < 1e-12);
    }

    #[test]
    fn single_photon_indicator_map() {
        let lat = LatticeSpec::<f64>::new(10, 1.0, 6.0).unwrap();
        let b = SectorBasis::enumerate(&lat, &[], 1, TruncationRule::default()).unwrap();
        let s = StateVector::from_fn(&b, |c| {
            if c.photons() == [3] {
                cone()
            } else {
                czero()
            }
        });
        let map = photon_number_map(&s, &b);
        for (i, v) in map.iter().enumerate() {
            assert_eq!(*v, if i == 3 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn doublon_plane_wave_projection_and_map() {
        let n = 32;
        let lat = LatticeSpec::<f64>::ring(n, 1.0, 6.0).unwrap();
        let b = SectorBasis::enumerate(&lat, &[], 2, TruncationRule::default()).unwrap();
        let k = 2.0 * PI * 5.0 / n as f64;
        let shape = doublon_shape(k, &lat).unwrap();
        let mut s = StateVector::from_fn(&b, |c| {
            let (xc, r) = center_and_spread(&lat, c);
            let mult = if r == 0 { 1.0 } else { 2f64.sqrt() };
            cis(k * xc) * shape.amplitude(r as i64) * mult / (n as f64).sqrt()
        });
        assert!((s.norm() - 1.0).abs() < 1e-10);
        s.normalize().unwrap();
        let map = photon_number_map(&s, &b);
        assert!((map.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        for v in &map {
            assert!((v - 2.0 / n as f64).abs() < 1e-10);
        }
        let ks: Vec<f64> = (0..n).map(|m| 2.0 * PI * m as f64 / n as f64 - PI).collect();
        let proj = project_onto_doublon_modes(&s, &b, &ks, 0).unwrap();
        for (kk, p) in ks.iter().zip(&proj) {
            let expect = if (kk - k).abs() < 1e-9 { 1.0 } else { 0.0 };
            assert!((p.norm() - expect).abs() < 1e-9, "{kk} {}", p.norm());
        }
    }

    #[test]
    fn separated_product_state_has_small_doublon_weight() {
        let n = 40;
        let lat = LatticeSpec::<f64>::ring(n, 1.0, 6.0).unwrap();
        let b = SectorBasis::enumerate(&lat, &[], 2, TruncationRule::default()).unwrap();
        let s = StateVector::from_fn(&b, |c| {
            if c.photons() == [5, 25] {
                cone()
            } else {
                czero()
            }
        });
        let ks: Vec<f64> = (0..n).map(|m| 2.0 * PI * m as f64 / n as f64 - PI).collect();
        let w: f64 = project_onto_doublon_modes(&s, &b, &ks, 0)
            .unwrap()
            .iter()
            .map(|z| z.norm_sqr())
            .sum();
        assert!(w < 0.01);
    }

    #[test]
    fn initial_state_has_unit_single_population() {
        let lat = LatticeSpec::<f64>::ring(40, 1.0, 6.0).unwrap();
        let e = EmitterSpec::small_atom(20, 0.2, -6.633);
        let b = SectorBasis::enumerate(&lat, &[e.clone()], 2, TruncationRule::default()).unwrap();
        let packet: Vec<Complex<f64>> = (0..40)
            .map(|i| cis(PI / 2.0 * i as f64) / (40f64).sqrt())
            .collect();
        let s = initial_state(&b, &packet).unwrap();
        let geo = ChannelGeometry::for_emitter(&e, 3.0).with_split(PhotonSplit::Momentum);
        let r = populations(&s, &b, &geo).unwrap();
        assert!((r.p_single - 1.0).abs() < 1e-14);
        assert_eq!(r.p_two, 0.0);
        assert!((r.transmitted - 1.0).abs() < 1e-12);
        assert!((r.emitter_excited[0] - 1.0).abs() < 1e-14);
        assert!((r.partition_sum() - 1.0).abs() < 1e-14);
        let geo_pos = ChannelGeometry::for_emitter(&e, 3.0);
        assert!(matches!(
            populations(&s, &b, &geo_pos),
            Err(Error::RegionOverlap { .. })
        ));
    }
}
