//! Incident single-photon wave packets.

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Boundary, LatticeSpec};
use crate::scalar::{cis, czero, norm_sqr, wrap_angle, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavepacketKind {
    Gaussian,
    Lorentzian,
    PlaneWave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec<T> {
    pub kind: WavepacketKind,
    pub center_momentum: T,
    /// `L_G` for Gaussian packets, `L_L` for Lorentzian ones, ignored for
    /// plane waves.
    pub width: T,
    pub center_position: T,
}

impl<T: Real> WavepacketSpec<T> {
    pub fn gaussian(k0: T, width: T, x0: T) -> Self {
        Self {
            kind: WavepacketKind::Gaussian,
            center_momentum: k0,
            width,
            center_position: x0,
        }
    }

    pub fn lorentzian(k0: T, width: T, x0: T) -> Self {
        Self {
            kind: WavepacketKind::Lorentzian,
            center_momentum: k0,
            width,
            center_position: x0,
        }
    }

    pub fn plane_wave(k0: T) -> Self {
        Self {
            kind: WavepacketKind::PlaneWave,
            center_momentum: k0,
            width: T::zero(),
            center_position: T::zero(),
        }
    }

    /// Standard deviation of the intensity profile in sites. Both envelopes
    /// have intensity std `1/(2 width)`; plane waves are unbounded.
    pub fn spatial_width(&self) -> T {
        match self.kind {
            WavepacketKind::PlaneWave => T::infinity(),
            _ => T::one() / (T::lit(2.0) * self.width),
        }
    }

    /// True outside the narrowband regime (`width > 0.1 * 4J`).
    pub fn is_broadband(&self, lattice: &LatticeSpec<T>) -> bool {
        self.kind != WavepacketKind::PlaneWave && self.width > T::lit(0.4) * lattice.hopping
    }

    fn validate(&self) -> Result<()> {
        if self.kind != WavepacketKind::PlaneWave && !(self.width > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "wave packet width {} must be positive",
                self.width
            )));
        }
        Ok(())
    }
}

/// Checks that the packet keeps `factor` spatial widths of clearance from
/// open edges and from every site in `emitter_sites`.
pub fn check_clearance<T: Real>(
    spec: &WavepacketSpec<T>,
    lattice: &LatticeSpec<T>,
    emitter_sites: &[usize],
    factor: T,
) -> Result<()> {
    if spec.kind == WavepacketKind::PlaneWave {
        if lattice.boundary == Boundary::Ring {
            return Ok(());
        }
        return Err(Error::PacketTooWide {
            required: f64::INFINITY,
            available: lattice.n_sites as f64,
        });
    }
    let w = spec.spatial_width();
    let required = factor * w;
    let x0 = spec.center_position;
    let n = T::from_usize_lossy(lattice.n_sites);
    // A Lorentzian lives on x <= x0 only, with its mean one width behind x0.
    let (left_extent, right_extent) = match spec.kind {
        WavepacketKind::Lorentzian => (required + w, T::zero()),
        _ => (required, required),
    };
    let mut available = T::infinity();
    match lattice.boundary {
        Boundary::Open => {
            available = available.min(x0 - (left_extent - required)).min(n - T::one() - x0);
            if x0 - left_extent < T::zero() || x0 + right_extent > n - T::one() {
                return Err(Error::PacketTooWide {
                    required: required.as_f64(),
                    available: available.as_f64(),
                });
            }
        }
        Boundary::Ring => {
            if left_extent + right_extent > n {
                return Err(Error::PacketTooWide {
                    required: required.as_f64(),
                    available: (n / T::lit(2.0)).as_f64(),
                });
            }
        }
    }
    for &s in emitter_sites {
        let d = match lattice.boundary {
            Boundary::Open => T::from_usize_lossy(s) - x0,
            Boundary::Ring => {
                let mut d = (T::from_usize_lossy(s) - x0) % n;
                if d > n / T::lit(2.0) {
                    d -= n;
                } else if d < -n / T::lit(2.0) {
                    d += n;
                }
                d
            }
        };
        let need = if d >= T::zero() { right_extent.max(required) } else { left_extent };
        if d.abs() < need {
            return Err(Error::PacketTooWide {
                required: need.as_f64(),
                available: d.abs().as_f64(),
            });
        }
    }
    Ok(())
}

/// Spatial widths kept free between the packet and an open edge by
/// [`build_wavepacket`]. Emitter clearance is checked separately with the
/// scenario's own factor.
pub const EDGE_CLEARANCE: f64 = 3.0;

/// Momentum-space Gaussian amplitude `(2 pi L^2)^{-1/4} exp(-(k-k0)^2/4L^2)`.
pub fn gaussian_momentum_amplitude<T: Real>(k: T, k0: T, width: T) -> T {
    let d = wrap_angle(k - k0);
    let pref = (T::lit(2.0) * T::PI() * width * width).powf(T::lit(-0.25));
    pref * (-(d * d) / (T::lit(4.0) * width * width)).exp()
}

/// Momentum grid `k_j = 2 pi j / N` in FFT order.
pub fn fft_momenta<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|j| wrap_angle(T::lit(2.0) * T::PI() * T::from_usize_lossy(j) / T::from_usize_lossy(n)))
        .collect()
}

/// Unit-norm site amplitudes of the incident packet. Gaussians are built on
/// the discrete momentum grid of the lattice and transformed with an FFT;
/// Lorentzians are built directly in real space.
pub fn build_wavepacket<T: Real>(
    spec: &WavepacketSpec<T>,
    lattice: &LatticeSpec<T>,
) -> Result<Vec<Complex<T>>> {
    spec.validate()?;
    let n = lattice.n_sites;
    if spec.kind != WavepacketKind::PlaneWave {
        check_clearance(spec, lattice, &[], T::lit(EDGE_CLEARANCE))?;
    }
    let mut psi: Vec<Complex<T>> = match spec.kind {
        WavepacketKind::PlaneWave => (0..n)
            .map(|s| cis(spec.center_momentum * T::from_usize_lossy(s)))
            .collect(),
        WavepacketKind::Gaussian => {
            let ks = fft_momenta::<T>(n);
            let mut buf: Vec<Complex<T>> = ks
                .iter()
                .map(|&k| {
                    cis(-k * spec.center_position)
                        * gaussian_momentum_amplitude(k, spec.center_momentum, spec.width)
                })
                .collect();
            FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
            buf
        }
        WavepacketKind::Lorentzian => (0..n)
            .map(|s| {
                let mut x = T::from_usize_lossy(s) - spec.center_position;
                if lattice.boundary == Boundary::Ring && x > T::zero() {
                    x -= T::from_usize_lossy(n);
                }
                if x > T::zero() {
                    czero()
                } else {
                    cis(spec.center_momentum * x)
                        * (T::lit(2.0) * spec.width).sqrt()
                        * (x * spec.width).exp()
                }
            })
            .collect(),
    };
    let norm = norm_sqr(&psi).sqrt();
    if !(norm > T::zero()) {
        return Err(Error::InvalidParameter("wave packet has zero norm".into()));
    }
    psi.iter_mut().for_each(|z| *z = *z / norm);
    Ok(psi)
}

/// Unitary DFT `phi(k_j) = N^{-1/2} sum_n psi(n) e^{-i k_j n}`.
pub fn to_momentum_space<T: Real>(psi: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = psi.len();
    let mut buf = psi.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let s = T::from_usize_lossy(n).sqrt();
    buf.iter_mut().for_each(|z| *z = *z / s);
    buf
}
