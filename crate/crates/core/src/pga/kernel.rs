use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::band::{
    doublon_shape, doublon_velocity, resonant_doublon_momentum, single_photon_velocity,
    DoublonShape,
};
use crate::error::{Error, Result};
use crate::lattice::{EmitterSpec, LatticeSpec};
use crate::scalar::{cis, czero, Real};

/// Smallest group velocity (in units of J) the solvers accept.
pub const MIN_VELOCITY: f64 = 1e-3;

/// Effective pseudo-giant-atom couplings of an emitter to the resonant
/// doublon pair `+-K_r`.
///
/// `forward[i]` is `G_+(sites[i])` and `backward[i]` is `G_-(sites[i])` with
/// `G_+-(n) = sum_tau g_tau sqrt2 u0 alpha^{|n - n_tau|} e^{i phi_tau} e^{-+i K_r n_tau / 2}`,
/// restricted to `|n - n_tau| <= cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgaKernel<T> {
    pub sites: Vec<i64>,
    pub forward: Vec<Complex<T>>,
    pub backward: Vec<Complex<T>>,
    pub k0: T,
    pub resonant_momentum: T,
    pub photon_velocity: T,
    pub doublon_velocity: T,
    pub shape: DoublonShape<T>,
    pub cutoff: usize,
}

impl<T: Real> PgaKernel<T> {
    pub fn pga_size(&self) -> usize {
        self.sites.len()
    }

    /// Fraction of a single contact's coupling weight dropped by the
    /// cutoff: `2 alpha^{2(c+1)} / (1 + alpha^2)`.
    pub fn truncated_tail_weight(&self) -> T {
        let a2 = self.shape.decay_factor * self.shape.decay_factor;
        T::lit(2.0) * a2.powi(self.cutoff as i32 + 1) / (T::one() + a2)
    }
}

pub fn build_kernel<T: Real>(
    emitter: &EmitterSpec<T>,
    k0: T,
    lattice: &LatticeSpec<T>,
    cutoff: usize,
) -> Result<PgaKernel<T>> {
    if emitter.couplings.is_empty() {
        return Err(Error::InvalidParameter(
            "emitter needs at least one coupling point".into(),
        ));
    }
    let kr = resonant_doublon_momentum(emitter.detuning, k0, lattice)?;
    let vk = single_photon_velocity(k0, lattice);
    let vd = doublon_velocity(kr, lattice);
    let min_v = T::lit(MIN_VELOCITY) * lattice.hopping;
    if !(vk.abs() >= min_v) || !(vd.abs() >= min_v) {
        return Err(Error::SingularSystem {
            condition: f64::INFINITY,
        });
    }
    let shape = doublon_shape(kr, lattice)?;
    let lo = emitter.leftmost_site() as i64 - cutoff as i64;
    let hi = emitter.rightmost_site() as i64 + cutoff as i64;
    let sites: Vec<i64> = (lo..=hi).collect();
    let sqrt2 = T::lit(2.0).sqrt();
    let half = T::lit(0.5);
    let mut forward = vec![czero(); sites.len()];
    let mut backward = vec![czero(); sites.len()];
    for c in &emitter.couplings {
        let nt = c.site as i64;
        let base = cis(c.phase) * (c.strength * sqrt2);
        let ph_f = cis(-kr * half * T::from_i64(nt).unwrap());
        for (i, &n) in sites.iter().enumerate() {
            let d = n - nt;
            if d.unsigned_abs() as usize > cutoff {
                continue;
            }
            let amp = base * shape.amplitude(d);
            forward[i] += amp * ph_f;
            backward[i] += amp * ph_f.conj();
        }
    }
    Ok(PgaKernel {
        sites,
        forward,
        backward,
        k0,
        resonant_momentum: kr,
        photon_velocity: vk,
        doublon_velocity: vd,
        shape,
        cutoff,
    })
}
