//! Few-excitation sectors of the waveguide plus emitters: basis
//! enumeration, sparse Hamiltonian, initial states and observables.

pub mod basis;
pub mod observables;
pub mod operator;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

pub use basis::{photon_spread, Configuration, SectorBasis, SectorInfo, TruncationRule};
pub use observables::{
    photon_number_map, populations, project_onto_doublon_modes, ChannelGeometry, PhotonSplit,
    PopulationReport,
};
pub use operator::{assemble_hamiltonian, SparseOperator};

use crate::error::{Error, Result};
use crate::scalar::{czero, norm_sqr, Real};

/// Amplitudes over a [`SectorBasis`] at time `time` (units of `1/J`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector<T> {
    pub amplitudes: Vec<Complex<T>>,
    pub time: T,
}

impl<T: Real> StateVector<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            amplitudes: vec![czero(); dim],
            time: T::zero(),
        }
    }

    pub fn from_fn<F>(basis: &SectorBasis<T>, mut f: F) -> Self
    where
        F: FnMut(&Configuration) -> Complex<T>,
    {
        Self {
            amplitudes: basis.states().iter().map(&mut f).collect(),
            time: T::zero(),
        }
    }

    pub fn norm(&self) -> T {
        norm_sqr(&self.amplitudes).sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > T::zero()) {
            return Err(Error::InvalidParameter("cannot normalize a zero state".into()));
        }
        self.amplitudes.iter_mut().for_each(|z| *z = *z / n);
        Ok(())
    }

    pub fn fidelity(&self, other: &Self) -> T {
        crate::scalar::inner(&self.amplitudes, &other.amplitudes).norm()
    }
}

/// Product of the single-photon packet `packet` (site amplitudes) and all
/// emitters excited.
pub fn initial_state<T: Real>(
    basis: &SectorBasis<T>,
    packet: &[Complex<T>],
) -> Result<StateVector<T>> {
    if packet.len() != basis.lattice.n_sites {
        return Err(Error::InvalidParameter(format!(
            "packet has {} sites, lattice {}",
            packet.len(),
            basis.lattice.n_sites
        )));
    }
    let pattern = basis.all_excited_pattern();
    if basis.total_excitations != basis.emitters.len() + 1 {
        return Err(Error::InvalidParameter(format!(
            "initial state needs total_excitations = {} (one photon, all emitters excited)",
            basis.emitters.len() + 1
        )));
    }
    let mut state = StateVector::zeros(basis.dim());
    for (site, amp) in packet.iter().enumerate() {
        let cfg = Configuration::new(pattern, &[site as u32]);
        let idx = basis
            .index_of(&cfg)
            .expect("single-photon all-excited configuration present");
        state.amplitudes[idx] = *amp;
    }
    state.normalize()?;
    Ok(state)
}

/// Total photon number plus excited emitters, `<X>`.
pub fn excitation_expectation<T: Real>(state: &StateVector<T>, basis: &SectorBasis<T>) -> T {
    state
        .amplitudes
        .iter()
        .zip(basis.states())
        .map(|(a, c)| a.norm_sqr() * T::from_usize_lossy(c.photon_count() + c.excited_count()))
        .sum()
}
