//! Exact dynamics of one scattering event: basis, Hamiltonian, incident
//! packet, evolution and per-frame observables.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::band::single_photon_velocity;
use crate::error::{Error, Result};
use crate::hilbert::observables::{
    bound_cluster_density, populations_unchecked, single_photon_density,
};
use crate::hilbert::{
    assemble_hamiltonian, initial_state, photon_number_map, populations, ChannelGeometry,
    PopulationReport, SectorBasis, StateVector, TruncationRule,
};
use crate::lattice::{EmitterSpec, LatticeSpec};
use crate::propagator::{evolve_with, EvolutionConfig, Method};
use crate::wavepacket::{build_wavepacket, check_clearance, WavepacketSpec};

use super::config::{EvolutionSection, ObservableSection};

/// Photon number `<N>(n, t)` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeMap {
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

/// Per-frame densities of the photon-number components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFrame {
    pub time: f64,
    /// One-photon density per site.
    pub single: Vec<f64>,
    /// Bound-pair density on the half-site centre grid (index `2 x_c`).
    pub doublon: Vec<f64>,
    /// Bound-triple density on the third-site grid (index `3 x_c`).
    pub triplon: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NumericRun {
    pub lattice: LatticeSpec<f64>,
    pub emitters: Vec<EmitterSpec<f64>>,
    pub packet: WavepacketSpec<f64>,
    pub evolution: EvolutionSection,
    pub observables: ObservableSection,
    pub truncation: TruncationRule,
    /// Emitter whose region defines the transmitted/reflected split.
    pub reference_emitter: usize,
    pub record_map: bool,
    pub record_components: bool,
}

impl NumericRun {
    pub fn new(
        lattice: LatticeSpec<f64>,
        emitters: Vec<EmitterSpec<f64>>,
        packet: WavepacketSpec<f64>,
        evolution: EvolutionSection,
        observables: ObservableSection,
    ) -> Self {
        Self {
            lattice,
            emitters,
            packet,
            evolution,
            observables,
            truncation: TruncationRule::default(),
            reference_emitter: 0,
            record_map: false,
            record_components: false,
        }
    }

    /// Evolution horizon: explicit, else one traversal of the lattice at
    /// the carrier group velocity.
    pub fn total_time(&self) -> f64 {
        self.evolution.total_time.unwrap_or_else(|| {
            let v = single_photon_velocity(self.packet.center_momentum, &self.lattice).abs();
            self.lattice.n_sites as f64 / v
        })
    }

    pub fn geometry(&self) -> ChannelGeometry<f64> {
        let e = &self.emitters[self.reference_emitter];
        let mut g = ChannelGeometry::for_emitter(e, self.observables.margin)
            .with_split(self.observables.photon_split);
        g.doublon_cutoff = self.observables.doublon_cutoff;
        g.triplon_cutoff = self.observables.triplon_cutoff;
        g
    }

    fn contact_sites(&self) -> Vec<usize> {
        self.emitters
            .iter()
            .flat_map(|e| e.couplings.iter().map(|c| c.site))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct NumericOutcome {
    pub series: Vec<PopulationReport<f64>>,
    pub map: Option<SpaceTimeMap>,
    pub components: Vec<ComponentFrame>,
    pub final_report: PopulationReport<f64>,
    pub final_state: StateVector<f64>,
    pub basis: SectorBasis<f64>,
    pub seconds: f64,
}

impl NumericOutcome {
    pub fn dimension(&self) -> usize {
        self.basis.dim()
    }

    /// Largest deviation of the norm from one over the recorded frames.
    pub fn max_norm_drift(&self) -> f64 {
        self.series
            .iter()
            .map(|r| (r.total - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn frame_times(total: f64, frames: usize) -> Vec<f64> {
    let frames = frames.max(1);
    (0..=frames)
        .map(|i| total * i as f64 / frames as f64)
        .collect()
}

/// Runs the exact evolution. Every emitter starts excited and the photon
/// starts in the configured packet.
pub fn run_numeric(run: &NumericRun) -> Result<NumericOutcome> {
    let start = Instant::now();
    if run.emitters.is_empty() {
        return Err(Error::InvalidParameter("numeric run needs an emitter".into()));
    }
    check_clearance(
        &run.packet,
        &run.lattice,
        &run.contact_sites(),
        run.observables.clearance_factor,
    )?;
    let packet = build_wavepacket(&run.packet, &run.lattice)?;
    let total_exc = run.emitters.len() + 1;
    let basis = SectorBasis::enumerate(&run.lattice, &run.emitters, total_exc, run.truncation)?;
    log::info!(
        "basis: {} states over {} sectors",
        basis.dim(),
        basis.sectors().len()
    );
    let h = assemble_hamiltonian(&basis);
    let psi0 = initial_state(&basis, &packet)?;
    let total = run.total_time();
    let times = frame_times(total, run.evolution.frames);
    let cfg = EvolutionConfig {
        time_step: run.evolution.time_step,
        total_time: total,
        method: run.evolution.method,
        tolerance: run.evolution.tolerance,
        spectral_bounds: None,
        snapshot_times: times.clone(),
        krylov_dim: run.evolution.krylov_dim,
    };
    let geometry = run.geometry();
    let mut series = Vec::with_capacity(times.len());
    let mut rows = Vec::new();
    let mut components = Vec::new();
    let final_state = evolve_with(&psi0, &h, &cfg, |s| {
        let rep = populations_unchecked(s, &basis, &geometry);
        log::debug!(
            "t = {:.1}: P_I {:.4} P_D {:.4} P_T {:.4}",
            s.time,
            rep.p_single,
            rep.p_doublon,
            rep.p_triplon
        );
        series.push(rep);
        if run.record_map {
            rows.push(photon_number_map(s, &basis));
        }
        if run.record_components {
            components.push(ComponentFrame {
                time: s.time,
                single: single_photon_density(s, &basis),
                doublon: bound_cluster_density(s, &basis, 2, geometry.doublon_cutoff),
                triplon: if total_exc >= 3 {
                    bound_cluster_density(s, &basis, 3, geometry.triplon_cutoff)
                } else {
                    Vec::new()
                },
            });
        }
        Ok(())
    })?;
    let final_report = populations(&final_state, &basis, &geometry)?;
    let map = run.record_map.then(|| SpaceTimeMap {
        times: series.iter().map(|r| r.time).collect(),
        rows,
    });
    let seconds = start.elapsed().as_secs_f64();
    log::info!("evolution to Jt = {total:.1} finished in {seconds:.1} s");
    Ok(NumericOutcome {
        series,
        map,
        components,
        final_report,
        final_state,
        basis,
        seconds,
    })
}

/// Default method name for reports.
pub fn method_name(m: Method) -> &'static str {
    match m {
        Method::Chebyshev => "chebyshev",
        Method::Krylov => "krylov",
    }
}
