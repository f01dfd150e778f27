use std::f64::consts::PI;

use num_complex::Complex64;
use photon_cascade::band::single_photon_energy;
use photon_cascade::hilbert::{
    assemble_hamiltonian, SectorBasis, SparseOperator, StateVector, TruncationRule,
};
use photon_cascade::lattice::{EmitterSpec, LatticeSpec};
use photon_cascade::linalg::hermitian_eigen;
use photon_cascade::propagator::{
    estimate_spectral_bounds, evolve, evolve_resumable, EvolutionConfig, Method, SnapshotStore,
};
use photon_cascade::scalar::{cis, inner};
use photon_cascade::wavepacket::{build_wavepacket, to_momentum_space, fft_momenta, WavepacketSpec};

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn small_system() -> (SectorBasis<f64>, SparseOperator<f64>, StateVector<f64>) {
    let lat = LatticeSpec::new(8, 1.0, 3.0).unwrap();
    let e = EmitterSpec::giant(4, -5.0, &[(-1, 0.4, 0.3), (0, 0.6, 0.0), (1, 0.4, -0.3)]).unwrap();
    let basis = SectorBasis::enumerate(&lat, &[e], 2, TruncationRule::default()).unwrap();
    let h = assemble_hamiltonian(&basis);
    let psi = StateVector::from_fn(&basis, |cfg| {
        let s: f64 = cfg.photons().iter().map(|&p| p as f64).sum();
        Complex64::new((0.3 * s).cos() + 0.1, (0.7 * s).sin() + cfg.excited_count() as f64)
    });
    let mut psi = psi;
    psi.normalize().unwrap();
    (basis, h, psi)
}

fn dense_evolution(h: &SparseOperator<f64>, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let eig = hermitian_eigen(&h.to_dense()).unwrap();
    eig.apply_function(|l| cis(-l * t)).matvec(psi)
}

#[test]
fn zero_hamiltonian_leaves_state_unchanged() {
    let (_, h, psi) = small_system();
    let zero = SparseOperator::zero(h.dim());
    for method in [Method::Chebyshev, Method::Krylov] {
        let mut cfg = EvolutionConfig::new(5.0, 0.5);
        cfg.method = method;
        let out = evolve(&psi, &zero, &cfg).unwrap();
        assert!(max_diff(&out.last().unwrap().amplitudes, &psi.amplitudes) < 1e-13);
    }
}

#[test]
fn matches_dense_exponential() {
    let (_, h, psi) = small_system();
    let exact = dense_evolution(&h, &psi.amplitudes, 7.3);
    for method in [Method::Chebyshev, Method::Krylov] {
        let mut cfg = EvolutionConfig::new(7.3, 0.5);
        cfg.method = method;
        cfg.tolerance = 1e-12;
        let out = evolve(&psi, &h, &cfg).unwrap();
        let last = out.last().unwrap();
        assert!((last.time - 7.3).abs() < 1e-12);
        assert!(max_diff(&last.amplitudes, &exact) < 1e-10, "{method:?}");
    }
}

#[test]
fn snapshots_land_on_requested_times() {
    let (_, h, psi) = small_system();
    let mut cfg = EvolutionConfig::new(3.0, 0.4);
    cfg.snapshot_times = vec![0.0, 1.0, 2.5];
    let out = evolve(&psi, &h, &cfg).unwrap();
    let times: Vec<f64> = out.iter().map(|s| s.time).collect();
    assert_eq!(times.len(), 4);
    for (t, e) in times.iter().zip([0.0, 1.0, 2.5, 3.0]) {
        assert!((t - e).abs() < 1e-12);
    }
    let exact = dense_evolution(&h, &psi.amplitudes, 2.5);
    assert!(max_diff(&out[2].amplitudes, &exact) < 1e-9);
}

#[test]
fn evolution_is_linear_and_reversible() {
    let (basis, h, psi) = small_system();
    let other = StateVector::from_fn(&basis, |cfg| {
        Complex64::new(cfg.photon_count() as f64, -(cfg.photons()[0] as f64) * 0.2)
    });
    let a = Complex64::new(0.3, -1.2);
    let b = Complex64::new(-0.7, 0.4);
    let mut combo = StateVector::zeros(basis.dim());
    for i in 0..basis.dim() {
        combo.amplitudes[i] = a * psi.amplitudes[i] + b * other.amplitudes[i];
    }
    let cfg = EvolutionConfig::new(4.0, 0.5);
    let run = |s: &StateVector<f64>| evolve(s, &h, &cfg).unwrap().pop().unwrap().amplitudes;
    let (x, y, z) = (run(&psi), run(&other), run(&combo));
    let lin: Vec<Complex64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
    assert!(max_diff(&z, &lin) < 1e-9);

    let fwd = evolve(&psi, &h, &cfg).unwrap().pop().unwrap();
    let back_cfg = EvolutionConfig::new(0.0, 0.5);
    let back = evolve(&fwd, &h, &back_cfg).unwrap().pop().unwrap();
    assert!(back.time.abs() < 1e-12);
    assert!(max_diff(&back.amplitudes, &psi.amplitudes) < 1e-10);
}

#[test]
fn krylov_and_chebyshev_agree() {
    let (_, h, psi) = small_system();
    let mut cfg = EvolutionConfig::new(10.0, 1.0);
    let a = evolve(&psi, &h, &cfg).unwrap().pop().unwrap();
    cfg.method = Method::Krylov;
    let b = evolve(&psi, &h, &cfg).unwrap().pop().unwrap();
    assert!(max_diff(&a.amplitudes, &b.amplitudes) < 1e-9);
}

#[test]
fn free_photon_on_ring_matches_dispersion() {
    let n = 256;
    let lat = LatticeSpec::ring(n, 1.0, 6.0).unwrap();
    let basis = SectorBasis::enumerate(&lat, &[], 1, TruncationRule::default()).unwrap();
    let h = assemble_hamiltonian(&basis);
    let packet = build_wavepacket(&WavepacketSpec::gaussian(PI / 2.0, 0.05, 128.0), &lat).unwrap();
    let mut psi = StateVector::zeros(n);
    for (i, cfg) in basis.states().iter().enumerate() {
        psi.amplitudes[i] = packet[cfg.photons()[0] as usize];
    }
    let t = 100.0;
    // Exact evolution: multiply each Bloch component by exp(-i E_k t).
    let phi = to_momentum_space(&packet);
    let ks = fft_momenta::<f64>(n);
    let mut evolved: Vec<Complex64> = phi
        .iter()
        .zip(&ks)
        .map(|(p, &k)| p * cis(-single_photon_energy(k, &lat) * t))
        .collect();
    rustfft::FftPlanner::new().plan_fft_inverse(n).process(&mut evolved);
    let exact: Vec<Complex64> = basis
        .states()
        .iter()
        .map(|cfg| evolved[cfg.photons()[0] as usize] / (n as f64).sqrt())
        .collect();
    for method in [Method::Chebyshev, Method::Krylov] {
        let mut cfg = EvolutionConfig::new(t, 2.0);
        cfg.method = method;
        let out = evolve(&psi, &h, &cfg).unwrap().pop().unwrap();
        let fid = inner(&exact, &out.amplitudes).norm_sqr();
        assert!(fid >= 1.0 - 1e-8, "{method:?}: fidelity {fid}");
    }
}

#[test]
fn spectral_bounds_enclose_two_photon_spectrum() {
    let lat = LatticeSpec::ring(24, 1.0, 6.0).unwrap();
    let e = EmitterSpec::small_atom(12, 0.5, -6.6);
    let basis = SectorBasis::enumerate(&lat, &[e], 2, TruncationRule::default()).unwrap();
    let h = assemble_hamiltonian(&basis);
    let (lo, hi) = estimate_spectral_bounds(&h).unwrap();
    let eig = hermitian_eigen(&h.to_dense()).unwrap();
    assert!(lo <= eig.values[0] && hi >= *eig.values.last().unwrap());
    // Bare waveguide: the doublon band bottom sits at -sqrt(U^2 + 16 J^2).
    let bare = SectorBasis::enumerate(&lat, &[], 2, TruncationRule::default()).unwrap();
    let (lo, _) = estimate_spectral_bounds(&assemble_hamiltonian(&bare)).unwrap();
    assert!(lo <= -(52f64).sqrt());
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let (basis, h, psi) = small_system();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = EvolutionConfig::new(2.0, 0.5);
    cfg.snapshot_times = vec![0.0, 1.0, 2.0];
    let meta = serde_json::to_value(&cfg).unwrap();
    let mut store = SnapshotStore::create(dir.path(), &basis.fingerprint(), basis.dim(), meta.clone()).unwrap();
    evolve_resumable(&psi, &h, &cfg, &mut store).unwrap();
    assert_eq!(store.manifest.entries.len(), 3);

    let mut cfg2 = cfg.clone();
    cfg2.total_time = 4.0;
    cfg2.snapshot_times = vec![3.0, 4.0];
    let mut reopened = SnapshotStore::open_or_create(dir.path(), &basis.fingerprint(), basis.dim(), meta).unwrap();
    let resumed = evolve_resumable(&psi, &h, &cfg2, &mut reopened).unwrap();
    assert_eq!(reopened.manifest.entries.len(), 5);
    let exact = dense_evolution(&h, &psi.amplitudes, 4.0);
    assert!(max_diff(&resumed.amplitudes, &exact) < 1e-9);
    let loaded = reopened.load::<f64>(3).unwrap();
    assert!((loaded.time - 3.0).abs() < 1e-12);
}
