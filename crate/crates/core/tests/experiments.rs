use std::fs;

use num_complex::Complex64;
use photon_cascade::band::doublon_shape;
use photon_cascade::experiments::{
    run_kind, run_scenario, snapshot_profiles, OutputSink, RunOptions, ScenarioConfig, ScenarioKind,
    ScenarioResult,
};
use photon_cascade::hilbert::{initial_state, SectorBasis, StateVector, TruncationRule};
use photon_cascade::lattice::{EmitterSpec, LatticeSpec};
use photon_cascade::wavepacket::{build_wavepacket, WavepacketSpec};

const TINY: &str = r#"
scenario = "tiny"
kind = "evolution_map"

[lattice]
n_sites = 160
nonlinearity = 6.0

[[emitters]]
name = "atom"
center = 80
detuning = -6.633
template = "small"
g = 0.5

[wavepacket]
kind = "gaussian"
k0 = "0.5pi"
width = 0.1
x0 = 30.0

[evolution]
time_step = 2.0
total_time = 50.0
frames = 25

[sweep]
g = [0.3]
numeric = true
"#;

#[test]
fn relative_profile_of_a_bound_pair_recovers_its_decay() {
    let n = 64;
    let lattice = LatticeSpec::ring(n, 1.0, 6.0).unwrap();
    let basis = SectorBasis::enumerate(&lattice, &[], 2, TruncationRule::default()).unwrap();
    let alpha = doublon_shape(0.5 * std::f64::consts::PI, &lattice).unwrap().decay_factor;
    let mut psi = StateVector::from_fn(&basis, |cfg| {
        let p = cfg.photons();
        let d = (p[1] - p[0]) as usize;
        let r = d.min(n - d);
        Complex64::new(alpha.powi(r as i32), 0.0)
    });
    psi.normalize().unwrap();
    let profile = snapshot_profiles(&psi, &basis, 12);
    assert!(!profile.two_photon.is_empty());
    let peak = profile
        .relative
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    assert_eq!(peak, 0);
    let fit = profile.decay_fit.unwrap();
    assert!((fit / alpha - 1.0).abs() < 1e-2, "{fit} vs {alpha}");
}

#[test]
fn single_photon_state_has_no_two_photon_table() {
    let lattice = LatticeSpec::new(40, 1.0, 6.0).unwrap();
    let e = EmitterSpec::small_atom(20, 0.3, -6.633);
    let basis = SectorBasis::enumerate(&lattice, &[e], 2, TruncationRule::default()).unwrap();
    let packet =
        build_wavepacket(&WavepacketSpec::gaussian(0.5 * std::f64::consts::PI, 0.2, 10.0), &lattice).unwrap();
    let psi = initial_state(&basis, &packet).unwrap();
    let profile = snapshot_profiles(&psi, &basis, 6);
    assert!(profile.two_photon.is_empty());
    assert!(profile.relative.iter().all(|&w| w == 0.0));
    assert!((profile.single.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn small_evolution_map_tracks_the_photon() {
    let cfg = ScenarioConfig::from_str_with_overrides(TINY, &[]).unwrap();
    let r = match run_kind(&cfg, ScenarioKind::EvolutionMap, &mut OutputSink::discard()).unwrap() {
        ScenarioResult::EvolutionMap(r) => r,
        other => panic!("unexpected {other:?}"),
    };
    assert!(r.max_norm_drift < 1e-8);
    assert!(r.excitation_drift < 1e-8);
    assert!(r.photon_speed_error.unwrap() < 0.02, "{:?}", r.photon_speed_error);
    assert!(r.final_report.p_doublon > 0.05);
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::from_str_with_overrides(
        TINY,
        &["kind=\"single_emitter_sweep\"".to_string()],
    )
    .unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let opts = RunOptions {
            out_dir: Some(&out),
            overrides: &[],
            threads: 1,
        };
        run_scenario(&cfg, &opts).unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        outputs.push((fs::read(out.join("sweep.csv")).unwrap(), manifest["outputs"].clone()));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    assert_eq!(outputs[0].1, outputs[1].1);
}
