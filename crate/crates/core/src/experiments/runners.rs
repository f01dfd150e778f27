//! One runner per scenario kind. Each returns a typed result and writes its
//! tables through an [`OutputSink`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::band::{
    doublon_band_edges, doublon_shape, doublon_velocity, momentum_grid, resonant_doublon_momentum,
    resonant_triplon_momentum, single_photon_velocity, triplon_band, write_band_csv, BandKind,
    BandModel,
};
use crate::error::{Error, Result};
use crate::hilbert::observables::center_and_spread;
use crate::hilbert::{
    excitation_expectation, PhotonSplit, PopulationReport, SectorBasis, StateVector,
    TruncationRule,
};
use crate::lattice::{Boundary, EmitterSpec, LatticeSpec};
use crate::pga::{refine_maximum, solve, sweep_solve, Incidence, ScatteringAmplitudes, SweepTable};
use crate::wavepacket::{WavepacketKind, WavepacketSpec};

use super::config::{ScenarioConfig, ScenarioKind};
use super::lobes::{
    arrival_time, centroid_beyond, linear_fit, offset, track_lobe, weight_beyond, LobeTrack,
    LobeWindow,
};
use super::numeric::{run_numeric, ComponentFrame, NumericOutcome, NumericRun};
use super::output::{write_manifest, OutputSink};

/// Default PGA cutoff (seven pseudo-coupling points per contact).
pub const DEFAULT_CUTOFF: usize = 3;

/// Four-channel summary shared by analytic and numeric results.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Channels {
    pub t2: f64,
    pub r2: f64,
    pub u_plus2: f64,
    pub u_minus2: f64,
}

impl Channels {
    pub fn from_amplitudes(a: &ScatteringAmplitudes<f64>) -> Self {
        Self {
            t2: a.transmission(),
            r2: a.reflection(),
            u_plus2: a.forward_doublon(),
            u_minus2: a.backward_doublon(),
        }
    }

    pub fn from_report(r: &PopulationReport<f64>) -> Self {
        Self {
            t2: r.transmitted,
            r2: r.reflected,
            u_plus2: r.doublon_forward,
            u_minus2: r.doublon_backward,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [
            self.t2 - other.t2,
            self.r2 - other.r2,
            self.u_plus2 - other.u_plus2,
            self.u_minus2 - other.u_minus2,
        ]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
    }
}

fn first_emitter(cfg: &ScenarioConfig, lattice: &LatticeSpec<f64>) -> Result<EmitterSpec<f64>> {
    cfg.emitters
        .first()
        .ok_or_else(|| Error::config("scenario needs an emitter"))?
        .spec(lattice)
}

fn cutoff_and_formulation(cfg: &ScenarioConfig) -> (usize, crate::pga::Formulation) {
    cfg.sweep
        .as_ref()
        .map(|s| (s.cutoff, s.formulation))
        .unwrap_or((DEFAULT_CUTOFF, Default::default()))
}

fn numeric_run(
    cfg: &ScenarioConfig,
    lattice: LatticeSpec<f64>,
    emitters: Vec<EmitterSpec<f64>>,
    packet: WavepacketSpec<f64>,
) -> NumericRun {
    NumericRun::new(lattice, emitters, packet, cfg.evolution.clone(), cfg.observables.clone())
}

// ---------------------------------------------------------------- bands

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandsResult {
    pub doublon_band: (f64, f64),
    pub triplon_band: Option<(f64, f64)>,
    /// Resonant doublon momentum of the first emitter, when a packet and an
    /// emitter are configured.
    pub doublon_momentum: Option<f64>,
    /// Resonant triplon momentum of the second emitter.
    pub triplon_momentum: Option<f64>,
}

pub fn run_bands(cfg: &ScenarioConfig, sink: &mut OutputSink) -> Result<BandsResult> {
    let lattice = cfg.lattice()?;
    let section = cfg.bands.clone().unwrap_or_default();
    let grid = momentum_grid::<f64>(section.grid_points);
    let model = if section.triplon && lattice.nonlinearity > 0.0 {
        triplon_band(&lattice, &grid, section.r_max)?
    } else {
        BandModel::new(lattice)
    };
    sink.write_with("band_single.csv", |w| {
        write_band_csv(w, &model, BandKind::SinglePhoton, &grid)
    })?;
    if lattice.nonlinearity > 0.0 {
        sink.write_with("band_doublon.csv", |w| {
            write_band_csv(w, &model, BandKind::Doublon, &grid)
        })?;
    }
    if model.triplon_table.is_some() {
        sink.write_with("band_triplon.csv", |w| {
            write_band_csv(w, &model, BandKind::Triplon, &grid)
        })?;
    }
    let mut doublon_momentum = None;
    let mut triplon_momentum = None;
    if let (Some(p), Some(e1)) = (&cfg.wavepacket, cfg.emitters.first()) {
        let kr = resonant_doublon_momentum(e1.detuning, p.k0.0, &lattice)?;
        doublon_momentum = Some(kr);
        if let (Some(e2), Some(_)) = (cfg.emitters.get(1), &model.triplon_table) {
            triplon_momentum = Some(resonant_triplon_momentum(e2.detuning, kr, &model)?);
        }
    }
    Ok(BandsResult {
        doublon_band: doublon_band_edges(&lattice),
        triplon_band: model.triplon_table.as_ref().map(|t| t.range()),
        doublon_momentum,
        triplon_momentum,
    })
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub strength: f64,
    pub phase: f64,
    pub cutoff: usize,
    pub channels: Channels,
    pub emitter_proxy: f64,
    pub flux_residual: f64,
    pub photon_velocity: f64,
    pub doublon_velocity: f64,
}

pub fn run_solve(cfg: &ScenarioConfig, sink: &mut OutputSink) -> Result<SolveResult> {
    let lattice = cfg.lattice()?;
    let emitter = first_emitter(cfg, &lattice)?;
    let k0 = cfg.packet()?.center_momentum;
    let (cutoff, formulation) = cutoff_and_formulation(cfg);
    let amps = solve(&emitter, &lattice, k0, cutoff, formulation, Incidence::FromLeft)?;
    sink.write_json("amplitudes.json", &amps)?;
    Ok(SolveResult {
        strength: cfg.emitters[0].g,
        phase: cfg.emitters[0].phi.0,
        cutoff,
        channels: Channels::from_amplitudes(&amps),
        emitter_proxy: amps.emitter_proxy(),
        flux_residual: amps.flux_residual,
        photon_velocity: amps.photon_velocity,
        doublon_velocity: amps.doublon_velocity,
    })
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepComparisonRow {
    pub strength: f64,
    pub pga: Channels,
    pub pointlike: Channels,
    pub numeric: Option<Channels>,
    pub numeric_emitter: Option<f64>,
    pub numeric_baseline: Option<f64>,
    pub flux_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepComparisonRow>,
    /// Two-dimensional analytic table when a phase grid is configured.
    pub table: Option<SweepTable<f64>>,
    /// Largest |analytic - numeric| over rows and channels.
    pub max_deviation_pga: Option<f64>,
    pub max_deviation_pointlike: Option<f64>,
    /// Largest `|u+|^2 - |u-|^2` seen in the numerics.
    pub max_numeric_asymmetry: Option<f64>,
    /// Largest `||u+| - |u-||` of the pointlike solver.
    pub max_pointlike_asymmetry: f64,
    pub max_flux_residual: f64,
}

pub fn run_single_emitter_sweep(cfg: &ScenarioConfig, sink: &mut OutputSink) -> Result<SweepResult> {
    let lattice = cfg.lattice()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("missing [sweep] section"))?;
    let packet = cfg.packet()?;
    let section = &cfg.emitters[0];
    let template = section.template(&lattice)?;
    let strengths = sweep.g.values();
    let k0 = packet.center_momentum;

    let table = if let Some(phases) = &sweep.phi {
        let t = sweep_solve(
            &template,
            &lattice,
            k0,
            sweep.cutoff,
            &strengths,
            &phases.values(),
            sweep.formulation,
        );
        if let Some(dir) = sink.dir() {
            let path = dir.join("sweep_table.csv");
            t.write_csv(&path)?;
            sink.track(path);
        }
        Some(t)
    } else {
        None
    };

    let mut rows = Vec::new();
    if table.is_none() {
        for &g in &strengths {
            let e = template.instantiate(g, section.phi.0)?;
            let pga = solve(&e, &lattice, k0, sweep.cutoff, sweep.formulation, Incidence::FromLeft)?;
            let point = solve(&e, &lattice, k0, 0, sweep.formulation, Incidence::FromLeft)?;
            let (numeric, emitter, baseline) = if sweep.numeric && g > 0.0 {
                let out = run_numeric(&numeric_run(cfg, lattice, vec![e.clone()], packet))?;
                log::info!("g = {g:.4}: numeric run took {:.1} s", out.seconds);
                let r = &out.final_report;
                (
                    Some(Channels::from_report(r)),
                    Some(r.emitter_excited[0]),
                    Some(r.doublon_baseline),
                )
            } else if sweep.numeric {
                // No coupling: the photon passes untouched.
                (
                    Some(Channels {
                        t2: 1.0,
                        r2: 0.0,
                        u_plus2: 0.0,
                        u_minus2: 0.0,
                    }),
                    Some(1.0),
                    Some(0.0),
                )
            } else {
                (None, None, None)
            };
            rows.push(SweepComparisonRow {
                strength: g,
                pga: Channels::from_amplitudes(&pga),
                pointlike: Channels::from_amplitudes(&point),
                numeric,
                numeric_emitter: emitter,
                numeric_baseline: baseline,
                flux_residual: pga.flux_residual.max(point.flux_residual),
            });
        }
        sink.write_with("sweep.csv", |w| {
            writeln!(
                w,
                "g,pga_t2,pga_r2,pga_u_plus2,pga_u_minus2,point_t2,point_r2,point_u_plus2,point_u_minus2,num_t2,num_r2,num_u_plus2,num_u_minus2,num_emitter,num_baseline"
            )?;
            for r in &rows {
                let n = r.numeric.unwrap_or(Channels {
                    t2: f64::NAN,
                    r2: f64::NAN,
                    u_plus2: f64::NAN,
                    u_minus2: f64::NAN,
                });
                writeln!(
                    w,
                    "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                    r.strength,
                    r.pga.t2, r.pga.r2, r.pga.u_plus2, r.pga.u_minus2,
                    r.pointlike.t2, r.pointlike.r2, r.pointlike.u_plus2, r.pointlike.u_minus2,
                    n.t2, n.r2, n.u_plus2, n.u_minus2,
                    r.numeric_emitter.unwrap_or(f64::NAN),
                    r.numeric_baseline.unwrap_or(f64::NAN),
                )?;
            }
            Ok(())
        })?;
    }

    let dev = |f: &dyn Fn(&SweepComparisonRow) -> Channels| -> Option<f64> {
        rows.iter()
            .filter_map(|r| r.numeric.map(|n| f(r).max_abs_diff(&n)))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    };
    let max_deviation_pga = dev(&|r| r.pga);
    let max_deviation_pointlike = dev(&|r| r.pointlike);
    let max_numeric_asymmetry = rows
        .iter()
        .filter_map(|r| r.numeric.map(|n| n.u_plus2 - n.u_minus2))
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    let max_pointlike_asymmetry = rows
        .iter()
        .map(|r| (r.pointlike.u_plus2.sqrt() - r.pointlike.u_minus2.sqrt()).abs())
        .fold(0.0, f64::max);
    let max_flux_residual = rows
        .iter()
        .map(|r| r.flux_residual)
        .chain(table.iter().flat_map(|t| {
            t.rows
                .iter()
                .filter(|r| r.error.is_none())
                .map(|r| r.flux_residual)
        }))
        .fold(0.0, f64::max);
    Ok(SweepResult {
        rows,
        table,
        max_deviation_pga,
        max_deviation_pointlike,
        max_numeric_asymmetry,
        max_pointlike_asymmetry,
        max_flux_residual,
    })
}

// ---------------------------------------------------------------- profiles

/// Spatial profiles of one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub time: f64,
    /// `|psi_I(x)|^2` per site.
    pub single: Vec<f64>,
    /// `|psi_II(x_c, r)|^2` on the half-site centre grid (outer index
    /// `2 x_c`) for `r <= r_max`; empty when there is no two-photon weight.
    pub two_photon: Vec<Vec<f64>>,
    /// Two-photon weight versus relative distance.
    pub relative: Vec<f64>,
    /// Decay factor fitted to `relative` (`P(r) ~ alpha^{2r}`) over the
    /// points of `r = 1..=5` that stand clear of the unbound floor.
    pub decay_fit: Option<f64>,
}

pub fn snapshot_profiles(
    state: &StateVector<f64>,
    basis: &SectorBasis<f64>,
    r_max: usize,
) -> ProfileReport {
    let lattice = &basis.lattice;
    let n = lattice.n_sites;
    let single = crate::hilbert::observables::single_photon_density(state, basis);
    let mut table = vec![vec![0.0; r_max + 1]; 2 * n];
    let mut relative = vec![0.0; r_max + 1];
    let mut total = 0.0;
    for sec in basis.sectors().iter().filter(|s| s.photons == 2) {
        for i in sec.offset..sec.offset + sec.len {
            let w = state.amplitudes[i].norm_sqr();
            if w == 0.0 {
                continue;
            }
            let (c, r) = center_and_spread(lattice, basis.state(i));
            total += w;
            if r <= r_max {
                let b = ((2.0 * c).round() as i64).rem_euclid(2 * n as i64) as usize;
                table[b][r] += w;
                relative[r] += w;
            }
        }
    }
    // Unbound pairs form a nearly flat floor under the bound-state tail;
    // estimate it from the upper half of the profile and keep only points
    // well above it.
    let background = if r_max >= 8 {
        let tail = &relative[r_max / 2..];
        tail.iter().sum::<f64>() / tail.len() as f64
    } else {
        0.0
    };
    let fit_range: Vec<(f64, f64)> = (1..=r_max.min(5))
        .map(|r| (r, relative[r] - background))
        .take_while(|&(_, w)| w > 0.0 && w > 20.0 * background)
        .map(|(r, w)| (r as f64, w.ln()))
        .collect();
    let decay_fit = (fit_range.len() >= 2).then(|| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = fit_range.into_iter().unzip();
        (0.5 * linear_fit(&xs, &ys).0).exp()
    });
    ProfileReport {
        time: state.time,
        single,
        two_photon: if total > 0.0 { table } else { Vec::new() },
        relative,
        decay_fit,
    }
}

fn write_profiles(sink: &mut OutputSink, p: &ProfileReport) -> Result<()> {
    sink.write_with("profile_single.csv", |w| {
        writeln!(w, "site,density")?;
        for (x, v) in p.single.iter().enumerate() {
            writeln!(w, "{},{:.12e}", x, v)?;
        }
        Ok(())
    })?;
    sink.write_with("profile_relative.csv", |w| {
        writeln!(w, "r,weight")?;
        for (r, v) in p.relative.iter().enumerate() {
            writeln!(w, "{},{:.12e}", r, v)?;
        }
        Ok(())
    })?;
    if !p.two_photon.is_empty() {
        sink.write_with("profile_two_photon.dat", |w| {
            writeln!(w, "# x_c r weight")?;
            for (b, row) in p.two_photon.iter().enumerate() {
                for (r, v) in row.iter().enumerate() {
                    writeln!(w, "{:.1} {} {:.12e}", b as f64 / 2.0, r, v)?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------- evolution map

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionMapResult {
    pub final_report: PopulationReport<f64>,
    pub dimension: usize,
    pub seconds: f64,
    pub max_norm_drift: f64,
    pub excitation_drift: f64,
    pub photon_velocity: f64,
    pub doublon_momentum: Option<f64>,
    pub doublon_velocity: Option<f64>,
    pub photon_track: LobeTrack,
    pub doublon_track: Option<LobeTrack>,
    pub photon_speed_error: Option<f64>,
    pub doublon_speed_error: Option<f64>,
    pub photon_center_deviation: Option<f64>,
    pub doublon_center_deviation: Option<f64>,
    /// Measured `W_D / W_S` and the prediction `v_K / v_k`.
    pub width_ratio: Option<f64>,
    pub width_ratio_expected: Option<f64>,
    /// Relative-coordinate decay fitted at the final time and `alpha(K_r)`.
    pub decay_fit: Option<f64>,
    pub decay_expected: Option<f64>,
}

fn relative_error(measured: Option<f64>, expected: Option<f64>) -> Option<f64> {
    match (measured, expected) {
        (Some(m), Some(e)) if e != 0.0 => Some((m / e - 1.0).abs()),
        _ => None,
    }
}

fn emitter_zone(e: &EmitterSpec<f64>, margin: f64) -> (f64, f64) {
    (
        e.leftmost_site() as f64 - margin,
        e.rightmost_site() as f64 + margin,
    )
}

/// Last time before the transmitted photon, moving at `v`, can return to
/// the emitter zone: around the ring, or back from the right edge.
fn photon_return_time(
    lattice: &LatticeSpec<f64>,
    t_hit: f64,
    zone: (f64, f64),
    v: f64,
    half_width: f64,
) -> f64 {
    let n = lattice.n_sites as f64;
    let path = match lattice.boundary {
        Boundary::Ring => n - (zone.1 - zone.0),
        Boundary::Open => 2.0 * (n - 1.0 - zone.1),
    };
    t_hit + (path - half_width) / v
}

pub fn run_evolution_map(cfg: &ScenarioConfig, sink: &mut OutputSink) -> Result<EvolutionMapResult> {
    let lattice = cfg.lattice()?;
    let emitter = first_emitter(cfg, &lattice)?;
    let packet = cfg.packet()?;
    let mut run = numeric_run(cfg, lattice, vec![emitter.clone()], packet);
    run.record_map = true;
    run.record_components = true;
    let out = run_numeric(&run)?;
    sink.write_series("series.csv", &out.series, 1)?;
    if let Some(map) = &out.map {
        sink.write_map("photon_number.dat", map)?;
    }

    let v_k = single_photon_velocity(packet.center_momentum, &lattice);
    if !(v_k > 0.0) {
        return Err(Error::InvalidParameter(
            "evolution map expects a right-moving packet (0 < k0 < pi)".into(),
        ));
    }
    let sigma = packet.spatial_width();
    let zone = emitter_zone(&emitter, cfg.observables.margin);
    let center = emitter.center();
    let x0 = packet.center_position;
    let t_hit = offset(&lattice, center, x0) / v_k;
    let total = run.total_time();

    let photon_window = LobeWindow {
        origin: x0,
        t_origin: 0.0,
        velocity: v_k,
        half_width: 4.0 * sigma,
        t_min: 0.0,
        t_max: total,
        excluded: zone,
    };
    // Only the incident lobe: stop once the window first reaches the emitter.
    let photon_window = LobeWindow {
        t_max: ((offset(&lattice, zone.0, x0) - photon_window.half_width) / v_k).min(total),
        ..photon_window
    };
    let frames = |pick: fn(&ComponentFrame) -> &[f64]| {
        out.components
            .iter()
            .map(move |f| (f.time, pick(f)))
            .collect::<Vec<_>>()
    };
    let photon_track = track_lobe(
        &lattice,
        frames(|f| f.single.as_slice()),
        1,
        &photon_window,
        1e-3,
    );

    let kr = if lattice.nonlinearity > 0.0 {
        resonant_doublon_momentum(emitter.detuning, packet.center_momentum, &lattice).ok()
    } else {
        None
    };
    let v_dbl = kr.map(|k| doublon_velocity(k, &lattice));
    let mut doublon_track = None;
    let mut doublon_window = None;
    if let Some(v_d) = v_dbl.filter(|v| *v > 0.0) {
        let w_d = sigma * v_d / v_k;
        let hw = 4.0 * w_d;
        let n = lattice.n_sites as f64;
        let edge_limit = match lattice.boundary {
            Boundary::Ring => 0.5 * n,
            Boundary::Open => n - 1.0 - center,
        };
        let t_max = photon_return_time(&lattice, t_hit, zone, v_k, 4.0 * sigma)
            .min(t_hit + (edge_limit - hw) / v_d)
            .min(total);
        let win = LobeWindow {
            origin: center,
            t_origin: t_hit,
            velocity: v_d,
            half_width: hw,
            t_min: t_hit,
            t_max,
            excluded: zone,
        };
        let track = track_lobe(&lattice, frames(|f| f.doublon.as_slice()), 2, &win, 1e-3);
        doublon_track = Some(track);
        doublon_window = Some(win);
    }

    let profile = snapshot_profiles(&out.final_state, &out.basis, 12);
    write_profiles(sink, &profile)?;
    sink.write_json("lobes.json", &(&photon_track, &doublon_track))?;

    let x_final = excitation_expectation(&out.final_state, &out.basis);
    let x_expected = (run.emitters.len() + 1) as f64;
    let width_ratio = match (&photon_track.width, doublon_track.as_ref().and_then(|t| t.width)) {
        (Some(ws), Some(wd)) if *ws > 0.0 => Some(wd / ws),
        _ => None,
    };
    Ok(EvolutionMapResult {
        final_report: out.final_report.clone(),
        dimension: out.dimension(),
        seconds: out.seconds,
        max_norm_drift: out.max_norm_drift(),
        excitation_drift: (x_final - x_expected).abs(),
        photon_velocity: v_k,
        doublon_momentum: kr,
        doublon_velocity: v_dbl,
        photon_speed_error: relative_error(photon_track.speed, Some(v_k)),
        doublon_speed_error: relative_error(doublon_track.as_ref().and_then(|t| t.speed), v_dbl),
        photon_center_deviation: photon_track.center_deviation(&photon_window),
        doublon_center_deviation: match (&doublon_track, &doublon_window) {
            (Some(t), Some(w)) => t.center_deviation(w),
            _ => None,
        },
        width_ratio,
        width_ratio_expected: v_dbl.map(|v| v / v_k),
        decay_fit: profile.decay_fit,
        decay_expected: kr.and_then(|k| doublon_shape(k, &lattice).ok()).map(|s| s.decay_factor),
        photon_track,
        doublon_track,
    })
}

// ---------------------------------------------------------------- RGA optimum

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumPoint {
    pub strength: f64,
    pub phase: f64,
    pub channels: Channels,
    pub flux_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumResult {
    pub table: SweepTable<f64>,
    pub grid_best: OptimumPoint,
    pub refined: OptimumPoint,
    pub numeric: Option<PopulationReport<f64>>,
    pub max_flux_residual: f64,
}

pub fn run_rga_optimum(cfg: &ScenarioConfig, sink: &mut OutputSink) -> Result<OptimumResult> {
    let lattice = cfg.lattice()?;
    let opt = cfg
        .optimum
        .as_ref()
        .ok_or_else(|| Error::config("missing [optimum] section"))?;
    let packet = cfg.packet()?;
    let k0 = packet.center_momentum;
    let section = &cfg.emitters[0];
    let template = section.template(&lattice)?;
    let (gs, ps) = (opt.g.values(), opt.phi.values());
    let formulation = Default::default();
    let table = sweep_solve(&template, &lattice, k0, opt.cutoff, &gs, &ps, formulation);
    if let Some(dir) = sink.dir() {
        let path = dir.join("optimum_table.csv");
        table.write_csv(&path)?;
        sink.track(path);
    }
    let best = table
        .best()
        .ok_or_else(|| Error::InvalidParameter("no solvable point on the optimum grid".into()))?;
    let point = |g: f64, phi: f64| -> Result<OptimumPoint> {
        let a = solve(
            &template.instantiate(g, phi)?,
            &lattice,
            k0,
            opt.cutoff,
            formulation,
            Incidence::FromLeft,
        )?;
        Ok(OptimumPoint {
            strength: g,
            phase: phi,
            channels: Channels::from_amplitudes(&a),
            flux_residual: a.flux_residual,
        })
    };
    let grid_best = point(best.strength, best.phase)?;
    let spacing = |v: &[f64]| {
        if v.len() > 1 {
            (v[v.len() - 1] - v[0]).abs() / (v.len() - 1) as f64
        } else {
            0.01
        }
    };
    let g_lo = gs.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    let g_hi = gs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = opt.g_tolerance.min(opt.phi_tolerance.0);
    let (g, phi, _) = refine_maximum(
        (best.strength, best.phase),
        (spacing(&gs), spacing(&ps)),
        (g_lo, g_hi),
        tol,
        4,
        |g, phi| {
            point(g, phi)
                .map(|p| p.channels.u_plus2)
                .unwrap_or(f64::NEG_INFINITY)
        },
    );
    let refined = point(g, phi)?;
    let numeric = if opt.verify {
        let e = template.instantiate(g, phi)?;
        let out = run_numeric(&numeric_run(cfg, lattice, vec![e], packet))?;
        sink.write_series("verification_series.csv", &out.series, 1)?;
        Some(out.final_report)
    } else {
        None
    };
    let max_flux_residual = table
        .rows
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| r.flux_residual)
        .chain([grid_best.flux_residual, refined.flux_residual])
        .fold(0.0, f64::max);
    sink.write_json("optimum.json", &(&grid_best, &refined, &numeric))?;
    Ok(OptimumResult {
        table,
        grid_best,
        refined,
        numeric,
        max_flux_residual,
    })
}

// ---------------------------------------------------------------- cascade

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCheck {
    pub r_max: usize,
    pub reference_r_max: usize,
    pub shift: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    pub doublon_momentum: f64,
    pub triplon_momentum: f64,
    pub photon_velocity: f64,
    pub doublon_velocity: f64,
    pub triplon_velocity: f64,
    /// Final weights of the single-photon, doublon and triplon components.
    pub p_single: f64,
    pub p_doublon: f64,
    pub p_triplon: f64,
    pub detector: f64,
    /// Detector crossing times of the three lobes.
    pub arrivals: [Option<f64>; 3],
    /// Lobe centroids past the second emitter at the final frame.
    pub late_centroids: [Option<f64>; 3],
    pub convergence: Option<ConvergenceCheck>,
    pub control_transmission: Option<f64>,
    pub max_norm_drift: f64,
    pub dimension: usize,
    pub seconds: f64,
}

impl CascadeResult {
    pub fn ordered_arrivals(&self) -> bool {
        matches!(self.arrivals, [Some(a), Some(b), Some(c)] if a < b && b < c)
    }
}

/// Resonant momenta `(K_r, K3)` and the triplon velocity of a cascade; fails
/// with `ResonanceMismatch` when the second emitter misses the triplon band.
pub fn cascade_resonance(
    lattice: &LatticeSpec<f64>,
    emitters: &[EmitterSpec<f64>],
    k0: f64,
    band_r_max: usize,
) -> Result<(f64, f64, f64)> {
    let kr = resonant_doublon_momentum(emitters[0].detuning, k0, lattice)?;
    let band = triplon_band(lattice, &momentum_grid::<f64>(128), band_r_max)?;
    let k3 = resonant_triplon_momentum(emitters[1].detuning, kr, &band).map_err(|e| match e {
        Error::OffResonant {
            target,
            lower,
            upper,
        } => Error::ResonanceMismatch(format!(
            "second emitter targets {target:.6}, outside the triplon band [{lower:.6}, {upper:.6}]"
        )),
        other => other,
    })?;
    let vt = band
        .triplon_table
        .as_ref()
        .map(|t| t.velocity(k3))
        .unwrap_or(f64::NAN);
    Ok((kr, k3, vt))
}

fn final_components(r: &PopulationReport<f64>) -> [f64; 3] {
    [r.p_single, r.p_doublon, r.p_triplon]
}

pub fn run_cascade(cfg: &ScenarioConfig, sink: &mut OutputSink) -> Result<CascadeResult> {
    let lattice = cfg.lattice()?;
    let emitters = cfg.emitter_specs()?;
    if emitters.len() != 2 {
        return Err(Error::config("cascade needs exactly two emitters"));
    }
    let packet = cfg.packet()?;
    let section = cfg.cascade.clone().unwrap_or_default();
    let k0 = packet.center_momentum;
    let (kr, k3, vt) = cascade_resonance(&lattice, &emitters, k0, section.band_r_max)?;
    let sigma = packet.spatial_width();
    let separation = offset(&lattice, emitters[1].center(), emitters[0].center()).abs();
    if separation < 5.0 * sigma {
        return Err(Error::PacketTooWide {
            required: 5.0 * sigma,
            available: separation,
        });
    }

    let mut run = numeric_run(cfg, lattice, emitters.clone(), packet);
    run.truncation = TruncationRule {
        max_pairwise_photon_spread: Some(section.r_max),
    };
    run.reference_emitter = 1;
    run.record_map = true;
    run.record_components = true;
    let out = run_numeric(&run)?;
    sink.write_series("series.csv", &out.series, 2)?;
    if let Some(map) = &out.map {
        sink.write_map("photon_number.dat", map)?;
    }
    let final_p = final_components(&out.final_report);

    let convergence = match section.convergence_r_max {
        Some(r2) => {
            let mut check = run.clone();
            check.truncation.max_pairwise_photon_spread = Some(r2);
            check.record_map = false;
            check.record_components = false;
            let reference = run_numeric(&check)?;
            let p2 = final_components(&reference.final_report);
            let shift = final_p
                .iter()
                .zip(&p2)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            log::info!("truncation check: R_max {} -> {}: shift {:.3e}", section.r_max, r2, shift);
            if shift > section.convergence_tolerance {
                return Err(Error::TruncationNotConverged {
                    shift,
                    tolerance: section.convergence_tolerance,
                });
            }
            Some(ConvergenceCheck {
                r_max: section.r_max,
                reference_r_max: r2,
                shift,
                tolerance: section.convergence_tolerance,
            })
        }
        None => None,
    };

    let (arrivals, late_centroids, detector) = arrival_analysis(
        &lattice,
        &out,
        &emitters[1],
        cfg.observables.margin,
        section.detector,
    );
    sink.write_with("arrivals.csv", |w| {
        writeln!(w, "time,single_beyond,doublon_beyond,triplon_beyond")?;
        for f in &out.components {
            writeln!(
                w,
                "{:.12e},{:.12e},{:.12e},{:.12e}",
                f.time,
                weight_beyond(&lattice, &f.single, 1, detector),
                weight_beyond(&lattice, &f.doublon, 2, detector),
                weight_beyond(&lattice, &f.triplon, 3, detector),
            )?;
        }
        Ok(())
    })?;

    let control_transmission = if section.control {
        Some(control_run(cfg, lattice, &emitters[1], packet)?)
    } else {
        None
    };

    let result = CascadeResult {
        doublon_momentum: kr,
        triplon_momentum: k3,
        photon_velocity: single_photon_velocity(k0, &lattice),
        doublon_velocity: doublon_velocity(kr, &lattice),
        triplon_velocity: vt,
        p_single: final_p[0],
        p_doublon: final_p[1],
        p_triplon: final_p[2],
        detector,
        arrivals,
        late_centroids,
        convergence,
        control_transmission,
        max_norm_drift: out.max_norm_drift(),
        dimension: out.dimension(),
        seconds: out.seconds,
    };
    Ok(result)
}

type Triple = [Option<f64>; 3];

fn arrival_analysis(
    lattice: &LatticeSpec<f64>,
    out: &NumericOutcome,
    second: &EmitterSpec<f64>,
    margin: f64,
    detector: Option<usize>,
) -> (Triple, Triple, f64) {
    let det = detector
        .map(|d| d as f64)
        .unwrap_or_else(|| second.rightmost_site() as f64 + margin.ceil() + 1.0);
    let times: Vec<f64> = out.components.iter().map(|f| f.time).collect();
    let weights = |bps: usize, pick: fn(&ComponentFrame) -> &Vec<f64>| -> Vec<f64> {
        out.components
            .iter()
            .map(|f| weight_beyond(lattice, pick(f), bps, det))
            .collect()
    };
    let arrivals = [
        arrival_time(&times, &weights(1, |f| &f.single), 1e-4),
        arrival_time(&times, &weights(2, |f| &f.doublon), 1e-4),
        arrival_time(&times, &weights(3, |f| &f.triplon), 1e-4),
    ];
    let from = second.rightmost_site() as f64 + margin;
    let late = out.components.last().map(|f| {
        [
            centroid_beyond(lattice, &f.single, 1, from),
            centroid_beyond(lattice, &f.doublon, 2, from),
            centroid_beyond(lattice, &f.triplon, 3, from),
        ]
    });
    (arrivals, late.unwrap_or([None; 3]), det)
}

/// Sends the packet through the second emitter alone and returns the
/// transmitted single-photon weight, read while the transmitted packet is
/// between the emitter and the far edge.
fn control_run(
    cfg: &ScenarioConfig,
    lattice: LatticeSpec<f64>,
    second: &EmitterSpec<f64>,
    packet: WavepacketSpec<f64>,
) -> Result<f64> {
    let mut run = numeric_run(cfg, lattice, vec![second.clone()], packet);
    run.observables.photon_split = PhotonSplit::Position;
    let v = single_photon_velocity(packet.center_momentum, &lattice);
    let n = lattice.n_sites as f64;
    let far = match lattice.boundary {
        Boundary::Open => n - 1.0,
        Boundary::Ring => packet.center_position + n,
    };
    let target = 0.5 * (second.rightmost_site() as f64 + far);
    run.evolution.total_time = Some((target - packet.center_position) / v);
    run.evolution.frames = 4;
    let out = run_numeric(&run)?;
    Ok(out.final_report.transmitted)
}

// ---------------------------------------------------------------- Lorentzian comparison

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strength: f64,
    pub gaussian: Channels,
    pub lorentzian: Channels,
    pub gaussian_conversion: f64,
    pub lorentzian_conversion: f64,
    pub plane_wave_conversion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub rows: Vec<ComparisonRow>,
    /// Largest |P_D(Lorentzian) - P_D(Gaussian)|.
    pub max_deviation: f64,
}

/// Doublon conversion of a numeric run: bound pairs leaving the emitter.
fn conversion(r: &PopulationReport<f64>) -> f64 {
    r.doublon_forward + r.doublon_backward
}

pub fn run_lorentzian_comparison(
    cfg: &ScenarioConfig,
    sink: &mut OutputSink,
) -> Result<ComparisonResult> {
    let lattice = cfg.lattice()?;
    let cmp = cfg
        .comparison
        .as_ref()
        .ok_or_else(|| Error::config("missing [comparison] section"))?;
    let gauss = cfg.packet()?;
    if gauss.kind != WavepacketKind::Gaussian {
        return Err(Error::config("comparison expects a Gaussian [wavepacket]"));
    }
    let lorentz = WavepacketSpec::lorentzian(
        gauss.center_momentum,
        cmp.lorentzian_width,
        cmp.lorentzian_x0.unwrap_or(gauss.center_position),
    );
    let section = &cfg.emitters[0];
    let template = section.template(&lattice)?;
    let (cutoff, formulation) = cutoff_and_formulation(cfg);
    let mut rows = Vec::new();
    for g in cmp.g.values() {
        let e = template.instantiate(g, section.phi.0)?;
        let a = solve(&e, &lattice, gauss.center_momentum, cutoff, formulation, Incidence::FromLeft)?;
        let rg = run_numeric(&numeric_run(cfg, lattice, vec![e.clone()], gauss))?.final_report;
        let rl = run_numeric(&numeric_run(cfg, lattice, vec![e], lorentz))?.final_report;
        log::info!(
            "g = {g:.4}: conversion gaussian {:.4} lorentzian {:.4}",
            conversion(&rg),
            conversion(&rl)
        );
        rows.push(ComparisonRow {
            strength: g,
            gaussian: Channels::from_report(&rg),
            lorentzian: Channels::from_report(&rl),
            gaussian_conversion: conversion(&rg),
            lorentzian_conversion: conversion(&rl),
            plane_wave_conversion: a.forward_doublon() + a.backward_doublon(),
        });
    }
    sink.write_with("comparison.csv", |w| {
        writeln!(w, "g,gaussian_conversion,lorentzian_conversion,plane_wave_conversion")?;
        for r in &rows {
            writeln!(
                w,
                "{:.12e},{:.12e},{:.12e},{:.12e}",
                r.strength, r.gaussian_conversion, r.lorentzian_conversion, r.plane_wave_conversion
            )?;
        }
        Ok(())
    })?;
    let max_deviation = rows
        .iter()
        .map(|r| (r.gaussian_conversion - r.lorentzian_conversion).abs())
        .fold(0.0, f64::max);
    Ok(ComparisonResult {
        rows,
        max_deviation,
    })
}

// ---------------------------------------------------------------- dispatch

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "result", rename_all = "snake_case")]
pub enum ScenarioResult {
    Bands(BandsResult),
    Solve(SolveResult),
    Sweep(SweepResult),
    EvolutionMap(Box<EvolutionMapResult>),
    RgaOptimum(Box<OptimumResult>),
    Cascade(CascadeResult),
    LorentzianComparison(ComparisonResult),
}

impl ScenarioResult {
    /// Compact JSON summary for the manifest (large tables omitted).
    pub fn summary(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(r) = v.get_mut("result").and_then(|r| r.as_object_mut()) {
            r.remove("table");
            for key in ["photon_track", "doublon_track"] {
                if let Some(t) = r.get_mut(key).and_then(|t| t.as_object_mut()) {
                    t.remove("samples");
                }
            }
        }
        Ok(v)
    }
}

/// Options shared by every run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions<'a> {
    pub out_dir: Option<&'a Path>,
    pub overrides: &'a [String],
    pub threads: usize,
}

/// Runs the scenario described by `cfg` and writes its outputs and
/// manifest when an output directory is given.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioResult> {
    cfg.validate()?;
    let mut sink = OutputSink::new(opts.out_dir)?;
    let result = run_kind(cfg, cfg.kind, &mut sink)?;
    write_manifest(&mut sink, cfg, opts.overrides, opts.threads, &result.summary()?)?;
    Ok(result)
}

/// Runs `kind` on `cfg` (which may differ from the configured kind, e.g. a
/// band query on a cascade config).
pub fn run_kind(cfg: &ScenarioConfig, kind: ScenarioKind, sink: &mut OutputSink) -> Result<ScenarioResult> {
    Ok(match kind {
        ScenarioKind::Bands => ScenarioResult::Bands(run_bands(cfg, sink)?),
        ScenarioKind::Solve => ScenarioResult::Solve(run_solve(cfg, sink)?),
        ScenarioKind::SingleEmitterSweep => {
            ScenarioResult::Sweep(run_single_emitter_sweep(cfg, sink)?)
        }
        ScenarioKind::EvolutionMap => {
            ScenarioResult::EvolutionMap(Box::new(run_evolution_map(cfg, sink)?))
        }
        ScenarioKind::RgaOptimum => ScenarioResult::RgaOptimum(Box::new(run_rga_optimum(cfg, sink)?)),
        ScenarioKind::Cascade => ScenarioResult::Cascade(run_cascade(cfg, sink)?),
        ScenarioKind::LorentzianComparison => {
            ScenarioResult::LorentzianComparison(run_lorentzian_comparison(cfg, sink)?)
        }
    })
}

/// Runs `kind` with manifest output, validating only what that kind needs.
pub fn run_as(cfg: &ScenarioConfig, kind: ScenarioKind, opts: &RunOptions) -> Result<ScenarioResult> {
    let mut sink = OutputSink::new(opts.out_dir)?;
    let result = run_kind(cfg, kind, &mut sink)?;
    write_manifest(&mut sink, cfg, opts.overrides, opts.threads, &result.summary()?)?;
    Ok(result)
}
