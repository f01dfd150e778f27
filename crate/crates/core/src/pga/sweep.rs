use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{CouplingPoint, EmitterSpec, LatticeSpec};
use crate::pga::kernel::build_kernel;
use crate::pga::solver::{solve_momentum_space, solve_real_space, Incidence, ScatteringAmplitudes};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    #[default]
    RealSpace,
    MomentumSpace,
}

/// One contact of an emitter whose strength and phase are set by a sweep:
/// the contact gets strength `strength_scale * g` and phase `phase_scale * phi`
/// plus `phase_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplatePoint<T> {
    pub offset: i64,
    pub strength_scale: T,
    pub phase_scale: T,
    pub phase_offset: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterTemplate<T> {
    pub center: usize,
    pub detuning: T,
    pub points: Vec<TemplatePoint<T>>,
}

impl<T: Real> EmitterTemplate<T> {
    /// Three neighbouring contacts of equal strength with phases
    /// `{-phi, 0, phi}`.
    pub fn three_point_antisymmetric(center: usize, detuning: T) -> Self {
        let p = |offset: i64, s: f64| TemplatePoint {
            offset,
            strength_scale: T::one(),
            phase_scale: T::lit(s),
            phase_offset: T::zero(),
        };
        Self {
            center,
            detuning,
            points: vec![p(-1, -1.0), p(0, 0.0), p(1, 1.0)],
        }
    }

    /// Three neighbouring contacts with phases `{phi, 0, phi}`.
    pub fn three_point_symmetric(center: usize, detuning: T) -> Self {
        let mut t = Self::three_point_antisymmetric(center, detuning);
        t.points[0].phase_scale = T::one();
        t
    }

    pub fn small_atom(center: usize, detuning: T) -> Self {
        Self {
            center,
            detuning,
            points: vec![TemplatePoint {
                offset: 0,
                strength_scale: T::one(),
                phase_scale: T::zero(),
                phase_offset: T::zero(),
            }],
        }
    }

    pub fn instantiate(&self, strength: T, phase: T) -> Result<EmitterSpec<T>> {
        let couplings = self
            .points
            .iter()
            .map(|p| {
                let site = self.center as i64 + p.offset;
                if site < 0 {
                    return Err(Error::InvalidParameter(format!(
                        "template contact at negative site {site}"
                    )));
                }
                Ok(CouplingPoint {
                    site: site as usize,
                    strength: p.strength_scale * strength,
                    phase: p.phase_scale * phase + p.phase_offset,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EmitterSpec {
            detuning: self.detuning,
            couplings,
        })
    }
}

/// Solves one emitter at incident momentum `k0`.
pub fn solve<T: Real>(
    emitter: &EmitterSpec<T>,
    lattice: &LatticeSpec<T>,
    k0: T,
    cutoff: usize,
    formulation: Formulation,
    incidence: Incidence,
) -> Result<ScatteringAmplitudes<T>> {
    let kernel = build_kernel(emitter, k0, lattice, cutoff)?;
    match formulation {
        Formulation::RealSpace => solve_real_space(&kernel, incidence),
        Formulation::MomentumSpace => solve_momentum_space(&kernel, incidence),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub strength: T,
    pub phase: T,
    pub transmission: T,
    pub reflection: T,
    pub forward_doublon: T,
    pub backward_doublon: T,
    pub emitter_proxy: T,
    pub flux_residual: T,
    /// Name of the error when the point could not be solved.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable<T> {
    pub rows: Vec<SweepRow<T>>,
    /// Index of the row with the largest forward doublon probability.
    pub argmax: Option<usize>,
}

impl<T: Real> SweepTable<T> {
    pub fn best(&self) -> Option<&SweepRow<T>> {
        self.argmax.map(|i| &self.rows[i])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "g,phi,t2,r2,u_plus2,u_minus2,emitter_proxy,flux_residual,error")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.3e},{}",
                r.strength.as_f64(),
                r.phase.as_f64(),
                r.transmission.as_f64(),
                r.reflection.as_f64(),
                r.forward_doublon.as_f64(),
                r.backward_doublon.as_f64(),
                r.emitter_proxy.as_f64(),
                r.flux_residual.as_f64(),
                r.error.as_deref().unwrap_or("")
            )?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Evaluates the template on the tensor grid `strengths x phases` (phase
/// fastest). Failing points are kept with their error name and NaN values.
#[allow(clippy::too_many_arguments)]
pub fn sweep_solve<T: Real>(
    template: &EmitterTemplate<T>,
    lattice: &LatticeSpec<T>,
    k0: T,
    cutoff: usize,
    strengths: &[T],
    phases: &[T],
    formulation: Formulation,
) -> SweepTable<T> {
    let points: Vec<(T, T)> = strengths
        .iter()
        .flat_map(|&g| phases.iter().map(move |&p| (g, p)))
        .collect();
    let rows: Vec<SweepRow<T>> = points
        .par_iter()
        .map(|&(g, phi)| {
            let res = template
                .instantiate(g, phi)
                .and_then(|e| solve(&e, lattice, k0, cutoff, formulation, Incidence::FromLeft));
            match res {
                Ok(a) => SweepRow {
                    strength: g,
                    phase: phi,
                    transmission: a.transmission(),
                    reflection: a.reflection(),
                    forward_doublon: a.forward_doublon(),
                    backward_doublon: a.backward_doublon(),
                    emitter_proxy: a.emitter_proxy(),
                    flux_residual: a.flux_residual,
                    error: None,
                },
                Err(e) => SweepRow {
                    strength: g,
                    phase: phi,
                    transmission: T::nan(),
                    reflection: T::nan(),
                    forward_doublon: T::nan(),
                    backward_doublon: T::nan(),
                    emitter_proxy: T::nan(),
                    flux_residual: T::nan(),
                    error: Some(e.name().to_string()),
                },
            }
        })
        .collect();
    let argmax = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.error.is_none())
        .fold(None::<(usize, T)>, |best, (i, r)| match best {
            Some((_, v)) if v >= r.forward_doublon => best,
            _ => Some((i, r.forward_doublon)),
        })
        .map(|(i, _)| i);
    SweepTable { rows, argmax }
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub fn golden_section_max<T: Real>(mut a: T, mut b: T, tol: T, f: impl Fn(T) -> T) -> (T, T) {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = (a + b) / T::lit(2.0);
    (x, f(x))
}

/// Coordinate-wise golden-section refinement of `(g, phi)` starting from a
/// grid optimum, each coordinate searched within `+- step` of the current
/// point. Returns the refined point and its value.
pub fn refine_maximum<T: Real>(
    start: (T, T),
    step: (T, T),
    g_bounds: (T, T),
    tol: T,
    rounds: usize,
    f: impl Fn(T, T) -> T,
) -> (T, T, T) {
    let (mut g, mut phi) = start;
    let mut best = f(g, phi);
    for _ in 0..rounds {
        let lo = (g - step.0).max(g_bounds.0);
        let hi = (g + step.0).min(g_bounds.1);
        let (g_new, v) = golden_section_max(lo, hi, tol, |x| f(x, phi));
        if v > best {
            g = g_new;
            best = v;
        }
        let (p_new, v) = golden_section_max(phi - step.1, phi + step.1, tol, |x| f(g, x));
        if v > best {
            phi = p_new;
            best = v;
        }
    }
    (g, phi, best)
}
