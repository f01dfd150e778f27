//! Effective single-photon model: the emitter, dressed by virtual doublons,
//! acts as a nonlocal, non-Hermitian scatterer (a pseudo-giant atom) for
//! the photon. Photons that are absorbed come out as doublons moving left
//! or right.

pub mod kernel;
pub mod solver;
pub mod sweep;

pub use kernel::{build_kernel, PgaKernel, MIN_VELOCITY};
pub use solver::{
    flux_check, solve_momentum_space, solve_real_space, Incidence, ScatteringAmplitudes,
    MAX_CONDITION,
};
pub use sweep::{
    golden_section_max, refine_maximum, solve, sweep_solve, EmitterTemplate, Formulation,
    SweepRow, SweepTable, TemplatePoint,
};

use std::path::Path;

use crate::error::Result;
use crate::scalar::Real;

/// Writes a single solve as pretty JSON (complex numbers as `[re, im]`).
pub fn write_amplitudes_json<T: Real>(amps: &ScatteringAmplitudes<T>, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(amps)?;
    std::fs::write(path, text)?;
    Ok(())
}
