//! Scenario files: TOML with nested sections, angles as plain numbers or
//! `pi`-suffixed literals (`"0.05pi"`, `"-pi"`), and dotted `key=value`
//! overrides applied before validation.

use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hilbert::PhotonSplit;
use crate::lattice::{Boundary, CouplingPoint, EmitterSpec, LatticeSpec};
use crate::pga::{EmitterTemplate, Formulation, TemplatePoint};
use crate::propagator::Method;
use crate::wavepacket::{WavepacketKind, WavepacketSpec};

/// An angle in radians that deserializes from `0.3`, `"0.3"`, `"0.05pi"`,
/// `"pi"` or `"-pi"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Angle(pub f64);

impl Angle {
    pub fn parse(text: &str) -> std::result::Result<f64, String> {
        let t = text.trim();
        let bad = || format!("cannot read angle {text:?}");
        match t.strip_suffix("pi").or_else(|| t.strip_suffix("π")) {
            Some(coef) => {
                let coef = coef.trim().trim_end_matches('*');
                let c = match coef {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    c => c.parse::<f64>().map_err(|_| bad())?,
                };
                Ok(c * std::f64::consts::PI)
            }
            None => t.parse::<f64>().map_err(|_| bad()),
        }
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Angle;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a pi-suffixed literal such as \"0.05pi\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Angle, E> {
                Ok(Angle(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Angle, E> {
                Ok(Angle(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Angle, E> {
                Ok(Angle(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Angle, E> {
                Angle::parse(v).map(Angle).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// A list of values, or `count` evenly spaced values from `start` to `stop`
/// inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<Angle>),
    Linspace { start: Angle, stop: Angle, count: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.iter().map(|a| a.0).collect(),
            Grid::Linspace { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![start.0],
                n => (0..*n)
                    .map(|i| start.0 + (stop.0 - start.0) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Bands,
    Solve,
    SingleEmitterSweep,
    EvolutionMap,
    RgaOptimum,
    Cascade,
    LorentzianComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub n_sites: usize,
    #[serde(default = "one")]
    pub hopping: f64,
    pub nonlinearity: f64,
    #[serde(default = "ring")]
    pub boundary: Boundary,
}

fn one() -> f64 {
    1.0
}
fn ring() -> Boundary {
    Boundary::Ring
}

impl LatticeSection {
    pub fn spec(&self) -> Result<LatticeSpec<f64>> {
        Ok(LatticeSpec::new(self.n_sites, self.hopping, self.nonlinearity)?
            .with_boundary(self.boundary))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// One contact.
    Small,
    /// Contacts at `{-1, 0, 1}` with phases `{-phi, 0, phi}`.
    Rga,
    /// Contacts at `{-1, 0, 1}` with phases `{phi, 0, phi}`.
    RgaSymmetric,
    /// Explicit `points`.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSection {
    pub offset: i64,
    #[serde(default = "one")]
    pub strength_scale: f64,
    #[serde(default)]
    pub phase_scale: f64,
    #[serde(default)]
    pub phase_offset: Angle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSection {
    pub name: String,
    /// Central site; defaults to the middle of the lattice.
    #[serde(default)]
    pub center: Option<usize>,
    pub detuning: f64,
    pub template: TemplateKind,
    pub g: f64,
    #[serde(default)]
    pub phi: Angle,
    #[serde(default)]
    pub points: Vec<PointSection>,
}

impl EmitterSection {
    pub fn center_site(&self, lattice: &LatticeSpec<f64>) -> usize {
        self.center.unwrap_or(lattice.n_sites / 2)
    }

    pub fn template(&self, lattice: &LatticeSpec<f64>) -> Result<EmitterTemplate<f64>> {
        let c = self.center_site(lattice);
        Ok(match self.template {
            TemplateKind::Small => EmitterTemplate::small_atom(c, self.detuning),
            TemplateKind::Rga => EmitterTemplate::three_point_antisymmetric(c, self.detuning),
            TemplateKind::RgaSymmetric => EmitterTemplate::three_point_symmetric(c, self.detuning),
            TemplateKind::Custom => {
                if self.points.is_empty() {
                    return Err(Error::config(format!(
                        "emitter {:?}: custom template needs points",
                        self.name
                    )));
                }
                EmitterTemplate {
                    center: c,
                    detuning: self.detuning,
                    points: self
                        .points
                        .iter()
                        .map(|p| TemplatePoint {
                            offset: p.offset,
                            strength_scale: p.strength_scale,
                            phase_scale: p.phase_scale,
                            phase_offset: p.phase_offset.0,
                        })
                        .collect(),
                }
            }
        })
    }

    pub fn spec(&self, lattice: &LatticeSpec<f64>) -> Result<EmitterSpec<f64>> {
        let e = self.template(lattice)?.instantiate(self.g, self.phi.0)?;
        e.validate(lattice)?;
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    pub kind: WavepacketKind,
    pub k0: Angle,
    #[serde(default)]
    pub width: f64,
    #[serde(default)]
    pub x0: f64,
}

impl PacketSection {
    pub fn spec(&self) -> WavepacketSpec<f64> {
        WavepacketSpec {
            kind: self.kind,
            center_momentum: self.k0.0,
            width: self.width,
            center_position: self.x0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    #[serde(default = "default_step")]
    pub time_step: f64,
    /// Defaults to one round trip of the ring, `N / v_k`.
    #[serde(default)]
    pub total_time: Option<f64>,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    /// Number of frames of the population series and space-time map.
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default = "default_krylov")]
    pub krylov_dim: usize,
}

fn default_step() -> f64 {
    10.0
}
fn default_tol() -> f64 {
    1e-10
}
fn default_frames() -> usize {
    40
}
fn default_krylov() -> usize {
    30
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            time_step: default_step(),
            total_time: None,
            method: Method::Chebyshev,
            tolerance: default_tol(),
            frames: default_frames(),
            krylov_dim: default_krylov(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSection {
    #[serde(default = "momentum_split")]
    pub photon_split: PhotonSplit,
    /// Sites beyond the outer contacts still counted as the emitter region.
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "two")]
    pub doublon_cutoff: usize,
    #[serde(default = "two")]
    pub triplon_cutoff: usize,
    /// Packet widths kept free between the packet and every contact.
    #[serde(default = "default_clearance")]
    pub clearance_factor: f64,
}

fn momentum_split() -> PhotonSplit {
    PhotonSplit::Momentum
}
fn default_margin() -> f64 {
    4.0
}
fn two() -> usize {
    2
}
fn default_clearance() -> f64 {
    5.0
}

impl Default for ObservableSection {
    fn default() -> Self {
        Self {
            photon_split: momentum_split(),
            margin: default_margin(),
            doublon_cutoff: 2,
            triplon_cutoff: 2,
            clearance_factor: default_clearance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub g: Grid,
    /// Phase grid; the emitter's own `phi` when absent.
    #[serde(default)]
    pub phi: Option<Grid>,
    #[serde(default = "three")]
    pub cutoff: usize,
    #[serde(default)]
    pub formulation: Formulation,
    /// Run the exact dynamics for every `g` as well.
    #[serde(default = "yes")]
    pub numeric: bool,
}

fn three() -> usize {
    3
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimumSection {
    pub g: Grid,
    pub phi: Grid,
    #[serde(default = "three")]
    pub cutoff: usize,
    #[serde(default = "default_g_tol")]
    pub g_tolerance: f64,
    #[serde(default = "default_phi_tol")]
    pub phi_tolerance: Angle,
    /// Exact evolution at the refined optimum.
    #[serde(default = "yes")]
    pub verify: bool,
}

fn default_g_tol() -> f64 {
    1e-3
}
fn default_phi_tol() -> Angle {
    Angle(1e-3 * std::f64::consts::PI)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeSection {
    /// Largest pairwise spread kept in the three-photon sector.
    #[serde(default = "default_r_max")]
    pub r_max: usize,
    /// Spread used for the truncation check; no check when absent.
    #[serde(default)]
    pub convergence_r_max: Option<usize>,
    #[serde(default = "default_conv_tol")]
    pub convergence_tolerance: f64,
    /// Relative-coordinate truncation for the triplon band.
    #[serde(default = "default_band_r")]
    pub band_r_max: usize,
    /// Detector site for arrival times; defaults to just past the second
    /// emitter's contact zone.
    #[serde(default)]
    pub detector: Option<usize>,
    /// Also run the single-photon control through the second emitter.
    #[serde(default = "yes")]
    pub control: bool,
}

fn default_r_max() -> usize {
    8
}
fn default_conv_tol() -> f64 {
    1e-3
}
fn default_band_r() -> usize {
    24
}

impl Default for CascadeSection {
    fn default() -> Self {
        Self {
            r_max: default_r_max(),
            convergence_r_max: None,
            convergence_tolerance: default_conv_tol(),
            band_r_max: default_band_r(),
            detector: None,
            control: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSection {
    pub g: Grid,
    /// `L_L` of the Lorentzian packet.
    pub lorentzian_width: f64,
    /// Front position of the Lorentzian packet; the Gaussian keeps its own.
    #[serde(default)]
    pub lorentzian_x0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSection {
    /// Number of momentum intervals on `[-pi, pi]`.
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "yes")]
    pub triplon: bool,
    #[serde(default = "default_band_r")]
    pub r_max: usize,
}

fn default_grid() -> usize {
    64
}

impl Default for BandSection {
    fn default() -> Self {
        Self {
            grid_points: default_grid(),
            triplon: true,
            r_max: default_band_r(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub description: String,
    pub lattice: LatticeSection,
    #[serde(default)]
    pub emitters: Vec<EmitterSection>,
    #[serde(default)]
    pub wavepacket: Option<PacketSection>,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub observables: ObservableSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub optimum: Option<OptimumSection>,
    #[serde(default)]
    pub cascade: Option<CascadeSection>,
    #[serde(default)]
    pub comparison: Option<ComparisonSection>,
    #[serde(default)]
    pub bands: Option<BandSection>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

/// A parsed scenario together with the overrides that were applied.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub overrides: Vec<String>,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

fn toml_error(text: &str, err: toml::de::Error) -> Error {
    let (line, column) = err
        .span()
        .map(|s| line_column(text, s.start))
        .unwrap_or((0, 0));
    Error::Config {
        message: err.message().to_string(),
        line,
        column,
    }
}

/// Parses a value written on the command line: any TOML literal, else a
/// bare string (so `0.05pi` works without quotes).
fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `path.to.key=value`. The first segment may name an emitter
/// (`rga.phi=0.05pi`); numeric segments index arrays (`emitters.1.g=0.2`).
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override {assignment:?} is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(format!("override key {path:?} is malformed")));
    }
    let value = parse_override_value(raw.trim());
    let (mut cur, rest): (&mut toml::Value, &[&str]) = {
        let named = root
            .get("emitters")
            .and_then(|e| e.as_array())
            .and_then(|arr| {
                arr.iter()
                    .position(|e| e.get("name").and_then(|n| n.as_str()) == Some(keys[0]))
            });
        match (named, root.contains_key(keys[0])) {
            (Some(i), false) => {
                let arr = root.get_mut("emitters").unwrap();
                (&mut arr.as_array_mut().unwrap()[i], &keys[1..])
            }
            _ => {
                if keys.len() == 1 {
                    root.insert(keys[0].to_string(), value);
                    return Ok(());
                }
                let entry = root
                    .entry(keys[0].to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                (entry, &keys[1..])
            }
        }
    };
    if rest.is_empty() {
        return Err(Error::config(format!("override {path:?} names a whole emitter")));
    }
    for (i, key) in rest.iter().enumerate() {
        let last = i + 1 == rest.len();
        cur = match cur {
            toml::Value::Table(t) => {
                if last {
                    t.insert(key.to_string(), value);
                    return Ok(());
                }
                t.entry(key.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::config(format!("override {path:?}: {key:?} is not an index")))?;
                let len = a.len();
                let slot = a.get_mut(idx).ok_or_else(|| {
                    Error::config(format!("override {path:?}: index {idx} out of {len}"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(Error::config(format!(
                    "override {path:?}: {key:?} is not inside a table"
                )))
            }
        };
    }
    unreachable!("loop returns on the last key")
}

impl ScenarioConfig {
    /// Parses TOML text and applies overrides. Unknown keys are errors.
    pub fn from_str_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, e))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let rendered = toml::to_string(&table).map_err(|e| Error::config(e.to_string()))?;
        let cfg: ScenarioConfig = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| toml_error(text, e))?
        } else {
            toml::from_str(&rendered).map_err(|e| {
                let mut err = toml_error(&rendered, e);
                if let Error::Config { message, .. } = &mut err {
                    message.push_str(" (after overrides)");
                }
                err
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a scenario file. A run manifest (`manifest.json`) is accepted
    /// too and replays its resolved configuration.
    pub fn load(path: &Path, overrides: &[String]) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let config = if is_json {
            let manifest: serde_json::Value = serde_json::from_str(&text)?;
            let resolved = manifest
                .get("resolved_config")
                .ok_or_else(|| Error::config("manifest has no resolved_config"))?;
            let cfg: ScenarioConfig = serde_json::from_value(resolved.clone())?;
            let toml_text = cfg.to_toml()?;
            Self::from_str_with_overrides(&toml_text, overrides)?
        } else {
            Self::from_str_with_overrides(&text, overrides)?
        };
        Ok(LoadedConfig {
            config,
            overrides: overrides.to_vec(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let lat = self.lattice.spec()?;
        let mut names = std::collections::HashSet::new();
        for e in &self.emitters {
            if !names.insert(e.name.as_str()) {
                return Err(Error::config(format!("duplicate emitter name {:?}", e.name)));
            }
            e.spec(&lat)?;
        }
        let needs = |what: &str, present: bool| -> Result<()> {
            if present {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "scenario kind {:?} needs a [{what}] section",
                    self.kind
                )))
            }
        };
        let emitters = |n: std::ops::RangeInclusive<usize>| -> Result<()> {
            if n.contains(&self.emitters.len()) {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "scenario kind {:?} needs {:?} emitters, found {}",
                    self.kind,
                    n,
                    self.emitters.len()
                )))
            }
        };
        match self.kind {
            ScenarioKind::Bands => {}
            ScenarioKind::Solve => {
                emitters(1..=1)?;
                needs("wavepacket", self.wavepacket.is_some())?;
            }
            ScenarioKind::SingleEmitterSweep => {
                emitters(1..=1)?;
                needs("wavepacket", self.wavepacket.is_some())?;
                needs("sweep", self.sweep.is_some())?;
            }
            ScenarioKind::EvolutionMap => {
                emitters(1..=1)?;
                needs("wavepacket", self.wavepacket.is_some())?;
            }
            ScenarioKind::RgaOptimum => {
                emitters(1..=1)?;
                needs("wavepacket", self.wavepacket.is_some())?;
                needs("optimum", self.optimum.is_some())?;
            }
            ScenarioKind::Cascade => {
                emitters(2..=2)?;
                needs("wavepacket", self.wavepacket.is_some())?;
            }
            ScenarioKind::LorentzianComparison => {
                emitters(1..=1)?;
                needs("wavepacket", self.wavepacket.is_some())?;
                needs("comparison", self.comparison.is_some())?;
            }
        }
        if let Some(p) = &self.wavepacket {
            if p.kind != WavepacketKind::PlaneWave && !(p.width > 0.0) {
                return Err(Error::config("wavepacket.width must be positive"));
            }
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<LatticeSpec<f64>> {
        self.lattice.spec()
    }

    pub fn emitter_specs(&self) -> Result<Vec<EmitterSpec<f64>>> {
        let lat = self.lattice()?;
        self.emitters.iter().map(|e| e.spec(&lat)).collect()
    }

    pub fn packet(&self) -> Result<WavepacketSpec<f64>> {
        self.wavepacket
            .as_ref()
            .map(|p| p.spec())
            .ok_or_else(|| Error::config("missing [wavepacket] section"))
    }
}

/// Contacts of an emitter as `(site, g, phase)` for reports.
pub fn describe_couplings(e: &EmitterSpec<f64>) -> Vec<(usize, f64, f64)> {
    e.couplings
        .iter()
        .map(|c: &CouplingPoint<f64>| (c.site, c.strength, c.phase))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const BASE: &str = r#"
scenario = "demo"
kind = "solve"

[lattice]
n_sites = 200
nonlinearity = 6.0

[[emitters]]
name = "rga"
detuning = -6.633
template = "rga"
g = 0.31
phi = "0.05pi"

[wavepacket]
kind = "gaussian"
k0 = "0.5pi"
width = 0.004
"#;

    #[test]
    fn angles_accept_pi_literals() {
        assert!((Angle::parse("0.05pi").unwrap() - 0.05 * PI).abs() < 1e-15);
        assert!((Angle::parse("-pi").unwrap() + PI).abs() < 1e-15);
        assert!((Angle::parse("pi").unwrap() - PI).abs() < 1e-15);
        assert!((Angle::parse("0.25").unwrap() - 0.25).abs() < 1e-15);
        assert!(Angle::parse("0.05 radians").is_err());
    }

    #[test]
    fn parses_and_applies_overrides() {
        let cfg = ScenarioConfig::from_str_with_overrides(BASE, &[]).unwrap();
        assert!((cfg.emitters[0].phi.0 - 0.05 * PI).abs() < 1e-15);
        assert_eq!(cfg.lattice.boundary, Boundary::Ring);
        let o = vec![
            "rga.phi=-0.1pi".to_string(),
            "lattice.n_sites=300".to_string(),
            "emitters.0.g=0.2".to_string(),
        ];
        let cfg = ScenarioConfig::from_str_with_overrides(BASE, &o).unwrap();
        assert!((cfg.emitters[0].phi.0 + 0.1 * PI).abs() < 1e-15);
        assert_eq!(cfg.lattice.n_sites, 300);
        assert_eq!(cfg.emitters[0].g, 0.2);
    }

    #[test]
    fn unknown_keys_are_fatal_with_position() {
        let text = BASE.replace("nonlinearity = 6.0", "nonlinearity = 6.0\nhoping = 1.0");
        match ScenarioConfig::from_str_with_overrides(&text, &[]) {
            Err(Error::Config { line, column, .. }) => {
                assert_eq!(line, 8);
                assert!(column >= 1);
            }
            other => panic!("expected config error, got {other:?}"),
        }
        let err = ScenarioConfig::from_str_with_overrides(BASE, &["lattice.bogus=1".into()]);
        assert!(matches!(err, Err(Error::Config { .. })));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig::from_str_with_overrides(BASE, &[]).unwrap();
        let again = ScenarioConfig::from_str_with_overrides(&cfg.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn grids() {
        let g = Grid::Linspace {
            start: Angle(0.0),
            stop: Angle(1.0),
            count: 5,
        };
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
