//! Files written by scenario runs: CSV tables, gnuplot grids and the run
//! manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::hilbert::observables::write_population_csv;
use crate::hilbert::PopulationReport;

use super::config::ScenarioConfig;
use super::numeric::SpaceTimeMap;

/// Collects output files under one directory and hashes them for the
/// manifest.
#[derive(Debug, Clone)]
pub struct OutputSink {
    dir: Option<PathBuf>,
    files: Vec<PathBuf>,
}

impl OutputSink {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            files: Vec::new(),
        })
    }

    /// A sink that writes nothing.
    pub fn discard() -> Self {
        Self {
            dir: None,
            files: Vec::new(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Records a file written directly under the sink's directory.
    pub fn track(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    /// Writes `name` with `f` when the sink has a directory.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = dir.join(name);
        let mut w = BufWriter::new(fs::File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    pub fn write_series(
        &mut self,
        name: &str,
        series: &[PopulationReport<f64>],
        n_emitters: usize,
    ) -> Result<()> {
        self.write_with(name, |w| write_population_csv(w, series, n_emitters))
    }

    /// gnuplot `splot` grid: `time site value` rows, one block per time.
    pub fn write_map(&mut self, name: &str, map: &SpaceTimeMap) -> Result<()> {
        self.write_with(name, |w| {
            writeln!(w, "# time site photon_number")?;
            for (t, row) in map.times.iter().zip(&map.rows) {
                for (n, v) in row.iter().enumerate() {
                    writeln!(w, "{:.12e} {} {:.12e}", t, n, v)?;
                }
                writeln!(w)?;
            }
            Ok(())
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Identifies the build: crate version plus a hash of the resolved
/// configuration.
pub fn version_hash(resolved_toml: &str) -> String {
    let digest = sha256_hex(format!("{}\n{}", env!("CARGO_PKG_VERSION"), resolved_toml).as_bytes());
    format!("{}+{}", env!("CARGO_PKG_VERSION"), &digest[..16])
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub scenario: &'a str,
    pub kind: super::config::ScenarioKind,
    pub version: String,
    pub threads: usize,
    pub overrides: &'a [String],
    pub resolved_config: &'a ScenarioConfig,
    pub summary: &'a serde_json::Value,
    pub outputs: Vec<ManifestFile>,
}

/// Writes `manifest.json` listing every output with its hash.
pub fn write_manifest(
    sink: &mut OutputSink,
    config: &ScenarioConfig,
    overrides: &[String],
    threads: usize,
    summary: &serde_json::Value,
) -> Result<()> {
    let Some(dir) = sink.dir().map(Path::to_path_buf) else {
        return Ok(());
    };
    let resolved = config.to_toml()?;
    fs::write(dir.join("resolved.toml"), &resolved)?;
    sink.files.push(dir.join("resolved.toml"));
    let mut outputs = Vec::new();
    for f in sink.files() {
        let bytes = fs::read(f)?;
        outputs.push(ManifestFile {
            file: f
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = Manifest {
        scenario: &config.scenario,
        kind: config.kind,
        version: version_hash(&resolved),
        threads,
        overrides,
        resolved_config: config,
        summary,
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}
