use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{Boundary, EmitterSpec, LatticeSpec};
use crate::scalar::Real;

/// Photon occupation (sorted site list, at most three photons) together with
/// the emitter excitation pattern (bit `i` set when emitter `i` is excited).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub pattern: u8,
    count: u8,
    sites: [u32; 3],
}

impl Configuration {
    /// Builds a configuration from an arbitrary (unsorted) photon list.
    pub fn new(pattern: u8, photons: &[u32]) -> Self {
        assert!(photons.len() <= 3, "at most three photons supported");
        let mut sites = [u32::MAX; 3];
        sites[..photons.len()].copy_from_slice(photons);
        sites[..photons.len()].sort_unstable();
        Self {
            pattern,
            count: photons.len() as u8,
            sites,
        }
    }

    #[inline]
    pub fn photons(&self) -> &[u32] {
        &self.sites[..self.count as usize]
    }

    #[inline]
    pub fn photon_count(&self) -> usize {
        self.count as usize
    }

    #[inline]
    pub fn excited(&self, emitter: usize) -> bool {
        self.pattern >> emitter & 1 == 1
    }

    #[inline]
    pub fn excited_count(&self) -> usize {
        self.pattern.count_ones() as usize
    }

    #[inline]
    pub fn occupation(&self, site: u32) -> usize {
        self.photons().iter().filter(|&&s| s == site).count()
    }

    /// Moves one photon from `from` to `to`.
    pub fn hop(&self, from: u32, to: u32) -> Self {
        let mut p = [0u32; 3];
        let n = self.count as usize;
        p[..n].copy_from_slice(self.photons());
        let i = p[..n].iter().position(|&s| s == from).expect("photon present");
        p[i] = to;
        Self::new(self.pattern, &p[..n])
    }

    /// Adds a photon at `site` and sets the emitter pattern to `pattern`.
    pub fn with_added(&self, site: u32, pattern: u8) -> Self {
        let mut p = [0u32; 3];
        let n = self.count as usize;
        p[..n].copy_from_slice(self.photons());
        p[n] = site;
        Self::new(pattern, &p[..n + 1])
    }

    /// Removes one photon at `site` and sets the emitter pattern.
    pub fn with_removed(&self, site: u32, pattern: u8) -> Self {
        let mut p = [0u32; 3];
        let n = self.count as usize;
        p[..n].copy_from_slice(self.photons());
        let i = p[..n].iter().position(|&s| s == site).expect("photon present");
        p.copy_within(i + 1..n, i);
        Self::new(pattern, &p[..n - 1])
    }
}

/// Photon-spread truncation, applied only to configurations with three
/// photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TruncationRule {
    pub max_pairwise_photon_spread: Option<usize>,
}

/// One block of fixed emitter pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SectorInfo {
    pub pattern: u8,
    pub photons: usize,
    pub offset: usize,
    pub len: usize,
}

/// Default cap on the number of basis states.
pub const DEFAULT_STATE_BUDGET: usize = 40_000_000;

/// Enumerated excitation-number sector.
#[derive(Debug, Clone)]
pub struct SectorBasis<T> {
    pub lattice: LatticeSpec<T>,
    pub emitters: Vec<EmitterSpec<T>>,
    pub total_excitations: usize,
    pub truncation: TruncationRule,
    states: Vec<Configuration>,
    index: HashMap<Configuration, u32>,
    sectors: Vec<SectorInfo>,
}

/// Largest distance between any two photons (minimal arc on a ring).
pub fn photon_spread<T: Real>(lattice: &LatticeSpec<T>, photons: &[u32]) -> usize {
    if photons.len() < 2 {
        return 0;
    }
    let first = photons[0] as usize;
    let last = photons[photons.len() - 1] as usize;
    match lattice.boundary {
        Boundary::Open => last - first,
        Boundary::Ring => {
            let n = lattice.n_sites;
            let mut max_gap = n - last + first;
            for w in photons.windows(2) {
                max_gap = max_gap.max((w[1] - w[0]) as usize);
            }
            n - max_gap
        }
    }
}

fn block_estimate(n: usize, photons: usize, spread: Option<usize>) -> usize {
    match photons {
        0 => 1,
        1 => n,
        2 => n * (n + 1) / 2,
        _ => match spread {
            Some(r) => n.saturating_mul((r + 1) * (r + 2) / 2),
            None => n
                .saturating_mul(n + 1)
                .saturating_mul(n + 2)
                / 6,
        },
    }
}

impl<T: Real> SectorBasis<T> {
    pub fn enumerate(
        lattice: &LatticeSpec<T>,
        emitters: &[EmitterSpec<T>],
        total_excitations: usize,
        truncation: TruncationRule,
    ) -> Result<Self> {
        Self::enumerate_with_budget(
            lattice,
            emitters,
            total_excitations,
            truncation,
            DEFAULT_STATE_BUDGET,
        )
    }

    pub fn enumerate_with_budget(
        lattice: &LatticeSpec<T>,
        emitters: &[EmitterSpec<T>],
        total_excitations: usize,
        truncation: TruncationRule,
        budget: usize,
    ) -> Result<Self> {
        lattice.validate()?;
        if !(1..=3).contains(&total_excitations) {
            return Err(Error::InvalidParameter(format!(
                "total_excitations = {total_excitations} must be 1, 2 or 3"
            )));
        }
        if emitters.len() > 4 {
            return Err(Error::InvalidParameter("at most four emitters".into()));
        }
        for e in emitters {
            e.validate(lattice)?;
        }
        let n = lattice.n_sites;
        let spread = truncation.max_pairwise_photon_spread;
        let patterns: Vec<(u8, usize)> = (0u8..(1u8 << emitters.len()))
            .filter_map(|p| {
                let exc = p.count_ones() as usize;
                (exc <= total_excitations).then_some((p, total_excitations - exc))
            })
            .collect();
        let estimated: usize = patterns
            .iter()
            .map(|&(_, ph)| block_estimate(n, ph, spread))
            .fold(0usize, |a, b| a.saturating_add(b));
        if estimated > budget {
            return Err(Error::BasisTooLarge { estimated, budget });
        }
        let mut states = Vec::with_capacity(estimated);
        let mut sectors = Vec::new();
        for &(pattern, photons) in &patterns {
            let offset = states.len();
            let n32 = n as u32;
            match photons {
                0 => states.push(Configuration::new(pattern, &[])),
                1 => states.extend((0..n32).map(|a| Configuration::new(pattern, &[a]))),
                2 => {
                    for a in 0..n32 {
                        for b in a..n32 {
                            states.push(Configuration::new(pattern, &[a, b]));
                        }
                    }
                }
                3 => {
                    let mut block = Vec::new();
                    match (spread, lattice.boundary) {
                        (None, _) => {
                            for a in 0..n32 {
                                for b in a..n32 {
                                    for c in b..n32 {
                                        block.push(Configuration::new(pattern, &[a, b, c]));
                                    }
                                }
                            }
                        }
                        (Some(r), Boundary::Open) => {
                            let r = r as u32;
                            for a in 0..n32 {
                                for b in a..n32.min(a + r + 1) {
                                    for c in b..n32.min(a + r + 1) {
                                        block.push(Configuration::new(pattern, &[a, b, c]));
                                    }
                                }
                            }
                        }
                        (Some(r), Boundary::Ring) => {
                            let r = r as u32;
                            for a in 0..n32 {
                                for db in 0..=r {
                                    for dc in db..=r {
                                        let cfg = Configuration::new(
                                            pattern,
                                            &[a, (a + db) % n32, (a + dc) % n32],
                                        );
                                        if photon_spread(lattice, cfg.photons()) <= r as usize {
                                            block.push(cfg);
                                        }
                                    }
                                }
                            }
                            block.sort_unstable();
                            block.dedup();
                        }
                    }
                    states.extend(block);
                }
                _ => unreachable!(),
            }
            sectors.push(SectorInfo {
                pattern,
                photons,
                offset,
                len: states.len() - offset,
            });
        }
        if states.len() > u32::MAX as usize {
            return Err(Error::BasisTooLarge {
                estimated: states.len(),
                budget: u32::MAX as usize,
            });
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, i as u32))
            .collect();
        log::debug!(
            "basis: {} states in {} sectors (N = {})",
            states.len(),
            sectors.len(),
            n
        );
        Ok(Self {
            lattice: *lattice,
            emitters: emitters.to_vec(),
            total_excitations,
            truncation,
            states,
            index,
            sectors,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    #[inline]
    pub fn states(&self) -> &[Configuration] {
        &self.states
    }

    #[inline]
    pub fn state(&self, i: usize) -> &Configuration {
        &self.states[i]
    }

    #[inline]
    pub fn index_of(&self, cfg: &Configuration) -> Option<usize> {
        self.index.get(cfg).map(|&i| i as usize)
    }

    pub fn sectors(&self) -> &[SectorInfo] {
        &self.sectors
    }

    pub fn sector(&self, pattern: u8) -> Option<&SectorInfo> {
        self.sectors.iter().find(|s| s.pattern == pattern)
    }

    /// Pattern with every emitter excited.
    pub fn all_excited_pattern(&self) -> u8 {
        ((1u16 << self.emitters.len()) - 1) as u8
    }

    /// SHA-256 over the physical parameters and the full state list.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.lattice).unwrap_or_default());
        h.update(serde_json::to_vec(&self.emitters).unwrap_or_default());
        h.update((self.total_excitations as u64).to_le_bytes());
        h.update(serde_json::to_vec(&self.truncation).unwrap_or_default());
        for s in &self.states {
            h.update([s.pattern, s.count]);
            for p in s.photons() {
                h.update(p.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}
