use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Boundary condition of the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Ring,
}

/// Bose-Hubbard waveguide of coupled cavities. Energies are in units of the
/// hopping, the nonlinearity enters with the attractive `-U/2` convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec<T> {
    pub n_sites: usize,
    pub hopping: T,
    pub nonlinearity: T,
    #[serde(default)]
    pub boundary: Boundary,
}

impl<T: Real> LatticeSpec<T> {
    pub fn new(n_sites: usize, hopping: T, nonlinearity: T) -> Result<Self> {
        let spec = Self {
            n_sites,
            hopping,
            nonlinearity,
            boundary: Boundary::Open,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ring(n_sites: usize, hopping: T, nonlinearity: T) -> Result<Self> {
        Ok(Self::new(n_sites, hopping, nonlinearity)?.with_boundary(Boundary::Ring))
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 8 {
            return Err(Error::InvalidParameter(format!(
                "n_sites = {} must be at least 8",
                self.n_sites
            )));
        }
        if !(self.hopping > T::zero()) || !self.hopping.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "hopping = {} must be positive",
                self.hopping
            )));
        }
        if !(self.nonlinearity >= T::zero()) || !self.nonlinearity.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "nonlinearity = {} must be non-negative",
                self.nonlinearity
            )));
        }
        Ok(())
    }

    /// Neighbour of `site` in direction `step` (+1 or -1), `None` past an
    /// open edge.
    #[inline]
    pub fn neighbor(&self, site: usize, step: isize) -> Option<usize> {
        let n = self.n_sites as isize;
        let s = site as isize + step;
        match self.boundary {
            Boundary::Open => (0..n).contains(&s).then_some(s as usize),
            Boundary::Ring => Some(s.rem_euclid(n) as usize),
        }
    }

    /// Signed displacement from `from` to `to`. On a ring this is the
    /// minimal image in `(-N/2, N/2]`.
    #[inline]
    pub fn displacement(&self, from: usize, to: usize) -> isize {
        let d = to as isize - from as isize;
        match self.boundary {
            Boundary::Open => d,
            Boundary::Ring => {
                let n = self.n_sites as isize;
                let mut m = d.rem_euclid(n);
                if 2 * m > n {
                    m -= n;
                }
                m
            }
        }
    }
}

/// One physical contact between an emitter and the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingPoint<T> {
    pub site: usize,
    pub strength: T,
    pub phase: T,
}

/// Two-level emitter coupled to one (small atom) or several (giant atom)
/// waveguide sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec<T> {
    pub detuning: T,
    pub couplings: Vec<CouplingPoint<T>>,
}

impl<T: Real> EmitterSpec<T> {
    pub fn small_atom(site: usize, strength: T, detuning: T) -> Self {
        Self {
            detuning,
            couplings: vec![CouplingPoint {
                site,
                strength,
                phase: T::zero(),
            }],
        }
    }

    /// Giant atom with coupling points at `center + offset` for each
    /// `(offset, strength, phase)`.
    pub fn giant(center: usize, detuning: T, points: &[(isize, T, T)]) -> Result<Self> {
        let couplings = points
            .iter()
            .map(|&(off, strength, phase)| {
                let s = center as isize + off;
                if s < 0 {
                    return Err(Error::InvalidParameter(format!(
                        "coupling offset {off} leaves the lattice"
                    )));
                }
                Ok(CouplingPoint {
                    site: s as usize,
                    strength,
                    phase,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            detuning,
            couplings,
        })
    }

    pub fn validate(&self, lattice: &LatticeSpec<T>) -> Result<()> {
        if self.couplings.is_empty() {
            return Err(Error::InvalidParameter(
                "emitter needs at least one coupling point".into(),
            ));
        }
        for c in &self.couplings {
            if c.site >= lattice.n_sites {
                return Err(Error::InvalidParameter(format!(
                    "coupling site {} outside lattice of {} sites",
                    c.site, lattice.n_sites
                )));
            }
            if !(c.strength >= T::zero()) || !c.strength.is_finite() || !c.phase.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "coupling strength {} / phase {} invalid",
                    c.strength, c.phase
                )));
            }
        }
        let two = T::lit(2.0);
        if !(self.detuning.abs() > two * lattice.hopping) {
            return Err(Error::InvalidParameter(format!(
                "|detuning| = {} must exceed 2J (far-detuned regime)",
                self.detuning.abs()
            )));
        }
        Ok(())
    }

    pub fn leftmost_site(&self) -> usize {
        self.couplings.iter().map(|c| c.site).min().unwrap_or(0)
    }

    pub fn rightmost_site(&self) -> usize {
        self.couplings.iter().map(|c| c.site).max().unwrap_or(0)
    }

    /// Mean coupling site, used as the reference point of the emitter.
    pub fn center(&self) -> T {
        let n = T::from_usize_lossy(self.couplings.len().max(1));
        self.couplings
            .iter()
            .map(|c| T::from_usize_lossy(c.site))
            .sum::<T>()
            / n
    }

    /// Spatial reflection `n -> n_sites - 1 - n`, phases attached to their
    /// (moved) coupling points.
    pub fn reflected(&self, lattice: &LatticeSpec<T>) -> Self {
        let mut couplings: Vec<_> = self
            .couplings
            .iter()
            .map(|c| CouplingPoint {
                site: lattice.n_sites - 1 - c.site,
                ..*c
            })
            .collect();
        couplings.reverse();
        Self {
            detuning: self.detuning,
            couplings,
        }
    }

    pub fn with_strength_scale(&self, g: T) -> Self {
        let mut out = self.clone();
        for c in &mut out.couplings {
            c.strength = g;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_invalid_lattices() {
        assert!(LatticeSpec::<f64>::new(7, 1.0, 6.0).is_err());
        assert!(LatticeSpec::<f64>::new(8, 0.0, 6.0).is_err());
        assert!(LatticeSpec::<f64>::new(8, 1.0, -1.0).is_err());
        assert!(LatticeSpec::<f64>::new(8, 1.0, 0.0).is_ok());
    }

    #[test]
    fn neighbors_respect_boundary() {
        let open = LatticeSpec::<f64>::new(10, 1.0, 6.0).unwrap();
        assert_eq!(open.neighbor(0, -1), None);
        assert_eq!(open.neighbor(9, 1), None);
        assert_eq!(open.neighbor(4, 1), Some(5));
        let ring = open.with_boundary(Boundary::Ring);
        assert_eq!(ring.neighbor(0, -1), Some(9));
        assert_eq!(ring.neighbor(9, 1), Some(0));
        assert_eq!(ring.displacement(9, 0), 1);
        assert_eq!(ring.displacement(0, 9), -1);
        assert_eq!(ring.displacement(0, 5), 5);
    }

    #[test]
    fn emitter_validation() {
        let lat = LatticeSpec::<f64>::new(20, 1.0, 6.0).unwrap();
        assert!(EmitterSpec::small_atom(5, 0.1, -6.633).validate(&lat).is_ok());
        assert!(EmitterSpec::small_atom(25, 0.1, -6.633).validate(&lat).is_err());
        assert!(EmitterSpec::small_atom(5, 0.1, -1.5).validate(&lat).is_err());
        assert!(EmitterSpec::small_atom(5, -0.1, -6.633).validate(&lat).is_err());
        let empty = EmitterSpec::<f64> {
            detuning: -6.6,
            couplings: vec![],
        };
        assert!(empty.validate(&lat).is_err());
    }

    #[test]
    fn reflection_is_an_involution() {
        let lat = LatticeSpec::<f64>::new(20, 1.0, 6.0).unwrap();
        let e = EmitterSpec::giant(10, -6.6, &[(-1, 0.3, -0.2), (0, 0.3, 0.0), (1, 0.3, 0.2)])
            .unwrap();
        let r = e.reflected(&lat);
        assert_eq!(r.leftmost_site(), 8);
        assert_eq!(r.couplings[0].phase, 0.2);
        assert_eq!(r.reflected(&lat), e);
    }
}
