use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes per panel unless a space asks for something else.
pub const DEFAULT_NODES_PER_PANEL: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMeasure {
    Counting,
    Lebesgue,
}

/// Where observations live and how integrals over them are computed.
///
/// Continuous spaces carry their quadrature layout: `cuts` is the strictly
/// increasing list of panel boundaries, so the integration window is
/// `[cuts[0], cuts[last]]`. Densities with unbounded support are expected to
/// put negligible mass outside that window; points outside it are still
/// legal observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleSpace {
    Discrete {
        atoms: Vec<f64>,
    },
    Continuous1d {
        cuts: Vec<f64>,
        #[serde(default = "default_nodes")]
        nodes_per_panel: usize,
    },
    Product {
        base: Box<SampleSpace>,
        arity: usize,
    },
}

fn default_nodes() -> usize {
    DEFAULT_NODES_PER_PANEL
}

impl SampleSpace {
    pub fn discrete(atoms: Vec<f64>) -> Result<Self> {
        let space = SampleSpace::Discrete { atoms };
        space.validate()?;
        Ok(space)
    }

    /// Symbols `0, 1, …, m-1`.
    pub fn symbols(m: usize) -> Result<Self> {
        Self::discrete((0..m).map(|i| i as f64).collect())
    }

    pub fn continuous_uniform(lo: f64, hi: f64, panels: usize) -> Result<Self> {
        if panels == 0 || !(lo < hi) {
            return Err(Error::invalid("continuous window needs lo < hi and panels >= 1"));
        }
        let width = (hi - lo) / panels as f64;
        let mut cuts: Vec<f64> = (0..panels).map(|i| lo + width * i as f64).collect();
        cuts.push(hi);
        Self::continuous_with_cuts(cuts, DEFAULT_NODES_PER_PANEL)
    }

    pub fn continuous_with_cuts(cuts: Vec<f64>, nodes_per_panel: usize) -> Result<Self> {
        let space = SampleSpace::Continuous1d {
            cuts,
            nodes_per_panel,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn product(base: SampleSpace, arity: usize) -> Result<Self> {
        let space = SampleSpace::Product {
            base: Box::new(base),
            arity,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SampleSpace::Discrete { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::invalid("discrete space needs at least one atom"));
                }
                if atoms.iter().any(|a| !a.is_finite()) {
                    return Err(Error::invalid("discrete atoms must be finite"));
                }
                let mut sorted = atoms.clone();
                sorted.sort_by(f64::total_cmp);
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::invalid("discrete atoms must be distinct"));
                }
                Ok(())
            }
            SampleSpace::Continuous1d {
                cuts,
                nodes_per_panel,
            } => {
                if cuts.len() < 2 {
                    return Err(Error::invalid("continuous space needs at least two cuts"));
                }
                if cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid("cuts must be finite and strictly increasing"));
                }
                if *nodes_per_panel == 0 || *nodes_per_panel > 512 {
                    return Err(Error::invalid("nodes_per_panel must be in 1..=512"));
                }
                Ok(())
            }
            SampleSpace::Product { base, arity } => {
                if *arity == 0 {
                    return Err(Error::invalid("product arity must be at least 1"));
                }
                if matches!(**base, SampleSpace::Product { .. }) {
                    return Err(Error::invalid("nested product spaces are not supported"));
                }
                base.validate()
            }
        }
    }

    pub fn reference_measure(&self) -> ReferenceMeasure {
        match self {
            SampleSpace::Discrete { .. } => ReferenceMeasure::Counting,
            SampleSpace::Continuous1d { .. } => ReferenceMeasure::Lebesgue,
            SampleSpace::Product { base, .. } => base.reference_measure(),
        }
    }

    /// Number of real coordinates in one point.
    pub fn arity(&self) -> usize {
        match self {
            SampleSpace::Product { arity, .. } => *arity,
            _ => 1,
        }
    }

    /// The one-dimensional factor of this space.
    pub fn base(&self) -> &SampleSpace {
        match self {
            SampleSpace::Product { base, .. } => base,
            other => other,
        }
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        if point.len() != self.arity() {
            return false;
        }
        match self.base() {
            SampleSpace::Discrete { atoms } => point.iter().all(|x| atoms.contains(x)),
            _ => point.iter().all(|x| x.is_finite()),
        }
    }
}
