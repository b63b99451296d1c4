use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::space::SampleSpace;
use crate::error::{Error, Result};

/// An integrable power singularity `|x - at|^(-exponent)` with `0 < exponent < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singularity {
    pub at: f64,
    pub exponent: f64,
}

/// A log-density with respect to the reference measure of its space.
///
/// Points are slices of length equal to the space arity. Breakpoints and
/// singular points are one-dimensional coordinates; on a product space they
/// apply along every axis.
pub trait LogDensity: Send + Sync + fmt::Debug {
    fn log_density(&self, x: &[f64]) -> f64;

    /// Points where the density or one of its derivatives jumps.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn singularities(&self) -> Vec<Singularity> {
        Vec::new()
    }
}

type LogFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Adapter turning a closure into a [`LogDensity`].
#[derive(Clone)]
pub struct FnDensity {
    f: Arc<LogFn>,
    breakpoints: Vec<f64>,
    singularities: Vec<Singularity>,
}

impl FnDensity {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FnDensity {
            f: Arc::new(f),
            breakpoints: Vec::new(),
            singularities: Vec::new(),
        }
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    pub fn with_singularities(mut self, singularities: Vec<Singularity>) -> Self {
        self.singularities = singularities;
        self
    }
}

impl fmt::Debug for FnDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDensity")
            .field("breakpoints", &self.breakpoints)
            .field("singularities", &self.singularities)
            .finish_non_exhaustive()
    }
}

impl LogDensity for FnDensity {
    fn log_density(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }

    fn singularities(&self) -> Vec<Singularity> {
        self.singularities.clone()
    }
}

/// Probability table over the atoms of a discrete space, one coordinate.
#[derive(Debug, Clone)]
pub struct AtomTable {
    atoms: Vec<f64>,
    log_probs: Vec<f64>,
}

impl AtomTable {
    pub fn new(atoms: &[f64], probs: &[f64]) -> Result<Self> {
        if atoms.len() != probs.len() {
            return Err(Error::invalid("atom and probability lists differ in length"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("probabilities must be finite and non-negative"));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.iter().copied().zip(probs.iter().map(|p| p.ln())).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(AtomTable {
            atoms: pairs.iter().map(|p| p.0).collect(),
            log_probs: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn log_prob(&self, x: f64) -> f64 {
        match self.atoms.binary_search_by(|a| a.total_cmp(&x)) {
            Ok(i) => self.log_probs[i],
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

impl LogDensity for AtomTable {
    fn log_density(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| self.log_prob(xi)).sum()
    }
}

/// A density with an identity, tied to a sample space.
#[derive(Clone)]
pub struct DensityCandidate {
    id: String,
    space: SampleSpace,
    density: Arc<dyn LogDensity>,
    metadata: BTreeMap<String, String>,
}

impl DensityCandidate {
    pub fn new(id: impl Into<String>, space: SampleSpace, density: Arc<dyn LogDensity>) -> Self {
        DensityCandidate {
            id: id.into(),
            space,
            density,
            metadata: BTreeMap::new(),
        }
    }

    /// Categorical candidate on a discrete space.
    pub fn categorical(id: impl Into<String>, space: SampleSpace, probs: &[f64]) -> Result<Self> {
        let SampleSpace::Discrete { atoms } = &space else {
            return Err(Error::invalid("categorical candidates need a discrete space"));
        };
        let table = AtomTable::new(atoms, probs)?;
        Ok(Self::new(id, space, Arc::new(table)))
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn density(&self) -> &Arc<dyn LogDensity> {
        &self.density
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.density.log_density(x)
    }

    /// True when both candidates share the same underlying density object.
    pub fn same_density(&self, other: &DensityCandidate) -> bool {
        Arc::ptr_eq(&self.density, &other.density)
    }
}

impl fmt::Debug for DensityCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityCandidate")
            .field("id", &self.id)
            .field("metadata", &self.metadata)
            .finish_non_exhaustive()
    }
}
