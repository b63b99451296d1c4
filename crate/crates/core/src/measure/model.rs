use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::candidate::{DensityCandidate, Singularity};
use super::metrics::{check_mass, finite_model_dimension, hellinger2_from_logs};
use super::quadrature::QuadratureRule;
use super::space::SampleSpace;
use crate::error::{Error, Result};

/// Largest `|M| × rule size` for which square-root densities are kept in
/// memory (256 MiB of `f64`).
pub const EMBEDDING_BUDGET: usize = 1 << 25;

/// An ordered, non-empty set of candidates on one space.
///
/// The model lazily builds one quadrature rule adapted to all of its
/// candidates and memoizes rows of the pairwise Hellinger matrix, so repeated
/// aggregation over the same model pays for each row once.
#[derive(Clone)]
pub struct FiniteModel {
    space: SampleSpace,
    candidates: Vec<DensityCandidate>,
    index: HashMap<String, usize>,
    dimension_bound: f64,
    geometry: Arc<Geometry>,
}

#[derive(Default)]
struct Geometry {
    rule: Mutex<Option<Arc<QuadratureRule>>>,
    embedding: Mutex<Option<Arc<Vec<f64>>>>,
    rows: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl FiniteModel {
    /// Validates shared space, unique ids and normalization of every candidate.
    pub fn new(candidates: Vec<DensityCandidate>) -> Result<Self> {
        let model = Self::unchecked(candidates)?;
        let rule = model.rule()?;
        model
            .candidates
            .par_iter()
            .try_for_each(|c| check_mass(&rule, c, &rule.log_values(c)?).map_err(|e| rename(e, c)))?;
        Ok(model)
    }

    /// Structural checks only; used for models assembled from pre-validated parts.
    pub(crate) fn unchecked(candidates: Vec<DensityCandidate>) -> Result<Self> {
        let first = candidates.first().ok_or(Error::EmptyModel)?;
        let space = first.space().clone();
        let mut index = HashMap::with_capacity(candidates.len());
        for (i, c) in candidates.iter().enumerate() {
            if c.space() != &space {
                return Err(Error::SpaceMismatch);
            }
            if index.insert(c.id().to_string(), i).is_some() {
                return Err(Error::DuplicateId(c.id().to_string()));
            }
        }
        let dimension_bound = finite_model_dimension(candidates.len())?;
        Ok(FiniteModel {
            space,
            candidates,
            index,
            dimension_bound,
            geometry: Arc::default(),
        })
    }

    pub fn with_dimension_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::invalid("dimension bound must be positive"));
        }
        self.dimension_bound = bound;
        Ok(self)
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[DensityCandidate] {
        &self.candidates
    }

    pub fn candidate(&self, i: usize) -> &DensityCandidate {
        &self.candidates[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> Vec<String> {
        self.candidates.iter().map(|c| c.id().to_string()).collect()
    }

    pub fn dimension_bound(&self) -> f64 {
        self.dimension_bound
    }

    /// Quadrature rule covering every breakpoint and singularity in the model.
    pub fn rule(&self) -> Result<Arc<QuadratureRule>> {
        let mut slot = self.geometry.rule.lock().unwrap();
        if let Some(rule) = slot.as_ref() {
            return Ok(rule.clone());
        }
        let mut breakpoints: Vec<f64> = Vec::new();
        let mut singularities: Vec<Singularity> = Vec::new();
        for c in &self.candidates {
            breakpoints.extend(c.density().breakpoints());
            singularities.extend(c.density().singularities());
        }
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        singularities.sort_by(|a, b| a.at.total_cmp(&b.at).then(a.exponent.total_cmp(&b.exponent)));
        singularities.dedup();
        let rule = Arc::new(QuadratureRule::new(&self.space, &breakpoints, &singularities)?);
        *slot = Some(rule.clone());
        Ok(rule)
    }

    fn embedding(&self) -> Result<Option<Arc<Vec<f64>>>> {
        let rule = self.rule()?;
        let r = rule.len();
        if self.len().saturating_mul(r) > EMBEDDING_BUDGET {
            return Ok(None);
        }
        let mut slot = self.geometry.embedding.lock().unwrap();
        if let Some(e) = slot.as_ref() {
            return Ok(Some(e.clone()));
        }
        let sqrt_w: Vec<f64> = rule.weights().iter().map(|w| w.sqrt()).collect();
        let rows: Vec<Vec<f64>> = self
            .candidates
            .par_iter()
            .map(|c| {
                let l = rule.log_values(c)?;
                Ok(l.iter().zip(&sqrt_w).map(|(l, s)| s * (0.5 * l).exp()).collect())
            })
            .collect::<Result<_>>()?;
        let flat = Arc::new(rows.concat());
        *slot = Some(flat.clone());
        Ok(Some(flat))
    }

    /// `h²(candidate i, candidate j)` for every `j`, memoized per `i`.
    pub fn hellinger_row(&self, i: usize) -> Result<Arc<Vec<f64>>> {
        if let Some(row) = self.geometry.rows.lock().unwrap().get(&i) {
            return Ok(row.clone());
        }
        let rule = self.rule()?;
        let row: Vec<f64> = match self.embedding()? {
            Some(emb) => {
                let r = rule.len();
                let ei = &emb[i * r..(i + 1) * r];
                (0..self.len())
                    .into_par_iter()
                    .map(|j| {
                        if j == i {
                            return 0.0;
                        }
                        let ej = &emb[j * r..(j + 1) * r];
                        if ei.iter().zip(ej).all(|(a, b)| *a == 0.0 || *b == 0.0) {
                            return 1.0;
                        }
                        let s: f64 = ei.iter().zip(ej).map(|(a, b)| (a - b) * (a - b)).sum();
                        (0.5 * s).clamp(0.0, 1.0)
                    })
                    .collect()
            }
            None => {
                let li = rule.log_values(&self.candidates[i])?;
                (0..self.len())
                    .into_par_iter()
                    .map(|j| {
                        if j == i {
                            return Ok(0.0);
                        }
                        let lj = rule.log_values(&self.candidates[j])?;
                        Ok(hellinger2_from_logs(rule.weights(), &li, &lj))
                    })
                    .collect::<Result<_>>()?
            }
        };
        let row = Arc::new(row);
        self.geometry.rows.lock().unwrap().insert(i, row.clone());
        Ok(row)
    }

    pub fn hellinger_between(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.hellinger_row(i)?[j])
    }
}

fn rename(e: Error, c: &DensityCandidate) -> Error {
    match e {
        Error::QuadratureNonConvergence { residual } | Error::NotNormalized { residual, .. } => Error::NotNormalized {
            id: c.id().to_string(),
            residual,
        },
        other => other,
    }
}

impl std::fmt::Debug for FiniteModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiniteModel")
            .field("space", &self.space)
            .field("len", &self.candidates.len())
            .field("dimension_bound", &self.dimension_bound)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::metrics::hellinger2;

    fn model() -> FiniteModel {
        let space = SampleSpace::symbols(3).unwrap();
        let probs = [[0.2, 0.3, 0.5], [0.6, 0.2, 0.2], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]];
        let cands = probs
            .iter()
            .enumerate()
            .map(|(i, p)| DensityCandidate::categorical(i.to_string(), space.clone(), p).unwrap())
            .collect();
        FiniteModel::new(cands).unwrap()
    }

    #[test]
    fn rows_match_direct_metric() {
        let m = model();
        for i in 0..3 {
            let row = m.hellinger_row(i).unwrap();
            for j in 0..3 {
                let direct = hellinger2(m.candidate(i), m.candidate(j)).unwrap();
                assert!((row[j] - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(FiniteModel::new(vec![]), Err(Error::EmptyModel)));
        let m = model();
        let mut dup = m.candidates().to_vec();
        dup.push(dup[0].clone());
        assert!(matches!(FiniteModel::new(dup), Err(Error::DuplicateId(_))));
        let bad = DensityCandidate::categorical("x", SampleSpace::symbols(3).unwrap(), &[0.5, 0.5, 0.5]).unwrap();
        assert!(matches!(FiniteModel::new(vec![bad]), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn default_dimension_bound() {
        let m = model();
        assert!((m.dimension_bound() - 9.0 * 6f64.ln()).abs() < 1e-12);
        assert_eq!(m.index_of("2"), Some(2));
    }
}
