use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::Emission;
use crate::measure::{check_mass_on_rule, FiniteModel, QuadratureRule, SampleSpace};

use super::chain::product_chain_density;
use super::grid::{simplex_grid, transition_grid};
use super::params::{HmmParams, SimplexWeights, TransitionMatrix};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Persisted description of a finite HMM model; candidate `i` is the `i`-th
/// tuple `(w, Q, F₁..F_K)` in lexicographic grid order (w slowest, state 0's
/// emission before state 1's) and carries the id `"i"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmmModelDescription {
    pub version: u32,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub delta: f64,
    pub step: f64,
    pub base_space: SampleSpace,
    pub w_grid: Vec<SimplexWeights>,
    pub q_grid: Vec<TransitionMatrix>,
    /// Emission net of each hidden state.
    pub emission_families: Vec<Vec<Emission>>,
    pub candidate_count: usize,
}

impl HmmModelDescription {
    /// Grids `W_{δ,K}` and `T_{δ,K}` with the given pitch.
    pub fn from_grids(
        k: usize,
        l: usize,
        delta: f64,
        step: f64,
        base_space: SampleSpace,
        emission_families: Vec<Vec<Emission>>,
    ) -> Result<Self> {
        let w_grid = simplex_grid(k, delta, step)?;
        let q_grid = transition_grid(k, delta, step)?;
        Self::explicit(k, l, delta, step, base_space, w_grid, q_grid, emission_families)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn explicit(
        k: usize,
        l: usize,
        delta: f64,
        step: f64,
        base_space: SampleSpace,
        w_grid: Vec<SimplexWeights>,
        q_grid: Vec<TransitionMatrix>,
        emission_families: Vec<Vec<Emission>>,
    ) -> Result<Self> {
        let mut d = HmmModelDescription {
            version: MODEL_FORMAT_VERSION,
            k,
            l,
            delta,
            step,
            base_space,
            w_grid,
            q_grid,
            emission_families,
            candidate_count: 0,
        };
        d.candidate_count = d.count()?;
        d.validate()?;
        Ok(d)
    }

    /// `|w-grid| · |Q-grid| · Π_k |net_k|`.
    pub fn count(&self) -> Result<usize> {
        let mut c = self.w_grid.len().checked_mul(self.q_grid.len());
        for net in &self.emission_families {
            c = c.and_then(|c| c.checked_mul(net.len()));
        }
        c.ok_or(Error::BudgetExceeded {
            count: usize::MAX,
            budget: usize::MAX,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported model version {}", self.version)));
        }
        if self.k == 0 || self.l == 0 {
            return Err(Error::invalid("K and L must be positive"));
        }
        if self.w_grid.is_empty() || self.q_grid.is_empty() || self.emission_families.iter().any(Vec::is_empty) {
            return Err(Error::invalid("every grid must be non-empty"));
        }
        if self.emission_families.len() != self.k
            || self.w_grid.iter().any(|w| w.k() != self.k)
            || self.q_grid.iter().any(|q| q.k() != self.k)
        {
            return Err(Error::invalid("grid dimensions disagree with K"));
        }
        let floor = self.delta - 1e-12;
        let below = self.w_grid.iter().any(|w| w.as_slice().iter().any(|&x| x < floor))
            || self.q_grid.iter().any(|q| q.entries().iter().any(|&x| x < floor));
        if below {
            return Err(Error::invalid(format!("grid entries must be at least delta = {}", self.delta)));
        }
        if self.count()? != self.candidate_count {
            return Err(Error::invalid(format!(
                "candidate_count {} does not match the grids ({})",
                self.candidate_count,
                self.count()?
            )));
        }
        for e in self.emission_families.iter().flatten() {
            e.validate()?;
            e.check_space(&self.base_space)?;
        }
        Ok(())
    }

    /// Parameters of candidate `index`.
    pub fn params(&self, index: usize) -> Result<HmmParams> {
        if index >= self.candidate_count {
            return Err(Error::invalid(format!("candidate {index} out of range")));
        }
        let mut rest = index;
        let mut picks = vec![0usize; self.k];
        for s in (0..self.k).rev() {
            let len = self.emission_families[s].len();
            picks[s] = rest % len;
            rest /= len;
        }
        let qi = rest % self.q_grid.len();
        let wi = rest / self.q_grid.len();
        HmmParams::new(
            self.w_grid[wi].clone(),
            self.q_grid[qi].clone(),
            picks
                .iter()
                .enumerate()
                .map(|(s, &p)| self.emission_families[s][p].clone())
                .collect(),
        )
    }
}

/// A finite HMM model together with the parameters behind each candidate.
#[derive(Debug, Clone)]
pub struct HmmModel {
    pub model: FiniteModel,
    pub params: Vec<HmmParams>,
    pub description: HmmModelDescription,
}

impl HmmModel {
    pub fn params_of(&self, id: &str) -> Option<&HmmParams> {
        self.model.index_of(id).map(|i| &self.params[i])
    }
}

/// One candidate `P_{w,Q,F}` per grid tuple.
///
/// Each distinct emission is checked for normalization on the base space
/// once; mixtures of products of normalized emissions are then normalized.
pub fn build_hmm_model(description: &HmmModelDescription, budget: usize) -> Result<HmmModel> {
    description.validate()?;
    let count = description.candidate_count;
    if count > budget {
        return Err(Error::BudgetExceeded { count, budget });
    }
    let base = &description.base_space;
    let mut emissions: Vec<&Emission> = description.emission_families.iter().flatten().collect();
    emissions.dedup();
    for (i, e) in emissions.iter().enumerate() {
        let c = e.candidate(format!("emission-{i}"), base)?;
        let rule = QuadratureRule::for_candidates(base, &[&c])?;
        check_mass_on_rule(&rule, &c)?;
    }
    let params: Vec<HmmParams> = (0..count).into_par_iter().map(|i| description.params(i)).collect::<Result<_>>()?;
    let candidates = params
        .par_iter()
        .enumerate()
        .map(|(i, p)| product_chain_density(i.to_string(), p, description.l, base))
        .collect::<Result<Vec<_>>>()?;
    Ok(HmmModel {
        model: FiniteModel::unchecked(candidates)?,
        params,
        description: description.clone(),
    })
}
