//! Hold-out selection of the spacing parameter.
//!
//! Stage 1 runs [`estimate_with_spacing`] on the first sample for every `s`
//! in a geometric grid. Stage 2 runs a ρ-estimator on the second sample over
//! the finite set of stage-1 outputs. The two samples must be independent;
//! the only check made here is that their provenance tags differ.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::blocks::{estimate_with_spacing, s_max, SpacingEstimate};
use crate::error::{Error, Result};
use crate::measure::{DensityCandidate, FiniteModel};
use crate::rho::{rho_estimate, RhoScoreTable, Sample, DEFAULT_SLACK};

/// `{0} ∪ {⌈τ^j⌉ : j = 0..=J}` with `J = ⌊log_τ s_max(n₁)⌋`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SGrid {
    pub tau: f64,
    pub j: u32,
    pub values: Vec<usize>,
}

pub fn make_s_grid(n1: usize, tau: f64) -> Result<SGrid> {
    if n1 < 4 {
        return Err(Error::invalid(format!("spacing grid needs n1 >= 4, got {n1}")));
    }
    if !(tau.is_finite() && tau >= std::f64::consts::E) {
        return Err(Error::invalid(format!("tau must be at least e, got {tau}")));
    }
    let max = s_max(n1)? as f64;
    let mut j = (max.ln() / tau.ln()).floor().max(0.0) as u32;
    while tau.powi(j as i32 + 1) <= max {
        j += 1;
    }
    while j > 0 && tau.powi(j as i32) > max {
        j -= 1;
    }
    let mut values = vec![0usize];
    values.extend((0..=j).map(|e| tau.powi(e as i32).ceil() as usize));
    values.sort_unstable();
    values.dedup();
    Ok(SGrid { tau, j, values })
}

/// Outcome of [`select_s`].
#[derive(Debug, Clone, Serialize)]
pub struct SpacingSelection {
    pub grid: Vec<usize>,
    pub s_hat: usize,
    pub stage1: Vec<SpacingEstimate>,
    /// Spacing behind each stage-2 candidate, ascending.
    pub stage2_s: Vec<usize>,
    pub table: RhoScoreTable,
    #[serde(skip)]
    pub chosen: DensityCandidate,
}

/// Two-stage spacing selection.
///
/// `model_for_s` supplies the model used at spacing `s`; returning the same
/// `Arc` for several spacings lets identical stage-1 choices collapse to one
/// stage-2 candidate. Stage-2 candidates are ordered by `s`, so ties in the
/// criterion go to the smallest spacing. Their ids read `s=<s>:<id>`.
pub fn select_s(
    sample1: &Sample,
    sample2: &Sample,
    grid: &[usize],
    model_for_s: impl Fn(usize) -> Result<Arc<FiniteModel>> + Sync,
    iota: f64,
) -> Result<SpacingSelection> {
    if grid.is_empty() {
        return Err(Error::invalid("spacing grid is empty"));
    }
    if let (Some(a), Some(b)) = (sample1.provenance(), sample2.provenance()) {
        if a == b {
            return Err(Error::Independence(format!(
                "both samples carry provenance tag {a:?}; selection needs independent samples"
            )));
        }
    }
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let stage1: Vec<(Arc<FiniteModel>, SpacingEstimate)> = grid
        .par_iter()
        .map(|&s| {
            let model = model_for_s(s)?;
            let est = estimate_with_spacing(sample1, &model, s, iota)?;
            Ok((model, est))
        })
        .collect::<Result<_>>()?;

    let mut kept: Vec<(usize, DensityCandidate)> = Vec::new();
    let mut seen: Vec<(*const FiniteModel, usize)> = Vec::new();
    for (model, est) in &stage1 {
        let key = (Arc::as_ptr(model), est.chosen_index);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let c = est.chosen(model);
        kept.push((est.s, c.clone().with_id(format!("s={}:{}", est.s, c.id()))));
    }
    let stage2_s: Vec<usize> = kept.iter().map(|(s, _)| *s).collect();
    let finite = FiniteModel::unchecked(kept.into_iter().map(|(_, c)| c).collect())?;
    let table = rho_estimate(sample2, &finite, DEFAULT_SLACK)?;
    Ok(SpacingSelection {
        grid,
        s_hat: stage2_s[table.chosen_index],
        stage1: stage1.into_iter().map(|(_, e)| e).collect(),
        stage2_s,
        chosen: finite.candidate(table.chosen_index).clone(),
        table,
    })
}
