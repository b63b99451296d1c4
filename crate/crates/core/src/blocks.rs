//! Spaced sub-samples and Hellinger aggregation of their ρ-estimates.
//!
//! With spacing `s` the indices `1..n` are dealt into `s + 1` blocks; block
//! `b` keeps every `(s+1)`-th observation starting from `b`. Observations in
//! one block are `s + 1` steps apart, which weakens their dependence.
//! Indices in [`BlockPlan`] are 0-based.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{DensityCandidate, FiniteModel};
use crate::rho::{rho_select, LogDensityMatrix, Sample};

/// Largest admissible aggregation slack.
pub const MAX_IOTA: f64 = 1273.0;

/// `⌊(n − 2)/2⌋`, the largest spacing keeping two points per block.
pub fn s_max(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::invalid(format!("spacing needs n >= 2, got {n}")));
    }
    Ok((n - 2) / 2)
}

/// `⌊(n + s + 1 − b)/(1 + s)⌋` for 1-based block `b`.
pub fn block_size(n: usize, s: usize, b: usize) -> usize {
    (n + s + 1 - b) / (1 + s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockPlan {
    pub n: usize,
    pub s: usize,
    pub blocks: Vec<Vec<usize>>,
    pub sizes: Vec<usize>,
}

pub fn make_blocks(n: usize, s: usize) -> Result<BlockPlan> {
    let max = s_max(n)?;
    if s > max {
        return Err(Error::InsufficientData { n, s, s_max: max });
    }
    let blocks: Vec<Vec<usize>> = (0..=s).map(|b| (b..n).step_by(s + 1).collect()).collect();
    let sizes: Vec<usize> = blocks.iter().map(Vec::len).collect();
    for (b, &size) in sizes.iter().enumerate() {
        assert_eq!(size, block_size(n, s, b + 1), "block plan disagrees with n(s, b)");
        assert!(size >= 2, "block {b} has fewer than two points");
    }
    Ok(BlockPlan { n, s, blocks, sizes })
}

/// Outcome of [`estimate_with_spacing`].
#[derive(Debug, Clone, Serialize)]
pub struct SpacingEstimate {
    pub s: usize,
    pub iota: f64,
    pub chosen_index: usize,
    pub chosen_id: String,
    /// Model index chosen by the ρ-estimator on each block.
    pub block_choices: Vec<usize>,
    pub block_sizes: Vec<usize>,
    /// `Σ_b n(s,b) h²(P̂_{s,b}, Q)` for every model candidate `Q`.
    pub objective: Vec<f64>,
}

impl SpacingEstimate {
    pub fn chosen<'m>(&self, model: &'m FiniteModel) -> &'m DensityCandidate {
        model.candidate(self.chosen_index)
    }
}

fn check_iota(iota: f64) -> Result<()> {
    if !(iota > 0.0 && iota <= MAX_IOTA) {
        return Err(Error::invalid(format!("iota must lie in (0, {MAX_IOTA}], got {iota}")));
    }
    Ok(())
}

/// ρ-estimates each spaced block and returns the model candidate minimizing
/// the size-weighted Hellinger objective, ties to the lowest index.
///
/// Minimization is exhaustive, so any `iota > 0` is satisfied; `iota` is
/// validated and recorded only.
pub fn estimate_with_spacing(sample: &Sample, model: &FiniteModel, s: usize, iota: f64) -> Result<SpacingEstimate> {
    check_iota(iota)?;
    if sample.space() != model.space() {
        return Err(Error::SpaceMismatch);
    }
    let plan = make_blocks(sample.len(), s)?;
    let block_choices: Vec<usize> = plan
        .blocks
        .par_iter()
        .map(|idx| {
            let sub = sample.subsample(idx)?;
            let matrix = LogDensityMatrix::build(&sub, model)?;
            Ok(rho_select(&matrix).index)
        })
        .collect::<Result<_>>()?;
    aggregate(model, &block_choices, &plan.sizes, s, iota)
}

/// Hellinger aggregation of given block choices.
pub fn aggregate(
    model: &FiniteModel,
    block_choices: &[usize],
    block_sizes: &[usize],
    s: usize,
    iota: f64,
) -> Result<SpacingEstimate> {
    check_iota(iota)?;
    if block_choices.is_empty() || block_choices.len() != block_sizes.len() {
        return Err(Error::invalid("block choices and sizes must be non-empty and aligned"));
    }
    if block_choices.iter().any(|&c| c >= model.len()) {
        return Err(Error::invalid("block choice outside the model"));
    }
    let mut weight_of: BTreeMap<usize, f64> = BTreeMap::new();
    for (&c, &size) in block_choices.iter().zip(block_sizes) {
        *weight_of.entry(c).or_insert(0.0) += size as f64;
    }
    let mut objective = vec![0.0; model.len()];
    for (&c, &weight) in &weight_of {
        let row = model.hellinger_row(c)?;
        for (o, h) in objective.iter_mut().zip(row.iter()) {
            *o += weight * h;
        }
    }
    let mut chosen = 0;
    for j in 1..objective.len() {
        if objective[j] < objective[chosen] {
            chosen = j;
        }
    }
    Ok(SpacingEstimate {
        s,
        iota,
        chosen_index: chosen,
        chosen_id: model.candidate(chosen).id().to_string(),
        block_choices: block_choices.to_vec(),
        block_sizes: block_sizes.to_vec(),
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_max_values() {
        assert_eq!(s_max(10).unwrap(), 4);
        assert_eq!(s_max(2).unwrap(), 0);
        assert_eq!(s_max(3).unwrap(), 0);
        assert!(s_max(1).is_err());
    }

    #[test]
    fn plan_for_ten_points() {
        let plan = make_blocks(10, 2).unwrap();
        assert_eq!(plan.blocks, vec![vec![0, 3, 6, 9], vec![1, 4, 7], vec![2, 5, 8]]);
        assert_eq!(plan.sizes, vec![4, 3, 3]);
        assert!(matches!(make_blocks(10, 5), Err(Error::InsufficientData { s_max: 4, .. })));
    }

    #[test]
    fn sizes_for_seven_points() {
        assert_eq!(make_blocks(7, 2).unwrap().sizes, vec![3, 2, 2]);
    }
}
