//! ρ-estimation over a finite model.
//!
//! For a sample `x₁..xₙ` and candidates `q, q'` the pairwise statistic is
//! `T(q, q') = Σᵢ ψ(√(q'(xᵢ)/q(xᵢ)))` with `ψ(u) = (u − 1)/(u + 1)`. The
//! criterion of `q` is `Υ(q) = max_{q'} T(q, q')` and the estimator picks the
//! candidate with the smallest criterion.

mod sample;

use rayon::prelude::*;
use serde::Serialize;

pub use sample::Sample;

use crate::error::{Error, Result};
use crate::measure::{DensityCandidate, FiniteModel};

/// Largest admissible selection slack.
pub const DEFAULT_SLACK: f64 = 11.36;

/// `ψ(x) = (x − 1)/(x + 1)` with `ψ(+∞) = 1`.
pub fn psi(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::invalid(format!("psi needs x in [0, +inf], got {x}")));
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    Ok((x - 1.0) / (x + 1.0))
}

/// `ψ(√(q'/q))` from `log q'` and `log q`.
///
/// Equal logs (including `−∞` on both sides) give 0, a vanishing `q` gives 1
/// and a vanishing `q'` gives −1. Otherwise `ψ(e^{d/2}) = tanh(d/4)` for
/// `d = log q' − log q`, evaluated on `|d|` so that swapping the arguments
/// flips the sign exactly.
pub fn psi_log_ratio(log_q_prime: f64, log_q: f64) -> f64 {
    if log_q_prime == log_q {
        return 0.0;
    }
    if log_q == f64::NEG_INFINITY || log_q_prime == f64::INFINITY {
        return 1.0;
    }
    if log_q_prime == f64::NEG_INFINITY || log_q == f64::INFINITY {
        return -1.0;
    }
    let d = log_q_prime - log_q;
    let v = (0.25 * d.abs()).tanh();
    if d > 0.0 {
        v
    } else {
        -v
    }
}

fn t_from_rows(row_q: &[f64], row_q_prime: &[f64]) -> f64 {
    row_q
        .iter()
        .zip(row_q_prime)
        .map(|(&lq, &lqp)| psi_log_ratio(lqp, lq))
        .sum()
}

fn log_row(sample: &Sample, c: &DensityCandidate) -> Result<Vec<f64>> {
    if c.space() != sample.space() {
        return Err(Error::SpaceMismatch);
    }
    let row: Vec<f64> = sample.iter().map(|x| c.log_density(x)).collect();
    if row.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidDensity { id: c.id().to_string() });
    }
    Ok(row)
}

/// `T(q, q')` evaluated directly on the sample.
pub fn t_statistic(sample: &Sample, q: &DensityCandidate, q_prime: &DensityCandidate) -> Result<f64> {
    let lq = log_row(sample, q)?;
    let lqp = log_row(sample, q_prime)?;
    Ok(t_from_rows(&lq, &lqp))
}

/// `Υ(q) = max(0, max over the model of T(q, q'))`.
pub fn upsilon(sample: &Sample, q: &DensityCandidate, model: &FiniteModel) -> Result<f64> {
    let lq = log_row(sample, q)?;
    let mut best = 0.0f64;
    for c in model.candidates() {
        let t = t_from_rows(&lq, &log_row(sample, c)?);
        best = best.max(t);
    }
    Ok(best)
}

/// Log-densities of every model candidate at every sample point,
/// candidate-major.
#[derive(Debug, Clone)]
pub struct LogDensityMatrix {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

impl LogDensityMatrix {
    pub fn build(sample: &Sample, model: &FiniteModel) -> Result<Self> {
        let rows: Vec<Vec<f64>> = model
            .candidates()
            .par_iter()
            .map(|c| log_row(sample, c))
            .collect::<Result<_>>()?;
        Ok(LogDensityMatrix {
            n: sample.len(),
            m: model.len(),
            values: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    /// `T(q_i, q_j)` from the cached rows.
    pub fn t(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        t_from_rows(self.row(i), self.row(j))
    }

    pub fn log_likelihood(&self, j: usize) -> f64 {
        self.row(j).iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoOptions {
    pub slack: f64,
    pub keep_t_matrix: bool,
}

impl Default for RhoOptions {
    fn default() -> Self {
        RhoOptions {
            slack: DEFAULT_SLACK,
            keep_t_matrix: false,
        }
    }
}

/// Every criterion value of one ρ-estimation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoScoreTable {
    pub n: usize,
    pub model_ids: Vec<String>,
    pub upsilon: Vec<f64>,
    /// Row-major `|M| × |M|` matrix of `T(q_i, q_j)` when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_matrix: Option<Vec<f64>>,
    pub chosen_index: usize,
    pub chosen_id: String,
    pub slack_used: f64,
    /// Indices whose criterion is within the slack of the minimum.
    pub near_minimizers: Vec<usize>,
}

impl RhoScoreTable {
    pub fn upsilon_of(&self, id: &str) -> Option<f64> {
        self.model_ids.iter().position(|m| m == id).map(|i| self.upsilon[i])
    }
}

fn check_slack(slack: f64) -> Result<()> {
    if !(slack > 0.0 && slack <= DEFAULT_SLACK) {
        return Err(Error::invalid(format!("slack must lie in (0, {DEFAULT_SLACK}], got {slack}")));
    }
    Ok(())
}

/// Full ρ-estimation with the default slack.
pub fn rho_estimate(sample: &Sample, model: &FiniteModel, slack: f64) -> Result<RhoScoreTable> {
    rho_estimate_with(
        sample,
        model,
        RhoOptions {
            slack,
            keep_t_matrix: false,
        },
    )
}

pub fn rho_estimate_with(sample: &Sample, model: &FiniteModel, options: RhoOptions) -> Result<RhoScoreTable> {
    check_slack(options.slack)?;
    if model.is_empty() {
        return Err(Error::EmptyModel);
    }
    let matrix = LogDensityMatrix::build(sample, model)?;
    Ok(score_table(&matrix, model.ids(), options))
}

/// Scores every candidate from a prebuilt matrix. Ties in the criterion go
/// to the lowest model index.
pub fn score_table(matrix: &LogDensityMatrix, model_ids: Vec<String>, options: RhoOptions) -> RhoScoreTable {
    let m = matrix.m();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| ((i + 1)..m).map(|j| matrix.t(i, j)).collect())
        .collect();
    let mut t = vec![0.0; m * m];
    for i in 0..m {
        for (k, &v) in upper[i].iter().enumerate() {
            let j = i + 1 + k;
            t[i * m + j] = v;
            t[j * m + i] = -v;
        }
    }
    let upsilon: Vec<f64> = (0..m)
        .map(|i| t[i * m..(i + 1) * m].iter().fold(0.0f64, |a, &b| a.max(b)))
        .collect();
    let mut chosen = 0;
    for i in 1..m {
        if upsilon[i] < upsilon[chosen] {
            chosen = i;
        }
    }
    let floor = upsilon[chosen];
    let near_minimizers = (0..m).filter(|&i| upsilon[i] < floor + options.slack).collect();
    RhoScoreTable {
        n: matrix.n(),
        chosen_id: model_ids[chosen].clone(),
        model_ids,
        upsilon,
        t_matrix: options.keep_t_matrix.then_some(t),
        chosen_index: chosen,
        slack_used: options.slack,
        near_minimizers,
    }
}

/// Result of [`rho_select`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoChoice {
    pub index: usize,
    pub upsilon: f64,
}

/// The candidate [`score_table`] would choose, without scoring every pair.
///
/// Candidates are visited in decreasing likelihood, and each one's tests are
/// taken against competitors in the same order, so strong competitors come
/// first. A candidate is abandoned as soon as one of its tests exceeds the
/// best criterion found so far (or ties it from a higher index). An abandoned
/// candidate cannot be the lowest-index minimizer, so the choice is identical.
pub fn rho_select(matrix: &LogDensityMatrix) -> RhoChoice {
    let m = matrix.m();
    let ll: Vec<f64> = (0..m).map(|j| matrix.log_likelihood(j)).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| ll[b].total_cmp(&ll[a]).then(a.cmp(&b)));
    let start = order[0];
    let full = |i: usize| (0..m).fold(0.0f64, |a, j| a.max(matrix.t(i, j)));
    let mut best = start;
    let mut best_u = full(start);
    for &i in &order[1..] {
        let beaten = |r: f64, best_u: f64, best: usize| r > best_u || (r == best_u && i > best);
        let mut running = matrix.t(i, best).max(0.0);
        if beaten(running, best_u, best) {
            continue;
        }
        let mut abandoned = false;
        for &j in &order {
            if j == i || j == best {
                continue;
            }
            running = running.max(matrix.t(i, j));
            if beaten(running, best_u, best) {
                abandoned = true;
                break;
            }
        }
        if !abandoned {
            best = i;
            best_u = running;
        }
    }
    RhoChoice {
        index: best,
        upsilon: best_u,
    }
}
