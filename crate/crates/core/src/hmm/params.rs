use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::Emission;

/// Largest number of hidden states accepted by HMM parameter records.
pub const MAX_STATES: usize = 8;

const SUM_TOLERANCE: f64 = 1e-12;

fn check_probability_vector(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{what} is empty")));
    }
    if v.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::invalid(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// A probability vector over the hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        check_probability_vector(&w, "weight vector")?;
        Ok(SimplexWeights(w))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("uniform weights need k >= 1"));
        }
        Ok(SimplexWeights(vec![1.0 / k as f64; k]))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Self {
        w.0
    }
}

/// A row-stochastic `K × K` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::invalid("transition matrix is empty"));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(Error::invalid(format!("row {i} has {} entries, expected {k}", r.len())));
            }
            check_probability_vector(r, &format!("transition row {i}"))?;
        }
        Ok(TransitionMatrix {
            k,
            entries: rows.concat(),
        })
    }

    pub fn identity(k: usize) -> Result<Self> {
        Self::new((0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect())
    }

    /// Two-state chain leaving state 0 with probability `a` and state 1 with probability `b`.
    pub fn two_state(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![vec![1.0 - a, a], vec![b, 1.0 - b]])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    /// Dense `K × K` entries, row-major.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(q: TransitionMatrix) -> Self {
        q.rows()
    }
}

/// Hidden Markov model parameters `(K, w, Q, F)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmmParams {
    pub w: SimplexWeights,
    pub q: TransitionMatrix,
    pub emissions: Vec<Emission>,
}

impl HmmParams {
    pub fn new(w: SimplexWeights, q: TransitionMatrix, emissions: Vec<Emission>) -> Result<Self> {
        let p = HmmParams { w, q, emissions };
        p.validate()?;
        Ok(p)
    }

    pub fn k(&self) -> usize {
        self.w.k()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.w.k();
        if k > MAX_STATES {
            return Err(Error::invalid(format!("at most {MAX_STATES} hidden states are supported, got {k}")));
        }
        if self.q.k() != k || self.emissions.len() != k {
            return Err(Error::invalid(format!(
                "weights, transition matrix and emissions disagree on K ({k}, {}, {})",
                self.q.k(),
                self.emissions.len()
            )));
        }
        self.emissions.iter().try_for_each(Emission::validate)
    }
}

/// Largest `K` accepted by [`param_error`].
pub const MAX_ALIGNED_STATES: usize = 6;

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Parameter error aligned over hidden-state relabelings:
/// `min_σ ‖w∘σ − ŵ‖² + ‖Q∘σ − Q̂‖² + Σ_k (‖θ_{σ(k)} − θ̂_k‖² ∧ 1)`.
pub fn param_error(est: &HmmParams, truth: &HmmParams) -> Result<f64> {
    let k = truth.k();
    if est.k() != k {
        return Err(Error::invalid(format!("K differs: {} vs {k}", est.k())));
    }
    if k > MAX_ALIGNED_STATES {
        return Err(Error::invalid(format!("permutation alignment supports K <= {MAX_ALIGNED_STATES}")));
    }
    let families_match = truth
        .emissions
        .iter()
        .zip(&est.emissions)
        .all(|(a, b)| a.family() == b.family() && a.theta().len() == b.theta().len());
    if !families_match {
        return Err(Error::invalid("emission families differ between estimate and truth"));
    }
    let theta_t: Vec<Vec<f64>> = truth.emissions.iter().map(Emission::theta).collect();
    let theta_e: Vec<Vec<f64>> = est.emissions.iter().map(Emission::theta).collect();
    let sq = |a: f64, b: f64| (a - b) * (a - b);
    let mut best = f64::INFINITY;
    for sigma in permutations(k) {
        let mut err = 0.0;
        for i in 0..k {
            err += sq(truth.w.as_slice()[sigma[i]], est.w.as_slice()[i]);
            for j in 0..k {
                err += sq(truth.q.get(sigma[i], sigma[j]), est.q.get(i, j));
            }
            let d: f64 = theta_t[sigma[i]].iter().zip(&theta_e[i]).map(|(a, b)| sq(*a, *b)).sum();
            err += d.min(1.0);
        }
        best = best.min(err);
    }
    Ok(best)
}
