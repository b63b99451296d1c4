//! Exact dependence measures for finite-state chains.
//!
//! Chains close to independence produce joint tables that differ from the
//! product of their marginals by tiny amounts; evaluating `Σ p ln(p / ab)`
//! directly then loses every significant digit. The routines here carry the
//! deviation `p − ab` explicitly: for a primitive chain with invariant law
//! `π` the deviation of `Q^t` from its limit is `(Q − 1π)^t`, which is
//! computed without cancellation.

use crate::blocks::block_size;
use crate::error::{Error, Result};
use crate::hmm::chain::dense_power;
use crate::hmm::{is_primitive, matrix_power, stationary_distribution, HmmParams, SimplexWeights, TransitionMatrix};

/// `(1 + ε) ln(1 + ε) − ε`, accurate near `ε = 0`.
fn phi(eps: f64) -> f64 {
    if eps.abs() < 1e-3 {
        let e2 = eps * eps;
        e2 * (0.5 - eps / 6.0 + e2 / 12.0 - e2 * eps / 20.0)
    } else if eps <= -1.0 {
        1.0
    } else {
        (1.0 + eps) * eps.ln_1p() - eps
    }
}

/// `Σ_ab a_a b_b φ(dev_ab / (a_a b_b))`, the KL divergence of the joint
/// `a_a b_b + dev_ab` from `a ⊗ b` when `dev` has zero row and column sums.
fn information_from_deviation(a: &[f64], b: &[f64], dev: impl Fn(usize, usize) -> f64) -> f64 {
    let mut total = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            let base = ai * bj;
            if base > 0.0 {
                total += base * phi(dev(i, j) / base);
            }
        }
    }
    total.max(0.0)
}

fn check_joint(joint: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let cols = joint.first().map_or(0, Vec::len);
    if joint.is_empty() || cols == 0 || joint.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("joint table must be a non-empty rectangle"));
    }
    if joint.iter().flatten().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("joint table entries must be non-negative"));
    }
    let total: f64 = joint.iter().flatten().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("joint table sums to {total}, not 1")));
    }
    let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let columns: Vec<f64> = (0..cols).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
    Ok((rows, columns))
}

/// `KL(joint ‖ row marginal ⊗ column marginal)`, in nats.
pub fn coefficient_of_information(joint: &[Vec<f64>]) -> Result<f64> {
    let (a, b) = check_joint(joint)?;
    Ok(information_from_deviation(&a, &b, |i, j| joint[i][j] - a[i] * b[j]))
}

/// `(KL(joint ‖ product), 2 Σ_a d_TV(L(B | A = a), L(B)))`, the sum running
/// over rows with positive probability.
pub fn reverse_pinsker_gap(joint: &[Vec<f64>]) -> Result<(f64, f64)> {
    let kl = coefficient_of_information(joint)?;
    let (a, b) = check_joint(joint)?;
    let mut bound = 0.0;
    for (row, &pa) in joint.iter().zip(&a) {
        if pa > 0.0 {
            let tv: f64 = row.iter().zip(&b).map(|(p, pb)| (p / pa - pb).abs()).sum::<f64>() * 0.5;
            bound += 2.0 * tv;
        }
    }
    Ok((kl, bound))
}

/// `Q − 1π`, row-major.
fn centered(q: &TransitionMatrix, pi: &[f64]) -> Vec<f64> {
    let k = q.k();
    (0..k * k).map(|idx| q.get(idx / k, idx % k) - pi[idx % k]).collect()
}

/// Lag-`t` couplings of a chain, with exact deviations when the chain is primitive.
struct LagCoupling {
    k: usize,
    power: Vec<f64>,
    deviation: Option<Vec<f64>>,
}

impl LagCoupling {
    fn new(q: &TransitionMatrix, t: usize) -> Result<Self> {
        let k = q.k();
        let power = matrix_power(q, t);
        let deviation = if t >= 1 && is_primitive(q) {
            let pi = stationary_distribution(q)?;
            let pi = pi.as_slice();
            Some(dense_power(&centered(q, pi), k, t))
        } else {
            None
        };
        Ok(LagCoupling { k, power, deviation })
    }

    fn advance(&self, mu: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|j| (0..self.k).map(|i| mu[i] * self.power[i * self.k + j]).sum())
            .collect()
    }

    /// `I(X, X')` where `X ~ mu` and `X'` follows `X` by `t` steps.
    fn information(&self, mu: &[f64]) -> f64 {
        let k = self.k;
        let nu = self.advance(mu);
        match &self.deviation {
            Some(e) => {
                let mu_e: Vec<f64> = (0..k).map(|j| (0..k).map(|i| mu[i] * e[i * k + j]).sum()).collect();
                information_from_deviation(mu, &nu, |a, c| mu[a] * (e[a * k + c] - mu_e[c]))
            }
            None => information_from_deviation(mu, &nu, |a, c| mu[a] * (self.power[a * k + c] - nu[c])),
        }
    }
}

/// `Σ_{i=2}^{n(s,b)} I(X^{(s,b)}_{i−1}, X^{(s,b)}_i)` for a chain started
/// from `pi0`, with `b` 1-based. By the Markov property this equals the KL
/// divergence of the block's joint law from the product of its marginals.
pub fn markov_dependence_term(q: &TransitionMatrix, pi0: &SimplexWeights, n: usize, s: usize, b: usize) -> Result<f64> {
    if pi0.k() != q.k() {
        return Err(Error::invalid("initial law and transition matrix disagree on K"));
    }
    if b == 0 || b > s + 1 || b > n {
        return Err(Error::invalid(format!("block index b = {b} must lie in 1..={}", (s + 1).min(n))));
    }
    let size = block_size(n, s, b);
    let lag = LagCoupling::new(q, s + 1)?;
    let start = LagCoupling::new(q, b - 1)?;
    let mut mu = start.advance(pi0.as_slice());
    let mut total = 0.0;
    for _ in 1..size {
        total += lag.information(&mu);
        mu = lag.advance(&mu);
    }
    Ok(total)
}

/// Sum of [`markov_dependence_term`] over all `s + 1` blocks.
pub fn markov_dependence_total(q: &TransitionMatrix, pi0: &SimplexWeights, n: usize, s: usize) -> Result<f64> {
    (1..=(s + 1).min(n)).map(|b| markov_dependence_term(q, pi0, n, s, b)).sum()
}

/// Hidden-chain bound on the dependence of an HMM block: the observable KL
/// never exceeds the hidden chain's coefficient-of-information sum.
pub fn hmm_dependence_bound(params: &HmmParams, n: usize, s: usize, b: usize) -> Result<f64> {
    params.validate()?;
    markov_dependence_term(&params.q, &params.w, n, s, b)
}

/// `β(t) = Σ_i π_i d_TV(Q^t_{i·}, π)` with `π` the invariant law.
pub fn beta_mixing_markov(q: &TransitionMatrix, t: usize) -> Result<f64> {
    let pi = stationary_distribution(q)?;
    beta_mixing_markov_with(q, &pi, t)
}

/// [`beta_mixing_markov`] for a caller-supplied invariant law, which also
/// covers chains whose invariant law is not unique.
pub fn beta_mixing_markov_with(q: &TransitionMatrix, pi: &SimplexWeights, t: usize) -> Result<f64> {
    let k = q.k();
    if pi.k() != k {
        return Err(Error::invalid("invariant law and transition matrix disagree on K"));
    }
    let p = pi.as_slice();
    let residual = (0..k)
        .map(|j| ((0..k).map(|i| p[i] * q.get(i, j)).sum::<f64>() - p[j]).abs())
        .fold(0.0, f64::max);
    if residual > 1e-9 {
        return Err(Error::invalid(format!("supplied law is not invariant (residual {residual:.3e})")));
    }
    let dev = if t == 0 {
        (0..k * k)
            .map(|idx| if idx / k == idx % k { 1.0 } else { 0.0 } - p[idx % k])
            .collect()
    } else {
        dense_power(&centered(q, p), k, t)
    };
    let beta: f64 = (0..k)
        .map(|i| p[i] * 0.5 * (0..k).map(|j| dev[i * k + j].abs()).sum::<f64>())
        .sum();
    Ok(beta.clamp(0.0, 1.0))
}
