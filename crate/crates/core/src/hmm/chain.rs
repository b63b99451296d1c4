use std::sync::Arc;

use crate::error::{Error, Result};
use crate::families::Emission;
use crate::measure::{DensityCandidate, LogDensity, SampleSpace, Singularity};
use crate::rho::Sample;

use super::params::{HmmParams, SimplexWeights, TransitionMatrix};

/// `a + b` in log space where `−∞` absorbs `+∞`.
fn log_mul(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        a + b
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Density of `L` consecutive observations of a stationary-start HMM,
/// `Σ_{k₁..k_L} w_{k₁} Q_{k₁k₂}⋯Q_{k_{L−1}k_L} Π_l f_{k_l}(x_l)`,
/// evaluated by the forward recursion in log space.
#[derive(Debug, Clone)]
pub struct ChainDensity {
    k: usize,
    l: usize,
    log_w: Vec<f64>,
    log_q: Vec<f64>,
    emissions: Vec<Emission>,
}

impl ChainDensity {
    pub fn new(params: &HmmParams, l: usize) -> Result<Self> {
        params.validate()?;
        if l == 0 {
            return Err(Error::invalid("window length must be at least 1"));
        }
        Ok(ChainDensity {
            k: params.k(),
            l,
            log_w: params.w.as_slice().iter().map(|w| w.ln()).collect(),
            log_q: params.q.entries().iter().map(|q| q.ln()).collect(),
            emissions: params.emissions.clone(),
        })
    }
}

impl LogDensity for ChainDensity {
    fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.l);
        let k = self.k;
        let mut alpha = [0.0f64; super::params::MAX_STATES];
        let mut next = [0.0f64; super::params::MAX_STATES];
        let mut terms = [0.0f64; super::params::MAX_STATES];
        for (s, a) in alpha[..k].iter_mut().enumerate() {
            *a = log_mul(self.log_w[s], self.emissions[s].log_density(x[0]));
        }
        for &xl in &x[1..] {
            for (j, nj) in next[..k].iter_mut().enumerate() {
                for (i, t) in terms[..k].iter_mut().enumerate() {
                    *t = log_mul(alpha[i], self.log_q[i * k + j]);
                }
                *nj = log_mul(log_sum_exp(&terms[..k]), self.emissions[j].log_density(xl));
            }
            alpha[..k].copy_from_slice(&next[..k]);
        }
        log_sum_exp(&alpha[..k])
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.emissions.iter().flat_map(Emission::breakpoints).collect()
    }

    fn singularities(&self) -> Vec<Singularity> {
        self.emissions.iter().flat_map(Emission::singularities).collect()
    }
}

/// `P_{w,Q,F}` on `base^L` as a candidate.
pub fn product_chain_density(
    id: impl Into<String>,
    params: &HmmParams,
    l: usize,
    base: &SampleSpace,
) -> Result<DensityCandidate> {
    for e in &params.emissions {
        e.check_space(base)?;
    }
    let space = SampleSpace::product(base.clone(), l)?;
    Ok(DensityCandidate::new(id, space, Arc::new(ChainDensity::new(params, l)?)))
}

fn matmul(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for m in 0..k {
            let aim = a[i * k + m];
            if aim == 0.0 {
                continue;
            }
            for j in 0..k {
                out[i * k + j] += aim * b[m * k + j];
            }
        }
    }
    out
}

/// `Q^t`, row-major.
pub fn matrix_power(q: &TransitionMatrix, t: usize) -> Vec<f64> {
    dense_power(q.entries(), q.k(), t)
}

/// `A^t` for a dense row-major `k × k` matrix.
pub(crate) fn dense_power(a: &[f64], k: usize, t: usize) -> Vec<f64> {
    let mut result: Vec<f64> = (0..k * k).map(|i| if i / k == i % k { 1.0 } else { 0.0 }).collect();
    let mut base = a.to_vec();
    let mut e = t;
    while e > 0 {
        if e & 1 == 1 {
            result = matmul(&result, &base, k);
        }
        e >>= 1;
        if e > 0 {
            base = matmul(&base, &base, k);
        }
    }
    result
}

/// Some power `Q^t`, `t ≤ K²`, has all entries positive.
pub fn is_primitive(q: &TransitionMatrix) -> bool {
    let k = q.k();
    let adj: Vec<bool> = q.entries().iter().map(|&v| v > 0.0).collect();
    let mut reach = adj.clone();
    for _ in 0..(k * k).max(1) {
        if reach.iter().all(|&b| b) {
            return true;
        }
        let mut next = vec![false; k * k];
        for i in 0..k {
            for m in 0..k {
                if reach[i * k + m] {
                    for j in 0..k {
                        next[i * k + j] |= adj[m * k + j];
                    }
                }
            }
        }
        reach = next;
    }
    reach.iter().all(|&b| b)
}

/// Solves `A x = b` for a small dense system by partial pivoting.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, k: usize) -> Option<Vec<f64>> {
    for col in 0..k {
        let pivot = (col..k).max_by(|&r, &s| a[r * k + col].abs().total_cmp(&a[s * k + col].abs()))?;
        if a[pivot * k + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..k {
                a.swap(col * k + j, pivot * k + j);
            }
            b.swap(col, pivot);
        }
        for r in (col + 1)..k {
            let f = a[r * k + col] / a[col * k + col];
            if f == 0.0 {
                continue;
            }
            for j in col..k {
                a[r * k + j] -= f * a[col * k + j];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = ((r + 1)..k).map(|j| a[r * k + j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r * k + r];
    }
    Some(x)
}

/// The invariant law `π = πQ` of an irreducible aperiodic chain.
pub fn stationary_distribution(q: &TransitionMatrix) -> Result<SimplexWeights> {
    if !is_primitive(q) {
        return Err(Error::NotErgodic);
    }
    let k = q.k();
    // (Qᵀ − I) π = 0 with the last equation replaced by Σπ = 1.
    let system = |pi: Option<&[f64]>| {
        let mut a = vec![0.0; k * k];
        let mut b = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                a[i * k + j] = q.get(j, i) - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..k {
            a[(k - 1) * k + j] = 1.0;
        }
        b[k - 1] = 1.0;
        if let Some(pi) = pi {
            // Residual right-hand side for one refinement step.
            for i in 0..k {
                let ax: f64 = (0..k).map(|j| a[i * k + j] * pi[j]).sum();
                b[i] -= ax;
            }
        }
        (a, b)
    };
    let (a, b) = system(None);
    let mut pi = solve_dense(a, b, k).ok_or(Error::NotErgodic)?;
    let (a, r) = system(Some(&pi));
    if let Some(corr) = solve_dense(a, r, k) {
        for (p, c) in pi.iter_mut().zip(corr) {
            *p += c;
        }
    }
    for p in pi.iter_mut() {
        *p = p.max(0.0);
    }
    let total: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= total;
    }
    SimplexWeights::new(pi)
}

/// Overlapping windows of a one-dimensional series.
#[derive(Debug, Clone)]
pub struct WindowedSample {
    pub base_len: usize,
    pub l: usize,
    pub sample: Sample,
}

/// `X_i = (Y_i, …, Y_{i+L−1})` for `i = 1..N+1−L`, requiring `2 ≤ L ≤ ⌊N/2⌋`.
pub fn window(base: &SampleSpace, series: &[f64], l: usize) -> Result<WindowedSample> {
    let n = series.len();
    if l < 2 || l > n / 2 {
        return Err(Error::invalid(format!("window length must satisfy 2 <= L <= N/2, got L = {l}, N = {n}")));
    }
    let space = SampleSpace::product(base.clone(), l)?;
    let mut points = Vec::with_capacity((n + 1 - l) * l);
    for i in 0..=(n - l) {
        points.extend_from_slice(&series[i..i + l]);
    }
    Ok(WindowedSample {
        base_len: n,
        l,
        sample: Sample::new(space, points)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_two_state() {
        let q = TransitionMatrix::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let pi = stationary_distribution(&q).unwrap();
        assert!((pi.as_slice()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            stationary_distribution(&TransitionMatrix::identity(2).unwrap()),
            Err(Error::NotErgodic)
        ));
        let periodic = TransitionMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(stationary_distribution(&periodic).is_err());
    }

    #[test]
    fn windows_overlap() {
        let base = SampleSpace::symbols(4).unwrap();
        let w = window(&base, &[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(w.sample.coordinates(), &[0.0, 1.0, 1.0, 2.0, 2.0, 3.0]);
        assert!(window(&base, &[0.0, 1.0, 2.0, 3.0], 3).is_err());
    }

    #[test]
    fn matrix_power_matches_repeated_product() {
        let q = TransitionMatrix::two_state(0.2, 0.5).unwrap();
        let p3 = matrix_power(&q, 3);
        let p2 = matmul(q.entries(), q.entries(), 2);
        let p3b = matmul(&p2, q.entries(), 2);
        for (a, b) in p3.iter().zip(&p3b) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
