use crate::error::{Error, Result};

use super::params::{SimplexWeights, TransitionMatrix};

/// Largest denominator tried when reading grid parameters as fractions.
pub const MAX_DENOMINATOR: u64 = 1_000_000;

/// Largest number of vectors a grid may hold.
pub const MAX_GRID_SIZE: usize = 1_000_000;

/// Smallest `D` such that every value times `D` is an integer.
fn common_denominator(values: &[f64]) -> Option<u64> {
    (1..=MAX_DENOMINATOR).find(|&d| {
        values.iter().all(|v| {
            let x = v * d as f64;
            (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0)
        })
    })
}

fn compositions(total: u64, parts: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) -> Result<()> {
    if parts == 1 {
        if out.len() >= MAX_GRID_SIZE {
            return Err(Error::BudgetExceeded {
                count: out.len() + 1,
                budget: MAX_GRID_SIZE,
            });
        }
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return Ok(());
    }
    for first in 0..=total {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out)?;
        prefix.pop();
    }
    Ok(())
}

/// Probability vectors with entries in `{δ, δ + step, δ + 2·step, …}`.
///
/// Entries are built as exact fractions `(a + j·c)/D` and summed in integer
/// arithmetic; vectors are listed with the first entry increasing slowest.
pub fn simplex_grid(k: usize, delta: f64, step: f64) -> Result<Vec<SimplexWeights>> {
    if k == 0 {
        return Err(Error::invalid("simplex grid needs K >= 1"));
    }
    if !(delta > 0.0 && delta <= 1.0 / k as f64 + 1e-12) {
        return Err(Error::invalid(format!("delta must lie in (0, 1/K], got {delta}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("grid step must be positive"));
    }
    let d = common_denominator(&[delta, step]).ok_or_else(|| {
        Error::invalid(format!(
            "delta = {delta} and step = {step} must be fractions with denominator <= {MAX_DENOMINATOR}"
        ))
    })?;
    let a = (delta * d as f64).round() as u64;
    let c = (step * d as f64).round() as u64;
    let floor = a * k as u64;
    if floor > d || !(d - floor).is_multiple_of(c) {
        return Err(Error::invalid(format!(
            "no vector with entries in delta + step*N sums to one (delta = {delta}, step = {step})"
        )));
    }
    let total = (d - floor) / c;
    let mut raw = Vec::new();
    compositions(total, k, &mut Vec::with_capacity(k), &mut raw)?;
    raw.into_iter()
        .map(|js| SimplexWeights::new(js.iter().map(|&j| (a + j * c) as f64 / d as f64).collect()))
        .collect()
}

/// Every matrix whose rows all come from `simplex_grid(k, delta, step)`;
/// row 0 varies slowest.
pub fn transition_grid(k: usize, delta: f64, step: f64) -> Result<Vec<TransitionMatrix>> {
    let rows = simplex_grid(k, delta, step)?;
    let count = rows.len().checked_pow(k as u32).filter(|&c| c <= MAX_GRID_SIZE).ok_or(Error::BudgetExceeded {
        count: usize::MAX,
        budget: MAX_GRID_SIZE,
    })?;
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0usize; k];
    for _ in 0..count {
        out.push(TransitionMatrix::new(digits.iter().map(|&d| rows[d].as_slice().to_vec()).collect())?);
        for pos in (0..k).rev() {
            digits[pos] += 1;
            if digits[pos] < rows.len() {
                break;
            }
            digits[pos] = 0;
        }
    }
    Ok(out)
}

/// Coarsest pitch `(1 − Kδ)/m` that does not exceed `√δ`.
pub fn default_step(k: usize, delta: f64) -> Result<f64> {
    if k == 0 || !(delta > 0.0 && delta <= 1.0 / k as f64 + 1e-12) {
        return Err(Error::invalid("default step needs K >= 1 and 0 < delta <= 1/K"));
    }
    let room = 1.0 - k as f64 * delta;
    if room <= 1e-12 {
        return Ok(delta);
    }
    let m = (room / delta.sqrt()).ceil().max(1.0);
    Ok(room / m)
}

/// `min(V̄ / (n(s,1)(K − 1)), 1/K)`.
pub fn delta_for(vbar: f64, n_s1: usize, k: usize) -> Result<f64> {
    if !(vbar > 0.0) || n_s1 == 0 || k < 2 {
        return Err(Error::invalid("delta_for needs vbar > 0, n(s,1) >= 1 and K >= 2"));
    }
    Ok((vbar / (n_s1 as f64 * (k - 1) as f64)).min(1.0 / k as f64))
}

/// `Σ_{(k₁..k_L)} (1 + Σ_l log₂ m_{k_l})` for finite emission nets of sizes `m_k`.
pub fn vbar_for_nets(net_sizes: &[usize], l: usize) -> Result<f64> {
    let k = net_sizes.len();
    if k == 0 || l == 0 || net_sizes.contains(&0) {
        return Err(Error::invalid("vbar needs K >= 1, L >= 1 and non-empty nets"));
    }
    let kf = k as f64;
    let log_sum: f64 = net_sizes.iter().map(|&m| (m as f64).log2()).sum();
    // Each state appears in position l of K^{L−1} tuples.
    Ok(kf.powi(l as i32) + l as f64 * kf.powi(l as i32 - 1) * log_sum)
}

/// `3K^L + L K^{L−1} (d₁ + ⋯ + d_K)` for exponential-family emissions of dimensions `d_k`.
pub fn vbar_exponential_family(dims: &[usize], l: usize) -> Result<f64> {
    let k = dims.len();
    if k == 0 || l == 0 {
        return Err(Error::invalid("vbar needs K >= 1 and L >= 1"));
    }
    let kf = k as f64;
    let d: usize = dims.iter().sum();
    Ok(3.0 * kf.powi(l as i32) + l as f64 * kf.powi(l as i32 - 1) * d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_grid_with_tenths() {
        let g = simplex_grid(2, 0.1, 0.1).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0].as_slice(), &[0.1, 0.9]);
        assert_eq!(g[8].as_slice(), &[0.9, 0.1]);
    }

    #[test]
    fn forced_grid() {
        let g = simplex_grid(2, 0.5, 0.1).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn transition_grid_size() {
        assert_eq!(transition_grid(2, 0.1, 0.1).unwrap().len(), 81);
    }

    #[test]
    fn delta_formula() {
        assert!((delta_for(784.0, 10_000, 2).unwrap() - 0.0784).abs() < 1e-15);
        assert_eq!(delta_for(1e9, 10, 2).unwrap(), 0.5);
        assert_eq!(delta_for(50.0, 50, 2).unwrap(), 0.5);
    }

    #[test]
    fn vbar_examples() {
        assert_eq!(vbar_for_nets(&[1], 2).unwrap(), 1.0);
        assert_eq!(vbar_for_nets(&[8, 8], 2).unwrap(), 28.0);
        assert_eq!(vbar_exponential_family(&[1, 1], 2).unwrap(), 20.0);
    }

    #[test]
    fn default_step_respects_root_delta() {
        let s = default_step(2, 0.0784).unwrap();
        assert!(s <= 0.0784f64.sqrt());
        assert!(simplex_grid(2, 0.0784, s).is_ok());
    }
}
