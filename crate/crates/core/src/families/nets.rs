use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measure::{DensityCandidate, LogDensity, SampleSpace, DEFAULT_NODES_PER_PANEL};

use super::emission::Emission;

/// Largest net [`log_concave_net_1d`] will enumerate.
pub const MAX_LOG_CONCAVE_NET: usize = 100_000;

/// `count` log-uniform values from `lo` to `hi`; a single value is `√(lo·hi)`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && lo < hi && hi.is_finite()) || count == 0 {
        return Err(Error::invalid("geometric grid needs 0 < lo < hi and count >= 1"));
    }
    if count == 1 {
        return Ok(vec![(lo * hi).sqrt()]);
    }
    let ratio = hi / lo;
    let last = (count - 1) as f64;
    Ok((0..count)
        .map(|i| if i + 1 == count { hi } else { lo * ratio.powf(i as f64 / last) })
        .collect())
}

/// `count` evenly spaced values from `lo` to `hi`; a single value is the midpoint.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo <= hi && lo.is_finite() && hi.is_finite()) || count == 0 {
        return Err(Error::invalid("uniform grid needs finite lo <= hi and count >= 1"));
    }
    if count == 1 {
        return Ok(vec![0.5 * (lo + hi)]);
    }
    let step = (hi - lo) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| if i + 1 == count { hi } else { lo + step * i as f64 })
        .collect())
}

fn candidates(space: &SampleSpace, prefix: &str, emissions: Vec<Emission>) -> Result<Vec<DensityCandidate>> {
    emissions
        .into_iter()
        .enumerate()
        .map(|(i, e)| e.candidate(format!("{prefix}{i}"), space))
        .collect()
}

/// Exponential densities `θe^{−θx}` with log-uniform rates.
pub fn exponential_net(space: &SampleSpace, rate_min: f64, rate_max: f64, count: usize) -> Result<Vec<DensityCandidate>> {
    let emissions = geometric_grid(rate_min, rate_max, count)?
        .into_iter()
        .map(|rate| Emission::Exponential { rate })
        .collect();
    candidates(space, "exponential-", emissions)
}

/// `N(z, σ²)` for evenly spaced `z`.
pub fn gaussian_location_net(
    space: &SampleSpace,
    sigma: f64,
    z_min: f64,
    z_max: f64,
    count: usize,
) -> Result<Vec<DensityCandidate>> {
    let emissions = uniform_grid(z_min, z_max, count)?
        .into_iter()
        .map(|mean| Emission::Gaussian { mean, sd: sigma })
        .collect();
    candidates(space, "gaussian-", emissions)
}

/// `N(z, σ²)` over an even `z` grid crossed with a log-uniform `σ` grid,
/// `z` varying slowest.
pub fn gaussian_scale_location_net(
    space: &SampleSpace,
    z: (f64, f64, usize),
    sigma: (f64, f64, usize),
) -> Result<Vec<DensityCandidate>> {
    let zs = uniform_grid(z.0, z.1, z.2)?;
    let sds = geometric_grid(sigma.0, sigma.1, sigma.2)?;
    let emissions = zs
        .iter()
        .flat_map(|&mean| sds.iter().map(move |&sd| Emission::Gaussian { mean, sd }))
        .collect();
    candidates(space, "gaussian-", emissions)
}

/// Translates `f_α(· − z)` for evenly spaced `z`.
pub fn singular_translate_net(
    space: &SampleSpace,
    alpha: f64,
    z_min: f64,
    z_max: f64,
    count: usize,
) -> Result<Vec<DensityCandidate>> {
    let emissions = uniform_grid(z_min, z_max, count)?
        .into_iter()
        .map(|z| Emission::SingularTranslate { alpha, z })
        .collect();
    candidates(space, "singular-", emissions)
}

/// `exp(g(x))` with `g` continuous and piecewise linear between knots.
#[derive(Debug, Clone)]
pub struct PiecewiseLogLinear {
    knots: Vec<f64>,
    slopes: Vec<f64>,
    offsets: Vec<f64>,
    log_norm: f64,
}

impl PiecewiseLogLinear {
    /// Normalized density with `g(knots[0]) = 0` before normalization.
    pub fn new(knots: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || slopes.len() + 1 != knots.len() {
            return Err(Error::invalid("need at least two knots and one slope per piece"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) || slopes.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("knots must increase and slopes be finite"));
        }
        let mut offsets = Vec::with_capacity(slopes.len());
        let mut g = 0.0;
        let mut log_pieces = Vec::with_capacity(slopes.len());
        for (k, &s) in slopes.iter().enumerate() {
            offsets.push(g);
            let h = knots[k + 1] - knots[k];
            // ln ∫_0^h e^{g + s u} du, written to stay accurate for small |s h|.
            let log_piece = if s == 0.0 {
                g + h.ln()
            } else if s > 0.0 {
                g + s * h + (-(-s * h).exp_m1()).ln() - s.ln()
            } else {
                g + (-(s * h).exp_m1()).ln() - (-s).ln()
            };
            log_pieces.push(log_piece);
            g += s * h;
        }
        let max = log_pieces.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + log_pieces.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        Ok(PiecewiseLogLinear {
            knots,
            slopes,
            offsets,
            log_norm,
        })
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }
}

impl LogDensity for PiecewiseLogLinear {
    fn log_density(&self, x: &[f64]) -> f64 {
        let x = x[0];
        let last = self.knots.len() - 1;
        if x < self.knots[0] || x > self.knots[last] {
            return f64::NEG_INFINITY;
        }
        let k = self.knots.partition_point(|&t| t <= x).clamp(1, last) - 1;
        self.offsets[k] + self.slopes[k] * (x - self.knots[k]) - self.log_norm
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.knots.clone()
    }
}

/// Log-concave densities on `support` whose log is piecewise linear on
/// `knot_count` evenly spaced knots, with every non-increasing slope sequence
/// drawn from `slope_grid`.
///
/// This is a practical finite family for experiments; it is not an ε-net
/// with a certified Hellinger radius, and each candidate says so in its
/// metadata.
pub fn log_concave_net_1d(support: (f64, f64), knot_count: usize, slope_grid: &[f64]) -> Result<Vec<DensityCandidate>> {
    if knot_count < 2 {
        return Err(Error::invalid("log-concave net needs at least two knots"));
    }
    let mut grid: Vec<f64> = slope_grid.to_vec();
    if grid.is_empty() || grid.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("slope grid must be non-empty and finite"));
    }
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    if !(support.0 < support.1) {
        return Err(Error::invalid("support must be a non-degenerate interval"));
    }
    let knots = uniform_grid(support.0, support.1, knot_count)?;
    let space = SampleSpace::continuous_with_cuts(knots.clone(), DEFAULT_NODES_PER_PANEL)?;
    let pieces = knot_count - 1;
    let mut sequences: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::with_capacity(pieces);
    enumerate_non_increasing(grid.len(), pieces, 0, &mut current, &mut sequences)?;
    sequences
        .into_iter()
        .enumerate()
        .map(|(i, seq)| {
            let slopes: Vec<f64> = seq.iter().map(|&g| grid[g]).collect();
            let density = PiecewiseLogLinear::new(knots.clone(), slopes.clone())?;
            Ok(DensityCandidate::new(format!("logconcave-{i}"), space.clone(), Arc::new(density))
                .with_metadata("family", "log_concave_piecewise_linear")
                .with_metadata("slopes", format!("{slopes:?}"))
                .with_metadata("net", "practical grid, not a certified epsilon-net"))
        })
        .collect()
}

/// Index sequences into a descending grid, each index `>=` the previous one.
fn enumerate_non_increasing(
    grid_len: usize,
    remaining: usize,
    from: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) -> Result<()> {
    if remaining == 0 {
        if out.len() >= MAX_LOG_CONCAVE_NET {
            return Err(Error::BudgetExceeded {
                count: out.len() + 1,
                budget: MAX_LOG_CONCAVE_NET,
            });
        }
        out.push(current.clone());
        return Ok(());
    }
    for g in from..grid_len {
        current.push(g);
        enumerate_non_increasing(grid_len, remaining - 1, g, current, out)?;
        current.pop();
    }
    Ok(())
}
