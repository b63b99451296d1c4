use super::candidate::DensityCandidate;
use super::quadrature::{QuadratureRule, NORMALIZATION_TOLERANCE};
use super::space::ReferenceMeasure;
use crate::error::{Error, Result};

/// Log-density values of two candidates on a shared rule, with masses checked.
struct Paired {
    rule: QuadratureRule,
    lp: Vec<f64>,
    lq: Vec<f64>,
}

fn paired(p: &DensityCandidate, q: &DensityCandidate) -> Result<Paired> {
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    let rule = QuadratureRule::for_candidates(p.space(), &[p, q])?;
    let lp = rule.log_values(p)?;
    let lq = rule.log_values(q)?;
    check_mass(&rule, p, &lp)?;
    check_mass(&rule, q, &lq)?;
    Ok(Paired { rule, lp, lq })
}

pub(crate) fn check_mass(rule: &QuadratureRule, c: &DensityCandidate, log_values: &[f64]) -> Result<()> {
    let residual = (rule.mass(log_values) - 1.0).abs();
    if residual.is_nan() || residual > NORMALIZATION_TOLERANCE {
        return Err(match c.space().reference_measure() {
            ReferenceMeasure::Counting => Error::NotNormalized {
                id: c.id().to_string(),
                residual,
            },
            ReferenceMeasure::Lebesgue => Error::QuadratureNonConvergence { residual },
        });
    }
    Ok(())
}

/// Fails when `c` does not integrate to one on `rule`.
pub fn check_mass_on_rule(rule: &QuadratureRule, c: &DensityCandidate) -> Result<()> {
    let values = rule.log_values(c)?;
    check_mass(rule, c, &values)
}

/// `½ Σ w (exp(lp/2) − exp(lq/2))²`, clamped to `[0, 1]`; exactly 1 when
/// no node carries both densities.
pub fn hellinger2_from_logs(weights: &[f64], lp: &[f64], lq: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut overlap = false;
    for ((w, a), b) in weights.iter().zip(lp).zip(lq) {
        overlap |= *a > f64::NEG_INFINITY && *b > f64::NEG_INFINITY;
        if a == b {
            continue;
        }
        let d = (0.5 * a).exp() - (0.5 * b).exp();
        acc += w * d * d;
    }
    if !overlap {
        return 1.0;
    }
    (0.5 * acc).clamp(0.0, 1.0)
}

/// Squared Hellinger distance `½∫(√p − √q)² dμ`.
pub fn hellinger2(p: &DensityCandidate, q: &DensityCandidate) -> Result<f64> {
    let v = paired(p, q)?;
    Ok(hellinger2_from_logs(v.rule.weights(), &v.lp, &v.lq))
}

/// Total variation `½∫|p − q| dμ`.
pub fn total_variation(p: &DensityCandidate, q: &DensityCandidate) -> Result<f64> {
    let v = paired(p, q)?;
    let acc: f64 = v
        .rule
        .weights()
        .iter()
        .zip(&v.lp)
        .zip(&v.lq)
        .map(|((w, a), b)| w * (a.exp() - b.exp()).abs())
        .sum();
    Ok((0.5 * acc).clamp(0.0, 1.0))
}

/// `∫ p ln(p/q) dμ`; `+∞` when `p` charges a node where `q` vanishes.
pub fn kl_divergence(p: &DensityCandidate, q: &DensityCandidate) -> Result<f64> {
    let v = paired(p, q)?;
    let mut acc = 0.0;
    for ((w, &a), &b) in v.rule.weights().iter().zip(&v.lp).zip(&v.lq) {
        if a == f64::NEG_INFINITY {
            continue;
        }
        if b == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        acc += w * a.exp() * (a - b);
    }
    Ok(acc.max(0.0))
}

/// `9 ln(2m)`, the dimension bound used for a finite model of size `m`.
pub fn finite_model_dimension(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::EmptyModel);
    }
    Ok(9.0 * (2.0 * m as f64).ln())
}

/// `1 + log₂ m`, the VC index of a finite class of size `m`.
pub fn vc_index_finite(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::EmptyModel);
    }
    Ok(1.0 + (m as f64).log2())
}
