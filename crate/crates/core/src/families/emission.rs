use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DensityCandidate, LogDensity, SampleSpace, Singularity};

/// One-dimensional emission law of a hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Emission {
    /// Probabilities of the symbols `0, 1, …, m − 1`.
    Categorical { probs: Vec<f64> },
    Exponential { rate: f64 },
    Gaussian { mean: f64, sd: f64 },
    /// `(1 − α)/2 · |x − z|^(−α)` on `|x − z| ≤ 1`.
    SingularTranslate { alpha: f64, z: f64 },
}

impl Emission {
    pub fn family(&self) -> &'static str {
        match self {
            Emission::Categorical { .. } => "categorical",
            Emission::Exponential { .. } => "exponential",
            Emission::Gaussian { .. } => "gaussian",
            Emission::SingularTranslate { .. } => "singular_translate",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Emission::Categorical { probs } => {
                !probs.is_empty()
                    && probs.iter().all(|p| p.is_finite() && *p >= 0.0)
                    && (probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9
            }
            Emission::Exponential { rate } => rate.is_finite() && *rate > 0.0,
            Emission::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && *sd > 0.0,
            Emission::SingularTranslate { alpha, z } => *alpha > 0.0 && *alpha < 1.0 && z.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid {} parameters: {self:?}", self.family())))
        }
    }

    /// Parameter vector used by the parameter-error metric.
    pub fn theta(&self) -> Vec<f64> {
        match self {
            Emission::Categorical { probs } => probs.clone(),
            Emission::Exponential { rate } => vec![*rate],
            Emission::Gaussian { mean, sd } => vec![*mean, *sd],
            Emission::SingularTranslate { alpha, z } => vec![*alpha, *z],
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            Emission::Categorical { probs } => {
                if x >= 0.0 && x.fract() == 0.0 && (x as usize) < probs.len() {
                    probs[x as usize].ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Emission::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
            Emission::Gaussian { mean, sd } => {
                let u = (x - mean) / sd;
                -0.5 * u * u - sd.ln() - 0.5 * (2.0 * PI).ln()
            }
            Emission::SingularTranslate { alpha, z } => falpha_log_density_unchecked(*alpha, *z, x),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Emission::Exponential { .. } => vec![0.0],
            Emission::SingularTranslate { z, .. } => vec![z - 1.0, z + 1.0],
            _ => Vec::new(),
        }
    }

    pub fn singularities(&self) -> Vec<Singularity> {
        match self {
            Emission::SingularTranslate { alpha, z } => vec![Singularity {
                at: *z,
                exponent: *alpha,
            }],
            _ => Vec::new(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Emission::Categorical { probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i as f64;
                    }
                }
                probs.iter().rposition(|p| *p > 0.0).unwrap_or(0) as f64
            }
            Emission::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            Emission::Gaussian { mean, sd } => Normal::new(*mean, *sd).expect("validated sd").sample(rng),
            Emission::SingularTranslate { alpha, z } => {
                let u: f64 = rng.random();
                let r = u.powf(1.0 / (1.0 - alpha));
                if rng.random::<bool>() {
                    z + r
                } else {
                    z - r
                }
            }
        }
    }

    /// Checks that `space` can carry this emission.
    pub fn check_space(&self, space: &SampleSpace) -> Result<()> {
        match (self, space) {
            (Emission::Categorical { probs }, SampleSpace::Discrete { atoms }) => {
                let symbols = atoms.len() == probs.len() && atoms.iter().enumerate().all(|(i, a)| *a == i as f64);
                if symbols {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "categorical emission with {} symbols needs atoms 0..{}",
                        probs.len(),
                        probs.len()
                    )))
                }
            }
            (Emission::Categorical { .. }, _) => Err(Error::invalid("categorical emission needs a discrete space")),
            (_, SampleSpace::Continuous1d { .. }) => Ok(()),
            _ => Err(Error::invalid(format!("{} emission needs a continuous space", self.family()))),
        }
    }

    pub fn candidate(&self, id: impl Into<String>, space: &SampleSpace) -> Result<DensityCandidate> {
        self.validate()?;
        self.check_space(space)?;
        Ok(DensityCandidate::new(id, space.clone(), Arc::new(EmissionDensity(self.clone())))
            .with_metadata("family", self.family())
            .with_metadata("theta", format!("{:?}", self.theta())))
    }
}

/// [`LogDensity`] view of an [`Emission`] on a one-dimensional space.
#[derive(Debug, Clone)]
pub struct EmissionDensity(pub Emission);

impl LogDensity for EmissionDensity {
    fn log_density(&self, x: &[f64]) -> f64 {
        self.0.log_density(x[0])
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.0.breakpoints()
    }

    fn singularities(&self) -> Vec<Singularity> {
        self.0.singularities()
    }
}

fn falpha_log_density_unchecked(alpha: f64, z: f64, x: f64) -> f64 {
    let r = (x - z).abs();
    if r == 0.0 {
        f64::INFINITY
    } else if r <= 1.0 {
        ((1.0 - alpha) / 2.0).ln() - alpha * r.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `ln((1 − α)/2) − α ln|x − z|` on `0 < |x − z| ≤ 1`, `+∞` at `z`, `−∞` outside.
pub fn falpha_log_density(alpha: f64, z: f64, x: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(falpha_log_density_unchecked(alpha, z, x))
}
