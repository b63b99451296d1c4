use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::Emission;
use crate::hmm::{HmmParams, SimplexWeights, TransitionMatrix};

use super::rng::rng_from_seed;

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn markov_path<R: Rng + ?Sized>(q: &TransitionMatrix, pi0: &SimplexWeights, n: usize, rng: &mut R) -> Vec<usize> {
    let mut path = Vec::with_capacity(n);
    if n == 0 {
        return path;
    }
    let mut state = draw(pi0.as_slice(), rng);
    path.push(state);
    for _ in 1..n {
        state = draw(q.row(state), rng);
        path.push(state);
    }
    path
}

/// States `0..K` of a chain started from `pi0`.
pub fn simulate_markov(q: &TransitionMatrix, pi0: &SimplexWeights, n: usize, seed: u64) -> Result<Vec<usize>> {
    if q.k() != pi0.k() {
        return Err(Error::invalid("initial law and transition matrix disagree on K"));
    }
    Ok(markov_path(q, pi0, n, &mut rng_from_seed(seed)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmPath {
    pub observations: Vec<f64>,
    pub hidden: Vec<usize>,
}

/// Observations of an HMM whose hidden chain starts from `params.w`.
pub fn simulate_hmm(params: &HmmParams, n: usize, seed: u64) -> Result<HmmPath> {
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    let hidden = markov_path(&params.q, &params.w, n, &mut rng);
    let observations = hidden.iter().map(|&h| params.emissions[h].sample(&mut rng)).collect();
    Ok(HmmPath { observations, hidden })
}

/// Law of replacement values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Contaminant {
    Law { law: Emission },
    Point { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Contaminant {
    fn validate(&self) -> Result<()> {
        match self {
            Contaminant::Law { law } => law.validate(),
            Contaminant::Point { value } if value.is_finite() => Ok(()),
            Contaminant::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            _ => Err(Error::invalid(format!("invalid contaminant {self:?}"))),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Contaminant::Law { law } => law.sample(rng),
            Contaminant::Point { value } => *value,
            Contaminant::Uniform { lo, hi } => rng.random_range(*lo..*hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContaminationMode {
    /// Each point replaced independently with probability `epsilon`.
    Huber { epsilon: f64 },
    /// Exactly these 0-based indices replaced.
    OutlierSet { indices: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationSpec {
    pub mode: ContaminationMode,
    pub contaminant: Contaminant,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contaminated {
    pub values: Vec<f64>,
    pub replaced: Vec<bool>,
}

/// `Y_i = E_i X_i + (1 − E_i) Z_i` with `Z_i` drawn from the contaminant.
pub fn contaminate(series: &[f64], spec: &ContaminationSpec) -> Result<Contaminated> {
    spec.contaminant.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let replaced: Vec<bool> = match &spec.mode {
        ContaminationMode::Huber { epsilon } => {
            if !(0.0..=1.0).contains(epsilon) {
                return Err(Error::invalid(format!("epsilon must lie in [0, 1], got {epsilon}")));
            }
            series.iter().map(|_| rng.random::<f64>() < *epsilon).collect()
        }
        ContaminationMode::OutlierSet { indices } => {
            let mut mask = vec![false; series.len()];
            for &i in indices {
                *mask.get_mut(i).ok_or_else(|| {
                    Error::invalid(format!("outlier index {i} out of range for n = {}", series.len()))
                })? = true;
            }
            mask
        }
    };
    let values = series
        .iter()
        .zip(&replaced)
        .map(|(&x, &r)| if r { spec.contaminant.sample(&mut rng) } else { x })
        .collect();
    Ok(Contaminated { values, replaced })
}

type DriftFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Euler–Maruyama set-up for `dY = dB − U'(Y) dt`.
///
/// The drift `−U'` must be globally Lipschitz on the range the path visits;
/// that is the caller's responsibility.
#[derive(Clone)]
pub struct DiffusionSpec {
    drift: Arc<DriftFn>,
    pub dt: f64,
    /// Steps discarded before the first output.
    pub burn_in: usize,
    /// Steps between consecutive outputs.
    pub thin: usize,
    pub x0: f64,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("dt", &self.dt)
            .field("burn_in", &self.burn_in)
            .field("thin", &self.thin)
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

impl DiffusionSpec {
    pub fn new(drift: impl Fn(f64) -> f64 + Send + Sync + 'static, dt: f64, burn_in: usize, thin: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || thin == 0 {
            return Err(Error::invalid("diffusion needs dt > 0 and thin >= 1"));
        }
        Ok(DiffusionSpec {
            drift: Arc::new(drift),
            dt,
            burn_in,
            thin,
            x0: 0.0,
        })
    }

    pub fn starting_at(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }
}

/// Potentials with a closed-form gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// `U(x) = c x²/2`; the invariant law is `N(0, 1/(2c))`.
    Quadratic { curvature: f64 },
    /// `U(x) = b x⁴/4 − a x²/2`.
    DoubleWell { a: f64, b: f64 },
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Potential::Quadratic { curvature } => 0.5 * curvature * x * x,
            Potential::DoubleWell { a, b } => 0.25 * b * x.powi(4) - 0.5 * a * x * x,
        }
    }

    pub fn gradient(&self, x: f64) -> f64 {
        match *self {
            Potential::Quadratic { curvature } => curvature * x,
            Potential::DoubleWell { a, b } => b * x.powi(3) - a * x,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Potential::Quadratic { curvature } => curvature > 0.0 && curvature.is_finite(),
            Potential::DoubleWell { a, b } => a.is_finite() && b > 0.0 && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid potential {self:?}")))
        }
    }
}

/// Thinned Euler–Maruyama path `Y ← Y − U'(Y) dt + √dt · N(0,1)`.
pub fn simulate_langevin(spec: &DiffusionSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    let sqrt_dt = spec.dt.sqrt();
    let mut y = spec.x0;
    let mut step = |y: &mut f64| {
        let z: f64 = StandardNormal.sample(&mut rng);
        *y += spec.drift(*y) * spec.dt + sqrt_dt * z;
    };
    for _ in 0..spec.burn_in {
        step(&mut y);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..spec.thin {
            step(&mut y);
        }
        if !y.is_finite() {
            return Err(Error::invalid("diffusion path diverged; reduce dt"));
        }
        out.push(y);
    }
    Ok(out)
}
