use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::measure::{DensityCandidate, FnDensity, QuadratureRule, SampleSpace};

type VecFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type StatFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;
type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;
type ThetaFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A one-dimensional exponential family
/// `f_θ(x) = exp(⟨η(θ), T(x)⟩ + A(θ) + B(x))`.
///
/// `B` returns `−∞` outside the support. When `A` is not supplied it is
/// obtained by quadrature on the family's space and cached per `θ`.
#[derive(Clone)]
pub struct ExpFamilySpec {
    name: String,
    dim: usize,
    eta: Arc<VecFn>,
    statistic: Arc<StatFn>,
    base: Arc<ScalarFn>,
    log_normalizer: Option<Arc<ThetaFn>>,
    theta_domain: Vec<(f64, f64)>,
    space: SampleSpace,
    breakpoints: Vec<f64>,
    cache: Arc<Mutex<HashMap<Vec<u64>, f64>>>,
}

impl fmt::Debug for ExpFamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpFamilySpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("theta_domain", &self.theta_domain)
            .finish_non_exhaustive()
    }
}

impl ExpFamilySpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        space: SampleSpace,
        theta_domain: Vec<(f64, f64)>,
        eta: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        statistic: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        base: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("exponential family dimension must be positive"));
        }
        if space.arity() != 1 {
            return Err(Error::invalid("exponential families live on one-dimensional spaces"));
        }
        Ok(ExpFamilySpec {
            name: name.into(),
            dim,
            eta: Arc::new(eta),
            statistic: Arc::new(statistic),
            base: Arc::new(base),
            log_normalizer: None,
            theta_domain,
            space,
            breakpoints: Vec::new(),
            cache: Arc::default(),
        })
    }

    pub fn with_log_normalizer(mut self, a: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.log_normalizer = Some(Arc::new(a));
        self
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    /// `θ e^{−θx}` on `x ≥ 0`.
    pub fn exponential(space: SampleSpace) -> Result<Self> {
        Ok(Self::new(
            "exponential",
            1,
            space,
            vec![(0.0, f64::INFINITY)],
            |t| vec![-t[0]],
            |x| vec![x],
            |x| if x >= 0.0 { 0.0 } else { f64::NEG_INFINITY },
        )?
        .with_log_normalizer(|t| t[0].ln())
        .with_breakpoints(vec![0.0]))
    }

    /// `N(θ, σ²)` with `σ` fixed.
    pub fn gaussian_location(space: SampleSpace, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        let s2 = sigma * sigma;
        Ok(Self::new(
            "gaussian_location",
            1,
            space,
            vec![(f64::NEG_INFINITY, f64::INFINITY)],
            move |t| vec![t[0] / s2],
            |x| vec![x],
            move |x| -x * x / (2.0 * s2),
        )?
        .with_log_normalizer(move |t| -t[0] * t[0] / (2.0 * s2) - 0.5 * (2.0 * std::f64::consts::PI * s2).ln()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta_domain.len() {
            return Err(Error::invalid(format!(
                "{} expects {} parameters, got {}",
                self.name,
                self.theta_domain.len(),
                theta.len()
            )));
        }
        for (t, (lo, hi)) in theta.iter().zip(&self.theta_domain) {
            if !(t > lo && t < hi) {
                return Err(Error::invalid(format!("{} parameter {t} outside ({lo}, {hi})", self.name)));
            }
        }
        Ok(())
    }

    fn unnormalized(&self, eta: &[f64], x: f64) -> f64 {
        let b = (self.base)(x);
        if b == f64::NEG_INFINITY {
            return b;
        }
        let t = (self.statistic)(x);
        eta.iter().zip(&t).map(|(e, t)| e * t).sum::<f64>() + b
    }

    /// `A(θ)`, supplied or computed as `−ln ∫ exp(⟨η,T⟩ + B) dμ`.
    pub fn log_normalizer(&self, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        if let Some(a) = &self.log_normalizer {
            return Ok(a(theta));
        }
        let key: Vec<u64> = theta.iter().map(|t| t.to_bits()).collect();
        if let Some(&a) = self.cache.lock().unwrap().get(&key) {
            return Ok(a);
        }
        let eta = (self.eta)(theta);
        if eta.len() != self.dim {
            return Err(Error::invalid("eta returned the wrong dimension"));
        }
        let rule = QuadratureRule::new(&self.space, &self.breakpoints, &[])?;
        let mass = rule.integrate(|x| self.unnormalized(&eta, x[0]).exp());
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::QuadratureNonConvergence { residual: mass });
        }
        let a = -mass.ln();
        self.cache.lock().unwrap().insert(key, a);
        Ok(a)
    }

    pub fn candidate(&self, id: impl Into<String>, theta: &[f64]) -> Result<DensityCandidate> {
        let a = self.log_normalizer(theta)?;
        let eta = (self.eta)(theta);
        let spec = self.clone();
        let density = FnDensity::new(move |x| spec.unnormalized(&eta, x[0]) + a).with_breakpoints(self.breakpoints.clone());
        Ok(DensityCandidate::new(id, self.space.clone(), Arc::new(density))
            .with_metadata("family", self.name.clone())
            .with_metadata("theta", format!("{theta:?}")))
    }
}

/// `⟨η(θ), T(x)⟩ + A(θ) + B(x)`.
pub fn expfam_log_density(spec: &ExpFamilySpec, theta: &[f64], x: f64) -> Result<f64> {
    let a = spec.log_normalizer(theta)?;
    let eta = (spec.eta)(theta);
    Ok(spec.unnormalized(&eta, x) + a)
}
