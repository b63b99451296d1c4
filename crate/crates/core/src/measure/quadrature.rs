//! Composite Gauss–Legendre rules over sample spaces.
//!
//! A rule is a flat list of points with positive weights. Discrete spaces get
//! their atoms with unit weight, continuous windows get one Gauss–Legendre
//! panel between consecutive edges, and product spaces get the tensor
//! product of the one-dimensional rule.
//!
//! Edges come from the space's cuts plus every breakpoint and singular point
//! declared by the densities the rule has to serve. A panel whose left edge
//! carries an integrable singularity `|x - a|^(-alpha)` is mapped through
//! `x = a + (b - a) u^m` with `m = 4 / (1 - alpha)`; the singular factor then
//! turns into the polynomial `u^3` and the panel integrates it exactly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use super::candidate::{DensityCandidate, Singularity};
use super::space::SampleSpace;
use crate::error::{Error, Result};

/// Upper bound on the number of points a rule may hold.
pub const MAX_RULE_POINTS: usize = 1 << 22;

/// Tolerance on `∫ exp(log_density) dμ = 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

const PARALLEL_THRESHOLD: usize = 4096;

type NodeTable = Arc<(Vec<f64>, Vec<f64>)>;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> NodeTable {
    static CACHE: OnceLock<Mutex<HashMap<usize, NodeTable>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&n) {
        return hit.clone();
    }
    let table = Arc::new(compute_gauss_legendre(n));
    cache.lock().unwrap().insert(n, table.clone());
    table
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Panel {
    a: f64,
    b: f64,
    left_alpha: Option<f64>,
    right_alpha: Option<f64>,
}

/// A weighted point set integrating against the space's reference measure.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    arity: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Rule adapted to every breakpoint and singularity of `candidates`.
    pub fn for_candidates(space: &SampleSpace, candidates: &[&DensityCandidate]) -> Result<Self> {
        let mut breakpoints = Vec::new();
        let mut singularities = Vec::new();
        for c in candidates {
            if c.space() != space {
                return Err(Error::SpaceMismatch);
            }
            breakpoints.extend(c.density().breakpoints());
            singularities.extend(c.density().singularities());
        }
        Self::new(space, &breakpoints, &singularities)
    }

    pub fn new(space: &SampleSpace, breakpoints: &[f64], singularities: &[Singularity]) -> Result<Self> {
        let (nodes, weights) = match space.base() {
            SampleSpace::Discrete { atoms } => (atoms.clone(), vec![1.0; atoms.len()]),
            SampleSpace::Continuous1d {
                cuts,
                nodes_per_panel,
            } => {
                let panels = build_panels(cuts, breakpoints, singularities);
                panel_nodes(&panels, *nodes_per_panel)
            }
            SampleSpace::Product { .. } => unreachable!("validated spaces have a flat base"),
        };
        let arity = space.arity();
        let size = nodes
            .len()
            .checked_pow(arity as u32)
            .filter(|&s| s <= MAX_RULE_POINTS)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "quadrature rule with {} nodes per axis and arity {arity} exceeds {MAX_RULE_POINTS} points",
                    nodes.len()
                ))
            })?;
        if arity == 1 {
            return Ok(QuadratureRule {
                arity,
                points: nodes,
                weights,
            });
        }
        let m = nodes.len();
        let mut points = Vec::with_capacity(size * arity);
        let mut tensor_weights = Vec::with_capacity(size);
        let mut digits = vec![0usize; arity];
        for _ in 0..size {
            let mut w = 1.0;
            for &d in &digits {
                points.push(nodes[d]);
                w *= weights[d];
            }
            tensor_weights.push(w);
            for pos in (0..arity).rev() {
                digits[pos] += 1;
                if digits[pos] < m {
                    break;
                }
                digits[pos] = 0;
            }
        }
        Ok(QuadratureRule {
            arity,
            points,
            weights: tensor_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.arity..(i + 1) * self.arity]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f(self.point(i))).sum()
    }

    /// Log-density of `candidate` at every node, in node order.
    pub fn log_values(&self, candidate: &DensityCandidate) -> Result<Vec<f64>> {
        let density = candidate.density();
        let eval = |i: usize| density.log_density(self.point(i));
        let values: Vec<f64> = if self.len() >= PARALLEL_THRESHOLD {
            (0..self.len()).into_par_iter().map(eval).collect()
        } else {
            (0..self.len()).map(eval).collect()
        };
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidDensity {
                id: candidate.id().to_string(),
            });
        }
        Ok(values)
    }

    /// `∫ exp(log_values)` under this rule.
    pub fn mass(&self, log_values: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(log_values)
            .map(|(w, l)| w * l.exp())
            .sum()
    }
}

fn same_edge(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-13 * x.abs().max(y.abs()).max(1.0)
}

fn build_panels(cuts: &[f64], breakpoints: &[f64], singularities: &[Singularity]) -> Vec<Panel> {
    let lo = cuts[0];
    let hi = cuts[cuts.len() - 1];
    let mut edges: Vec<f64> = cuts.to_vec();
    edges.extend(breakpoints.iter().copied().filter(|x| x.is_finite() && *x > lo && *x < hi));
    edges.extend(
        singularities
            .iter()
            .map(|s| s.at)
            .filter(|x| x.is_finite() && *x >= lo && *x <= hi),
    );
    edges.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(edges.len());
    for e in edges {
        match merged.last() {
            Some(&last) if same_edge(last, e) => {}
            _ => merged.push(e),
        }
    }
    let alpha_at = |x: f64| {
        singularities
            .iter()
            .filter(|s| same_edge(s.at, x))
            .map(|s| s.exponent)
            .fold(None, |acc: Option<f64>, a| Some(acc.map_or(a, |b| b.max(a))))
    };
    let mut panels = Vec::new();
    for w in merged.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (la, ra) = (alpha_at(a), alpha_at(b));
        if la.is_some() && ra.is_some() {
            let mid = 0.5 * (a + b);
            panels.push(Panel {
                a,
                b: mid,
                left_alpha: la,
                right_alpha: None,
            });
            panels.push(Panel {
                a: mid,
                b,
                left_alpha: None,
                right_alpha: ra,
            });
        } else {
            panels.push(Panel {
                a,
                b,
                left_alpha: la,
                right_alpha: ra,
            });
        }
    }
    panels
}

fn panel_nodes(panels: &[Panel], n: usize) -> (Vec<f64>, Vec<f64>) {
    let table = gauss_legendre(n);
    let (t, w) = (&table.0, &table.1);
    let mut nodes = Vec::with_capacity(panels.len() * n);
    let mut weights = Vec::with_capacity(panels.len() * n);
    for p in panels {
        let len = p.b - p.a;
        match (p.left_alpha, p.right_alpha) {
            (None, None) => {
                let (c, h) = (0.5 * (p.a + p.b), 0.5 * len);
                for (ti, wi) in t.iter().zip(w) {
                    nodes.push(c + h * ti);
                    weights.push(h * wi);
                }
            }
            (Some(alpha), _) | (None, Some(alpha)) => {
                let left = p.left_alpha.is_some();
                let m = 4.0 / (1.0 - alpha);
                for (ti, wi) in t.iter().zip(w) {
                    let u = 0.5 * (ti + 1.0);
                    let offset = len * u.powf(m);
                    let x = if left { p.a + offset } else { p.b - offset };
                    // Nodes that round onto the singular point carry O(u^4) mass.
                    if x == p.a && left || x == p.b && !left {
                        continue;
                    }
                    nodes.push(x);
                    weights.push(0.5 * wi * m * len * u.powf(m - 1.0));
                }
            }
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let table = gauss_legendre(8);
        let (x, w) = (&table.0, &table.1);
        for deg in 0..16u32 {
            let got: f64 = x.iter().zip(w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((got - want).abs() < 1e-14, "degree {deg}: {got} vs {want}");
        }
    }

    #[test]
    fn weights_sum_to_two_for_large_rules() {
        let table = gauss_legendre(64);
        let total: f64 = table.1.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }

    #[test]
    fn singular_panel_integrates_power_exactly() {
        let space = SampleSpace::continuous_with_cuts(vec![-1.0, 1.0], 16).unwrap();
        let alpha = 0.7;
        let rule = QuadratureRule::new(&space, &[], &[Singularity { at: 0.0, exponent: alpha }]).unwrap();
        let total = rule.integrate(|x| x[0].abs().powf(-alpha));
        let exact = 2.0 / (1.0 - alpha);
        assert!((total - exact).abs() < 1e-12, "{total} vs {exact}");
    }

    #[test]
    fn product_rule_is_tensor() {
        let base = SampleSpace::symbols(3).unwrap();
        let space = SampleSpace::product(base, 2).unwrap();
        let rule = QuadratureRule::new(&space, &[], &[]).unwrap();
        assert_eq!(rule.len(), 9);
        assert_eq!(rule.point(5), &[1.0, 2.0]);
    }

    #[test]
    fn oversized_rule_rejected() {
        let base = SampleSpace::continuous_uniform(0.0, 1.0, 64).unwrap();
        let space = SampleSpace::product(base, 3).unwrap();
        assert!(QuadratureRule::new(&space, &[], &[]).is_err());
    }
}
