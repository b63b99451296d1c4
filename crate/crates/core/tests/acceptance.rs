//! Acceptance criteria, one line per criterion.
//!
//! Runs without the libtest harness so the lines come out in order and the
//! determinism check can reuse the rate experiment's report. Exits non-zero
//! when any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use rhodep::dependence::{coefficient_of_information, markov_dependence_term, reverse_pinsker_gap};
use rhodep::families::Emission;
use rhodep::harness::{run_experiment, ExperimentConfig, RiskReport};
use rhodep::hmm::{product_chain_density, HmmParams, SimplexWeights, TransitionMatrix};
use rhodep::measure::{hellinger2, SampleSpace};

const METRIC_TOL: f64 = 1e-6;
const METRIC_BUDGET: Duration = Duration::from_secs(5);
const FACTORIZATION_TOL: f64 = 1e-10;
const INFORMATION_TOL: f64 = 1e-9;
const APPROXIMATION_SLACK: f64 = 1e-12;
const FORWARD_REL_TOL: f64 = 1e-12;
const RECOVERY_MIN: usize = 95;
const RECOVERY_BUDGET: Duration = Duration::from_secs(10);
const SLOPE_BAND: (f64, f64) = (-1.4, -0.6);
const RATE_BUDGET: Duration = Duration::from_secs(300);
const CONTAMINATION_MAX_RATIO: f64 = 3.0;
const SELECTION_RISK_FACTOR: f64 = 3.0;
const SELECTION_MIN_SHARE: f64 = 0.8;
const LANGEVIN_MAX_MEDIAN: f64 = 0.02;
const DECAY_MIN_R2: f64 = 0.99;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize, allow_zeros: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k)
        .map(|_| {
            if allow_zeros && rng.random::<f64>() < 0.2 {
                0.0
            } else {
                rng.random::<f64>() + 0.05
            }
        })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Ordinary least squares `(slope, r2)`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    (sxy / sxx, sxy * sxy / (sxx * syy))
}

fn categorical_h2(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum::<f64>()
}

// 1. Quadrature Hellinger against the closed-form Gaussian affinity.
fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let cuts: Vec<f64> = (-24..=24).map(f64::from).collect();
    let space = SampleSpace::continuous_with_cuts(cuts, 64).unwrap();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (m1, m2) = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        let (s1, s2) = (r.random_range(0.3..2.0), r.random_range(0.3..2.0));
        let p = Emission::Gaussian { mean: m1, sd: s1 }.candidate("p", &space).unwrap();
        let q = Emission::Gaussian { mean: m2, sd: s2 }.candidate("q", &space).unwrap();
        let v = s1 * s1 + s2 * s2;
        let affinity = (2.0 * s1 * s2 / v).sqrt() * (-(m1 - m2).powi(2) / (4.0 * v)).exp();
        worst = worst.max((hellinger2(&p, &q).unwrap() - (1.0 - affinity)).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= METRIC_TOL && elapsed < METRIC_BUDGET,
        format!("max |error| {worst:.2e}, {:.2} s", elapsed.as_secs_f64()),
    )
}

/// Brute-force `KL(law of block ‖ product of its marginals)` by enumerating
/// every path of the chain.
fn block_kl_by_enumeration(q: &[Vec<f64>], pi0: &[f64], n: usize, s: usize, b: usize) -> f64 {
    let k = q.len();
    let block: Vec<usize> = (b - 1..n).step_by(s + 1).collect();
    let mut joint = std::collections::HashMap::<Vec<usize>, f64>::new();
    let mut path = vec![0usize; n];
    for code in 0..k.pow(n as u32) {
        let mut c = code;
        for x in path.iter_mut() {
            *x = c % k;
            c /= k;
        }
        let mut p = pi0[path[0]];
        for t in 1..n {
            p *= q[path[t - 1]][path[t]];
        }
        if p > 0.0 {
            *joint.entry(block.iter().map(|&i| path[i]).collect()).or_insert(0.0) += p;
        }
    }
    let mut marginals = vec![vec![0.0; k]; block.len()];
    for (states, p) in &joint {
        for (pos, &x) in states.iter().enumerate() {
            marginals[pos][x] += p;
        }
    }
    joint
        .iter()
        .map(|(states, p)| {
            let prod: f64 = states.iter().enumerate().map(|(pos, &x)| marginals[pos][x]).product();
            p * (p / prod).ln()
        })
        .sum()
}

// 2. Markov KL factorization against path enumeration.
fn kl_factorization() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for chain in 0..50 {
        let k = 2 + chain % 2;
        let n = 4 + chain % 3;
        let rows: Vec<Vec<f64>> = (0..k).map(|_| random_simplex(&mut r, k, chain % 5 == 0)).collect();
        let pi0 = random_simplex(&mut r, k, false);
        let q = TransitionMatrix::new(rows.clone()).unwrap();
        let w = SimplexWeights::new(pi0.clone()).unwrap();
        for s in 0..=(n - 2) / 2 {
            for b in 1..=s + 1 {
                let lhs = block_kl_by_enumeration(&rows, &pi0, n, s, b);
                let rhs = markov_dependence_term(&q, &w, n, s, b).unwrap();
                worst = worst.max((lhs - rhs).abs());
                cases += 1;
            }
        }
    }
    outcome(worst <= FACTORIZATION_TOL, format!("{cases} blocks, max |lhs - rhs| {worst:.2e}"))
}

// 3. Coefficient of information of the stationary a = b = 0.1 chain.
fn coefficient_value() -> Outcome {
    let (a, b) = (0.1, 0.1);
    let pi = [b / (a + b), a / (a + b)];
    let q = [[1.0 - a, a], [b, 1.0 - b]];
    let joint: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|j| pi[i] * q[i][j]).collect()).collect();
    let want = 0.9 * 1.8f64.ln() + 0.1 * 0.2f64.ln();
    let got = coefficient_of_information(&joint).unwrap();
    outcome(
        (got - want).abs() <= INFORMATION_TOL && (want - 0.368064).abs() < 1e-6,
        format!("{got:.9} vs {want:.9}"),
    )
}

// 4. Reverse Pinsker on random joints.
fn reverse_pinsker() -> Outcome {
    let mut r = rng(4);
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for t in 0..100 {
        let (ka, kb) = (2 + t % 3, 2 + (t / 3) % 3);
        let flat = random_simplex(&mut r, ka * kb, t % 4 == 0);
        let joint: Vec<Vec<f64>> = flat.chunks(kb).map(<[f64]>::to_vec).collect();
        let (kl, bound) = reverse_pinsker_gap(&joint).unwrap();
        if kl > bound {
            violations += 1;
        }
        tightest = tightest.min(bound - kl);
    }
    outcome(violations == 0, format!("{violations} violations, min gap {tightest:.3e}"))
}

/// `P_{w,Q,F}(y)` as the explicit sum over all `K^L` hidden paths.
fn chain_density_by_paths(w: &[f64], q: &[Vec<f64>], f: &dyn Fn(usize, f64) -> f64, y: &[f64]) -> f64 {
    let k = w.len();
    let l = y.len();
    (0..k.pow(l as u32))
        .map(|code| {
            let path: Vec<usize> = (0..l).map(|i| (code / k.pow(i as u32)) % k).collect();
            let mut p = w[path[0]] * f(path[0], y[0]);
            for i in 1..l {
                p *= q[path[i - 1]][path[i]] * f(path[i], y[i]);
            }
            p
        })
        .sum()
}

// 5. HMM approximation inequality on the discrete product space.
fn approximation_inequality() -> Outcome {
    let mut r = rng(5);
    let mut worst = f64::NEG_INFINITY;
    for t in 0..200 {
        let k = 1 + t % 3;
        let l = 1 + (t / 3) % 3;
        let m = 2 + (t / 9) % 3;
        let draw = |r: &mut ChaCha8Rng| {
            let w = random_simplex(r, k, false);
            let q: Vec<Vec<f64>> = (0..k).map(|_| random_simplex(r, k, true)).collect();
            let f: Vec<Vec<f64>> = (0..k).map(|_| random_simplex(r, m, true)).collect();
            (w, q, f)
        };
        let (w, q, f) = draw(&mut r);
        let (v, rr, g) = draw(&mut r);
        let mut lhs = 0.0;
        for code in 0..m.pow(l as u32) {
            let y: Vec<f64> = (0..l).map(|i| ((code / m.pow(i as u32)) % m) as f64).collect();
            let p = chain_density_by_paths(&w, &q, &|s, x| f[s][x as usize], &y);
            let pp = chain_density_by_paths(&v, &rr, &|s, x| g[s][x as usize], &y);
            lhs += 0.5 * (p.sqrt() - pp.sqrt()).powi(2);
        }
        let max_over = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            a.iter().zip(b).map(|(x, y)| categorical_h2(x, y)).fold(0.0, f64::max)
        };
        let rhs = categorical_h2(&w, &v) + (l as f64 - 1.0) * max_over(&q, &rr) + l as f64 * max_over(&f, &g);
        worst = worst.max(lhs - rhs);
    }
    outcome(worst <= APPROXIMATION_SLACK, format!("max (lhs - rhs) {worst:.3e}"))
}

// 6. Forward recursion against the explicit path sum.
fn forward_recursion() -> Outcome {
    let mut r = rng(6);
    let base = SampleSpace::continuous_with_cuts(vec![-60.0, 0.0, 60.0], 16).unwrap();
    let mut worst = 0.0f64;
    for t in 0..100 {
        let k = 1 + t % 3;
        let l = 1 + (t / 3) % 4;
        let w = random_simplex(&mut r, k, false);
        let q: Vec<Vec<f64>> = (0..k).map(|_| random_simplex(&mut r, k, true)).collect();
        let emissions: Vec<Emission> = (0..k)
            .map(|_| Emission::Gaussian {
                mean: r.random_range(-2.0..2.0),
                sd: r.random_range(0.5..2.0),
            })
            .collect();
        let params = HmmParams::new(
            SimplexWeights::new(w.clone()).unwrap(),
            TransitionMatrix::new(q.clone()).unwrap(),
            emissions.clone(),
        )
        .unwrap();
        let candidate = product_chain_density("p", &params, l, &base).unwrap();
        let y: Vec<f64> = (0..l).map(|_| r.random_range(-3.0..3.0)).collect();
        let gaussian = |s: usize, x: f64| match emissions[s] {
            Emission::Gaussian { mean, sd } => {
                (-(x - mean).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            _ => unreachable!(),
        };
        let want = chain_density_by_paths(&w, &q, &gaussian, &y);
        let got = candidate.log_density(&y).exp();
        worst = worst.max(((got - want) / want).abs());
    }
    outcome(worst <= FORWARD_REL_TOL, format!("max relative error {worst:.2e}"))
}

// 7. Exact recovery on a well-separated categorical model.
fn iid_recovery() -> Outcome {
    let mut r = rng(7);
    let symbols = 6;
    let mut laws: Vec<Vec<f64>> = Vec::new();
    while laws.len() < 20 {
        let p = random_simplex(&mut r, symbols, false);
        if laws.iter().all(|q| categorical_h2(&p, q).sqrt() >= 0.15) {
            laws.push(p);
        }
    }
    let truth = 7;
    let candidates: Vec<_> = laws
        .iter()
        .enumerate()
        .map(|(i, p)| json!({"id": format!("c{i}"), "law": {"family": "categorical", "probs": p}}))
        .collect();
    let config: ExperimentConfig = serde_json::from_value(json!({
        "version": 1, "scenario": "iid_recovery", "seed": 7, "replicates": 100, "n": [500],
        "truth": {"kind": "iid", "law": {"family": "categorical", "probs": laws[truth]}},
        "model": {"kind": "emissions", "space": {"kind": "discrete", "atoms": [0, 1, 2, 3, 4, 5]},
                  "candidates": candidates},
        "s_policy": {"kind": "fixed", "s": 0}
    }))
    .unwrap();
    let start = Instant::now();
    let report = run_experiment(&config).unwrap();
    let elapsed = start.elapsed();
    let hits = report.rows.iter().filter(|row| row.chosen_id == format!("c{truth}")).count();
    outcome(
        hits >= RECOVERY_MIN && report.failures.is_empty() && elapsed < RECOVERY_BUDGET,
        format!("{hits}/100 exact, {:.2} s", elapsed.as_secs_f64()),
    )
}

/// Two-state HMM with exponential emissions; the model grids the two rates
/// geometrically around the truth and the switching probability.
fn hmm_config(
    scenario: &str,
    n: &[usize],
    replicates: usize,
    a: f64,
    q_grid: &[f64],
    (ratio, half_width): (f64, i32),
    policy: serde_json::Value,
) -> serde_json::Value {
    let rates = |c: f64| -> Vec<serde_json::Value> {
        (-half_width..=half_width)
            .map(|k| json!({"family": "exponential", "rate": c * ratio.powi(k)}))
            .collect()
    };
    let qs: Vec<_> = q_grid.iter().map(|&x| json!([[1.0 - x, x], [x, 1.0 - x]])).collect();
    let per_state = (2 * half_width + 1) as usize;
    let delta = q_grid.iter().copied().fold(0.5, f64::min);
    json!({
        "version": 1, "scenario": scenario, "seed": 11, "replicates": replicates, "n": n,
        "truth": {"kind": "hmm", "params": {"w": [0.5, 0.5], "q": [[1.0 - a, a], [a, 1.0 - a]],
            "emissions": [{"family": "exponential", "rate": 1.0}, {"family": "exponential", "rate": 4.0}]}},
        "model": {"kind": "hmm", "description": {
            "version": 1, "K": 2, "L": 2, "delta": delta, "step": delta,
            "base_space": {"kind": "continuous1d", "cuts": [0, 0.5, 1, 2, 4, 8, 16, 40], "nodes_per_panel": 12},
            "w_grid": [[0.5, 0.5]], "q_grid": qs,
            "emission_families": [rates(1.0), rates(4.0)],
            "candidate_count": q_grid.len() * per_state * per_state}},
        "s_policy": policy
    })
}

fn rate_config() -> ExperimentConfig {
    serde_json::from_value(hmm_config(
        "hmm_rate",
        &[500, 1000, 2000, 4000],
        30,
        0.2,
        &[0.15, 0.2, 0.25],
        (1.02, 9),
        json!({"kind": "fixed", "s": 3}),
    ))
    .unwrap()
}

fn on_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

// 8. Rate slope of the median risk on a well-specified HMM grid.
fn hmm_rate(report: &RiskReport, elapsed: Duration) -> Outcome {
    let ns = [500usize, 1000, 2000, 4000];
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let h: Vec<f64> = report.rows.iter().filter(|r| r.n == n).map(|r| r.h2).collect();
            median(&h).ln()
        })
        .collect();
    let (slope, r2) = least_squares(&xs, &ys);
    let medians: Vec<String> = ys.iter().map(|y| format!("{:.2e}", y.exp())).collect();
    outcome(
        slope >= SLOPE_BAND.0 && slope <= SLOPE_BAND.1 && report.failures.is_empty() && elapsed < RATE_BUDGET,
        format!(
            "slope {slope:.3} (r2 {r2:.3}), medians [{}], {:.1} s",
            medians.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

// 9. Huber contamination at 2% against the clean run.
fn contamination() -> Outcome {
    let mut clean = hmm_config(
        "contamination",
        &[2000],
        30,
        0.2,
        &[0.15, 0.2, 0.25],
        (1.02, 9),
        json!({"kind": "fixed", "s": 3}),
    );
    let mut dirty = clean.clone();
    clean["contamination"] = json!({"mode": {"kind": "huber", "epsilon": 0.0},
                                    "contaminant": {"kind": "uniform", "lo": 20.0, "hi": 40.0}});
    dirty["contamination"] = json!({"mode": {"kind": "huber", "epsilon": 0.02},
                                    "contaminant": {"kind": "uniform", "lo": 20.0, "hi": 40.0}});
    let med = |v: serde_json::Value| {
        let report = run_experiment(&serde_json::from_value(v).unwrap()).unwrap();
        assert!(report.failures.is_empty());
        median(&report.rows.iter().map(|r| r.h2).collect::<Vec<_>>())
    };
    let (m0, m1) = (med(clean), med(dirty));
    let ratio = m1 / m0;
    outcome(ratio <= CONTAMINATION_MAX_RATIO, format!("median {m0:.3e} -> {m1:.3e}, ratio {ratio:.2}, excess {:.2e} vs epsilon 0.02", m1 - m0))
}

// 10. Hold-out spacing selection on a slowly mixing HMM.
fn spacing_selection() -> Outcome {
    let build = |policy| {
        serde_json::from_value::<ExperimentConfig>(hmm_config(
            "spacing_selection",
            &[2000],
            25,
            0.01,
            &[0.005, 0.01, 0.02],
            (1.1, 3),
            policy,
        ))
        .unwrap()
    };
    let selected = run_experiment(&build(json!({"kind": "grid"}))).unwrap();
    let scan = run_experiment(&build(json!({"kind": "oracle_scan"}))).unwrap();
    let mut good = 0;
    for row in &selected.rows {
        let best = scan
            .rows
            .iter()
            .filter(|r| r.replicate == row.replicate)
            .map(|r| r.h2)
            .fold(f64::INFINITY, f64::min);
        if row.h2 <= SELECTION_RISK_FACTOR * best {
            good += 1;
        }
    }
    let share = good as f64 / 25.0;
    let picks: Vec<usize> = selected.rows.iter().map(|r| r.s_used).collect();
    outcome(
        share >= SELECTION_MIN_SHARE && selected.failures.is_empty() && selected.rows.len() == 25,
        format!("{good}/25 within {SELECTION_RISK_FACTOR}x of the best fixed s; chosen s {picks:?}"),
    )
}

// 11. Invariant law of the Ornstein–Uhlenbeck diffusion.
fn langevin() -> Outcome {
    let cuts: Vec<f64> = (-8..=8).map(f64::from).collect();
    let config: ExperimentConfig = serde_json::from_value(json!({
        "version": 1, "scenario": "langevin_invariant", "seed": 13, "replicates": 20, "n": [5000],
        "truth": {"kind": "langevin", "potential": {"kind": "quadratic", "curvature": 1.0},
                  "dt": 0.01, "burn_in": 1000, "thin": 10},
        "model": {"kind": "gaussian_grid", "space": {"kind": "continuous1d", "cuts": cuts},
                  "mean": {"lo": -0.3, "hi": 0.3, "count": 13}, "sd": {"lo": 0.5, "hi": 1.0, "count": 15}},
        "s_policy": {"kind": "fixed", "s": 10}
    }))
    .unwrap();
    let report = run_experiment(&config).unwrap();
    let m = median(&report.rows.iter().map(|r| r.h2).collect::<Vec<_>>());
    outcome(
        m <= LANGEVIN_MAX_MEDIAN && report.failures.is_empty(),
        format!("median h2 {m:.3e}"),
    )
}

// 12. Geometric decay of the dependence term in the spacing.
fn dependence_decay() -> Outcome {
    let q = TransitionMatrix::two_state(0.3, 0.3).unwrap();
    let pi = SimplexWeights::new(vec![0.5, 0.5]).unwrap();
    let n = 1000;
    let xs: Vec<f64> = (0..=10).map(f64::from).collect();
    let ys: Vec<f64> = (0..=10)
        .map(|s| (markov_dependence_term(&q, &pi, n, s, 1).unwrap() / n as f64).ln())
        .collect();
    let (slope, r2) = least_squares(&xs, &ys);
    outcome(
        r2 >= DECAY_MIN_R2,
        format!("r2 {r2:.5}, slope {slope:.3} (2 ln 0.4 = {:.3})", 2.0 * 0.4f64.ln()),
    )
}

// 13. The rate report does not depend on the number of threads.
fn determinism(single: &RiskReport) -> Outcome {
    let config = rate_config();
    let multi = on_pool(4, || run_experiment(&config).unwrap());
    let same = single.to_csv().as_bytes() == multi.to_csv().as_bytes();
    outcome(same, format!("{} rows, 1 vs 4 threads identical: {same}", single.rows.len()))
}

fn main() {
    // Ignore libtest flags such as `--nocapture` passed through `cargo test`.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let wanted = |id: usize| filter.as_deref().is_none_or(|f| f == id.to_string());

    let mut failed = Vec::new();
    let mut report = |id: usize, name: &str, run: &mut dyn FnMut() -> Outcome| {
        if !wanted(id) {
            return;
        }
        let o = run();
        println!("criterion {id:>2} {name:<28} {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(id);
        }
    };

    report(1, "metric oracle", &mut metric_oracle);
    report(2, "markov kl factorization", &mut kl_factorization);
    report(3, "coefficient of information", &mut coefficient_value);
    report(4, "reverse pinsker", &mut reverse_pinsker);
    report(5, "hmm approximation bound", &mut approximation_inequality);
    report(6, "forward recursion", &mut forward_recursion);
    report(7, "iid recovery", &mut iid_recovery);

    let mut rate: Option<RiskReport> = None;
    report(8, "hmm rate slope", &mut || {
        let start = Instant::now();
        let r = on_pool(1, || run_experiment(&rate_config()).unwrap());
        let o = hmm_rate(&r, start.elapsed());
        rate = Some(r);
        o
    });
    report(9, "contamination robustness", &mut contamination);
    report(10, "spacing selection", &mut spacing_selection);
    report(11, "langevin invariant law", &mut langevin);
    report(12, "dependence decay", &mut dependence_decay);
    report(13, "thread-count determinism", &mut || {
        let single = rate.take().unwrap_or_else(|| on_pool(1, || run_experiment(&rate_config()).unwrap()));
        determinism(&single)
    });

    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
