//! Configuration-driven experiments.
//!
//! An [`ExperimentConfig`] names a truth, a model, a list of sample sizes and
//! a spacing policy. [`run_experiment`] simulates one series per
//! `(replicate, n)` pair, estimates, and scores the estimate against the
//! truth in squared Hellinger distance. Every random stream is derived from
//! `(seed, replicate, n index, role)`, so a report does not depend on the
//! number of worker threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::estimate_with_spacing;
use crate::dependence::{
    contaminate, derive_seed, role, simulate_hmm, simulate_langevin, ContaminationSpec, DiffusionSpec, Potential,
};
use crate::error::{Error, Result};
use crate::families::Emission;
use crate::hmm::{param_error, product_chain_density, HmmParams};
use crate::io::{json_error, LoadedModel, ModelFile, ModelSpec, Series, DEFAULT_MODEL_BUDGET, MODEL_FILE_VERSION};
use crate::measure::{hellinger2_from_logs, DensityCandidate, FnDensity, QuadratureRule, SampleSpace};
use crate::rho::{score_table, LogDensityMatrix, RhoOptions, RhoScoreTable, DEFAULT_SLACK};
use crate::spacing::{make_s_grid, select_s};

pub const CONFIG_VERSION: u32 = 1;

/// Column order of the report CSV.
pub const REPORT_HEADER: &str = "scenario,replicate,n,s_used,h2,param_err,ms,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    IidRecovery,
    HmmRate,
    Contamination,
    SpacingSelection,
    LangevinInvariant,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::IidRecovery => "iid_recovery",
            Scenario::HmmRate => "hmm_rate",
            Scenario::Contamination => "contamination",
            Scenario::SpacingSelection => "spacing_selection",
            Scenario::LangevinInvariant => "langevin_invariant",
        }
    }
}

fn default_x0() -> f64 {
    0.0
}

/// Law of the simulated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Truth {
    Iid {
        law: Emission,
    },
    /// Hidden chain started from `params.w`; for a stationary truth `w`
    /// should be the invariant law of `params.q`.
    Hmm {
        params: HmmParams,
    },
    /// Euler–Maruyama path of `dY = dB − U'(Y) dt`, thinned every `thin` steps.
    Langevin {
        potential: Potential,
        dt: f64,
        burn_in: usize,
        thin: usize,
        #[serde(default = "default_x0")]
        x0: f64,
    },
}

fn default_tau() -> f64 {
    std::f64::consts::E
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SPolicy {
    Fixed {
        s: usize,
    },
    /// Hold-out selection over the grid; the hold-out series is a fresh run.
    Grid {
        #[serde(default = "default_tau")]
        tau: f64,
    },
    /// One row per spacing in the grid.
    OracleScan {
        #[serde(default = "default_tau")]
        tau: f64,
    },
}

fn default_iota() -> f64 {
    1.0
}

fn default_budget() -> usize {
    DEFAULT_MODEL_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub scenario: Scenario,
    pub seed: u64,
    pub replicates: usize,
    /// Series lengths.
    pub n: Vec<usize>,
    pub truth: Truth,
    pub model: ModelSpec,
    pub s_policy: SPolicy,
    /// Applied to every simulated series; its `seed` field is replaced by a
    /// derived per-run seed.
    #[serde(default)]
    pub contamination: Option<ContaminationSpec>,
    #[serde(default = "default_iota")]
    pub iota: f64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Fill the `ms` column with wall-clock time; off by default because it
    /// makes reports non-reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| json_error(e, "config"))?;
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.version != CONFIG_VERSION {
            return fail(format!("unsupported config version {}", self.version));
        }
        if self.replicates == 0 {
            return fail("replicates must be at least 1".into());
        }
        if self.n.is_empty() || self.n.iter().any(|&n| n < 4) {
            return fail("n must be a non-empty list of lengths >= 4".into());
        }
        if !(self.iota > 0.0 && self.iota <= crate::blocks::MAX_IOTA) {
            return fail(format!("iota must lie in (0, {}], got {}", crate::blocks::MAX_IOTA, self.iota));
        }
        let hmm_model = matches!(self.model, ModelSpec::Hmm { .. } | ModelSpec::HmmGrid { .. });
        if matches!(self.truth, Truth::Hmm { .. }) != hmm_model {
            return fail("an HMM truth needs an HMM model and vice versa".into());
        }
        match (self.scenario, &self.truth, &self.s_policy) {
            (Scenario::LangevinInvariant, Truth::Langevin { .. }, _) => {}
            (Scenario::LangevinInvariant, ..) | (_, Truth::Langevin { .. }, _) => {
                return fail("langevin_invariant pairs with a langevin truth".into())
            }
            (Scenario::SpacingSelection, _, SPolicy::Fixed { .. }) => {
                return fail("spacing_selection needs a grid or oracle_scan policy".into())
            }
            (Scenario::Contamination, ..) if self.contamination.is_none() => {
                return fail("contamination scenario needs a contamination spec".into())
            }
            _ => {}
        }
        match &self.truth {
            Truth::Iid { law } => law.validate().map_err(|e| Error::Config(e.to_string()))?,
            Truth::Hmm { params } => params.validate().map_err(|e| Error::Config(e.to_string()))?,
            Truth::Langevin {
                potential, dt, thin, ..
            } => {
                potential.validate().map_err(|e| Error::Config(e.to_string()))?;
                if !(*dt > 0.0 && dt.is_finite()) || *thin == 0 {
                    return fail("langevin truth needs dt > 0 and thin >= 1".into());
                }
            }
        }
        if let SPolicy::Grid { tau } | SPolicy::OracleScan { tau } = self.s_policy {
            if !(tau.is_finite() && tau >= std::f64::consts::E) {
                return fail(format!("tau must be at least e, got {tau}"));
            }
        }
        Ok(())
    }

    /// Stream key of replicate `r` at the `ni`-th length.
    fn key(r: usize, ni: usize) -> u64 {
        ((r as u64) << 32) | ni as u64
    }

    /// The series simulated for `(replicate, n index)`; `holdout` selects
    /// the independent second run used by spacing selection.
    pub fn simulate(&self, replicate: usize, n_index: usize, holdout: bool) -> Result<Series> {
        let n = *self
            .n
            .get(n_index)
            .ok_or_else(|| Error::invalid(format!("n index {n_index} out of range")))?;
        let key = Self::key(replicate, n_index);
        let (data_role, noise_role, label) = if holdout {
            (role::HOLDOUT, role::HOLDOUT_CONTAMINATION, "holdout")
        } else {
            (role::DATA, role::CONTAMINATION, "data")
        };
        let seed = derive_seed(self.seed, key, data_role);
        let (y, h) = match &self.truth {
            Truth::Iid { law } => {
                let mut rng = crate::dependence::rng_from_seed(seed);
                ((0..n).map(|_| law.sample(&mut rng)).collect(), None)
            }
            Truth::Hmm { params } => {
                let path = simulate_hmm(params, n, seed)?;
                (path.observations, Some(path.hidden))
            }
            Truth::Langevin {
                potential,
                dt,
                burn_in,
                thin,
                x0,
            } => {
                let u = *potential;
                let spec = DiffusionSpec::new(move |x| -u.gradient(x), *dt, *burn_in, *thin)?.starting_at(*x0);
                (simulate_langevin(&spec, n, seed)?, None)
            }
        };
        let y = match &self.contamination {
            Some(c) => {
                let spec = ContaminationSpec {
                    seed: derive_seed(self.seed, key, noise_role),
                    ..c.clone()
                };
                contaminate(&y, &spec)?.values
            }
            None => y,
        };
        Ok(Series {
            y,
            h,
            provenance: Some(format!("seed={};replicate={replicate};n={n};{label}", self.seed)),
        })
    }

    fn data_seed(&self, replicate: usize, n_index: usize) -> u64 {
        derive_seed(self.seed, Self::key(replicate, n_index), role::DATA)
    }
}

/// Density of the truth on the space the model lives on.
pub fn truth_candidate(truth: &Truth, loaded: &LoadedModel) -> Result<DensityCandidate> {
    let base = &loaded.base_space;
    match (truth, loaded.window) {
        (Truth::Iid { law }, None) => law.candidate("truth", base),
        (Truth::Hmm { params }, Some(l)) => product_chain_density("truth", params, l, base),
        (Truth::Langevin { potential, .. }, None) => langevin_invariant(potential, base),
        _ => Err(Error::Config("truth and model disagree on windowing".into())),
    }
}

/// Invariant density `∝ exp(−2U)` of the Langevin diffusion.
fn langevin_invariant(potential: &Potential, space: &SampleSpace) -> Result<DensityCandidate> {
    if let Potential::Quadratic { curvature } = *potential {
        let law = Emission::Gaussian {
            mean: 0.0,
            sd: (0.5 / curvature).sqrt(),
        };
        return law.candidate("truth", space);
    }
    let u = *potential;
    let raw = DensityCandidate::new("truth", space.clone(), Arc::new(FnDensity::new(move |x| -2.0 * u.value(x[0]))));
    let rule = QuadratureRule::new(space, &[], &[])?;
    let log_z = rule.mass(&rule.log_values(&raw)?).ln();
    Ok(DensityCandidate::new(
        "truth",
        space.clone(),
        Arc::new(FnDensity::new(move |x| -2.0 * u.value(x[0]) - log_z)),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub scenario: String,
    pub replicate: usize,
    pub n: usize,
    pub s_used: usize,
    pub h2: f64,
    pub param_err: Option<f64>,
    pub ms: Option<f64>,
    pub seed: u64,
    pub chosen_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replicate: usize,
    pub n: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    /// Set when rows for several spacings share `n`.
    pub s: Option<usize>,
    pub count: usize,
    pub median_h2: f64,
    pub mean_h2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub by_n: Vec<GroupSummary>,
    pub by_n_s: Vec<GroupSummary>,
    pub slope: Option<SlopeFit>,
    pub slope_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub scenario: String,
    pub seed: u64,
    pub rows: Vec<RiskRow>,
    pub failures: Vec<Failure>,
    pub summary: Summary,
}

/// Median of a non-empty slice; mean of the two middle values for even length.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares line through `(xs, ys)`; `r2 = 1` when `ys` is constant.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("a line fit needs at least two paired points"));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("a line fit needs distinct abscissae"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if sst == 0.0 { 1.0 } else { 1.0 - sse / sst };
    Ok(SlopeFit { slope, intercept, r2 })
}

/// Fit of `ln(median h²)` against `ln n`, one point per distinct `n`.
pub fn fit_rate_slope(rows: &[RiskRow]) -> Result<SlopeFit> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.n).or_default().push(r.h2);
    }
    if groups.len() < 3 {
        return Err(Error::invalid(format!("slope fit needs 3 distinct n, got {}", groups.len())));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, h) in &groups {
        let m = median(h);
        if !(m > 0.0) {
            return Err(Error::invalid(format!("median h2 at n = {n} is zero; log fit undefined")));
        }
        xs.push((*n as f64).ln());
        ys.push(m.ln());
    }
    fit_line(&xs, &ys)
}

fn summarize(rows: &[RiskRow]) -> Summary {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut by_n_s: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_n.entry(r.n).or_default().push(r.h2);
        by_n_s.entry((r.n, r.s_used)).or_default().push(r.h2);
    }
    let group = |n, s, h: &Vec<f64>| GroupSummary {
        n,
        s,
        count: h.len(),
        median_h2: median(h),
        mean_h2: h.iter().sum::<f64>() / h.len() as f64,
    };
    let (slope, slope_note) = match fit_rate_slope(rows) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Summary {
        by_n: by_n.iter().map(|(n, h)| group(*n, None, h)).collect(),
        by_n_s: by_n_s.iter().map(|((n, s), h)| group(*n, Some(*s), h)).collect(),
        slope,
        slope_note,
    }
}

/// Scores chosen candidates against the truth on one shared rule.
struct Scorer {
    rule: QuadratureRule,
    truth_logs: Vec<f64>,
}

impl Scorer {
    fn new(loaded: &LoadedModel, truth: &DensityCandidate) -> Result<Self> {
        let mut all: Vec<&DensityCandidate> = loaded.model.candidates().iter().collect();
        all.push(truth);
        let rule = QuadratureRule::for_candidates(loaded.model.space(), &all)?;
        let truth_logs = rule.log_values(truth)?;
        crate::measure::check_mass_on_rule(&rule, truth)?;
        Ok(Scorer { rule, truth_logs })
    }

    fn h2(&self, c: &DensityCandidate) -> Result<f64> {
        Ok(hellinger2_from_logs(self.rule.weights(), &self.rule.log_values(c)?, &self.truth_logs))
    }
}

struct Job<'a> {
    config: &'a ExperimentConfig,
    loaded: &'a LoadedModel,
    scorer: &'a Scorer,
}

impl Job<'_> {
    fn row(&self, r: usize, ni: usize, s: usize, index: usize, ms: Option<f64>) -> Result<RiskRow> {
        let chosen = self.loaded.model.candidate(index);
        let param_err = match (&self.config.truth, &self.loaded.hmm_params) {
            (Truth::Hmm { params }, Some(all)) => Some(param_error(&all[index], params)?),
            _ => None,
        };
        Ok(RiskRow {
            scenario: self.config.scenario.label().to_string(),
            replicate: r,
            n: self.config.n[ni],
            s_used: s,
            h2: self.scorer.h2(chosen)?,
            param_err,
            ms,
            seed: self.config.data_seed(r, ni),
            chosen_id: chosen.id().to_string(),
        })
    }

    fn run(&self, r: usize, ni: usize) -> Result<Vec<RiskRow>> {
        let cfg = self.config;
        let model = &self.loaded.model;
        let series = cfg.simulate(r, ni, false)?;
        let start = Instant::now();
        let sample = self.loaded.sample(&series.y, series.provenance.as_deref())?;
        let elapsed = |start: Instant| cfg.record_timing.then(|| start.elapsed().as_secs_f64() * 1e3);
        match cfg.s_policy {
            SPolicy::Fixed { s } => {
                let est = estimate_with_spacing(&sample, model, s, cfg.iota)?;
                Ok(vec![self.row(r, ni, s, est.chosen_index, elapsed(start))?])
            }
            SPolicy::Grid { tau } => {
                let holdout = cfg.simulate(r, ni, true)?;
                let sample2 = self.loaded.sample(&holdout.y, holdout.provenance.as_deref())?;
                let grid = make_s_grid(sample.len(), tau)?;
                let sel = select_s(&sample, &sample2, &grid.values, |_| Ok(model.clone()), cfg.iota)?;
                let est = sel
                    .stage1
                    .iter()
                    .find(|e| e.s == sel.s_hat)
                    .expect("selected spacing comes from stage 1");
                Ok(vec![self.row(r, ni, sel.s_hat, est.chosen_index, elapsed(start))?])
            }
            SPolicy::OracleScan { tau } => {
                let grid = make_s_grid(sample.len(), tau)?;
                grid.values
                    .iter()
                    .map(|&s| {
                        let t = Instant::now();
                        let est = estimate_with_spacing(&sample, model, s, cfg.iota)?;
                        self.row(r, ni, s, est.chosen_index, elapsed(t))
                    })
                    .collect()
            }
        }
    }
}

/// Builds the configured model; exposed so callers can persist it.
pub fn build_model(config: &ExperimentConfig) -> Result<LoadedModel> {
    config.model.build(config.budget)
}

/// Runs every `(replicate, n)` pair. Jobs run in parallel on the current
/// rayon pool; rows are assembled in `(replicate, n)` order. A job that
/// fails is listed under `failures` and contributes no rows.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RiskReport> {
    config.validate()?;
    let loaded = build_model(config)?;
    run_experiment_with(config, &loaded)
}

/// [`run_experiment`] with a pre-built model.
pub fn run_experiment_with(config: &ExperimentConfig, loaded: &LoadedModel) -> Result<RiskReport> {
    config.validate()?;
    let truth = truth_candidate(&config.truth, loaded)?;
    let scorer = Scorer::new(loaded, &truth)?;
    let job = Job {
        config,
        loaded,
        scorer: &scorer,
    };
    let pairs: Vec<(usize, usize)> = (0..config.replicates)
        .flat_map(|r| (0..config.n.len()).map(move |ni| (r, ni)))
        .collect();
    let outcomes: Vec<Result<Vec<RiskRow>>> = pairs.par_iter().map(|&(r, ni)| job.run(r, ni)).collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for ((r, ni), outcome) in pairs.into_iter().zip(outcomes) {
        match outcome {
            Ok(mut rs) => rows.append(&mut rs),
            Err(e) => failures.push(Failure {
                replicate: r,
                n: config.n[ni],
                message: e.to_string(),
            }),
        }
    }
    let summary = summarize(&rows);
    Ok(RiskReport {
        scenario: config.scenario.label().to_string(),
        seed: config.seed,
        rows,
        failures,
        summary,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RiskReport {
    /// Rows under [`REPORT_HEADER`]; floats in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.scenario,
                r.replicate,
                r.n,
                r.s_used,
                r.h2,
                opt(r.param_err),
                opt(r.ms),
                r.seed
            );
        }
        out
    }

    /// `replicate,n,s_used,chosen_id`, enough to recompute every `h2` from
    /// the persisted model and truth.
    pub fn choices_csv(&self) -> String {
        let mut out = String::from("replicate,n,s_used,chosen_id\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.replicate, r.n, r.s_used, r.chosen_id);
        }
        out
    }
}

/// Writes `report.csv`, `choices.csv`, `summary.json`, `failures.json`,
/// `model.json` and `config.json` into `dir`.
pub fn write_report(dir: &Path, report: &RiskReport, config: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.csv"), report.to_csv())?;
    fs::write(dir.join("choices.csv"), report.choices_csv())?;
    fs::write(dir.join("summary.json"), to_pretty_json(&report.summary))?;
    fs::write(dir.join("failures.json"), to_pretty_json(&report.failures))?;
    let model = ModelFile {
        version: MODEL_FILE_VERSION,
        model: config.model.clone(),
    };
    fs::write(dir.join("model.json"), to_pretty_json(&model))?;
    fs::write(dir.join("config.json"), to_pretty_json(config))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Parses a report CSV written by [`RiskReport::to_csv`].
pub fn parse_report_csv(text: &str) -> Result<Vec<RiskRow>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            field: "header".into(),
            message: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != REPORT_HEADER {
        return Err(Error::Parse {
            line: 1,
            field: "header".into(),
            message: format!("expected `{REPORT_HEADER}`"),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            field: "record".into(),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize, name: &str| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Parse {
                line,
                field: name.into(),
                message: "missing".into(),
            })
        };
        fn num<T: std::str::FromStr>(s: &str, line: usize, name: &str) -> Result<T> {
            s.parse().map_err(|_| Error::Parse {
                line,
                field: name.into(),
                message: format!("cannot parse `{s}`"),
            })
        }
        let optional = |s: &str, name: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, line, name).map(Some)
            }
        };
        rows.push(RiskRow {
            scenario: field(0, "scenario")?.to_string(),
            replicate: num(field(1, "replicate")?, line, "replicate")?,
            n: num(field(2, "n")?, line, "n")?,
            s_used: num(field(3, "s_used")?, line, "s_used")?,
            h2: num(field(4, "h2")?, line, "h2")?,
            param_err: optional(field(5, "param_err")?, "param_err")?,
            ms: optional(field(6, "ms")?, "ms")?,
            seed: num(field(7, "seed")?, line, "seed")?,
            chosen_id: String::new(),
        });
    }
    Ok(rows)
}

/// `n,s_used,count,median_h2,mean_h2` per `(n, s_used)` group, for plotting.
pub fn summary_csv(rows: &[RiskRow]) -> String {
    let mut out = String::from("n,s_used,count,median_h2,mean_h2\n");
    for g in summarize(rows).by_n_s {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            g.n,
            g.s.unwrap_or(0),
            g.count,
            g.median_h2,
            g.mean_h2
        );
    }
    out
}

/// Result of fitting a model to one series.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub n: usize,
    pub s: usize,
    pub iota: f64,
    pub chosen_index: usize,
    pub chosen_id: String,
    /// Candidate chosen on each block, in block order.
    pub block_choices: Vec<String>,
    /// `Σ_b n(s,b) h²(P̂_{s,b}, Q)` for every candidate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h2_objective: Option<Vec<f64>>,
    /// ρ criterion of every candidate on the whole sample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upsilon: Option<RhoScoreTable>,
}

pub fn estimate_series(
    loaded: &LoadedModel,
    series: &Series,
    s: usize,
    iota: f64,
    tables: bool,
) -> Result<EstimateResult> {
    let sample = loaded.sample(&series.y, series.provenance.as_deref())?;
    let model = &loaded.model;
    let est = estimate_with_spacing(&sample, model, s, iota)?;
    let upsilon = if tables {
        let matrix = LogDensityMatrix::build(&sample, model)?;
        Some(score_table(
            &matrix,
            model.ids(),
            RhoOptions {
                slack: DEFAULT_SLACK,
                keep_t_matrix: false,
            },
        ))
    } else {
        None
    };
    Ok(EstimateResult {
        n: sample.len(),
        s,
        iota,
        chosen_index: est.chosen_index,
        chosen_id: est.chosen_id.clone(),
        block_choices: est
            .block_choices
            .iter()
            .map(|&i| model.candidate(i).id().to_string())
            .collect(),
        h2_objective: tables.then(|| est.objective.clone()),
        upsilon,
    })
}
