//! File formats: series CSV and model JSON.
//!
//! A series file holds one observation per row under the header `y`, with an
//! optional hidden-state column `h`. It may start with a comment line
//! `# provenance: <tag>` naming the run that produced it.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{gaussian_scale_location_net, Emission};
use crate::hmm::{build_hmm_model, window, HmmModel, HmmModelDescription, HmmParams};
use crate::measure::{DensityCandidate, FiniteModel, SampleSpace};
use crate::rho::Sample;

const PROVENANCE_PREFIX: &str = "# provenance:";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub y: Vec<f64>,
    pub h: Option<Vec<usize>>,
    pub provenance: Option<String>,
}

fn parse_error(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

/// Parses a series file; line numbers in errors count from 1.
pub fn parse_series(text: &str) -> Result<Series> {
    let (provenance, body, offset) = match text.split_once('\n') {
        Some((first, rest)) if first.starts_with('#') => {
            let tag = first
                .trim_end_matches('\r')
                .strip_prefix(PROVENANCE_PREFIX)
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .ok_or_else(|| parse_error(1, "provenance", "expected `# provenance: <tag>`"))?;
            (Some(tag.to_string()), rest, 1)
        }
        _ if text.starts_with('#') => return Err(parse_error(1, "header", "missing header after provenance line")),
        _ => (None, text, 0),
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_error(offset + 1, "header", e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let with_hidden = match names.as_slice() {
        ["y"] => false,
        ["y", "h"] => true,
        _ => return Err(parse_error(offset + 1, "header", format!("expected `y` or `y,h`, got {names:?}"))),
    };
    let mut series = Series {
        provenance,
        h: with_hidden.then(Vec::new),
        ..Series::default()
    };
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize) + offset;
            parse_error(line, "record", e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize) + offset;
        let y: f64 = record[0]
            .parse()
            .map_err(|_| parse_error(line, "y", format!("`{}` is not a number", &record[0])))?;
        if !y.is_finite() {
            return Err(parse_error(line, "y", "value is not finite"));
        }
        series.y.push(y);
        if let Some(h) = series.h.as_mut() {
            let state = record[1]
                .parse()
                .map_err(|_| parse_error(line, "h", format!("`{}` is not a state index", &record[1])))?;
            h.push(state);
        }
    }
    Ok(series)
}

/// Renders a series in the format read by [`parse_series`]; values use the
/// shortest decimal form that parses back to the same `f64`.
pub fn series_to_csv(series: &Series) -> Result<String> {
    let mut out = String::new();
    if let Some(tag) = &series.provenance {
        if tag.contains(['\n', '\r']) || tag.trim().is_empty() {
            return Err(Error::invalid("provenance tag must be a non-empty single line"));
        }
        out.push_str(&format!("{PROVENANCE_PREFIX} {}\n", tag.trim()));
    }
    match &series.h {
        Some(h) => {
            if h.len() != series.y.len() {
                return Err(Error::invalid("hidden path and observations differ in length"));
            }
            out.push_str("y,h\n");
            for (y, h) in series.y.iter().zip(h) {
                out.push_str(&format!("{y},{h}\n"));
            }
        }
        None => {
            out.push_str("y\n");
            for y in &series.y {
                out.push_str(&format!("{y}\n"));
            }
        }
    }
    Ok(out)
}

pub fn read_series(path: &Path) -> Result<Series> {
    parse_series(&fs::read_to_string(path)?)
}

pub fn write_series(path: &Path, series: &Series) -> Result<()> {
    fs::write(path, series_to_csv(series)?)?;
    Ok(())
}

/// Maps a JSON error to [`Error::Parse`], keeping serde's line number.
pub fn json_error(e: serde_json::Error, field: &str) -> Error {
    parse_error(e.line(), field, e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedEmission {
    pub id: String,
    pub law: Emission,
}

/// Closed interval split into `count` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Model description shared by model files and experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Explicit one-dimensional candidates.
    Emissions {
        space: SampleSpace,
        candidates: Vec<NamedEmission>,
    },
    /// Gaussian grid: uniform in the mean (slowest), geometric in the sd; ids `gaussian-i`.
    GaussianGrid {
        space: SampleSpace,
        mean: Range,
        sd: Range,
    },
    /// HMM model over explicit grids.
    Hmm { description: HmmModelDescription },
    /// HMM model over the uniform grids `W_{δ,K}` and `T_{δ,K}`.
    HmmGrid {
        #[serde(rename = "K")]
        k: usize,
        #[serde(rename = "L")]
        l: usize,
        delta: f64,
        step: f64,
        base_space: SampleSpace,
        emission_families: Vec<Vec<Emission>>,
    },
}

/// Candidate budget applied when building HMM models from files.
pub const DEFAULT_MODEL_BUDGET: usize = 1_000_000;

/// Versioned model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub model: ModelSpec,
}

pub const MODEL_FILE_VERSION: u32 = 1;

pub fn parse_model_file(text: &str) -> Result<ModelFile> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| json_error(e, "model"))?;
    if file.version != MODEL_FILE_VERSION {
        return Err(Error::Config(format!("unsupported model file version {}", file.version)));
    }
    Ok(file)
}

pub fn read_model_file(path: &Path) -> Result<ModelFile> {
    parse_model_file(&fs::read_to_string(path)?)
}

/// A built model plus what is needed to feed it a series.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: Arc<FiniteModel>,
    /// Base space of the observations.
    pub base_space: SampleSpace,
    /// Window length for HMM models.
    pub window: Option<usize>,
    /// Parameters behind each candidate of an HMM model.
    pub hmm_params: Option<Vec<HmmParams>>,
}

impl LoadedModel {
    /// The sample the model is fitted to: the raw series, or its sliding
    /// windows for an HMM model.
    pub fn sample(&self, y: &[f64], provenance: Option<&str>) -> Result<Sample> {
        let sample = match self.window {
            Some(l) => window(&self.base_space, y, l)?.sample,
            None => Sample::new(self.base_space.clone(), y.to_vec())?,
        };
        Ok(match provenance {
            Some(tag) => sample.with_provenance(tag),
            None => sample,
        })
    }
}

impl ModelSpec {
    pub fn build(&self, budget: usize) -> Result<LoadedModel> {
        match self {
            ModelSpec::Emissions { space, candidates } => {
                let cands = candidates
                    .iter()
                    .map(|c| c.law.candidate(c.id.clone(), space))
                    .collect::<Result<Vec<DensityCandidate>>>()?;
                if cands.len() > budget {
                    return Err(Error::BudgetExceeded {
                        count: cands.len(),
                        budget,
                    });
                }
                Ok(LoadedModel {
                    model: Arc::new(FiniteModel::new(cands)?),
                    base_space: space.clone(),
                    window: None,
                    hmm_params: None,
                })
            }
            ModelSpec::GaussianGrid { space, mean, sd } => {
                let count = mean.count.saturating_mul(sd.count);
                if count > budget {
                    return Err(Error::BudgetExceeded { count, budget });
                }
                let cands =
                    gaussian_scale_location_net(space, (mean.lo, mean.hi, mean.count), (sd.lo, sd.hi, sd.count))?;
                Ok(LoadedModel {
                    model: Arc::new(FiniteModel::new(cands)?),
                    base_space: space.clone(),
                    window: None,
                    hmm_params: None,
                })
            }
            ModelSpec::Hmm { description } => Ok(from_hmm(build_hmm_model(description, budget)?)),
            ModelSpec::HmmGrid {
                k,
                l,
                delta,
                step,
                base_space,
                emission_families,
            } => {
                let d = HmmModelDescription::from_grids(
                    *k,
                    *l,
                    *delta,
                    *step,
                    base_space.clone(),
                    emission_families.clone(),
                )?;
                Ok(from_hmm(build_hmm_model(&d, budget)?))
            }
        }
    }
}

fn from_hmm(m: HmmModel) -> LoadedModel {
    LoadedModel {
        model: Arc::new(m.model),
        base_space: m.description.base_space.clone(),
        window: Some(m.description.l),
        hmm_params: Some(m.params),
    }
}
