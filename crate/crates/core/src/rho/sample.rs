use crate::error::{Error, Result};
use crate::measure::SampleSpace;

/// Observations on a sample space, stored as a flat coordinate buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    space: SampleSpace,
    arity: usize,
    points: Vec<f64>,
    provenance: Option<String>,
}

impl Sample {
    /// `points` holds `n * arity` coordinates, point-major.
    pub fn new(space: SampleSpace, points: Vec<f64>) -> Result<Self> {
        let arity = space.arity();
        if points.is_empty() || !points.len().is_multiple_of(arity) {
            return Err(Error::invalid(format!(
                "sample needs a positive multiple of {arity} coordinates, got {}",
                points.len()
            )));
        }
        for (i, p) in points.chunks_exact(arity).enumerate() {
            if !space.contains(p) {
                return Err(Error::invalid(format!("point {i} ({p:?}) is outside the sample space")));
            }
        }
        Ok(Sample {
            space,
            arity,
            points,
            provenance: None,
        })
    }

    /// Tags the sample with where it came from; two samples with the same tag
    /// are treated as dependent by spacing selection.
    pub fn with_provenance(mut self, tag: impl Into<String>) -> Self {
        self.provenance = Some(tag.into());
        self
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.arity
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.arity..(i + 1) * self.arity]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.arity)
    }

    pub fn coordinates(&self) -> &[f64] {
        &self.points
    }

    /// Points at the given 0-based indices, in that order.
    pub fn subsample(&self, indices: &[usize]) -> Result<Sample> {
        if indices.is_empty() {
            return Err(Error::invalid("empty sub-sample"));
        }
        let mut points = Vec::with_capacity(indices.len() * self.arity);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!("index {i} out of range for n = {}", self.len())));
            }
            points.extend_from_slice(self.point(i));
        }
        Ok(Sample {
            space: self.space.clone(),
            arity: self.arity,
            points,
            provenance: self.provenance.clone(),
        })
    }
}
