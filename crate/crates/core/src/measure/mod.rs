//! Sample spaces, density candidates and the Hellinger / total variation /
//! Kullback–Leibler engine.

mod candidate;
mod metrics;
mod model;
mod quadrature;
mod space;

pub use candidate::{AtomTable, DensityCandidate, FnDensity, LogDensity, Singularity};
pub use metrics::{
    check_mass_on_rule, finite_model_dimension, hellinger2, hellinger2_from_logs, kl_divergence, total_variation, vc_index_finite,
};
pub use model::{FiniteModel, EMBEDDING_BUDGET};
pub use quadrature::{gauss_legendre, QuadratureRule, MAX_RULE_POINTS, NORMALIZATION_TOLERANCE};
pub use space::{ReferenceMeasure, SampleSpace, DEFAULT_NODES_PER_PANEL};
