//! Emission and candidate families: exponential families, Gaussians,
//! exponential laws, the singular translate family and a piecewise
//! log-linear log-concave family.

mod emission;
mod expfam;
mod nets;

pub use emission::{falpha_log_density, Emission, EmissionDensity};
pub use expfam::{expfam_log_density, ExpFamilySpec};
pub use nets::{
    exponential_net, gaussian_location_net, gaussian_scale_location_net, geometric_grid, log_concave_net_1d,
    singular_translate_net, uniform_grid, PiecewiseLogLinear, MAX_LOG_CONCAVE_NET,
};
