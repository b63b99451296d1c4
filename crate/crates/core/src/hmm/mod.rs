//! Hidden Markov models: parameter records, the law of `L` consecutive
//! observations, stationary laws, parameter grids and finite model assembly.

pub(crate) mod chain;
mod grid;
mod model;
mod params;

pub use chain::{
    is_primitive, matrix_power, product_chain_density, stationary_distribution, window, ChainDensity, WindowedSample,
};
pub use grid::{
    default_step, delta_for, simplex_grid, transition_grid, vbar_exponential_family, vbar_for_nets, MAX_DENOMINATOR,
    MAX_GRID_SIZE,
};
pub use model::{build_hmm_model, HmmModel, HmmModelDescription, MODEL_FORMAT_VERSION};
pub use params::{param_error, HmmParams, SimplexWeights, TransitionMatrix, MAX_ALIGNED_STATES, MAX_STATES};
