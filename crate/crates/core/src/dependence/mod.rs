//! Seeded simulators, contamination and exact dependence diagnostics.

mod diagnostics;
mod rng;
mod sim;

pub use diagnostics::{
    beta_mixing_markov, beta_mixing_markov_with, coefficient_of_information, hmm_dependence_bound,
    markov_dependence_term, markov_dependence_total, reverse_pinsker_gap,
};
pub use rng::{derive_seed, rng_from_seed, role, stream_rng};
pub use sim::{
    contaminate, simulate_hmm, simulate_langevin, simulate_markov, Contaminant, Contaminated, ContaminationMode,
    ContaminationSpec, DiffusionSpec, HmmPath, Potential,
};
