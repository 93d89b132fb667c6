//! Grouped matrix network autoregression: simulation, estimation with
//! latent row and column groups, group-number selection and inference.

pub mod benchmark;
pub mod error;
pub mod estimate;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod netgen;
pub mod rng;
pub mod select;
pub mod simulate;

pub use error::{GmnarError, Result};
pub use estimate::{fit, fit_fixed, FitOptions, FitResult};
pub use model::{
    check_stationarity, objective_q, GroupAssignment, MatrixSeries, NetworkPair, Normalization, ParamLayout, ParameterSet, ParameterSpec,
};
pub use inference::{covariance, InferenceResult};
pub use select::{select_group_numbers, SelectionResult};
pub use simulate::{simulate_gmnar, SimConfig, Simulation};
