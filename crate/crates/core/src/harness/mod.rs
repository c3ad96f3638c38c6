//! Experiment driver: configuration, synthetic data, reconstruction, rate
//! studies and their file artifacts.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod provenance;
pub mod rates;

pub use config::{Conductivity, ExperimentConfig, Stimulus, StimulusShape};
pub use pipeline::{
    add_noise, generate_synthetic, measurement_from_fine, reconstruct, resample_trace, topological_gradient,
    Discretization, GradientRun, Reconstruction, SyntheticData,
};
pub use rates::{loglog_slope, rate_study, NormAccumulator, PerturbationNorms, RateRow, RateStudy};
pub use provenance::{check_provenance, read_provenance, sidecar_path, write_with_provenance, Provenance};
