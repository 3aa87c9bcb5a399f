pub mod data;
pub mod fit;
pub mod run;
pub mod setup;

pub use data::{draw_measurement_times, synthesize_dataset, Dataset};
pub use fit::{adam_train, alternating_fit, gauss_newton, AdamOptions, EstimationResult, FitConfig, GaussNewtonOptions, Problem};
pub use run::{run_scenario, run_scenario_in, RunContext, RunSettings, ScenarioConfig, ScenarioOutcome, ScenarioReport};
pub use setup::{draw_prior, interaction_error, stream_seed, ModelKind, ModelSetup, PretrainOptions, Prior};
