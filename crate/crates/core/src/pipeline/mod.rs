//! Configuration, staged execution and on-disk artifacts of an experiment:
//! prepare → sample → fit → verify → analyze.

mod config;
mod run;

pub use config::{preset, CouplingSource, ExperimentConfig, FitPlan, MeasurementPlan, NoisePlan, StateRecipe, PRESETS};
pub use run::{
    geometry_label, run_pipeline, stage_analyze, stage_fit, stage_model, stage_prepare, stage_sample, stage_verify,
    Manifest, Output, Seeds, StageError, CALIBRATION_DATA, FIT_DATA, HOLDOUT_DATA, MANIFEST, NOISE_FILE, STAGES,
    STATE_FILE,
};
