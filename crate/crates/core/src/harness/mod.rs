//! Configuration-driven Monte Carlo experiments: build the signal
//! environment, run every configured filter over paired trials, average the
//! learning curves, overlay the MSD model and write CSV/JSON results.

mod config;
mod engine;
mod moments;
mod output;

pub use config::{
    preset, preset_text, AlgorithmEntry, ExperimentConfig, JminMode, NoiseLevel, OutputKind, DEFAULT_PLANT,
};
pub use engine::{
    monte_carlo, run_experiment, run_trial, steady_bounds, steady_window, sweep, theory_overlay, theory_params,
    Experiment, LearningCurve, SteadyBounds, SweepGrid, SweepPoint, TheoryOverlay, TrialRecord, TrialSummary,
};
pub use moments::{moment_report, MomentReport};
pub use output::{write_csv, write_experiment, write_summary, CurveSummary, Summary, TheorySummary, CSV_HEADER};
