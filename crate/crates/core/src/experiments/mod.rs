//! Scenario runs: initial data, shooting, tracking, fits and persistence.

mod classify;
mod config;
mod fit;
mod record;
mod scenario;
mod shoot;
mod track;
mod wmap;

pub use classify::{classify_run, Classification};
pub use config::{BisectionConfig, GridConfig, RunConfig, Scenario, ShootingConfig, Thresholds};
pub use fit::{fit_asymptotics, Fits, MIN_FIT_SAMPLES};
pub use record::{
    read_timeseries, timeseries_header, validate_record_dir, write_timeseries, BisectionReport, ConstantsUsed,
    RunFacts, RunRecord, SegmentReport, ShootReport, Summary, Termination, TimeseriesRow, CONFIG_FILE,
    SUMMARY_FILE, TIMESERIES_FILE,
};
pub use scenario::{
    longest_same_sign_growth, read_state_csv, run_scenario, same_sign_probe, shoot_k_soliton, shoot_single,
    shoot_two_soliton, write_state_csv, ScenarioOutput,
};
pub use shoot::{bisect, trial, DirectionKind, ShootContext, ShootResult, ShootSetup, TrialEnd, TrialOutcome};
pub use track::{run_tracked, OnExit, Symmetry, TrackedRun, Tracker};
pub use wmap::{build_wmap, WMap, MIN_WMAP_SPACING};
