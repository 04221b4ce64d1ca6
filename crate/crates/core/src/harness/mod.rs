//! Configuration, run manifests and the subcommands behind `pgsmdp`.

mod commands;
mod config;
mod manifest;

pub use commands::{
    checkpoint_name, cmd_eval, cmd_gradcheck, cmd_heatmap, cmd_train, curve_name, evaluate, heatmap, region_means,
    write_heatmap, CheckResult, EvalReport, GradcheckOptions, GradcheckReport, HeatCell, TrainRun, EVAL_FILE,
    EVAL_TABLE_FILE, GOAL_REGION_RADIUS, HALFWAY_MAX_X, HEATMAP_SCHEMA_VERSION, MANIFEST_FILE, METRICS_FILE, TABLE_FILE,
};
pub use config::{EnvSection, EpisodeSection, LearnerSection, RunConfig, CONFIG_SCHEMA_VERSION};
pub use manifest::{file_digest, Artifact, RunManifest, TrialArtifacts, MANIFEST_SCHEMA_VERSION};

use crate::error::Error;

/// Process exit statuses of the CLI.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG_INVALID: i32 = 2;
    pub const IO: i32 = 3;
    pub const CHECK_FAILED: i32 = 4;
}

/// Exit status for an error that reached the top level.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Validation(_) | Error::Toml(_) | Error::Schema { .. } => exit::CONFIG_INVALID,
        Error::Io(_) => exit::IO,
        _ => exit::OTHER,
    }
}
