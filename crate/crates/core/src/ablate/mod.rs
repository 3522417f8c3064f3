//! Declarative ablation experiments: configuration, presets, and the
//! resumable suite runner.

pub mod config;
pub mod runner;

pub use config::{
    builtin_presets, load_config, load_suite, AblationConfig, AblationSuite, HeadKind, HeadParams,
};
pub use runner::{
    run_suite, write_atomic, ConfigOutcome, RunOptions, SuiteOutcome, MERGED_COLUMNS, MERGED_CSV,
    STATE_FILE,
};
