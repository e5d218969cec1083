//! Experiment orchestration: configuration, channel policies, hopping
//! sequences, and the scripted experiment recipes with their CSV artifacts.

pub mod config;
pub mod experiments;

pub use config::{
    aggregation_channels, ChannelPolicy, ExperimentConfig, HopSequence, ProfileSection,
    INDOOR_PROFILE_TOML,
};
pub use experiments::{
    configured_anchors, derive_seed, run_angular_sweep, run_attack_demo, run_calibration,
    run_experiment, run_fh_subset, run_indoor_line, run_positioning_grid, AttackDemoResult,
    CalibrationResult, FhSubsetResult, GridResult, LineResult, SweepResult, EXPERIMENT_IDS,
};
