//! Episode runner, metrics, trajectory logs, run configuration and the
//! ablation suite.

mod ablation;
mod config;
mod log;
mod metrics;
mod runner;

pub use ablation::{
    evaluate_arm, run_ablation_suite, split_items, write_logs, AblationError, AblationReport, Arm,
    ParamStore,
};
pub use config::{ConfigError, EvalSection, RoomSuite, RunConfig, TrainingSection, WorldSection};
pub use log::{
    log_file_name, replay, replays_identically, EpisodeLog, LogError, LogLine, ReplayReport,
    LOG_SCHEMA_VERSION,
};
pub use metrics::{compute_metrics, MetricsCell, MetricsReport, Slice};
pub use runner::{
    check_config, config_id, episode_seed, mla_records, room_index, run_direct_episode,
    run_episode, run_episodes, EpisodeRecord, EpisodeRun, FinalState, HarnessError,
};
