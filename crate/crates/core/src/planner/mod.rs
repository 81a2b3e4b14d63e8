//! The high-level planner: action space, episode dynamics and rewards,
//! feature extraction, the actor-critic policy and its trainer, and the
//! scripted baseline.

mod action;
mod agent;
mod episode;
mod explorer;
mod features;
mod policy;
mod train;

pub use action::{PlannerAction, ANSWER_INDEX, CLOSE_INDEX, NUM_ACTIONS, OPEN_INDEX, SCAN_BASE};
pub use agent::{PlannerAgent, ScriptedSequence};
pub use episode::{
    valid_planner_actions, AnswerSource, Episode, EpisodeConfig, EpisodeError, PlannerStepRecord,
    PrimitiveCommand, RewardConfig, StepInfo,
};
pub use explorer::{predicted_visible, ScriptedExplorer};
pub use features::{
    extract_features, feature_layout, provenance, FeatureConfig, FeatureKind, FeatureLayout,
};
pub use policy::{
    accumulate_gradient, log_sigmoid, log_softmax, read_params, sample_loss, sigmoid, write_params,
    Adam, LossTerms, LossWeights, ParamsHeader, PolicyError, PolicyOutput, PolicyParams, Sample,
    PARAMS_FORMAT_VERSION,
};
pub use train::{
    curves_csv, feature_dim, sample_index, train_actor_critic, EpochStats, PolicyAgent,
    TrainConfig, TrainError, UpdateHook, CURVE_CSV_HEADER,
};
