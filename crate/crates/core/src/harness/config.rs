use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{ControllerConfig, DetectorModel, NavigatorConfig};
use crate::memory::MemoryConfig;
use crate::planner::{AnswerSource, EpisodeConfig, RewardConfig, TrainConfig};
use crate::questions::{generate_dataset, Dataset, DatasetOptions, QuestionError, RoomSplit};
use crate::rooms::{kitchen_suite, read_rooms_dir, small_suite, RoomError};
use crate::world::{RoomSpec, ViewParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Rooms(#[from] RoomError),
    #[error(transparent)]
    Dataset(#[from] QuestionError),
}

/// Built-in room suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomSuite {
    Kitchen,
    Small,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSection {
    pub suite: RoomSuite,
    /// Room documents to use instead of a generated suite.
    pub rooms_dir: Option<PathBuf>,
    pub room_seed: u64,
    pub dataset_seed: u64,
    pub scale: f64,
    pub view: ViewParams,
    pub memory: MemoryConfig,
    pub navigator: NavigatorConfig,
    pub max_primitive_steps: usize,
}

impl Default for WorldSection {
    fn default() -> Self {
        WorldSection {
            suite: RoomSuite::Small,
            rooms_dir: None,
            room_seed: 1,
            dataset_seed: 2,
            scale: 1.0 / 64.0,
            view: ViewParams::default(),
            memory: MemoryConfig::default(),
            navigator: NavigatorConfig::default(),
            max_primitive_steps: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSection {
    #[serde(flatten)]
    pub a2c: TrainConfig,
    /// Memory moving-average rate for arms with a ground-truth detector.
    pub gt_alpha: f32,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            a2c: TrainConfig::default(),
            gt_alpha: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub seed: u64,
    /// Episodes per item for stochastic agents.
    pub repeats: usize,
    pub greedy: bool,
    pub mask_invalid: bool,
    /// Write one gzip log per episode here.
    pub log_dir: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            seed: 9,
            repeats: 4,
            greedy: false,
            mask_invalid: false,
            log_dir: None,
        }
    }
}

/// The single JSON document read by every command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub world: WorldSection,
    /// Detector of the full agent; ground-truth arms override it.
    pub detector: DetectorModel,
    pub reward: RewardConfig,
    pub training: TrainingSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            world: WorldSection::default(),
            detector: DetectorModel::noisy(0.8, 0.01, 0.1),
            reward: RewardConfig::default(),
            training: TrainingSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.detector.validate().map_err(ConfigError::Invalid)?;
        let m = &self.world.memory;
        if !(m.alpha > 0.0 && m.alpha <= 1.0)
            || !(self.training.gt_alpha > 0.0 && self.training.gt_alpha <= 1.0)
        {
            return Err(ConfigError::Invalid(
                "memory alpha must be in (0, 1]".into(),
            ));
        }
        if m.integration_window < 2 * self.world.view.view_range as usize + 1 {
            return Err(ConfigError::Invalid(
                "memory integration window does not cover the view range".into(),
            ));
        }
        if !(self.world.scale > 0.0) {
            return Err(ConfigError::Invalid("scale must be positive".into()));
        }
        if self.training.a2c.workers == 0 || self.training.a2c.n_steps == 0 {
            return Err(ConfigError::Invalid(
                "workers and n_steps must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Episode configuration of the full agent.
    pub fn episode_config(&self) -> EpisodeConfig {
        let reward = RewardConfig {
            max_primitive_steps: self.world.max_primitive_steps,
            ..self.reward
        };
        EpisodeConfig {
            controllers: ControllerConfig {
                memory: self.world.memory,
                detector: self.detector.clone(),
                navigator: self.world.navigator,
                answer: Default::default(),
                max_primitive_steps: self.world.max_primitive_steps,
            },
            reward,
            answer_source: AnswerSource::Memory,
            view: self.world.view,
        }
    }

    /// Episode configuration with a ground-truth detector.
    pub fn gt_episode_config(&self) -> EpisodeConfig {
        let mut cfg = self.episode_config();
        cfg.controllers.detector = DetectorModel::oracle();
        cfg.controllers.memory.alpha = self.training.gt_alpha;
        cfg
    }

    pub fn rooms(&self) -> Result<(Vec<RoomSpec>, RoomSplit), ConfigError> {
        if let Some(dir) = &self.world.rooms_dir {
            return Ok(read_rooms_dir(dir)?);
        }
        Ok(match self.world.suite {
            RoomSuite::Kitchen => kitchen_suite(self.world.room_seed),
            RoomSuite::Small => small_suite(self.world.room_seed),
        })
    }

    pub fn dataset(&self, rooms: &[RoomSpec], split: &RoomSplit) -> Result<Dataset, ConfigError> {
        let opts = DatasetOptions {
            seed: self.world.dataset_seed,
            scale: self.world.scale,
            seen_split: true,
        };
        Ok(generate_dataset(rooms, split, &opts)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"training": {"updates": 10, "gt_alpha": 0.5}, "eval": {"repeats": 1}}"#,
        )
        .unwrap();
        assert_eq!(cfg.training.a2c.updates, 10);
        assert_eq!(cfg.training.a2c.workers, 8);
        assert_eq!(cfg.training.gt_alpha, 0.5);
        assert_eq!(cfg.eval.repeats, 1);
        assert_eq!(cfg.world, WorldSection::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_short_integration_window() {
        let mut cfg = RunConfig::default();
        cfg.world.memory.integration_window = 5;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }
}
