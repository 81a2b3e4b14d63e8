use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::NavMode;
use crate::planner::{
    curves_csv, feature_dim, read_params, train_actor_critic, write_params, AnswerSource,
    EpisodeConfig, EpochStats, FeatureKind, PolicyAgent, PolicyError, PolicyParams,
    ScriptedExplorer, TrainConfig, TrainError,
};
use crate::questions::{DatasetItem, Split};
use crate::world::RoomSpec;

use super::config::RunConfig;
use super::log::{log_file_name, EpisodeLog, LogError};
use super::metrics::{compute_metrics, MetricsReport, Slice};
use super::runner::{mla_records, run_episodes, EpisodeRecord, EpisodeRun, HarnessError};

#[derive(Debug, Error)]
pub enum AblationError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("no training items")]
    NoTrainingItems,
    #[error("parameters for {arm} have dimension {found}, features have {expected}")]
    DimensionMismatch {
        arm: &'static str,
        found: usize,
        expected: usize,
    },
}

/// One row of the ablation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Learned planner with the configured (noisy) detector.
    Full,
    GtDetector,
    /// Ground-truth detector and a navigator planning on true occupancy.
    GtOracleNav,
    QuestionBlind,
    NoValidity,
    Memoryless,
    Scripted,
    Mla,
}

impl Arm {
    pub const ALL: [Arm; 8] = [
        Arm::Full,
        Arm::GtDetector,
        Arm::GtOracleNav,
        Arm::QuestionBlind,
        Arm::NoValidity,
        Arm::Memoryless,
        Arm::Scripted,
        Arm::Mla,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Full => "himn",
            Arm::GtDetector => "himn_gt",
            Arm::GtOracleNav => "himn_gt_oracle_nav",
            Arm::QuestionBlind => "question_blind",
            Arm::NoValidity => "no_validity",
            Arm::Memoryless => "memoryless",
            Arm::Scripted => "scripted",
            Arm::Mla => "mla",
        }
    }

    pub fn from_name(s: &str) -> Option<Arm> {
        Arm::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn learned(self) -> bool {
        !matches!(self, Arm::Scripted | Arm::Mla)
    }

    /// Episode configuration used for both training and evaluation.
    pub fn episode_config(self, cfg: &RunConfig) -> EpisodeConfig {
        let mut ec = match self {
            Arm::Full => cfg.episode_config(),
            _ => cfg.gt_episode_config(),
        };
        match self {
            Arm::GtOracleNav => ec.controllers.navigator.mode = NavMode::Oracle,
            Arm::Memoryless => ec.answer_source = AnswerSource::Observation,
            _ => {}
        }
        ec
    }

    pub fn train_config(self, cfg: &RunConfig) -> Option<TrainConfig> {
        if !self.learned() {
            return None;
        }
        let mut tc = cfg.training.a2c.clone();
        match self {
            Arm::QuestionBlind => tc.features.question_blind = true,
            Arm::NoValidity => tc.loss.validity = 0.0,
            Arm::Memoryless => tc.features.kind = FeatureKind::Memoryless,
            _ => {}
        }
        Some(tc)
    }
}

/// Trained parameters per arm, cached in memory and optionally on disk as
/// `<dir>/<arm>.params` (curves alongside as `<arm>_curves.csv`).
#[derive(Debug, Default)]
pub struct ParamStore {
    pub dir: Option<PathBuf>,
    params: BTreeMap<Arm, PolicyParams>,
    pub curves: BTreeMap<Arm, Vec<EpochStats>>,
}

impl ParamStore {
    pub fn new(dir: Option<PathBuf>) -> Self {
        ParamStore {
            dir,
            ..Default::default()
        }
    }

    pub fn params_path(dir: &Path, arm: Arm) -> PathBuf {
        dir.join(format!("{}.params", arm.name()))
    }

    pub fn insert(&mut self, arm: Arm, p: PolicyParams) {
        self.params.insert(arm, p);
    }

    pub fn get(&self, arm: Arm) -> Option<&PolicyParams> {
        self.params.get(&arm)
    }

    /// Cached, stored or freshly trained parameters for a learned arm.
    pub fn get_or_train(
        &mut self,
        arm: Arm,
        cfg: &RunConfig,
        rooms: &[RoomSpec],
        train: &[DatasetItem],
    ) -> Result<&PolicyParams, AblationError> {
        let tc = arm.train_config(cfg).expect("learned arm");
        let ec = arm.episode_config(cfg);
        let first = train.first().ok_or(AblationError::NoTrainingItems)?;
        let room = rooms
            .iter()
            .find(|r| r.room_id == first.config.room_id)
            .ok_or_else(|| {
                HarnessError::UnknownRoom(first.item_id.clone(), first.config.room_id.clone())
            })?;
        let dim = feature_dim(room, first, &ec, &tc.features).map_err(HarnessError::from)?;
        if !self.params.contains_key(&arm) {
            let stored = self
                .dir
                .as_ref()
                .map(|d| Self::params_path(d, arm))
                .filter(|p| p.exists());
            let p = match stored {
                Some(path) => {
                    read_params(&mut std::io::BufReader::new(std::fs::File::open(path)?))?.0
                }
                None => {
                    let (p, curves) = train_actor_critic(rooms, train, &ec, &tc, dim, None)?;
                    if let Some(dir) = &self.dir {
                        std::fs::create_dir_all(dir)?;
                        let meta = serde_json::json!({ "arm": arm.name(), "training": tc });
                        let mut f = std::io::BufWriter::new(std::fs::File::create(
                            Self::params_path(dir, arm),
                        )?);
                        write_params(&mut f, &p, meta)?;
                        std::fs::write(
                            dir.join(format!("{}_curves.csv", arm.name())),
                            curves_csv(&curves),
                        )?;
                    }
                    self.curves.insert(arm, curves);
                    p
                }
            };
            self.params.insert(arm, p);
        }
        let p = &self.params[&arm];
        if p.dim != dim {
            return Err(AblationError::DimensionMismatch {
                arm: arm.name(),
                found: p.dim,
                expected: dim,
            });
        }
        Ok(p)
    }
}

/// Evaluate one arm. Learned arms need their parameters in `store`
/// (see [`ParamStore::get_or_train`]).
pub fn evaluate_arm(
    arm: Arm,
    cfg: &RunConfig,
    rooms: &[RoomSpec],
    items: &[DatasetItem],
    store: &ParamStore,
) -> Result<Vec<EpisodeRun>, AblationError> {
    let ec = arm.episode_config(cfg);
    let runs = match arm {
        Arm::Mla => return Ok(Vec::new()),
        Arm::Scripted => run_episodes(
            arm.name(),
            rooms,
            items,
            &ec,
            |_, _| Box::new(ScriptedExplorer::new()),
            cfg.eval.seed,
            1,
        )?,
        _ => {
            let params = store
                .get(arm)
                .expect("parameters trained before evaluation");
            let features = arm.train_config(cfg).expect("learned arm").features;
            let (greedy, mask) = (cfg.eval.greedy, cfg.eval.mask_invalid);
            run_episodes(
                arm.name(),
                rooms,
                items,
                &ec,
                |_, s| {
                    let mut a = PolicyAgent::new(params.clone(), features, s);
                    a.greedy = greedy;
                    a.mask_invalid = mask;
                    Box::new(a)
                },
                cfg.eval.seed,
                cfg.eval.repeats,
            )?
        }
    };
    Ok(runs)
}

/// Write one gzip log per run into `dir`.
pub fn write_logs(dir: &Path, runs: &[EpisodeRun]) -> Result<Vec<PathBuf>, AblationError> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for run in runs {
        let path = dir.join(log_file_name(&run.record, run.record.seed));
        EpisodeLog::from_run(run).write(&path)?;
        out.push(path);
    }
    Ok(out)
}

/// Records of every arm plus their metrics, rows in arm order.
#[derive(Clone, Debug, Default)]
pub struct AblationReport {
    pub arms: Vec<Arm>,
    pub records: Vec<EpisodeRecord>,
    pub metrics: MetricsReport,
}

impl AblationReport {
    pub fn table(&self, slice: Slice) -> String {
        let names: Vec<&str> = self.arms.iter().map(|a| a.name()).collect();
        self.metrics.table_for(slice, &names)
    }
}

/// Items the learned arms train on, and the evaluation slices (unseen
/// test rooms plus fresh configurations of training rooms).
pub fn split_items(items: &[DatasetItem]) -> (Vec<DatasetItem>, Vec<DatasetItem>) {
    items.iter().cloned().partition(|i| i.split == Split::Train)
}

/// Train what is missing, evaluate every requested arm and compare.
/// `progress` receives one line per finished phase.
pub fn run_ablation_suite(
    cfg: &RunConfig,
    rooms: &[RoomSpec],
    items: &[DatasetItem],
    arms: &[Arm],
    store: &mut ParamStore,
    progress: &mut dyn FnMut(&str),
) -> Result<AblationReport, AblationError> {
    let (train, eval) = split_items(items);
    let mut report = AblationReport {
        arms: arms.to_vec(),
        ..Default::default()
    };
    for &arm in arms {
        if arm.learned() {
            let started = std::time::Instant::now();
            store.get_or_train(arm, cfg, rooms, &train)?;
            progress(&format!(
                "{}: parameters ready in {:.1?}",
                arm.name(),
                started.elapsed()
            ));
        }
        if arm == Arm::Mla {
            report.records.extend(mla_records(&eval));
            continue;
        }
        let runs = evaluate_arm(arm, cfg, rooms, &eval, store)?;
        if let Some(dir) = &cfg.eval.log_dir {
            write_logs(&dir.join(arm.name()), &runs)?;
        }
        progress(&format!(
            "{}: evaluated {} episodes",
            arm.name(),
            runs.len()
        ));
        report.records.extend(runs.into_iter().map(|r| r.record));
    }
    report.metrics = compute_metrics(&report.records);
    Ok(report)
}
