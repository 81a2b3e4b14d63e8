//! Per-episode trajectory logs: gzip-compressed JSON lines, a header, one
//! line per planner step (with the primitive actions it issued), and a
//! closing record line.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::PrimitiveRecord;
use crate::planner::{
    Episode, EpisodeConfig, PlannerAction, PlannerStepRecord, PrimitiveCommand, ScriptedSequence,
};
use crate::questions::DatasetItem;
use crate::world::{load_scene_with, RoomSpec, SceneError, World};

use super::runner::{
    run_direct_episode, run_episode, EpisodeRecord, EpisodeRun, FinalState, HarnessError,
};

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogLine {
    Header {
        schema_version: u32,
        agent: String,
        room: Box<RoomSpec>,
        item: Box<DatasetItem>,
        cfg: Box<EpisodeConfig>,
        seed: u64,
    },
    Step {
        step: PlannerStepRecord,
        primitives: Vec<PrimitiveRecord>,
    },
    End {
        record: Box<EpisodeRecord>,
    },
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json on line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("malformed log: {0}")]
    Malformed(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// A parsed log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub agent: String,
    pub room: RoomSpec,
    pub item: DatasetItem,
    pub cfg: EpisodeConfig,
    pub seed: u64,
    pub steps: Vec<(PlannerStepRecord, Vec<PrimitiveRecord>)>,
    pub record: EpisodeRecord,
}

impl EpisodeLog {
    pub fn from_run(run: &EpisodeRun) -> Self {
        let mut steps = Vec::new();
        let mut from = 0;
        for s in &run.record.steps {
            steps.push((s.clone(), run.primitives[from..s.primitive_end].to_vec()));
            from = s.primitive_end;
        }
        EpisodeLog {
            agent: run.record.agent.clone(),
            room: run.room.clone(),
            item: run.item.clone(),
            cfg: run.cfg.clone(),
            seed: run.record.seed,
            steps,
            record: run.record.clone(),
        }
    }

    pub fn lines(&self) -> Vec<LogLine> {
        let mut out = vec![LogLine::Header {
            schema_version: LOG_SCHEMA_VERSION,
            agent: self.agent.clone(),
            room: Box::new(self.room.clone()),
            item: Box::new(self.item.clone()),
            cfg: Box::new(self.cfg.clone()),
            seed: self.seed,
        }];
        for (step, primitives) in &self.steps {
            out.push(LogLine::Step {
                step: step.clone(),
                primitives: primitives.clone(),
            });
        }
        let mut record = self.record.clone();
        // steps already have their own lines
        record.steps.clear();
        out.push(LogLine::End {
            record: Box::new(record),
        });
        out
    }

    pub fn from_lines(lines: Vec<LogLine>) -> Result<Self, LogError> {
        let mut it = lines.into_iter();
        let Some(LogLine::Header {
            schema_version,
            agent,
            room,
            item,
            cfg,
            seed,
        }) = it.next()
        else {
            return Err(LogError::Malformed("missing header".into()));
        };
        if schema_version != LOG_SCHEMA_VERSION {
            return Err(LogError::Malformed(format!(
                "schema version {schema_version}"
            )));
        }
        let mut steps = Vec::new();
        let mut record = None;
        for line in it {
            match line {
                LogLine::Step { step, primitives } => steps.push((step, primitives)),
                LogLine::End { record: r } => record = Some(*r),
                LogLine::Header { .. } => return Err(LogError::Malformed("second header".into())),
            }
        }
        let mut record = record.ok_or_else(|| LogError::Malformed("missing end record".into()))?;
        record.steps = steps.iter().map(|(s, _)| s.clone()).collect();
        Ok(EpisodeLog {
            agent,
            room: *room,
            item: *item,
            cfg: *cfg,
            seed,
            steps,
            record,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), LogError> {
        let file = std::fs::File::create(path)?;
        let mut gz = GzEncoder::new(file, Compression::default());
        for line in self.lines() {
            serde_json::to_writer(&mut gz, &line)
                .map_err(|e| LogError::Json { line: 0, source: e })?;
            gz.write_all(b"\n")?;
        }
        gz.finish()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, LogError> {
        let reader = BufReader::new(GzDecoder::new(std::fs::File::open(path)?));
        let mut lines = Vec::new();
        for (i, l) in reader.lines().enumerate() {
            let l = l?;
            if l.trim().is_empty() {
                continue;
            }
            lines.push(serde_json::from_str(&l).map_err(|e| LogError::Json {
                line: i + 1,
                source: e,
            })?);
        }
        Self::from_lines(lines)
    }

    pub fn primitives(&self) -> impl Iterator<Item = &PrimitiveRecord> {
        self.steps.iter().flat_map(|(_, p)| p.iter())
    }
}

/// File name used for an episode's log.
pub fn log_file_name(record: &EpisodeRecord, repeat_seed: u64) -> String {
    let safe: String = record
        .item_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{}__{}__{:016x}.jsonl.gz", record.agent, safe, repeat_seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    pub primitive_steps: usize,
    /// First primitive whose outcome or resulting pose differed from the log.
    pub first_divergence: Option<usize>,
    pub world_final_matches: bool,
    /// Re-running the logged planner commands reproduced the record.
    pub record_matches: bool,
    pub final_state: FinalState,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.first_divergence.is_none() && self.world_final_matches && self.record_matches
    }
}

/// Replay a log two ways: the primitive trace through the bare world, and
/// the planner commands through a fresh episode with the logged seed.
pub fn replay(log: &EpisodeLog) -> Result<ReplayReport, LogError> {
    let scene = load_scene_with(&log.room, &log.item.config, log.cfg.view)?;
    let mut world = World::new(scene, log.item.config.start);
    let mut first_divergence = None;
    let mut n = 0;
    for p in log.primitives() {
        let outcome = world.apply(p.action);
        if first_divergence.is_none() && (outcome != p.outcome || world.agent != p.agent) {
            first_divergence = Some(n);
        }
        n += 1;
    }
    let logged = log.record.final_state.clone();
    let world_final_matches = logged
        .as_ref()
        .is_some_and(|f| f.agent == world.agent && f.open == world.scene.open_flags());

    let rerun = if log.steps.iter().any(|(s, _)| s.direct) {
        let commands: Vec<PrimitiveCommand> = log
            .steps
            .iter()
            .map(|(s, _)| PrimitiveCommand::from_index(s.action))
            .collect();
        run_direct_episode(
            &log.agent, &log.room, &log.item, &log.cfg, &commands, log.seed,
        )?
    } else {
        let actions: Vec<PlannerAction> = log
            .steps
            .iter()
            .map(|(s, _)| PlannerAction::from_index(s.action))
            .collect::<Option<_>>()
            .ok_or_else(|| LogError::Malformed("planner action out of range".into()))?;
        let mut agent = ScriptedSequence::new(actions);
        run_episode(
            &log.agent, &log.room, &log.item, &log.cfg, &mut agent, log.seed,
        )?
    };
    let record_matches = rerun.record == log.record;
    let final_state = rerun
        .record
        .final_state
        .clone()
        .expect("live episodes have a final state");
    Ok(ReplayReport {
        primitive_steps: n,
        first_divergence,
        world_final_matches,
        record_matches,
        final_state,
    })
}

/// Re-run `ep`'s planner commands and check its state matches.
pub fn replays_identically(
    ep: &Episode,
    room: &RoomSpec,
    item: &DatasetItem,
) -> Result<bool, LogError> {
    let rerun = if ep.steps.iter().any(|s| s.direct) {
        let commands: Vec<PrimitiveCommand> = ep
            .steps
            .iter()
            .map(|s| PrimitiveCommand::from_index(s.action))
            .collect();
        run_direct_episode("replay", room, item, &ep.cfg, &commands, ep.seed)?
    } else {
        let actions = ep
            .steps
            .iter()
            .map(|s| PlannerAction::from_index(s.action).expect("logged index"))
            .collect();
        let mut agent = ScriptedSequence::new(actions);
        run_episode("replay", room, item, &ep.cfg, &mut agent, ep.seed)?
    };
    Ok(rerun.record.final_state == Some(FinalState::of(ep)) && rerun.primitives == ep.emb.trace)
}
