use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::PrimitiveRecord;
use crate::planner::{
    Episode, EpisodeConfig, EpisodeError, PlannerAgent, PlannerStepRecord, PrimitiveCommand,
};
use crate::questions::{stable_hash, DatasetItem, QuestionType, Split};
use crate::world::{AgentState, RoomSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("item {0} references unknown room {1:?}")]
    UnknownRoom(String, String),
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
}

/// World state at the end of an episode, compared bit-for-bit on replay.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalState {
    pub agent: AgentState,
    pub open: Vec<bool>,
    pub memory_digest: u64,
}

impl FinalState {
    pub fn of(ep: &Episode) -> Self {
        FinalState {
            agent: ep.emb.agent(),
            open: ep.emb.scene().open_flags(),
            memory_digest: ep.emb.memory.digest(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub agent: String,
    pub item_id: String,
    pub config_id: String,
    pub room_id: String,
    pub qtype: QuestionType,
    pub question: String,
    pub split: Split,
    pub answer: Option<usize>,
    pub truth: usize,
    pub correct: bool,
    pub planner_steps: usize,
    pub primitive_steps: usize,
    pub invalid: usize,
    pub total_reward: f64,
    pub forced_end: bool,
    pub seed: u64,
    pub final_state: Option<FinalState>,
    #[serde(default)]
    pub steps: Vec<PlannerStepRecord>,
}

impl EpisodeRecord {
    pub fn from_episode(agent: &str, item: &DatasetItem, ep: &Episode) -> Self {
        EpisodeRecord {
            agent: agent.to_string(),
            item_id: item.item_id.clone(),
            config_id: config_id(item),
            room_id: item.config.room_id.clone(),
            qtype: item.question.qtype,
            question: item.text.clone(),
            split: item.split,
            answer: ep.answer_given(),
            truth: ep.truth,
            correct: ep.correct(),
            planner_steps: ep.planner_steps(),
            primitive_steps: ep.primitive_steps(),
            invalid: ep.invalid_count(),
            total_reward: ep.total_reward(),
            forced_end: ep.forced_end(),
            seed: ep.seed,
            final_state: Some(FinalState::of(ep)),
            steps: ep.steps.clone(),
        }
    }
}

/// Identifies a scene configuration independently of the question asked.
pub fn config_id(item: &DatasetItem) -> String {
    format!("{}#{:016x}", item.config.room_id, item.config.seed)
}

/// Seed for one episode of `item`, independent of evaluation order.
pub fn episode_seed(seed: u64, item: &DatasetItem, repeat: usize) -> u64 {
    stable_hash(&[&seed.to_string(), &item.item_id, &repeat.to_string()])
}

/// A finished episode together with its primitive trace.
pub struct EpisodeRun {
    pub record: EpisodeRecord,
    pub room: RoomSpec,
    pub item: DatasetItem,
    pub cfg: EpisodeConfig,
    pub primitives: Vec<PrimitiveRecord>,
}

/// Drive one episode to completion.
pub fn run_episode(
    agent_name: &str,
    room: &RoomSpec,
    item: &DatasetItem,
    cfg: &EpisodeConfig,
    agent: &mut dyn PlannerAgent,
    seed: u64,
) -> Result<EpisodeRun, HarnessError> {
    let mut ep = Episode::new(room, item, cfg, seed)?;
    while !ep.done() {
        let a = agent.act(&ep);
        ep.step_planner(a)?;
    }
    Ok(EpisodeRun {
        record: EpisodeRecord::from_episode(agent_name, item, &ep),
        room: room.clone(),
        item: item.clone(),
        cfg: cfg.clone(),
        primitives: ep.emb.trace.clone(),
    })
}

/// Run a fixed sequence of direct-control commands. The episode ends at
/// the first answer, at the primitive cap, or (unanswered) when the
/// commands run out.
pub fn run_direct_episode(
    agent_name: &str,
    room: &RoomSpec,
    item: &DatasetItem,
    cfg: &EpisodeConfig,
    commands: &[PrimitiveCommand],
    seed: u64,
) -> Result<EpisodeRun, HarnessError> {
    let mut ep = Episode::new(room, item, cfg, seed)?;
    for &c in commands {
        if ep.done() {
            break;
        }
        ep.step_primitive(c)?;
    }
    Ok(EpisodeRun {
        record: EpisodeRecord::from_episode(agent_name, item, &ep),
        room: room.clone(),
        item: item.clone(),
        cfg: cfg.clone(),
        primitives: ep.emb.trace.clone(),
    })
}

/// Reject configurations whose memory cannot hold what the episode emits.
pub fn check_config(cfg: &EpisodeConfig) -> Result<(), HarnessError> {
    let need = 2 * cfg.view.view_range.max(0) as usize + 1;
    let have = cfg.controllers.memory.integration_window;
    if have < need {
        return Err(HarnessError::ConfigMismatch(format!(
            "memory integration window {have} is smaller than the view footprint {need}"
        )));
    }
    Ok(())
}

pub fn room_index(rooms: &[RoomSpec]) -> BTreeMap<&str, &RoomSpec> {
    rooms.iter().map(|r| (r.room_id.as_str(), r)).collect()
}

/// Run every item (`repeats` times each, with distinct seeds). Output
/// order follows `items`, then repeat index, whatever the worker count.
pub fn run_episodes<F>(
    agent_name: &str,
    rooms: &[RoomSpec],
    items: &[DatasetItem],
    cfg: &EpisodeConfig,
    make_agent: F,
    seed: u64,
    repeats: usize,
) -> Result<Vec<EpisodeRun>, HarnessError>
where
    F: Fn(&DatasetItem, u64) -> Box<dyn PlannerAgent> + Sync,
{
    check_config(cfg)?;
    let index = room_index(rooms);
    let jobs: Vec<(&DatasetItem, usize)> = items
        .iter()
        .flat_map(|it| (0..repeats.max(1)).map(move |r| (it, r)))
        .collect();
    let one = |&(item, r): &(&DatasetItem, usize)| -> Result<EpisodeRun, HarnessError> {
        let room = index.get(item.config.room_id.as_str()).ok_or_else(|| {
            HarnessError::UnknownRoom(item.item_id.clone(), item.config.room_id.clone())
        })?;
        let s = episode_seed(seed, item, r);
        let mut agent = make_agent(item, s);
        run_episode(agent_name, room, item, cfg, agent.as_mut(), s)
    };
    #[cfg(feature = "parallel")]
    let out: Vec<Result<EpisodeRun, HarnessError>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out: Vec<Result<EpisodeRun, HarnessError>> = jobs.iter().map(one).collect();
    out.into_iter().collect()
}

/// The most-likely-answer baseline: answers the first choice of every
/// question without acting. With exactly balanced data every choice is
/// equally likely, so the first one is as modal as any.
pub fn mla_records(items: &[DatasetItem]) -> Vec<EpisodeRecord> {
    items
        .iter()
        .map(|item| EpisodeRecord {
            agent: "mla".into(),
            item_id: item.item_id.clone(),
            config_id: config_id(item),
            room_id: item.config.room_id.clone(),
            qtype: item.question.qtype,
            question: item.text.clone(),
            split: item.split,
            answer: Some(0),
            truth: item.answer,
            correct: item.answer == 0,
            planner_steps: 1,
            primitive_steps: 1,
            invalid: 0,
            total_reward: 0.0,
            forced_end: false,
            seed: 0,
            final_state: None,
            steps: Vec::new(),
        })
        .collect()
}
