use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{
    answer, answer_from_observation, manipulate, navigate, scan, ControllerConfig, Embodiment,
    NavOutcome, NavReport, Phase, PrimitiveCap, ScanDirection,
};
use crate::memory::{coverage_fraction, SpatialMemory};
use crate::questions::{answer_of_scene, DatasetItem, Question};
use crate::world::{
    load_scene_with, ActionOutcome, AgentState, LowLevelAction, RoomSpec, SceneError, ViewParams,
    World,
};

use super::action::{PlannerAction, NUM_ACTIONS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub r_answer: f64,
    pub c_time: f64,
    pub c_invalid: f64,
    /// Reward per unit increase of the coverage fraction.
    pub c_coverage: f64,
    pub max_planner_steps: usize,
    pub max_primitive_steps: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            r_answer: 10.0,
            c_time: 0.01,
            c_invalid: 1.0,
            c_coverage: 10.0,
            max_planner_steps: 100,
            max_primitive_steps: 2000,
        }
    }
}

/// What the answerer reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    Memory,
    /// Only the current view (agents without a spatial memory).
    Observation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub controllers: ControllerConfig,
    pub reward: RewardConfig,
    pub answer_source: AnswerSource,
    #[serde(default)]
    pub view: ViewParams,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            controllers: ControllerConfig::default(),
            reward: RewardConfig::default(),
            answer_source: AnswerSource::Memory,
            view: ViewParams::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EpisodeError {
    #[error("episode already finished")]
    EpisodeFinished,
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("item references room {0:?}, got room {1:?}")]
    RoomMismatch(String, String),
    #[error("answer choice {0} out of range for a question with {1} choices")]
    BadChoice(usize, usize),
}

/// A direct-control command: one primitive action, or an answer choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveCommand {
    Act(LowLevelAction),
    Answer(usize),
}

impl PrimitiveCommand {
    /// Indices below this are primitives; `ANSWER_BASE + k` answers choice `k`.
    pub const ANSWER_BASE: usize = 7;

    pub fn index(self) -> usize {
        match self {
            PrimitiveCommand::Act(a) => a.index(),
            PrimitiveCommand::Answer(k) => Self::ANSWER_BASE + k,
        }
    }

    pub fn from_index(i: usize) -> Self {
        match LowLevelAction::from_index(i) {
            Some(a) => PrimitiveCommand::Act(a),
            None => PrimitiveCommand::Answer(i - Self::ANSWER_BASE),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerStepRecord {
    pub step: usize,
    pub action: usize,
    pub valid: bool,
    pub reward: f64,
    pub coverage: f32,
    /// Agent state after the command.
    pub agent: AgentState,
    /// Primitive trace length after the command.
    pub primitive_end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nav: Option<NavOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<ActionOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub forced_end: bool,
    /// `action` is a [`PrimitiveCommand`] index rather than a planner command.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub direct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub reward: f64,
    pub done: bool,
    pub was_valid: bool,
    /// Set when the command answered (or the episode was cut off).
    pub answer_outcome: Option<bool>,
    pub nav: Option<NavReport>,
}

/// Ground-truth executability of every planner command.
pub fn valid_planner_actions(world: &World, _mem: &SpatialMemory) -> [bool; NUM_ACTIONS] {
    let scene = &world.scene;
    let agent = world.agent;
    let low = world.valid_low_level();
    let mut mask = [false; NUM_ACTIONS];
    for (i, m) in mask.iter_mut().enumerate() {
        *m = match PlannerAction::from_index(i).expect("index in range") {
            PlannerAction::Navigate(g) => {
                let c = agent.pose().to_world(g.forward, g.lateral);
                scene.is_free(c) && c != agent.cell
            }
            PlannerAction::Scan(ScanDirection::Up) => agent.pitch.raised().is_some(),
            PlannerAction::Scan(ScanDirection::Down) => agent.pitch.lowered().is_some(),
            PlannerAction::Scan(_) => true,
            PlannerAction::Manipulate(crate::controllers::Manipulation::Open) => low[5],
            PlannerAction::Manipulate(crate::controllers::Manipulation::Close) => low[6],
            PlannerAction::Answer => true,
        };
    }
    mask
}

/// One question-answering episode driven by planner commands.
#[derive(Clone, Debug)]
pub struct Episode {
    pub item_id: String,
    pub question: Question,
    pub truth: usize,
    pub cfg: EpisodeConfig,
    pub emb: Embodiment,
    pub start: AgentState,
    pub steps: Vec<PlannerStepRecord>,
    pub seed: u64,
    invalid: usize,
    total_reward: f64,
    done: bool,
    answer_given: Option<usize>,
    forced_end: bool,
    last_action: Option<usize>,
    last_valid: bool,
}

impl Episode {
    pub fn new(
        room: &RoomSpec,
        item: &DatasetItem,
        cfg: &EpisodeConfig,
        seed: u64,
    ) -> Result<Self, EpisodeError> {
        if item.config.room_id != room.room_id {
            return Err(EpisodeError::RoomMismatch(
                item.config.room_id.clone(),
                room.room_id.clone(),
            ));
        }
        let scene = load_scene_with(room, &item.config, cfg.view)?;
        let truth = answer_of_scene(&scene, &item.question);
        let mut ccfg = cfg.controllers.clone();
        ccfg.max_primitive_steps = cfg.reward.max_primitive_steps;
        let start = item.config.start;
        Ok(Episode {
            item_id: item.item_id.clone(),
            question: item.question,
            truth,
            cfg: cfg.clone(),
            emb: Embodiment::new(scene, start, ccfg, seed),
            start,
            steps: Vec::new(),
            seed,
            invalid: 0,
            total_reward: 0.0,
            done: false,
            answer_given: None,
            forced_end: false,
            last_action: None,
            last_valid: true,
        })
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn planner_steps(&self) -> usize {
        self.steps.len()
    }

    /// Primitive actions taken, counting the final answer as one.
    pub fn primitive_steps(&self) -> usize {
        self.emb.primitive_steps() + usize::from(self.answer_given.is_some())
    }

    pub fn invalid_count(&self) -> usize {
        self.invalid
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    pub fn answer_given(&self) -> Option<usize> {
        self.answer_given
    }

    pub fn correct(&self) -> bool {
        self.answer_given == Some(self.truth)
    }

    pub fn forced_end(&self) -> bool {
        self.forced_end
    }

    pub fn last_action(&self) -> Option<usize> {
        self.last_action
    }

    pub fn last_valid(&self) -> bool {
        self.last_valid
    }

    pub fn coverage(&self) -> f32 {
        coverage_fraction(&self.emb.memory)
    }

    pub fn valid_actions(&self) -> [bool; NUM_ACTIONS] {
        valid_planner_actions(&self.emb.world, &self.emb.memory)
    }

    pub fn step_fraction(&self) -> f32 {
        self.steps.len() as f32 / self.cfg.reward.max_planner_steps.max(1) as f32
    }

    /// The answer the answerer would give right now.
    pub fn current_answer(&self) -> usize {
        let acfg = &self.cfg.controllers.answer;
        let dist = match self.cfg.answer_source {
            AnswerSource::Memory => answer(&self.emb.memory, &self.question, acfg),
            AnswerSource::Observation => answer_from_observation(
                &self.emb.last_detections,
                self.emb.memory.height(),
                self.emb.memory.width(),
                &self.question,
                acfg,
            ),
        };
        dist.choice()
    }

    pub fn step_planner(&mut self, action: PlannerAction) -> Result<StepInfo, EpisodeError> {
        if self.done {
            return Err(EpisodeError::EpisodeFinished);
        }
        let rc = self.cfg.reward;
        let valid = self.valid_actions()[action.index()];
        let cov0 = self.coverage();
        let mut nav = None;
        let mut outcome = None;
        let mut answered = None;
        let mut capped = false;
        let nav_cfg = self.cfg.controllers.navigator;
        let result: Result<(), PrimitiveCap> = (|| {
            match action {
                PlannerAction::Navigate(g) => nav = Some(navigate(&mut self.emb, g, &nav_cfg)?),
                PlannerAction::Scan(d) => outcome = Some(scan(&mut self.emb, d)?),
                PlannerAction::Manipulate(m) => outcome = Some(manipulate(&mut self.emb, m)?),
                PlannerAction::Answer => answered = Some(self.current_answer()),
            }
            Ok(())
        })();
        if result.is_err() || self.emb.cap_reached() {
            capped = true;
        }
        let capped = capped || self.steps.len() + 1 >= rc.max_planner_steps;
        Ok(self.settle(
            action.index(),
            false,
            valid,
            cov0,
            answered,
            capped,
            nav,
            outcome,
        ))
    }

    /// Execute one direct-control command (human or external client).
    /// Only the primitive cap ends these episodes early.
    pub fn step_primitive(&mut self, cmd: PrimitiveCommand) -> Result<StepInfo, EpisodeError> {
        if self.done {
            return Err(EpisodeError::EpisodeFinished);
        }
        let cov0 = self.coverage();
        match cmd {
            PrimitiveCommand::Answer(k) => {
                let n = self.question.qtype.num_choices();
                if k >= n {
                    return Err(EpisodeError::BadChoice(k, n));
                }
                Ok(self.settle(cmd.index(), true, true, cov0, Some(k), false, None, None))
            }
            PrimitiveCommand::Act(a) => {
                let valid = self.emb.world.valid_low_level()[a.index()];
                let outcome = self.emb.act(a, Phase::Direct).ok();
                let capped = outcome.is_none() || self.emb.cap_reached();
                Ok(self.settle(cmd.index(), true, valid, cov0, None, capped, None, outcome))
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn settle(
        &mut self,
        action: usize,
        direct: bool,
        valid: bool,
        cov0: f32,
        answered: Option<usize>,
        capped: bool,
        nav: Option<NavReport>,
        outcome: Option<ActionOutcome>,
    ) -> StepInfo {
        let rc = self.cfg.reward;
        let cov1 = self.coverage();
        let mut reward = -rc.c_time + rc.c_coverage * (cov1 - cov0) as f64;
        if !valid {
            reward -= rc.c_invalid;
            self.invalid += 1;
        }
        let mut answer_outcome = None;
        if let Some(a) = answered {
            let correct = a == self.truth;
            reward += if correct { rc.r_answer } else { -rc.r_answer };
            self.answer_given = Some(a);
            answer_outcome = Some(correct);
            self.done = true;
        } else if capped {
            reward -= rc.r_answer;
            answer_outcome = Some(false);
            self.forced_end = true;
            self.done = true;
        }
        self.total_reward += reward;
        self.last_action = Some(action);
        self.last_valid = valid;
        self.steps.push(PlannerStepRecord {
            step: self.steps.len(),
            action,
            valid,
            reward,
            coverage: cov1,
            agent: self.emb.agent(),
            primitive_end: self.emb.primitive_steps(),
            nav: nav.as_ref().map(|n| n.outcome),
            outcome,
            answer: answered,
            forced_end: self.forced_end,
            direct,
        });
        StepInfo {
            reward,
            done: self.done,
            was_valid: valid,
            answer_outcome,
            nav,
        }
    }
}
