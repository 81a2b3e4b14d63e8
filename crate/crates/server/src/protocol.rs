//! Wire messages. Every request is one JSON object with a `type` field and
//! gets exactly one JSON object back. Unknown fields are ignored.

use serde::{Deserialize, Serialize};

use gridqa_core::classes::ObjectClass;
use gridqa_core::controllers::PrimitiveRecord;
use gridqa_core::harness::EpisodeRecord;
use gridqa_core::planner::PlannerStepRecord;
use gridqa_core::questions::QuestionType;
use gridqa_core::world::{AgentState, SeenReceptacle};

/// Granularity of the commands a session accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    /// The 32 planner commands, in planner index order.
    Planner,
    /// The 7 low-level actions, then one index per answer choice.
    Primitive,
}

/// Who is driving a session; completed records carry this as `agent`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentTag {
    Human,
    #[default]
    External,
}

impl AgentTag {
    pub fn name(self) -> &'static str {
        match self {
            AgentTag::Human => "human",
            AgentTag::External => "external",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Reset {
        item_id: String,
        control: Control,
        #[serde(default)]
        agent: AgentTag,
        /// Episode seed; defaults to the harness seed of the item's first repeat.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Step {
        /// Index into the session's action list. Kept loose so that a
        /// non-integer is reported as a bad action rather than a bad request.
        action: serde_json::Value,
    },
    GetReplay {
        log_id: String,
        #[serde(default)]
        from: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    BadAction,
    NoEpisode,
    EpisodeFinished,
    UnknownItem,
    UnknownLog,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    State(StateView),
    Result(Box<ResultView>),
    Replay(ReplayChunk),
    Error { code: ErrorCode, message: String },
}

impl Response {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Response::Error {
            code,
            message: message.into(),
        }
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        match self {
            Response::Error { code, .. } => Some(*code),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    pub text: String,
    pub qtype: QuestionType,
    pub choices: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepCounters {
    pub planner_steps: usize,
    pub primitive_steps: usize,
    pub invalid: usize,
    pub total_reward: f64,
    pub coverage: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewCell {
    pub x: i32,
    pub y: i32,
    pub free: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewObject {
    pub class: ObjectClass,
    pub x: i32,
    pub y: i32,
}

/// What the agent's detector reported from the current pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgocentricView {
    pub pose: AgentState,
    pub cells: Vec<ViewCell>,
    pub receptacles: Vec<SeenReceptacle>,
    pub objects: Vec<ViewObject>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefObject {
    pub class: ObjectClass,
    pub x: i32,
    pub y: i32,
    pub belief: f32,
}

/// Top-down map restricted to cells the agent has covered. Row `y` is
/// `rows[y]`; `~` is unseen, `.` free, `#` blocked, `?` seen but undecided.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopDownMap {
    pub width: usize,
    pub height: usize,
    pub rows: Vec<String>,
    pub agent: AgentState,
    pub receptacles: Vec<SeenReceptacle>,
    /// Memory cells whose object belief exceeds the answer threshold.
    pub objects: Vec<BeliefObject>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    /// Session handle in one-request-per-call mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    pub control: Control,
    pub item_id: String,
    pub question: QuestionView,
    pub egocentric_view: EgocentricView,
    pub topdown_map: TopDownMap,
    pub last_reward: f64,
    /// Whether the last command was executable.
    pub last_valid: bool,
    pub done: bool,
    pub action_names: Vec<String>,
    pub valid_actions: Vec<bool>,
    pub step_counters: StepCounters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultMetrics {
    pub answer: Option<usize>,
    pub truth: usize,
    pub planner_steps: usize,
    pub primitive_steps: usize,
    pub invalid: usize,
    pub total_reward: f64,
    pub forced_end: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultView {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    pub correct: bool,
    pub metrics: ResultMetrics,
    pub record: EpisodeRecord,
    /// Handle for `get_replay` when the server keeps logs.
    pub log_id: Option<String>,
    pub state: StateView,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub step: PlannerStepRecord,
    pub primitives: Vec<PrimitiveRecord>,
}

/// A window of a logged episode; clients page through with `from`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayChunk {
    pub log_id: String,
    pub start: AgentState,
    pub record: EpisodeRecord,
    pub from: usize,
    pub total: usize,
    pub steps: Vec<ReplayStep>,
}

impl ReplayChunk {
    pub fn next(&self) -> Option<usize> {
        let end = self.from + self.steps.len();
        (end < self.total).then_some(end)
    }
}
