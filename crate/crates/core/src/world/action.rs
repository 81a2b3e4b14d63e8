use std::fmt;

use serde::{Deserialize, Serialize};

use super::observe::cell_visible;
use super::scene::{AgentState, Scene};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowLevelAction {
    MoveAhead,
    RotateLeft,
    RotateRight,
    LookUp,
    LookDown,
    Open,
    Close,
}

impl LowLevelAction {
    pub const ALL: [LowLevelAction; 7] = [
        LowLevelAction::MoveAhead,
        LowLevelAction::RotateLeft,
        LowLevelAction::RotateRight,
        LowLevelAction::LookUp,
        LowLevelAction::LookDown,
        LowLevelAction::Open,
        LowLevelAction::Close,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LowLevelAction::MoveAhead => "move_ahead",
            LowLevelAction::RotateLeft => "rotate_left",
            LowLevelAction::RotateRight => "rotate_right",
            LowLevelAction::LookUp => "look_up",
            LowLevelAction::LookDown => "look_down",
            LowLevelAction::Open => "open",
            LowLevelAction::Close => "close",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    Blocked,
    PitchLimit,
    OutOfRange,
    NotInView,
    AlreadyOpen,
    AlreadyClosed,
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InvalidReason::Blocked => "blocked",
            InvalidReason::PitchLimit => "pitch_limit",
            InvalidReason::OutOfRange => "out_of_range",
            InvalidReason::NotInView => "not_in_view",
            InvalidReason::AlreadyOpen => "already_open",
            InvalidReason::AlreadyClosed => "already_closed",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionOutcome {
    Success,
    Invalid(InvalidReason),
}

impl ActionOutcome {
    pub fn is_success(self) -> bool {
        self == ActionOutcome::Success
    }
}

/// Picks the receptacle an Open (`want_open = true`) or Close would act on.
///
/// Candidates are openable, within interaction range and visible; among
/// those in the right state the one closest to the view axis wins, then the
/// nearer one, then the lower cell index.
pub fn interaction_target(
    scene: &Scene,
    agent: &AgentState,
    want_open: bool,
) -> Result<usize, InvalidReason> {
    let reach2 = scene.params.interaction_range * scene.params.interaction_range;
    let pose = agent.pose();
    let mut any_in_range = false;
    let mut any_visible = false;
    // (|lateral|, forward, dist2, cell index, receptacle)
    let mut best: Option<(i32, i32, i32, usize, usize)> = None;
    for (i, r) in scene.receptacles.iter().enumerate() {
        if !r.openable || r.cell.dist2(agent.cell) > reach2 {
            continue;
        }
        any_in_range = true;
        if !cell_visible(scene, agent, r.cell) {
            continue;
        }
        any_visible = true;
        if r.is_open == want_open {
            continue;
        }
        let (f, l) = pose.to_ego(r.cell);
        let key = (l.abs(), f, r.cell.dist2(agent.cell), scene.index(r.cell), i);
        best = match best {
            None => Some(key),
            Some(b) => {
                // compare angles atan(|l|/f) by cross multiplication
                let lhs = key.0 as i64 * b.1 as i64;
                let rhs = b.0 as i64 * key.1 as i64;
                let better = lhs < rhs || (lhs == rhs && (key.2, key.3) < (b.2, b.3));
                Some(if better { key } else { b })
            }
        };
    }
    match best {
        Some(b) => Ok(b.4),
        None if !any_in_range => Err(InvalidReason::OutOfRange),
        None if !any_visible => Err(InvalidReason::NotInView),
        None if want_open => Err(InvalidReason::AlreadyOpen),
        None => Err(InvalidReason::AlreadyClosed),
    }
}

/// Scene plus agent; the unit a low-level action acts on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub scene: Scene,
    pub agent: AgentState,
}

impl World {
    pub fn new(scene: Scene, agent: AgentState) -> Self {
        World { scene, agent }
    }

    pub fn apply(&mut self, a: LowLevelAction) -> ActionOutcome {
        let (agent, outcome) = apply_action(&mut self.scene, self.agent, a);
        self.agent = agent;
        outcome
    }

    pub fn valid_low_level(&self) -> [bool; 7] {
        valid_low_level(&self.scene, &self.agent)
    }
}

pub fn apply_action(
    scene: &mut Scene,
    agent: AgentState,
    a: LowLevelAction,
) -> (AgentState, ActionOutcome) {
    use ActionOutcome::*;
    let mut next = agent;
    let outcome = match a {
        LowLevelAction::MoveAhead => {
            let (dx, dy) = agent.heading.delta();
            let target = agent.cell.offset(dx, dy);
            if scene.is_free(target) {
                next.cell = target;
                Success
            } else {
                Invalid(InvalidReason::Blocked)
            }
        }
        LowLevelAction::RotateLeft => {
            next.heading = agent.heading.left();
            Success
        }
        LowLevelAction::RotateRight => {
            next.heading = agent.heading.right();
            Success
        }
        LowLevelAction::LookUp => match agent.pitch.raised() {
            Some(p) => {
                next.pitch = p;
                Success
            }
            None => Invalid(InvalidReason::PitchLimit),
        },
        LowLevelAction::LookDown => match agent.pitch.lowered() {
            Some(p) => {
                next.pitch = p;
                Success
            }
            None => Invalid(InvalidReason::PitchLimit),
        },
        LowLevelAction::Open | LowLevelAction::Close => {
            let want_open = a == LowLevelAction::Open;
            match interaction_target(scene, &agent, want_open) {
                Ok(i) => {
                    scene.receptacles[i].is_open = want_open;
                    Success
                }
                Err(r) => Invalid(r),
            }
        }
    };
    (next, outcome)
}

/// `mask[a]` is true iff `apply_action` would succeed. Pure.
pub fn valid_low_level(scene: &Scene, agent: &AgentState) -> [bool; 7] {
    let (dx, dy) = agent.heading.delta();
    [
        scene.is_free(agent.cell.offset(dx, dy)),
        true,
        true,
        agent.pitch.raised().is_some(),
        agent.pitch.lowered().is_some(),
        interaction_target(scene, agent, true).is_ok(),
        interaction_target(scene, agent, false).is_ok(),
    ]
}
