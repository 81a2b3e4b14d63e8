use std::fmt;

use serde::{Deserialize, Serialize};

use crate::controllers::{Manipulation, NavigationGoal, ScanDirection};

/// High-level command. Canonical index order: 25 navigation goals
/// (row-major by forward, lateral), scan up/down/left/right, open, close,
/// answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerAction {
    Navigate(NavigationGoal),
    Scan(ScanDirection),
    Manipulate(Manipulation),
    Answer,
}

pub const NUM_ACTIONS: usize = 32;
pub const SCAN_BASE: usize = 25;
pub const OPEN_INDEX: usize = 29;
pub const CLOSE_INDEX: usize = 30;
pub const ANSWER_INDEX: usize = 31;

impl PlannerAction {
    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0..=24 => NavigationGoal::from_index(i).map(PlannerAction::Navigate),
            25..=28 => Some(PlannerAction::Scan(ScanDirection::ALL[i - SCAN_BASE])),
            OPEN_INDEX => Some(PlannerAction::Manipulate(Manipulation::Open)),
            CLOSE_INDEX => Some(PlannerAction::Manipulate(Manipulation::Close)),
            ANSWER_INDEX => Some(PlannerAction::Answer),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            PlannerAction::Navigate(g) => g.index(),
            PlannerAction::Scan(d) => SCAN_BASE + d as usize,
            PlannerAction::Manipulate(Manipulation::Open) => OPEN_INDEX,
            PlannerAction::Manipulate(Manipulation::Close) => CLOSE_INDEX,
            PlannerAction::Answer => ANSWER_INDEX,
        }
    }

    pub fn all() -> impl Iterator<Item = PlannerAction> {
        (0..NUM_ACTIONS).filter_map(Self::from_index)
    }

    pub fn navigate(forward: i32, lateral: i32) -> Self {
        PlannerAction::Navigate(NavigationGoal { forward, lateral })
    }
}

impl fmt::Display for PlannerAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlannerAction::Navigate(g) => write!(f, "navigate({},{})", g.forward, g.lateral),
            PlannerAction::Scan(d) => write!(f, "scan_{}", format!("{d:?}").to_lowercase()),
            PlannerAction::Manipulate(Manipulation::Open) => f.write_str("open"),
            PlannerAction::Manipulate(Manipulation::Close) => f.write_str("close"),
            PlannerAction::Answer => f.write_str("answer"),
        }
    }
}
