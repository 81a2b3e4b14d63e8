use serde::{Deserialize, Serialize};

use crate::geom::{Cell, Heading};
use crate::memory::{mark_navigation_intent, SpatialMemory, FREE};
use crate::world::LowLevelAction;

use super::astar::{astar, OccupancyGrid, PathCosts};
use super::{Embodiment, Phase, PrimitiveCap};

/// Goal cell relative to the agent: `forward` in 1..=5, `lateral` in -2..=2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NavigationGoal {
    pub forward: i32,
    pub lateral: i32,
}

impl NavigationGoal {
    pub const COUNT: usize = 25;

    /// Row-major by (forward, lateral).
    pub fn from_index(i: usize) -> Option<Self> {
        (i < Self::COUNT).then(|| NavigationGoal {
            forward: (i / 5) as i32 + 1,
            lateral: (i % 5) as i32 - 2,
        })
    }

    pub fn index(self) -> usize {
        ((self.forward - 1) * 5 + self.lateral + 2) as usize
    }

    pub fn all() -> impl Iterator<Item = NavigationGoal> {
        (0..Self::COUNT).filter_map(Self::from_index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavMode {
    /// Plan on the memory's free-space channel.
    Memory,
    /// Plan on ground-truth occupancy.
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavigatorConfig {
    pub mode: NavMode,
    pub costs: PathCosts,
    /// Primitive steps allowed per navigation command.
    pub budget: usize,
    /// Panorama after this many moves; 0 disables.
    pub scan_every: usize,
    pub panorama_on_arrival: bool,
}

impl Default for NavigatorConfig {
    fn default() -> Self {
        NavigatorConfig {
            mode: NavMode::Memory,
            costs: PathCosts::default(),
            budget: 64,
            scan_every: 8,
            panorama_on_arrival: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavOutcome {
    Arrived,
    TerminatedUnreachable,
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavReport {
    pub outcome: NavOutcome,
    pub goal_cell: Cell,
    pub steps: usize,
}

fn occupancy(emb: &Embodiment, mode: NavMode) -> OccupancyGrid {
    let scene = emb.scene();
    match mode {
        NavMode::Oracle => OccupancyGrid::from_mask(scene.width, scene.height, &scene.free_mask()),
        NavMode::Memory => memory_occupancy(&emb.memory),
    }
}

/// The memory's free-space channel as an occupancy grid.
pub fn memory_occupancy(mem: &SpatialMemory) -> OccupancyGrid {
    let free = mem.cells().map(|c| mem.get(c, FREE)).collect();
    OccupancyGrid::new(mem.width() as i32, mem.height() as i32, free)
}

/// Four left turns, sensing after each; ends at the starting heading.
pub fn panorama(emb: &mut Embodiment, phase: Phase) -> Result<usize, PrimitiveCap> {
    for _ in 0..4 {
        emb.act(LowLevelAction::RotateLeft, phase)?;
    }
    Ok(4)
}

fn turn_toward(from: Heading, to: Heading) -> LowLevelAction {
    if from.left() == to {
        LowLevelAction::RotateLeft
    } else {
        LowLevelAction::RotateRight
    }
}

/// Walk to the goal cell, replanning after every primitive step.
pub fn navigate(
    emb: &mut Embodiment,
    goal: NavigationGoal,
    cfg: &NavigatorConfig,
) -> Result<NavReport, PrimitiveCap> {
    let start = emb.agent();
    let target = start.pose().to_world(goal.forward, goal.lateral);
    let report = |outcome, steps| NavReport {
        outcome,
        goal_cell: target,
        steps,
    };
    if !emb.scene().in_bounds(target) {
        return Ok(report(NavOutcome::TerminatedUnreachable, 0));
    }
    mark_navigation_intent(&mut emb.memory, target);
    let mut used = 0;
    let mut moves = 0;
    loop {
        let agent = emb.agent();
        if agent.cell == target {
            if cfg.panorama_on_arrival {
                used += panorama(emb, Phase::Navigator)?;
            }
            return Ok(report(NavOutcome::Arrived, used));
        }
        if used >= cfg.budget {
            return Ok(report(NavOutcome::BudgetExhausted, used));
        }
        let grid = occupancy(emb, cfg.mode);
        let Some(path) = astar(&grid, agent.cell, target, &cfg.costs) else {
            return Ok(report(NavOutcome::TerminatedUnreachable, used));
        };
        let next = path.cells[1];
        let desired = Heading::from_delta(next.x - agent.cell.x, next.y - agent.cell.y)
            .expect("astar paths are 4-connected");
        if agent.heading != desired {
            emb.act(turn_toward(agent.heading, desired), Phase::Navigator)?;
            used += 1;
            continue;
        }
        emb.act(LowLevelAction::MoveAhead, Phase::Navigator)?;
        used += 1;
        moves += 1;
        if cfg.scan_every > 0 && moves % cfg.scan_every == 0 && emb.agent().cell != target {
            used += panorama(emb, Phase::Navigator)?;
        }
    }
}
