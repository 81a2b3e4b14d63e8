//! Deterministic sweep planner: cover the floor from fresh viewpoints, then
//! visit every sighted receptacle at its height band (opening and closing
//! openable ones), then answer.

use std::collections::{BTreeMap, BTreeSet};

use crate::classes::NUM_CLASSES;
use crate::controllers::{
    astar, distance_map, memory_occupancy, Manipulation, OccupancyGrid, PathCosts, ScanDirection,
};
use crate::geom::{bresenham, Cell, Heading, Pitch};
use crate::memory::{MemoryView, COVERAGE, FREE, FREE_PRIOR};
use crate::world::{in_view_window, AgentState, ViewParams};

use super::action::PlannerAction;
use super::episode::Episode;

/// Whether `target` would be visible from `agent` given the memory's
/// current occupancy estimate (unknown cells are assumed transparent).
pub fn predicted_visible(
    mem: &MemoryView<'_>,
    params: &ViewParams,
    agent: &AgentState,
    target: Cell,
) -> bool {
    if !mem.in_bounds(target) || !in_view_window(params, agent, target) {
        return false;
    }
    let line = bresenham(agent.cell, target);
    if line.len() <= 2 {
        return true;
    }
    line[1..line.len() - 1]
        .iter()
        .all(|&c| !known_opaque(mem, c))
}

fn known_opaque(mem: &MemoryView<'_>, c: Cell) -> bool {
    if mem.free_prob(c) < 0.5 {
        return true;
    }
    (crate::classes::ObjectClass::ALL.len()..NUM_CLASSES).any(|ch| mem.get(c, ch) > 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Viewpoint {
    cell: Cell,
    heading: Option<Heading>,
    pitch: Pitch,
    receptacle: Option<usize>,
}

/// Scripted explorer state for one episode.
#[derive(Clone, Debug, Default)]
pub struct ScriptedExplorer {
    visited: BTreeSet<Cell>,
    attempts: BTreeMap<usize, u32>,
    pending_close: Option<usize>,
    /// Quarter turns made in place while looking for something to do.
    spins: BTreeMap<Cell, u8>,
}

const MAX_RECEPTACLE_ATTEMPTS: u32 = 3;

fn turn(from: Heading, to: Heading) -> ScanDirection {
    if from.left() == to {
        ScanDirection::Left
    } else {
        ScanDirection::Right
    }
}

fn turn_cost(from: Heading, to: Heading) -> u32 {
    match (from.index() as i32 - to.index() as i32).rem_euclid(4) {
        0 => 0,
        2 => 2,
        _ => 1,
    }
}

fn pitch_cost(from: Pitch, to: Pitch) -> u32 {
    (from.index() as i32 - to.index() as i32).unsigned_abs()
}

impl ScriptedExplorer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn act(&mut self, ep: &Episode) -> PlannerAction {
        let agent = ep.emb.agent();
        if self.visited.is_empty() {
            self.visited.insert(agent.cell);
        }
        if ep.planner_steps() + 1 >= ep.cfg.reward.max_planner_steps {
            return PlannerAction::Answer;
        }
        if let Some(r) = self.pending_close.take() {
            let open_here = ep
                .emb
                .last_detections
                .visible_receptacles
                .iter()
                .any(|s| s.receptacle == r && s.is_open);
            if open_here {
                return PlannerAction::Manipulate(Manipulation::Close);
            }
        }
        let mem = ep.emb.memory.view();
        let params = ep.emb.scene().params;
        let grid = memory_occupancy(mem.memory());
        let costs = ep.cfg.controllers.navigator.costs;
        let dist = distance_map(&grid, agent.cell, &costs);

        let target = self
            .floor_viewpoint(&mem, &params, &grid, &dist)
            .or_else(|| self.receptacle_viewpoint(ep, &mem, &params, &grid, &dist));
        let Some(vp) = target else {
            let spun = self.spins.entry(agent.cell).or_default();
            if *spun < 3 {
                *spun += 1;
                return PlannerAction::Scan(ScanDirection::Left);
            }
            return PlannerAction::Answer;
        };
        self.step_toward(ep, &grid, &costs, vp)
    }

    fn floor_viewpoint(
        &self,
        mem: &MemoryView<'_>,
        params: &ViewParams,
        grid: &OccupancyGrid,
        dist: &[u32],
    ) -> Option<Viewpoint> {
        let (h, w) = (mem.height() as i32, mem.width() as i32);
        let interior = |c: Cell| c.x > 0 && c.y > 0 && c.x < w - 1 && c.y < h - 1;
        // free cells not yet inspected, and interior cells never seen at all
        let targets: Vec<Cell> = mem
            .memory()
            .cells()
            .filter(|&c| {
                let free = mem.get(c, FREE);
                (free > 0.5 && mem.get(c, COVERAGE) < 1.0) || (free == FREE_PRIOR && interior(c))
            })
            .collect();
        if targets.is_empty() {
            return None;
        }
        let mut best: Option<(f64, Cell)> = None;
        for c in mem.memory().cells() {
            let d = dist[grid.index(c)];
            if d == u32::MAX || mem.get(c, FREE) <= 0.5 || self.visited.contains(&c) {
                continue;
            }
            let gain = targets
                .iter()
                .filter(|&&t| {
                    Heading::ALL.iter().any(|&h| {
                        predicted_visible(mem, params, &AgentState::new(c, h, Pitch::Level), t)
                    })
                })
                .count();
            if gain == 0 {
                continue;
            }
            let score = gain as f64 / (d as f64 + 3.0);
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, c));
            }
        }
        best.map(|(_, cell)| Viewpoint {
            cell,
            heading: None,
            pitch: Pitch::Level,
            receptacle: None,
        })
    }

    fn receptacle_viewpoint(
        &self,
        ep: &Episode,
        mem: &MemoryView<'_>,
        params: &ViewParams,
        grid: &OccupancyGrid,
        dist: &[u32],
    ) -> Option<Viewpoint> {
        let agent = ep.emb.agent();
        let reach2 = params.interaction_range * params.interaction_range;
        let mut best: Option<(u32, usize, Viewpoint)> = None;
        for (&r, seen) in &ep.emb.receptacles {
            if mem.get(seen.cell, COVERAGE) >= 1.0 {
                continue;
            }
            if self.attempts.get(&r).copied().unwrap_or(0) >= MAX_RECEPTACLE_ATTEMPTS {
                continue;
            }
            let pitch = seen.height_band.pitch();
            let needs_open = seen.class.openable() && !seen.is_open;
            for c in mem.memory().cells() {
                let d = dist[grid.index(c)];
                if d == u32::MAX || (mem.get(c, FREE) <= 0.5 && c != agent.cell) {
                    continue;
                }
                if needs_open && c.dist2(seen.cell) > reach2 {
                    continue;
                }
                for h in Heading::ALL {
                    let pose = AgentState::new(c, h, pitch);
                    if !predicted_visible(mem, params, &pose, seen.cell) {
                        continue;
                    }
                    let (_, l) = pose.pose().to_ego(seen.cell);
                    let cost = 2 * d
                        + turn_cost(if c == agent.cell { agent.heading } else { h }, h)
                        + pitch_cost(agent.pitch, pitch)
                        + 3 * l.unsigned_abs();
                    let vp = Viewpoint {
                        cell: c,
                        heading: Some(h),
                        pitch,
                        receptacle: Some(r),
                    };
                    if best.is_none_or(|(bc, br, _)| (cost, r) < (bc, br)) {
                        best = Some((cost, r, vp));
                    }
                }
            }
        }
        best.map(|(_, _, vp)| vp)
    }

    fn step_toward(
        &mut self,
        ep: &Episode,
        grid: &OccupancyGrid,
        costs: &PathCosts,
        vp: Viewpoint,
    ) -> PlannerAction {
        let agent = ep.emb.agent();
        if vp.receptacle.is_none() && agent.pitch != vp.pitch {
            return PlannerAction::Scan(if vp.pitch.index() > agent.pitch.index() {
                ScanDirection::Up
            } else {
                ScanDirection::Down
            });
        }
        if agent.cell != vp.cell {
            let (f, l) = agent.pose().to_ego(vp.cell);
            if (1..=5).contains(&f) && l.abs() <= 2 {
                self.visited.insert(vp.cell);
                return PlannerAction::navigate(f, l);
            }
            let path = astar(grid, agent.cell, vp.cell, costs);
            if let Some(path) = path {
                // farthest known-free path cell reachable by one command
                let hop = path.cells[1..]
                    .iter()
                    .rev()
                    .find(|&&c| {
                        let (f, l) = agent.pose().to_ego(c);
                        (1..=5).contains(&f) && l.abs() <= 2 && grid.prob(c) > 0.5
                    })
                    .copied();
                if let Some(c) = hop {
                    let (f, l) = agent.pose().to_ego(c);
                    self.visited.insert(c);
                    return PlannerAction::navigate(f, l);
                }
                let next = path.cells[1];
                let want = Heading::from_delta(next.x - agent.cell.x, next.y - agent.cell.y)
                    .expect("4-connected path");
                return PlannerAction::Scan(turn(agent.heading, want));
            }
            // unreachable after all; forget it
            self.visited.insert(vp.cell);
            if let Some(r) = vp.receptacle {
                *self.attempts.entry(r).or_default() += 1;
            }
            return PlannerAction::Scan(ScanDirection::Left);
        }
        if agent.pitch != vp.pitch {
            return PlannerAction::Scan(if vp.pitch.index() > agent.pitch.index() {
                ScanDirection::Up
            } else {
                ScanDirection::Down
            });
        }
        if let Some(h) = vp.heading {
            if agent.heading != h {
                return PlannerAction::Scan(turn(agent.heading, h));
            }
        }
        let Some(r) = vp.receptacle else {
            // already standing on a fresh viewpoint: look around once
            self.visited.insert(vp.cell);
            return PlannerAction::Scan(ScanDirection::Left);
        };
        *self.attempts.entry(r).or_default() += 1;
        let seen = ep.emb.receptacles[&r];
        if seen.class.openable() && !seen.is_open {
            self.pending_close = Some(r);
            return PlannerAction::Manipulate(Manipulation::Open);
        }
        PlannerAction::Scan(ScanDirection::Left)
    }
}
