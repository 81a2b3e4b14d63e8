use serde::{Deserialize, Serialize};

use crate::classes::{HeightBand, ObjectClass, ReceptacleClass};
use crate::geom::{bresenham, Cell};

use super::scene::{AgentState, Scene, ViewParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibleCell {
    pub cell: Cell,
    pub is_free: bool,
    /// Every object that could sit at this cell would be reported from this
    /// view (floor at level pitch; receptacle at its band and not closed).
    pub inspected: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeenReceptacle {
    pub receptacle: usize,
    pub class: ReceptacleClass,
    pub cell: Cell,
    pub is_open: bool,
    pub height_band: HeightBand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeenObject {
    pub class: ObjectClass,
    pub cell: Cell,
    pub receptacle: Option<usize>,
}

/// Ground-truth symbolic view from one pose. Noise is applied downstream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub origin: AgentState,
    pub visible_cells: Vec<VisibleCell>,
    pub visible_receptacles: Vec<SeenReceptacle>,
    pub visible_objects: Vec<SeenObject>,
}

impl Observation {
    pub fn sees(&self, c: Cell) -> bool {
        self.visible_cells.iter().any(|v| v.cell == c)
    }
}

/// Line of sight from `from` to `to`: no opaque cell strictly between them.
pub fn line_of_sight(scene: &Scene, from: Cell, to: Cell) -> bool {
    let line = bresenham(from, to);
    if line.len() <= 2 {
        return true;
    }
    line[1..line.len() - 1].iter().all(|&c| !scene.is_opaque(c))
}

/// Frustum and pitch-window test, without occlusion.
pub fn in_view_cone(scene: &Scene, agent: &AgentState, c: Cell) -> bool {
    in_view_window(&scene.params, agent, c)
}

/// [`in_view_cone`] for bare view parameters.
pub fn in_view_window(params: &ViewParams, agent: &AgentState, c: Cell) -> bool {
    let (f, l) = agent.pose().to_ego(c);
    let in_frustum = (f == 0 && l == 0) || (f > 0 && f >= l.abs());
    if !in_frustum {
        return false;
    }
    let d2 = f * f + l * l;
    let (lo, hi) = params.window(agent.pitch);
    let hi = hi.min(params.view_range);
    d2 >= lo * lo && d2 <= hi * hi
}

pub fn cell_visible(scene: &Scene, agent: &AgentState, c: Cell) -> bool {
    scene.in_bounds(c) && in_view_cone(scene, agent, c) && line_of_sight(scene, agent.cell, c)
}

/// All visible cells, in row-major order.
pub fn visible_cells(scene: &Scene, agent: &AgentState) -> Vec<Cell> {
    let r = scene.params.view_range;
    let a = agent.cell;
    let mut out = Vec::new();
    for y in (a.y - r).max(0)..=(a.y + r).min(scene.height - 1) {
        for x in (a.x - r).max(0)..=(a.x + r).min(scene.width - 1) {
            let c = Cell::new(x, y);
            if cell_visible(scene, agent, c) {
                out.push(c);
            }
        }
    }
    out
}

pub fn observe(scene: &Scene, agent: &AgentState) -> Observation {
    let mut obs = Observation {
        origin: *agent,
        visible_cells: Vec::new(),
        visible_receptacles: Vec::new(),
        visible_objects: Vec::new(),
    };
    let level = agent.pitch == crate::geom::Pitch::Level;
    for c in visible_cells(scene, agent) {
        let is_free = scene.is_free(c);
        let mut inspected = !is_free || level;
        if let Some(ri) = scene.receptacle_at(c) {
            let r = &scene.receptacles[ri];
            let band_ok = r.height_band.pitch() == agent.pitch;
            inspected = band_ok && (!r.openable || r.is_open);
            obs.visible_receptacles.push(SeenReceptacle {
                receptacle: ri,
                class: r.class,
                cell: c,
                is_open: r.is_open,
                height_band: r.height_band,
            });
            if band_ok {
                let inside = r.contents.iter().filter(|_| r.is_open);
                for o in r.surface.iter().chain(inside) {
                    obs.visible_objects.push(SeenObject {
                        class: o.class,
                        cell: c,
                        receptacle: Some(ri),
                    });
                }
            }
        } else if is_free && level {
            for o in scene.floor_objects_at(c) {
                obs.visible_objects.push(SeenObject {
                    class: o.class,
                    cell: c,
                    receptacle: None,
                });
            }
        }
        obs.visible_cells.push(VisibleCell {
            cell: c,
            is_free,
            inspected,
        });
    }
    obs
}
