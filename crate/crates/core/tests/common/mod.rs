//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::collections::HashSet;

use gridqa_core::geom::{Cell, Heading, Pitch, Pose};
use gridqa_core::memory::SpatialMemory;
use gridqa_core::questions::{
    constraints_for, generate_configuration, question_pool, QuestionType,
};
use gridqa_core::rooms::{generate_room, RoomGenParams};
use gridqa_core::world::{load_scene, AgentState, RoomSpec, Scene, SceneConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A validated room, a random configuration in it, and the loaded scene
/// with openable receptacles randomly opened.
pub fn random_scene(rng: &mut ChaCha8Rng) -> (RoomSpec, SceneConfig, Scene) {
    let params = if rng.random_bool(0.5) {
        RoomGenParams::kitchen()
    } else {
        RoomGenParams::small()
    };
    let room = generate_room(
        &format!("fz_{}", rng.random::<u16>()),
        &params,
        rng.random(),
    );
    let qtype = [
        QuestionType::Existence,
        QuestionType::Counting,
        QuestionType::SpatialRelationship,
    ][rng.random_range(0..3)];
    let pool = question_pool(&room, qtype);
    let q = *pool.choose(rng).unwrap();
    let answer = rng.random_range(0..q.choices().len());
    let constraints = constraints_for(&room, &q, answer, rng);
    let config = generate_configuration(&room, &constraints, rng).unwrap();
    let mut scene = load_scene(&room, &config).unwrap();
    for r in scene.receptacles.iter_mut() {
        if r.openable {
            r.is_open = rng.random_bool(0.5);
        }
    }
    (room, config, scene)
}

pub fn random_pose(scene: &Scene, rng: &mut ChaCha8Rng) -> AgentState {
    let free = scene.free_cells();
    AgentState::new(
        *free.choose(rng).unwrap(),
        Heading::ALL[rng.random_range(0..4)],
        Pitch::ALL[rng.random_range(0..3)],
    )
}

pub fn cell_in(scene: &Scene, rng: &mut ChaCha8Rng) -> Cell {
    Cell::new(
        rng.random_range(0..scene.width),
        rng.random_range(0..scene.height),
    )
}

/// Shortest 4-connected path cost by plain O(n^2) Dijkstra: entering a cell
/// costs 1 if its free probability is above 0.5, 2 if exactly 0.5, and is
/// forbidden below. `None` if unreachable.
pub fn dijkstra_cost(
    width: i32,
    height: i32,
    free: &[f32],
    start: Cell,
    goal: Cell,
) -> Option<u32> {
    let n = (width * height) as usize;
    let idx = |c: Cell| (c.y * width + c.x) as usize;
    let enter = |c: Cell| -> Option<u32> {
        if c.x < 0 || c.y < 0 || c.x >= width || c.y >= height {
            return None;
        }
        let p = free[idx(c)];
        if p > 0.5 {
            Some(1)
        } else if p == 0.5 {
            Some(2)
        } else {
            None
        }
    };
    let mut dist = vec![u32::MAX; n];
    let mut done = vec![false; n];
    dist[idx(start)] = 0;
    loop {
        let mut best = None;
        for i in 0..n {
            if !done[i] && dist[i] != u32::MAX && best.is_none_or(|b: usize| dist[i] < dist[b]) {
                best = Some(i);
            }
        }
        let i = best?;
        let c = Cell::new(i as i32 % width, i as i32 / width);
        if c == goal {
            return Some(dist[i]);
        }
        done[i] = true;
        for (dx, dy) in [(0, -1), (1, 0), (0, 1), (-1, 0)] {
            let nb = Cell::new(c.x + dx, c.y + dy);
            if let Some(w) = enter(nb) {
                let j = idx(nb);
                dist[j] = dist[j].min(dist[i] + w);
            }
        }
    }
}

/// Answer index computed straight from the placements.
pub fn placement_answer(
    room: &RoomSpec,
    config: &SceneConfig,
    q: &gridqa_core::questions::Question,
) -> usize {
    use gridqa_core::world::Location;
    let of_class: Vec<_> = config
        .placements
        .iter()
        .filter(|p| p.class == q.object)
        .collect();
    match q.qtype {
        QuestionType::Existence => usize::from(of_class.is_empty()),
        QuestionType::Counting => of_class.len().min(3),
        QuestionType::SpatialRelationship => {
            let inside = of_class.iter().any(|p| match p.location {
                Location::Inside(i) | Location::On(i) => {
                    Some(room.receptacles[i].class) == q.container
                }
                Location::Floor(_) => false,
            });
            usize::from(!inside)
        }
    }
}

/// Cells an egocentric window of `size` at `pose` can touch.
pub fn footprint(pose: Pose, size: usize) -> HashSet<Cell> {
    let (fx, fy) = pose.heading.delta();
    // right of heading (x east, y south)
    let (rx, ry) = (-fy, fx);
    let h = (size / 2) as i32;
    let mut out = HashSet::new();
    for f in 0..size as i32 {
        for l in -h..=h {
            out.insert(Cell::new(
                pose.cell.x + f * fx + l * rx,
                pose.cell.y + f * fy + l * ry,
            ));
        }
    }
    out
}

pub fn changed_cells(a: &SpatialMemory, b: &SpatialMemory) -> Vec<Cell> {
    a.cells()
        .filter(|&c| {
            a.cell_values(c)
                .iter()
                .zip(b.cell_values(c))
                .any(|(x, y)| x.to_bits() != y.to_bits())
        })
        .collect()
}
