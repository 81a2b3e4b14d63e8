use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::geom::Cell;

/// Free-space probabilities, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub width: i32,
    pub height: i32,
    pub free: Vec<f32>,
}

impl OccupancyGrid {
    pub fn new(width: i32, height: i32, free: Vec<f32>) -> Self {
        assert_eq!(free.len(), (width * height) as usize);
        OccupancyGrid {
            width,
            height,
            free,
        }
    }

    pub fn from_mask(width: i32, height: i32, mask: &[bool]) -> Self {
        let free = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        Self::new(width, height, free)
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn index(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }

    pub fn prob(&self, c: Cell) -> f32 {
        if self.in_bounds(c) {
            self.free[self.index(c)]
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathCosts {
    /// Free probability at or above which a cell may be entered.
    pub threshold: f32,
    pub known_free: u32,
    pub unknown: u32,
}

impl Default for PathCosts {
    fn default() -> Self {
        PathCosts {
            threshold: 0.5,
            known_free: 1,
            unknown: 2,
        }
    }
}

impl PathCosts {
    /// Cost of entering `c`, or `None` if it is not traversable.
    pub fn step_cost(&self, grid: &OccupancyGrid, c: Cell) -> Option<u32> {
        let p = grid.prob(c);
        if !grid.in_bounds(c) || p < self.threshold {
            None
        } else if p > self.threshold {
            Some(self.known_free)
        } else {
            Some(self.unknown)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    /// Start to goal inclusive.
    pub cells: Vec<Cell>,
    pub cost: u32,
}

/// Minimum-cost 4-connected path. The start cell is always enterable.
pub fn astar(grid: &OccupancyGrid, start: Cell, goal: Cell, costs: &PathCosts) -> Option<Path> {
    if !grid.in_bounds(start) || !grid.in_bounds(goal) {
        return None;
    }
    if start == goal {
        return Some(Path {
            cells: vec![start],
            cost: 0,
        });
    }
    costs.step_cost(grid, goal)?;
    let min_step = costs.known_free.min(costs.unknown);
    let h = |c: Cell| c.manhattan(goal) as u32 * min_step;
    let n = (grid.width * grid.height) as usize;
    let mut g = vec![u32::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    // (f, h, insertion order) keeps expansion order deterministic
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    g[grid.index(start)] = 0;
    open.push(Reverse((h(start), h(start), seq, start.x, start.y)));
    while let Some(Reverse((_, _, _, x, y))) = open.pop() {
        let c = Cell::new(x, y);
        let ci = grid.index(c);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        if c == goal {
            let mut cells = vec![c];
            let mut i = ci;
            while parent[i] != usize::MAX {
                i = parent[i];
                let w = grid.width as usize;
                cells.push(Cell::new((i % w) as i32, (i / w) as i32));
            }
            cells.reverse();
            return Some(Path { cells, cost: g[ci] });
        }
        for nb in c.neighbors4() {
            let Some(step) = costs.step_cost(grid, nb) else {
                continue;
            };
            let ni = grid.index(nb);
            if closed[ni] {
                continue;
            }
            let cand = g[ci] + step;
            if cand < g[ni] {
                g[ni] = cand;
                parent[ni] = ci;
                seq += 1;
                open.push(Reverse((cand + h(nb), h(nb), seq, nb.x, nb.y)));
            }
        }
    }
    None
}

/// Cost-to-reach from `start` for every cell (`u32::MAX` if unreachable).
pub fn distance_map(grid: &OccupancyGrid, start: Cell, costs: &PathCosts) -> Vec<u32> {
    let n = (grid.width * grid.height) as usize;
    let mut dist = vec![u32::MAX; n];
    if !grid.in_bounds(start) {
        return dist;
    }
    let mut heap = BinaryHeap::new();
    dist[grid.index(start)] = 0;
    heap.push(Reverse((0u32, start.x, start.y)));
    while let Some(Reverse((d, x, y))) = heap.pop() {
        let c = Cell::new(x, y);
        if d > dist[grid.index(c)] {
            continue;
        }
        for nb in c.neighbors4() {
            if let Some(step) = costs.step_cost(grid, nb) {
                let ni = grid.index(nb);
                if d + step < dist[ni] {
                    dist[ni] = d + step;
                    heap.push(Reverse((d + step, nb.x, nb.y)));
                }
            }
        }
    }
    dist
}
