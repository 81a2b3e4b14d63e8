//! Semantic spatial memory and its egocentric windowed read/write contract.
//!
//! Memory is an `H x W x (K + 3)` grid: `K` per-class detection
//! probabilities, then free-space probability, coverage and navigation
//! intent. Every update goes through [`read_window`] / [`write_window`], so a
//! single step can only change cells inside the window footprint of the pose
//! that produced it.

use serde::{Deserialize, Serialize};

use crate::classes::{channel_names, ObjectClass, NUM_CLASSES};
use crate::geom::{Cell, Pose};
use crate::world::Observation;

pub const FREE: usize = NUM_CLASSES;
pub const COVERAGE: usize = NUM_CLASSES + 1;
pub const INTENT: usize = NUM_CLASSES + 2;
pub const NUM_CHANNELS: usize = NUM_CLASSES + 3;

/// Free-space prior: unknown.
pub const FREE_PRIOR: f32 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryConfig {
    /// Moving-average rate for detections and free space, in (0, 1].
    pub alpha: f32,
    /// Readout threshold: a class is present where its probability exceeds this.
    pub tau_detect: f32,
    /// Window used for planner reads.
    pub window_size: usize,
    /// Window used when integrating one observation; must cover the view range.
    pub integration_window: usize,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            alpha: 0.5,
            tau_detect: 0.5,
            window_size: 5,
            integration_window: 25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialMemory {
    height: usize,
    width: usize,
    data: Vec<f32>,
    /// Cells counted by `coverage_fraction`; all cells when absent.
    coverage_mask: Option<Vec<bool>>,
}

/// An `s x s` egocentric patch: row = forward offset `0..s`, column =
/// lateral offset `-s/2..=s/2` (left to right).
#[derive(Clone, Debug, PartialEq)]
pub struct EgoWindow {
    pub pose: Pose,
    pub size: usize,
    pub values: Vec<f32>,
}

impl EgoWindow {
    pub fn half(&self) -> i32 {
        (self.size / 2) as i32
    }

    fn offset(&self, forward: usize, col: usize) -> usize {
        (forward * self.size + col) * NUM_CHANNELS
    }

    pub fn get(&self, forward: usize, col: usize, ch: usize) -> f32 {
        self.values[self.offset(forward, col) + ch]
    }

    pub fn set(&mut self, forward: usize, col: usize, ch: usize, v: f32) {
        let o = self.offset(forward, col) + ch;
        self.values[o] = v;
    }

    pub fn cell_values(&self, forward: usize, col: usize) -> &[f32] {
        let o = self.offset(forward, col);
        &self.values[o..o + NUM_CHANNELS]
    }

    /// Window coordinates of a world cell, if it falls inside.
    pub fn locate(&self, c: Cell) -> Option<(usize, usize)> {
        let (f, l) = self.pose.to_ego(c);
        let col = l + self.half();
        if f < 0 || f >= self.size as i32 || col < 0 || col >= self.size as i32 {
            None
        } else {
            Some((f as usize, col as usize))
        }
    }

    pub fn world_cell(&self, forward: usize, col: usize) -> Cell {
        self.pose.to_world(forward as i32, col as i32 - self.half())
    }

    /// Per-channel mean and max over the window.
    pub fn pooled(&self) -> (Vec<f32>, Vec<f32>) {
        let n = (self.size * self.size) as f32;
        let mut mean = vec![0.0; NUM_CHANNELS];
        let mut max = vec![0.0f32; NUM_CHANNELS];
        for cell in self.values.chunks_exact(NUM_CHANNELS) {
            for (ch, &v) in cell.iter().enumerate() {
                mean[ch] += v;
                max[ch] = max[ch].max(v);
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        (mean, max)
    }
}

impl SpatialMemory {
    pub fn new(height: usize, width: usize) -> Self {
        let mut data = vec![0.0; height * width * NUM_CHANNELS];
        for cell in data.chunks_exact_mut(NUM_CHANNELS) {
            cell[FREE] = FREE_PRIOR;
        }
        SpatialMemory {
            height,
            width,
            data,
            coverage_mask: None,
        }
    }

    /// Memory whose coverage fraction is measured over `mask` (row-major).
    pub fn with_coverage_mask(height: usize, width: usize, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), height * width);
        let mut m = Self::new(height, width);
        m.coverage_mask = Some(mask);
        m
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    fn offset(&self, c: Cell) -> usize {
        (c.y as usize * self.width + c.x as usize) * NUM_CHANNELS
    }

    pub fn get(&self, c: Cell, ch: usize) -> f32 {
        self.data[self.offset(c) + ch]
    }

    pub fn cell_values(&self, c: Cell) -> &[f32] {
        let o = self.offset(c);
        &self.data[o..o + NUM_CHANNELS]
    }

    pub fn raw(&self) -> &[f32] {
        &self.data
    }

    /// FNV-1a over the bit patterns of every value.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.data {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height as i32)
            .flat_map(move |y| (0..self.width as i32).map(move |x| Cell::new(x, y)))
    }

    pub fn free_prob(&self, c: Cell) -> f32 {
        if self.in_bounds(c) {
            self.get(c, FREE)
        } else {
            0.0
        }
    }

    /// Overwrite every channel of every cell. Intended for tests and for
    /// building reference memories from ground truth.
    pub fn from_raw(height: usize, width: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), height * width * NUM_CHANNELS);
        SpatialMemory {
            height,
            width,
            data: data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            coverage_mask: None,
        }
    }

    pub fn view(&self) -> MemoryView<'_> {
        MemoryView(self)
    }

    pub fn snapshot(&self) -> MemorySnapshot {
        MemorySnapshot {
            channels: channel_names(),
            height: self.height,
            width: self.width,
            data: self.data.clone(),
        }
    }
}

/// Read-only handle handed to planners.
#[derive(Clone, Copy, Debug)]
pub struct MemoryView<'a>(&'a SpatialMemory);

impl<'a> MemoryView<'a> {
    pub fn read_window(&self, pose: Pose, size: usize) -> EgoWindow {
        read_window(self.0, pose, size)
    }

    pub fn coverage_fraction(&self) -> f32 {
        coverage_fraction(self.0)
    }

    pub fn get(&self, c: Cell, ch: usize) -> f32 {
        self.0.get(c, ch)
    }

    pub fn free_prob(&self, c: Cell) -> f32 {
        self.0.free_prob(c)
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        self.0.in_bounds(c)
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn memory(&self) -> &'a SpatialMemory {
        self.0
    }
}

/// Dense dump of the memory with a channel-name header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorySnapshot {
    pub channels: Vec<String>,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

pub fn read_window(mem: &SpatialMemory, pose: Pose, size: usize) -> EgoWindow {
    assert!(size % 2 == 1, "window size must be odd");
    let mut w = EgoWindow {
        pose,
        size,
        values: vec![0.0; size * size * NUM_CHANNELS],
    };
    for f in 0..size {
        for col in 0..size {
            let c = w.world_cell(f, col);
            if mem.in_bounds(c) {
                let o = w.offset(f, col);
                w.values[o..o + NUM_CHANNELS].copy_from_slice(mem.cell_values(c));
            }
        }
    }
    w
}

/// Swap a window back into memory. Only in-bounds cells of the footprint
/// are touched; values are clamped to `[0, 1]`.
pub fn write_window(mem: &mut SpatialMemory, window: &EgoWindow) {
    for f in 0..window.size {
        for col in 0..window.size {
            let c = window.world_cell(f, col);
            if !mem.in_bounds(c) {
                continue;
            }
            let src = window.cell_values(f, col);
            let o = mem.offset(c);
            for (dst, &v) in mem.data[o..o + NUM_CHANNELS].iter_mut().zip(src) {
                *dst = v.clamp(0.0, 1.0);
            }
        }
    }
}

fn blend(v: f32, target: f32, alpha: f32) -> f32 {
    (1.0 - alpha) * v + alpha * target
}

/// Fuse one (possibly noisy) observation into memory.
///
/// Per observed cell: free space moves toward the observed label, detected
/// classes toward 1, and at fully inspected cells undetected classes toward
/// 0 and coverage is set. Receptacle channels are set to 1 on sighting.
pub fn integrate_observation(mem: &mut SpatialMemory, obs: &Observation, cfg: &MemoryConfig) {
    let pose = obs.origin.pose();
    let mut w = read_window(mem, pose, cfg.integration_window);
    let alpha = cfg.alpha;

    let mut detected: Vec<(Cell, usize)> = obs
        .visible_objects
        .iter()
        .map(|o| (o.cell, o.class.channel()))
        .collect();
    detected.sort_unstable();
    detected.dedup();

    for v in &obs.visible_cells {
        let Some((f, col)) = w.locate(v.cell) else {
            continue;
        };
        let target = if v.is_free { 1.0 } else { 0.0 };
        let free = blend(w.get(f, col, FREE), target, alpha);
        w.set(f, col, FREE, free);
        if v.inspected {
            w.set(f, col, COVERAGE, 1.0);
            for class in ObjectClass::ALL {
                let ch = class.channel();
                let present = detected.binary_search(&(v.cell, ch)).is_ok();
                let t = if present { 1.0 } else { 0.0 };
                w.set(f, col, ch, blend(w.get(f, col, ch), t, alpha));
            }
        }
    }
    // positive evidence at cells that were not fully inspected (or displaced)
    for &(c, ch) in &detected {
        let inspected = obs.visible_cells.iter().any(|v| v.cell == c && v.inspected);
        if inspected {
            continue;
        }
        if let Some((f, col)) = w.locate(c) {
            w.set(f, col, ch, blend(w.get(f, col, ch), 1.0, alpha));
        }
    }
    for r in &obs.visible_receptacles {
        if let Some((f, col)) = w.locate(r.cell) {
            w.set(f, col, r.class.channel(), 1.0);
        }
    }
    write_window(mem, &w);
}

/// Free-space evidence for a single cell, e.g. from bumping into it.
pub fn integrate_free_evidence(
    mem: &mut SpatialMemory,
    pose: Pose,
    cell: Cell,
    is_free: bool,
    cfg: &MemoryConfig,
) {
    let mut w = read_window(mem, pose, cfg.integration_window);
    if let Some((f, col)) = w.locate(cell) {
        let t = if is_free { 1.0 } else { 0.0 };
        w.set(f, col, FREE, blend(w.get(f, col, FREE), t, cfg.alpha));
        write_window(mem, &w);
    }
}

pub fn mark_navigation_intent(mem: &mut SpatialMemory, goal: Cell) {
    if mem.in_bounds(goal) {
        let o = mem.offset(goal);
        mem.data[o + INTENT] = 1.0;
    }
}

pub fn coverage_fraction(mem: &SpatialMemory) -> f32 {
    let mut total = 0usize;
    let mut sum = 0.0f64;
    for (i, cell) in mem.data.chunks_exact(NUM_CHANNELS).enumerate() {
        let counted = mem.coverage_mask.as_ref().is_none_or(|m| m[i]);
        if counted {
            total += 1;
            sum += cell[COVERAGE] as f64;
        }
    }
    if total == 0 {
        0.0
    } else {
        (sum / total as f64) as f32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Heading;
    use crate::geom::Pitch;
    use crate::world::{AgentState, SeenObject, VisibleCell};

    fn obs_at(
        agent: AgentState,
        cells: &[(Cell, bool)],
        objects: &[(Cell, ObjectClass)],
    ) -> Observation {
        Observation {
            origin: agent,
            visible_cells: cells
                .iter()
                .map(|&(cell, is_free)| VisibleCell {
                    cell,
                    is_free,
                    inspected: true,
                })
                .collect(),
            visible_receptacles: vec![],
            visible_objects: objects
                .iter()
                .map(|&(cell, class)| SeenObject {
                    class,
                    cell,
                    receptacle: None,
                })
                .collect(),
        }
    }

    #[test]
    fn heading_change_rotates_window() {
        let mut data = vec![0.0; 9 * 9 * NUM_CHANNELS];
        for (i, v) in data.iter_mut().enumerate() {
            *v = ((i * 7919) % 101) as f32 / 100.0;
        }
        let mem = SpatialMemory::from_raw(9, 9, data);
        let c = Cell::new(4, 4);
        let n = read_window(&mem, Pose::new(c, Heading::N), 3);
        let e = read_window(&mem, Pose::new(c, Heading::E), 3);
        // forward f, lateral l facing N is world (x+l, y-f); facing E it is (x+f, y+l)
        for f in 0..3 {
            for col in 0..3 {
                let l = col as i32 - 1;
                assert_eq!(
                    n.cell_values(f, col),
                    mem.cell_values(Cell::new(4 + l, 4 - f as i32))
                );
                assert_eq!(
                    e.cell_values(f, col),
                    mem.cell_values(Cell::new(4 + f as i32, 4 + l))
                );
            }
        }
    }

    #[test]
    fn corner_window_pads_with_zeros() {
        let mem = SpatialMemory::new(6, 6);
        let w = read_window(&mem, Pose::new(Cell::new(0, 0), Heading::N), 5);
        // everything ahead of a north-facing agent on row 0 is out of bounds
        for f in 1..5 {
            for col in 0..5 {
                assert!(w.cell_values(f, col).iter().all(|&v| v == 0.0));
            }
        }
        assert_eq!(w.get(0, 2, FREE), FREE_PRIOR);
        assert!(w.cell_values(0, 0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_ones_write_then_read() {
        let mut mem = SpatialMemory::new(10, 10);
        let pose = Pose::new(Cell::new(5, 5), Heading::S);
        let mut w = read_window(&mem, pose, 5);
        w.values.iter_mut().for_each(|v| *v = 1.0);
        write_window(&mut mem, &w);
        assert!(read_window(&mem, pose, 5).values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn write_touches_at_most_window_footprint() {
        let mut mem = SpatialMemory::new(20, 20);
        let before = mem.clone();
        let pose = Pose::new(Cell::new(10, 10), Heading::W);
        let mut w = read_window(&mem, pose, 5);
        w.values.iter_mut().for_each(|v| *v = 0.9);
        write_window(&mut mem, &w);
        let changed = mem
            .cells()
            .filter(|&c| mem.cell_values(c) != before.cell_values(c))
            .count();
        assert!(changed <= 25);
        assert!(400 - changed >= 375);
    }

    #[test]
    fn moving_average_single_step() {
        let mut mem = SpatialMemory::new(8, 8);
        let agent = AgentState::new(Cell::new(4, 6), Heading::N, Pitch::Level);
        let target = Cell::new(4, 3);
        let obs = obs_at(agent, &[(target, true)], &[(target, ObjectClass::Fork)]);
        integrate_observation(&mut mem, &obs, &MemoryConfig::default());
        assert_eq!(mem.get(target, ObjectClass::Fork.channel()), 0.5);
        assert_eq!(mem.get(target, FREE), 0.75);
        assert_eq!(mem.get(target, COVERAGE), 1.0);
    }

    #[test]
    fn repeated_positive_evidence_follows_closed_form() {
        let cfg = MemoryConfig {
            alpha: 0.3,
            ..MemoryConfig::default()
        };
        let mut mem = SpatialMemory::new(8, 8);
        let agent = AgentState::new(Cell::new(4, 6), Heading::N, Pitch::Level);
        let target = Cell::new(4, 3);
        let obs = obs_at(agent, &[(target, true)], &[(target, ObjectClass::Cup)]);
        for k in 1..=12 {
            integrate_observation(&mut mem, &obs, &cfg);
            let expect = 1.0 - (1.0 - cfg.alpha as f64).powi(k);
            let got = mem.get(target, ObjectClass::Cup.channel()) as f64;
            assert!((got - expect).abs() < 1e-5, "k={k}: {got} vs {expect}");
        }
    }

    #[test]
    fn alternating_evidence_matches_scalar_recurrence() {
        let cfg = MemoryConfig {
            alpha: 0.4,
            ..MemoryConfig::default()
        };
        let mut mem = SpatialMemory::new(8, 8);
        let agent = AgentState::new(Cell::new(4, 6), Heading::N, Pitch::Level);
        let target = Cell::new(4, 3);
        let present = obs_at(agent, &[(target, true)], &[(target, ObjectClass::Apple)]);
        let absent = obs_at(agent, &[(target, true)], &[]);
        // scalar reference of v <- (1-a) v + a t
        let mut v = 0.0f64;
        for step in 0..40 {
            let t = if step % 2 == 0 { 1.0 } else { 0.0 };
            v = (1.0 - cfg.alpha as f64) * v + cfg.alpha as f64 * t;
            let o = if step % 2 == 0 { &present } else { &absent };
            integrate_observation(&mut mem, o, &cfg);
            let got = mem.get(target, ObjectClass::Apple.channel()) as f64;
            assert!((got - v).abs() < 1e-5);
        }
        // two-step fixpoint of the alternating recurrence after a positive step
        let a = cfg.alpha as f64;
        let hi = a / (1.0 - (1.0 - a) * (1.0 - a));
        let lo = (1.0 - a) * hi;
        let got = mem.get(target, ObjectClass::Apple.channel()) as f64;
        assert!((got - lo).abs() < 1e-4, "{got} vs {lo}");
    }

    #[test]
    fn coverage_fraction_over_mask() {
        let mut mask = vec![false; 16];
        mask[5] = true;
        mask[6] = true;
        let mut mem = SpatialMemory::with_coverage_mask(4, 4, mask);
        assert_eq!(coverage_fraction(&mem), 0.0);
        let agent = AgentState::new(Cell::new(1, 3), Heading::N, Pitch::Level);
        let obs = obs_at(agent, &[(Cell::new(1, 1), true)], &[]);
        integrate_observation(&mut mem, &obs, &MemoryConfig::default());
        assert_eq!(coverage_fraction(&mem), 0.5);
        let obs = obs_at(agent, &[(Cell::new(2, 1), true)], &[]);
        integrate_observation(&mut mem, &obs, &MemoryConfig::default());
        assert_eq!(coverage_fraction(&mem), 1.0);
    }

    #[test]
    fn intent_marks_single_cell() {
        let mut mem = SpatialMemory::new(5, 5);
        mark_navigation_intent(&mut mem, Cell::new(2, 3));
        assert_eq!(mem.get(Cell::new(2, 3), INTENT), 1.0);
        let marked = mem.cells().filter(|&c| mem.get(c, INTENT) > 0.0).count();
        assert_eq!(marked, 1);
    }
}
