use serde::{Deserialize, Serialize};

use crate::classes::ObjectClass;
use crate::memory::{integrate_observation, MemoryConfig, SpatialMemory, COVERAGE, FREE};
use crate::questions::{Question, QuestionType, MAX_COUNT, NO, YES};
use crate::world::{Observation, Scene};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerConfig {
    pub tau: f32,
    /// Mass spread over the non-selected choices.
    pub epsilon: f64,
}

impl Default for AnswerConfig {
    fn default() -> Self {
        AnswerConfig {
            tau: 0.5,
            epsilon: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerDistribution {
    pub probs: Vec<f64>,
}

impl AnswerDistribution {
    pub fn peaked(choice: usize, n: usize, epsilon: f64) -> Self {
        let rest = if n > 1 { epsilon / (n - 1) as f64 } else { 0.0 };
        let probs = (0..n)
            .map(|i| if i == choice { 1.0 - epsilon } else { rest })
            .collect();
        AnswerDistribution { probs }
    }

    /// Index of the most probable choice (lowest index on ties).
    pub fn choice(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Threshold readout of the memory.
pub fn answer(mem: &SpatialMemory, q: &Question, cfg: &AnswerConfig) -> AnswerDistribution {
    let ch = q.object.channel();
    let hits = mem.cells().filter(|&c| mem.get(c, ch) > cfg.tau);
    let choice = match q.qtype {
        QuestionType::Existence => {
            if hits.count() > 0 {
                YES
            } else {
                NO
            }
        }
        QuestionType::Counting => hits.count().min(MAX_COUNT),
        QuestionType::SpatialRelationship => {
            let container = q.container.map(|r| r.channel());
            let hit = container.is_some_and(|rc| {
                mem.cells()
                    .any(|c| mem.get(c, ch) > cfg.tau && mem.get(c, rc) > cfg.tau)
            });
            if hit {
                YES
            } else {
                NO
            }
        }
    };
    AnswerDistribution::peaked(choice, q.qtype.num_choices(), cfg.epsilon)
}

/// Readout restricted to a single observation, for agents without memory.
pub fn answer_from_observation(
    obs: &Observation,
    height: usize,
    width: usize,
    q: &Question,
    cfg: &AnswerConfig,
) -> AnswerDistribution {
    let mut mem = SpatialMemory::new(height, width);
    let mem_cfg = MemoryConfig {
        alpha: 1.0,
        ..MemoryConfig::default()
    };
    integrate_observation(&mut mem, obs, &mem_cfg);
    answer(&mem, q, cfg)
}

/// Memory holding exactly the ground truth, as if every cell were inspected.
pub fn ground_truth_memory(scene: &Scene) -> SpatialMemory {
    let (h, w) = (scene.height as usize, scene.width as usize);
    let mut data = vec![0.0f32; h * w * crate::memory::NUM_CHANNELS];
    let mut set = |c: crate::geom::Cell, ch: usize| {
        data[(c.y as usize * w + c.x as usize) * crate::memory::NUM_CHANNELS + ch] = 1.0;
    };
    for c in scene.cells() {
        if scene.is_free(c) {
            set(c, FREE);
        }
        set(c, COVERAGE);
    }
    for r in &scene.receptacles {
        set(r.cell, r.class.channel());
    }
    for (cell, o, _) in scene.all_objects() {
        set(cell, o.class.channel());
    }
    SpatialMemory::from_raw(h, w, data)
}

/// Classes whose readout over `mem` is currently positive, for diagnostics.
pub fn detected_classes(mem: &SpatialMemory, tau: f32) -> Vec<(ObjectClass, usize)> {
    ObjectClass::ALL
        .into_iter()
        .map(|o| {
            (
                o,
                mem.cells()
                    .filter(|&c| mem.get(c, o.channel()) > tau)
                    .count(),
            )
        })
        .filter(|&(_, n)| n > 0)
        .collect()
}
