use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classes::ObjectClass;
use crate::geom::Cell;
use crate::world::{Observation, Scene, SeenObject};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    Oracle,
    Noisy,
}

/// Parametric detection error model applied to ground-truth observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorModel {
    pub mode: DetectorMode,
    /// Probability a visible object is reported.
    pub recall: f64,
    /// Probability of a spurious detection per inspected cell and class.
    pub false_positive_rate: f64,
    /// Probability a reported object is shifted one cell along the view ray.
    pub localization_noise: f64,
    /// Per-class recall overrides.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub class_recall: BTreeMap<ObjectClass, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub class_false_positive_rate: BTreeMap<ObjectClass, f64>,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::oracle()
    }
}

impl DetectorModel {
    pub fn oracle() -> Self {
        DetectorModel {
            mode: DetectorMode::Oracle,
            recall: 1.0,
            false_positive_rate: 0.0,
            localization_noise: 0.0,
            class_recall: BTreeMap::new(),
            class_false_positive_rate: BTreeMap::new(),
        }
    }

    pub fn noisy(recall: f64, false_positive_rate: f64, localization_noise: f64) -> Self {
        DetectorModel {
            mode: DetectorMode::Noisy,
            recall,
            false_positive_rate,
            localization_noise,
            class_recall: BTreeMap::new(),
            class_false_positive_rate: BTreeMap::new(),
        }
    }

    pub fn recall_of(&self, c: ObjectClass) -> f64 {
        self.class_recall.get(&c).copied().unwrap_or(self.recall)
    }

    pub fn false_positive_of(&self, c: ObjectClass) -> f64 {
        self.class_false_positive_rate
            .get(&c)
            .copied()
            .unwrap_or(self.false_positive_rate)
    }

    pub fn validate(&self) -> Result<(), String> {
        let probs = [
            self.recall,
            self.false_positive_rate,
            self.localization_noise,
        ]
        .into_iter()
        .chain(self.class_recall.values().copied())
        .chain(self.class_false_positive_rate.values().copied());
        for p in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("probability {p} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

fn displaced(obs: &Observation, cell: Cell, scene: &Scene, rng: &mut impl Rng) -> Cell {
    let origin = obs.origin.cell;
    let (dx, dy) = (cell.x - origin.x, cell.y - origin.y);
    let (ax, ay) = if dx == 0 && dy == 0 {
        obs.origin.heading.delta()
    } else if dx.abs() >= dy.abs() {
        (dx.signum(), 0)
    } else {
        (0, dy.signum())
    };
    let sign = if rng.random_bool(0.5) { 1 } else { -1 };
    let moved = cell.offset(ax * sign, ay * sign);
    Cell::new(
        moved.x.clamp(0, scene.width - 1),
        moved.y.clamp(0, scene.height - 1),
    )
}

/// Apply the error model. Oracle mode returns `obs` unchanged and draws no
/// random numbers.
pub fn detect(
    obs: &Observation,
    model: &DetectorModel,
    scene: &Scene,
    rng: &mut impl Rng,
) -> Observation {
    if model.mode == DetectorMode::Oracle {
        return obs.clone();
    }
    let mut out = Observation {
        origin: obs.origin,
        visible_cells: obs.visible_cells.clone(),
        visible_receptacles: obs.visible_receptacles.clone(),
        visible_objects: Vec::new(),
    };
    for o in &obs.visible_objects {
        if !rng.random_bool(model.recall_of(o.class)) {
            continue;
        }
        let mut seen = *o;
        if model.localization_noise > 0.0 && rng.random_bool(model.localization_noise) {
            seen.cell = displaced(obs, o.cell, scene, rng);
            seen.receptacle = scene.receptacle_at(seen.cell);
        }
        out.visible_objects.push(seen);
    }
    for v in &obs.visible_cells {
        let holds_objects = v.is_free || scene.receptacle_at(v.cell).is_some();
        if !v.inspected || !holds_objects {
            continue;
        }
        for class in ObjectClass::ALL {
            let phi = model.false_positive_of(class);
            if phi > 0.0 && rng.random_bool(phi) {
                let dup = out
                    .visible_objects
                    .iter()
                    .any(|o| o.cell == v.cell && o.class == class);
                if !dup {
                    out.visible_objects.push(SeenObject {
                        class,
                        cell: v.cell,
                        receptacle: scene.receptacle_at(v.cell),
                    });
                }
            }
        }
    }
    out
}
