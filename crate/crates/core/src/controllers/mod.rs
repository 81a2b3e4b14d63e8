//! Low-level controllers: navigator, scanner, detector, manipulator and
//! answerer, all acting through an [`Embodiment`].

mod answerer;
mod astar;
mod detector;
mod navigator;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use answerer::{
    answer, answer_from_observation, detected_classes, ground_truth_memory, AnswerConfig,
    AnswerDistribution,
};
pub use astar::{astar, distance_map, OccupancyGrid, Path, PathCosts};
pub use detector::{detect, DetectorMode, DetectorModel};
pub use navigator::{
    memory_occupancy, navigate, panorama, NavMode, NavOutcome, NavReport, NavigationGoal,
    NavigatorConfig,
};

use crate::memory::{integrate_free_evidence, integrate_observation, MemoryConfig, SpatialMemory};
use crate::world::{
    observe, ActionOutcome, AgentState, InvalidReason, LowLevelAction, Observation, Scene,
    SeenReceptacle, World,
};

/// Which controller issued a primitive action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Navigator,
    Scanner,
    Manipulator,
    /// Direct primitive control (human or external client).
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveRecord {
    pub action: LowLevelAction,
    pub outcome: ActionOutcome,
    pub phase: Phase,
    /// Agent state after the action.
    pub agent: AgentState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub memory: MemoryConfig,
    pub detector: DetectorModel,
    pub navigator: NavigatorConfig,
    pub answer: AnswerConfig,
    pub max_primitive_steps: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            memory: MemoryConfig::default(),
            detector: DetectorModel::oracle(),
            navigator: NavigatorConfig::default(),
            answer: AnswerConfig::default(),
            max_primitive_steps: 2000,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("primitive step cap of {0} reached")]
pub struct PrimitiveCap(pub usize);

/// The agent's body in one episode: world, memory, detector noise stream and
/// the trace of every primitive action taken.
#[derive(Clone, Debug)]
pub struct Embodiment {
    pub world: World,
    pub memory: SpatialMemory,
    pub cfg: ControllerConfig,
    rng: ChaCha8Rng,
    pub trace: Vec<PrimitiveRecord>,
    /// Detector output for the current view.
    pub last_detections: Observation,
    /// Latest sighting of each receptacle, by receptacle index.
    pub receptacles: BTreeMap<usize, SeenReceptacle>,
}

impl Embodiment {
    /// Place the agent and take the first look.
    pub fn new(scene: Scene, start: AgentState, cfg: ControllerConfig, seed: u64) -> Self {
        let memory = SpatialMemory::with_coverage_mask(
            scene.height as usize,
            scene.width as usize,
            scene.object_site_mask(),
        );
        let blank = Observation {
            origin: start,
            visible_cells: Vec::new(),
            visible_receptacles: Vec::new(),
            visible_objects: Vec::new(),
        };
        let mut e = Embodiment {
            world: World::new(scene, start),
            memory,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            trace: Vec::new(),
            last_detections: blank,
            receptacles: BTreeMap::new(),
        };
        e.sense();
        e
    }

    pub fn agent(&self) -> AgentState {
        self.world.agent
    }

    pub fn scene(&self) -> &Scene {
        &self.world.scene
    }

    pub fn primitive_steps(&self) -> usize {
        self.trace.len()
    }

    pub fn cap_reached(&self) -> bool {
        self.trace.len() >= self.cfg.max_primitive_steps
    }

    /// Observe, run the detector and fuse the result into memory.
    pub fn sense(&mut self) {
        let truth = observe(&self.world.scene, &self.world.agent);
        let det = detect(&truth, &self.cfg.detector, &self.world.scene, &mut self.rng);
        integrate_observation(&mut self.memory, &det, &self.cfg.memory);
        for r in &det.visible_receptacles {
            self.receptacles.insert(r.receptacle, *r);
        }
        self.last_detections = det;
    }

    /// Execute one primitive action, record it and sense.
    pub fn act(&mut self, a: LowLevelAction, phase: Phase) -> Result<ActionOutcome, PrimitiveCap> {
        if self.cap_reached() {
            return Err(PrimitiveCap(self.cfg.max_primitive_steps));
        }
        let before = self.world.agent;
        let outcome = self.world.apply(a);
        if outcome == ActionOutcome::Invalid(InvalidReason::Blocked) {
            let (dx, dy) = before.heading.delta();
            let target = before.cell.offset(dx, dy);
            integrate_free_evidence(
                &mut self.memory,
                before.pose(),
                target,
                false,
                &self.cfg.memory,
            );
        }
        self.trace.push(PrimitiveRecord {
            action: a,
            outcome,
            phase,
            agent: self.world.agent,
        });
        self.sense();
        Ok(outcome)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanDirection {
    Up,
    Down,
    Left,
    Right,
}

impl ScanDirection {
    pub const ALL: [ScanDirection; 4] = [
        ScanDirection::Up,
        ScanDirection::Down,
        ScanDirection::Left,
        ScanDirection::Right,
    ];

    pub fn primitive(self) -> LowLevelAction {
        match self {
            ScanDirection::Up => LowLevelAction::LookUp,
            ScanDirection::Down => LowLevelAction::LookDown,
            ScanDirection::Left => LowLevelAction::RotateLeft,
            ScanDirection::Right => LowLevelAction::RotateRight,
        }
    }
}

/// Turn the camera one notch; the new pose persists. A pitch clamp still
/// costs the step and its detector pass.
pub fn scan(emb: &mut Embodiment, dir: ScanDirection) -> Result<ActionOutcome, PrimitiveCap> {
    emb.act(dir.primitive(), Phase::Scanner)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manipulation {
    Open,
    Close,
}

pub fn manipulate(emb: &mut Embodiment, op: Manipulation) -> Result<ActionOutcome, PrimitiveCap> {
    let a = match op {
        Manipulation::Open => LowLevelAction::Open,
        Manipulation::Close => LowLevelAction::Close,
    };
    emb.act(a, Phase::Manipulator)
}
