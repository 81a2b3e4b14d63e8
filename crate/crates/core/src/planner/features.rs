//! Planner input features. Every feature carries provenance flags so an
//! extractor can be checked for what it reads, and so question features
//! can be zeroed for the question-blind ablation.

use serde::{Deserialize, Serialize};

use crate::classes::{ObjectClass, ReceptacleClass};
use crate::controllers::NavigationGoal;
use crate::geom::{Cell, Pitch};
use crate::memory::{COVERAGE, FREE, INTENT, NUM_CHANNELS};
use crate::questions::{Question, QuestionType, MAX_COUNT};
use crate::world::{AgentState, Observation};

use super::action::NUM_ACTIONS;
use super::episode::Episode;

/// What a feature is computed from.
pub mod provenance {
    pub const MEMORY: u8 = 1;
    pub const QUESTION: u8 = 2;
    pub const OBSERVATION: u8 = 4;
    pub const ACTION: u8 = 8;
    pub const POSE: u8 = 16;
    pub const PROGRESS: u8 = 32;
}
use provenance::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Spatial memory crops and question-conditioned memory readouts.
    Himn,
    /// Current observation only; no memory access.
    Memoryless,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    /// Zero every feature with question provenance.
    pub question_blind: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            kind: FeatureKind::Himn,
            question_blind: false,
        }
    }
}

/// Names and provenance of each feature slot, fixed per [`FeatureKind`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureLayout {
    pub names: Vec<String>,
    pub provenance: Vec<u8>,
}

impl FeatureLayout {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn any_with(&self, flag: u8) -> bool {
        self.provenance.iter().any(|p| p & flag != 0)
    }
}

struct Builder {
    values: Vec<f64>,
    names: Vec<String>,
    provenance: Vec<u8>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            values: Vec::new(),
            names: Vec::new(),
            provenance: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, prov: u8, v: f64) {
        self.values.push(v);
        self.names.push(name.into());
        self.provenance.push(prov);
    }

    fn flag(&mut self, name: impl Into<String>, prov: u8, b: bool) {
        self.push(name, prov, if b { 1.0 } else { 0.0 });
    }
}

fn question_block(b: &mut Builder, q: &Question) {
    for t in QuestionType::ALL {
        b.flag(format!("q.type.{}", t.name()), QUESTION, q.qtype == t);
    }
    for o in ObjectClass::ALL {
        b.flag(format!("q.object.{o}"), QUESTION, q.object == o);
    }
    for r in ReceptacleClass::ALL {
        b.flag(format!("q.container.{r}"), QUESTION, q.container == Some(r));
    }
}

fn pose_block(b: &mut Builder, agent: &AgentState) {
    for p in [Pitch::Down, Pitch::Level, Pitch::Up] {
        b.flag(
            format!("pose.pitch.{}", p.degrees()),
            POSE,
            agent.pitch == p,
        );
    }
}

fn action_block(b: &mut Builder, ep: &Episode) {
    let last = ep.last_action();
    for i in 0..NUM_ACTIONS {
        b.flag(format!("last.action.{i}"), ACTION, last == Some(i));
    }
    b.flag("last.valid", ACTION, ep.last_valid());
}

/// Receptacles in view and within reach, by open state and by where
/// their height band lies relative to the current pitch.
fn band_block(b: &mut Builder, obs: &Observation, agent: &AgentState, reach2: i32, prov: u8) {
    let mut flags = [false; 6];
    for r in &obs.visible_receptacles {
        if agent.cell.dist2(r.cell) > reach2 {
            continue;
        }
        let band = r.height_band.pitch().index() as i32;
        let rel = (band - agent.pitch.index() as i32).signum() + 1;
        let closed = r.class.openable() && !r.is_open;
        flags[usize::from(!closed) * 3 + rel as usize] = true;
    }
    let names = [
        "closed.below",
        "closed.level",
        "closed.above",
        "open.below",
        "open.level",
        "open.above",
    ];
    for (n, f) in names.iter().zip(flags) {
        b.flag(format!("obs.reach.{n}"), prov, f);
    }
}

/// Openable receptacles in view and within reach, by open state.
fn reachable_openables(obs: &Observation, agent: &AgentState, reach2: i32) -> (bool, bool) {
    let mut closed = false;
    let mut open = false;
    for r in &obs.visible_receptacles {
        if r.class.openable() && agent.cell.dist2(r.cell) <= reach2 {
            if r.is_open {
                open = true;
            } else {
                closed = true;
            }
        }
    }
    (closed, open)
}

fn goal_cells(agent: &AgentState) -> impl Iterator<Item = (usize, Cell)> + '_ {
    NavigationGoal::all().map(move |g| (g.index(), agent.pose().to_world(g.forward, g.lateral)))
}

fn himn(b: &mut Builder, ep: &Episode) {
    let mem = ep.emb.memory.view();
    let agent = ep.emb.agent();
    let (h, w) = (mem.height() as i32, mem.width() as i32);
    let interior = |c: Cell| c.x > 0 && c.y > 0 && c.x < w - 1 && c.y < h - 1;
    let unseen = |c: Cell| {
        mem.in_bounds(c)
            && interior(c)
            && ((mem.get(c, FREE) > 0.5 && mem.get(c, COVERAGE) < 1.0) || mem.get(c, FREE) == 0.5)
    };

    let mut best: Option<(usize, usize)> = None;
    for (i, c) in goal_cells(&agent) {
        let inb = mem.in_bounds(c);
        let free = if inb { mem.get(c, FREE) as f64 } else { 0.0 };
        b.flag(format!("goal.{i}.known_free"), MEMORY, free > 0.5);
        b.flag(
            format!("goal.{i}.known_blocked"),
            MEMORY,
            !inb || free < 0.5,
        );
        b.push(
            format!("goal.{i}.coverage"),
            MEMORY,
            if inb {
                mem.get(c, COVERAGE) as f64
            } else {
                1.0
            },
        );
        b.push(
            format!("goal.{i}.intent"),
            MEMORY,
            if inb { mem.get(c, INTENT) as f64 } else { 0.0 },
        );
        let mut novel = 0;
        for dy in -2..=2 {
            for dx in -2..=2 {
                novel += usize::from(unseen(c.offset(dx, dy)));
            }
        }
        b.push(format!("goal.{i}.novelty"), MEMORY, novel as f64 / 25.0);
        if free > 0.5 && c != agent.cell && best.is_none_or(|(n, _)| novel > n) {
            best = Some((novel, i));
        }
    }
    // the reachable-looking goal with the most unexplored surroundings
    for i in 0..NavigationGoal::COUNT {
        b.flag(
            format!("goal.{i}.most_novel"),
            MEMORY,
            best.is_some_and(|(n, j)| n > 0 && j == i),
        );
    }

    let win = mem.read_window(agent.pose(), ep.emb.cfg.memory.window_size);
    let (mean, max) = win.pooled();
    let names = crate::classes::channel_names();
    for ch in 0..NUM_CHANNELS {
        b.push(
            format!("window.mean.{}", names[ch]),
            MEMORY,
            mean[ch] as f64,
        );
        b.push(format!("window.max.{}", names[ch]), MEMORY, max[ch] as f64);
    }

    // receptacles seen but whose contents are not yet inspected
    let mut pending = 0usize;
    let mut sighted = 0usize;
    for c in mem.memory().cells() {
        let is_rec = ReceptacleClass::ALL
            .iter()
            .any(|r| mem.get(c, r.channel()) > 0.5);
        if is_rec {
            sighted += 1;
            pending += usize::from(mem.get(c, COVERAGE) < 1.0);
        }
    }
    b.push("mem.receptacles_pending", MEMORY, pending as f64 / 4.0);
    b.flag("mem.none_pending", MEMORY, sighted > 0 && pending == 0);
    let unknown = mem.memory().cells().filter(|&c| unseen(c)).count();
    b.push(
        "mem.unseen_fraction",
        MEMORY,
        unknown as f64 / ((h - 2) * (w - 2)).max(1) as f64,
    );
    b.flag("mem.fully_explored", MEMORY, unknown == 0 && pending == 0);
    b.push("mem.coverage", MEMORY | PROGRESS, ep.coverage() as f64);

    let q = ep.question;
    question_block(b, &q);
    let tau = ep.cfg.controllers.answer.tau;
    let obj = q.object.channel();
    let hits = mem
        .memory()
        .cells()
        .filter(|&c| mem.get(c, obj) > tau)
        .count();
    let pair = q.container.is_some_and(|r| {
        mem.memory()
            .cells()
            .any(|c| mem.get(c, obj) > tau && mem.get(c, r.channel()) > tau)
    });
    let container_seen = q
        .container
        .is_some_and(|r| mem.memory().cells().any(|c| mem.get(c, r.channel()) > 0.5));
    let qm = QUESTION | MEMORY;
    let found = hits > 0;
    let count = hits.min(MAX_COUNT) as f64 / MAX_COUNT as f64;
    b.flag("qm.found", qm, found);
    b.push("qm.count", qm, count);
    b.flag("qm.pair", qm, pair);
    b.flag("qm.container_seen", qm, container_seen);
    b.flag(
        "qm.exist_found",
        qm,
        found && q.qtype == QuestionType::Existence,
    );
    b.push(
        "qm.count_count",
        qm,
        if q.qtype == QuestionType::Counting {
            count
        } else {
            0.0
        },
    );
    b.flag(
        "qm.counting_max",
        qm,
        q.qtype == QuestionType::Counting && hits >= MAX_COUNT,
    );
    b.flag(
        "qm.pair_found",
        qm,
        pair && q.qtype == QuestionType::SpatialRelationship,
    );

    let agent = ep.emb.agent();
    let reach2 = ep.emb.scene().params.interaction_range.pow(2);
    let (can_open, can_close) = reachable_openables(&ep.emb.last_detections, &agent, reach2);
    b.flag("obs.can_open", OBSERVATION, can_open);
    b.flag("obs.can_close", OBSERVATION, can_close);
    band_block(b, &ep.emb.last_detections, &agent, reach2, OBSERVATION);
    pose_block(b, &agent);
    action_block(b, ep);
    b.push("progress.steps", PROGRESS, ep.step_fraction() as f64);
}

fn memoryless(b: &mut Builder, ep: &Episode) {
    let obs = &ep.emb.last_detections;
    let agent = ep.emb.agent();
    let mut farthest: Option<(i32, usize)> = None;
    for (i, c) in goal_cells(&agent) {
        let seen = obs.visible_cells.iter().find(|v| v.cell == c);
        b.flag(
            format!("goal.{i}.seen_free"),
            OBSERVATION,
            seen.is_some_and(|v| v.is_free),
        );
        b.flag(
            format!("goal.{i}.seen_blocked"),
            OBSERVATION,
            seen.is_some_and(|v| !v.is_free),
        );
        let d = agent.cell.dist2(c);
        if seen.is_some_and(|v| v.is_free) && farthest.is_none_or(|(fd, _)| d > fd) {
            farthest = Some((d, i));
        }
    }
    // the farthest goal currently seen free
    for i in 0..NavigationGoal::COUNT {
        b.flag(
            format!("goal.{i}.farthest_free"),
            OBSERVATION,
            farthest.is_some_and(|(_, j)| j == i),
        );
    }
    let mut counts = [0usize; ObjectClass::ALL.len()];
    for o in &obs.visible_objects {
        counts[o.class.index()] += 1;
    }
    for o in ObjectClass::ALL {
        b.push(
            format!("obs.count.{o}"),
            OBSERVATION,
            counts[o.index()].min(MAX_COUNT) as f64 / 3.0,
        );
    }
    for r in ReceptacleClass::ALL {
        b.flag(
            format!("obs.receptacle.{r}"),
            OBSERVATION,
            obs.visible_receptacles.iter().any(|s| s.class == r),
        );
    }
    let free = obs.visible_cells.iter().filter(|v| v.is_free).count();
    b.push("obs.free_cells", OBSERVATION, free as f64 / 25.0);

    let q = ep.question;
    question_block(b, &q);
    let n = counts[q.object.index()];
    let pair = q.container.is_some_and(|r| {
        obs.visible_objects.iter().any(|o| {
            o.class == q.object
                && o.receptacle.is_some_and(|i| {
                    obs.visible_receptacles
                        .iter()
                        .any(|s| s.receptacle == i && s.class == r)
                })
        })
    });
    let qo = QUESTION | OBSERVATION;
    b.flag("qo.visible", qo, n > 0);
    b.push("qo.count", qo, n.min(MAX_COUNT) as f64 / 3.0);
    b.flag("qo.pair", qo, pair);
    b.flag(
        "qo.exist_visible",
        qo,
        n > 0 && q.qtype == QuestionType::Existence,
    );
    b.push(
        "qo.count_count",
        qo,
        if q.qtype == QuestionType::Counting {
            n.min(MAX_COUNT) as f64 / 3.0
        } else {
            0.0
        },
    );
    b.flag(
        "qo.pair_visible",
        qo,
        pair && q.qtype == QuestionType::SpatialRelationship,
    );

    let reach2 = ep.emb.scene().params.interaction_range.pow(2);
    let (can_open, can_close) = reachable_openables(obs, &agent, reach2);
    b.flag("obs.can_open", OBSERVATION, can_open);
    b.flag("obs.can_close", OBSERVATION, can_close);
    band_block(b, obs, &agent, reach2, OBSERVATION);
    pose_block(b, &agent);
    action_block(b, ep);
    b.push("progress.steps", PROGRESS, ep.step_fraction() as f64);
}

fn build(ep: &Episode, cfg: &FeatureConfig) -> Builder {
    let mut b = Builder::new();
    match cfg.kind {
        FeatureKind::Himn => himn(&mut b, ep),
        FeatureKind::Memoryless => memoryless(&mut b, ep),
    }
    if cfg.question_blind {
        for (v, p) in b.values.iter_mut().zip(&b.provenance) {
            if p & QUESTION != 0 {
                *v = 0.0;
            }
        }
    }
    b
}

/// Feature vector for the episode's current state.
pub fn extract_features(ep: &Episode, cfg: &FeatureConfig) -> Vec<f64> {
    build(ep, cfg).values
}

/// Layout of [`extract_features`] output, taken from a live episode.
pub fn feature_layout(ep: &Episode, cfg: &FeatureConfig) -> FeatureLayout {
    let b = build(ep, cfg);
    FeatureLayout {
        names: b.names,
        provenance: b.provenance,
    }
}
