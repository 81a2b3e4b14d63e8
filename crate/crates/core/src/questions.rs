//! Template questions, constrained scene configurations and the balanced
//! dataset generator.
//!
//! Balance is constructive: every question text is emitted in blocks holding
//! one configuration per answer choice, so the answer histogram of each text
//! is exactly uniform at any scale.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{ObjectClass, ReceptacleClass};
use crate::geom::{Cell, Heading, Pitch};
use crate::world::{
    load_scene, AgentState, Location, Placement, RoomSpec, Scene, SceneConfig, SceneError,
};

pub const DATASET_SCHEMA_VERSION: u32 = 1;
/// Items per (room, qtype) at full scale.
pub const TRAIN_PER_ROOM: usize = 1024;
pub const TEST_PER_ROOM: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Existence,
    Counting,
    SpatialRelationship,
}

impl QuestionType {
    pub const ALL: [QuestionType; 3] = [
        QuestionType::Existence,
        QuestionType::Counting,
        QuestionType::SpatialRelationship,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            QuestionType::Existence => "existence",
            QuestionType::Counting => "counting",
            QuestionType::SpatialRelationship => "spatial",
        }
    }

    pub fn choices(self) -> &'static [&'static str] {
        match self {
            QuestionType::Counting => &["0", "1", "2", "3"],
            _ => &["yes", "no"],
        }
    }

    pub fn num_choices(self) -> usize {
        self.choices().len()
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const YES: usize = 0;
pub const NO: usize = 1;
pub const MAX_COUNT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Question {
    pub qtype: QuestionType,
    pub object: ObjectClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container: Option<ReceptacleClass>,
}

impl Question {
    pub fn existence(object: ObjectClass) -> Self {
        Question {
            qtype: QuestionType::Existence,
            object,
            container: None,
        }
    }

    pub fn counting(object: ObjectClass) -> Self {
        Question {
            qtype: QuestionType::Counting,
            object,
            container: None,
        }
    }

    pub fn spatial(object: ObjectClass, container: ReceptacleClass) -> Self {
        Question {
            qtype: QuestionType::SpatialRelationship,
            object,
            container: Some(container),
        }
    }

    pub fn choices(&self) -> &'static [&'static str] {
        self.qtype.choices()
    }

    pub fn text(&self) -> String {
        match (self.qtype, self.container) {
            (QuestionType::Existence, _) => {
                format!("Is there {} in the room?", self.object.with_article())
            }
            (QuestionType::Counting, _) => {
                format!("How many {} are there in the room?", self.object.plural())
            }
            (QuestionType::SpatialRelationship, Some(r)) => format!(
                "Is there {} {} the {}?",
                self.object.with_article(),
                r.preposition(),
                r.name()
            ),
            (QuestionType::SpatialRelationship, None) => {
                format!("Is there {} in something?", self.object.with_article())
            }
        }
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

/// Where objects of a class may go.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Anywhere,
    InClass(ReceptacleClass),
    NotInClass(ReceptacleClass),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub class: ObjectClass,
    pub count: usize,
    pub region: Region,
}

/// Placement constraints. Classes named in `requirements` appear exactly as
/// required and nowhere else; `distractors` further objects of other classes
/// are scattered uniformly.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub requirements: Vec<Requirement>,
    pub distractors: usize,
}

impl Constraints {
    pub fn exactly(class: ObjectClass, count: usize) -> Self {
        Constraints {
            requirements: vec![Requirement {
                class,
                count,
                region: Region::Anywhere,
            }],
            distractors: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum QuestionError {
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
    #[error("infeasible item for room {room:?}, question {question:?}: {reason}")]
    InfeasibleItem {
        room: String,
        question: String,
        reason: String,
    },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// A spot that can hold at most one instance per class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Floor(Cell),
    Receptacle(usize),
}

impl Site {
    pub fn location(self, room: &RoomSpec) -> Location {
        match self {
            Site::Floor(c) => Location::Floor(c),
            Site::Receptacle(i) if room.receptacles[i].class.openable() => Location::Inside(i),
            Site::Receptacle(i) => Location::On(i),
        }
    }

    fn receptacle_class(self, room: &RoomSpec) -> Option<ReceptacleClass> {
        match self {
            Site::Floor(_) => None,
            Site::Receptacle(i) => Some(room.receptacles[i].class),
        }
    }
}

/// Sites in a fixed order: receptacles by index, then floor sites.
pub fn eligible_sites(room: &RoomSpec) -> Vec<Site> {
    (0..room.receptacles.len())
        .map(Site::Receptacle)
        .chain(room.floor_sites.iter().map(|&c| Site::Floor(c)))
        .collect()
}

fn in_region(site: Site, room: &RoomSpec, region: Region) -> bool {
    match region {
        Region::Anywhere => true,
        Region::InClass(r) => site.receptacle_class(room) == Some(r),
        Region::NotInClass(r) => site.receptacle_class(room) != Some(r),
    }
}

/// Draw a placement satisfying `constraints`, uniform over feasible sites,
/// plus a uniformly random start pose (level pitch).
pub fn generate_configuration(
    room: &RoomSpec,
    constraints: &Constraints,
    rng: &mut impl Rng,
) -> Result<SceneConfig, QuestionError> {
    let sites = eligible_sites(room);
    let mut placements = Vec::new();
    let mut next_id = 1u32;
    let mut used: BTreeMap<ObjectClass, Vec<Site>> = BTreeMap::new();

    for req in &constraints.requirements {
        let taken = used.entry(req.class).or_default();
        let pool: Vec<Site> = sites
            .iter()
            .copied()
            .filter(|&s| in_region(s, room, req.region) && !taken.contains(&s))
            .collect();
        if pool.len() < req.count {
            return Err(QuestionError::Infeasible(format!(
                "{} {} requested in {:?}, {} sites available",
                req.count,
                req.class.plural(),
                req.region,
                pool.len()
            )));
        }
        for i in rand::seq::index::sample(rng, pool.len(), req.count) {
            taken.push(pool[i]);
        }
    }

    let named: Vec<ObjectClass> = used.keys().copied().collect();
    let others: Vec<ObjectClass> = ObjectClass::ALL
        .into_iter()
        .filter(|c| !named.contains(c))
        .collect();
    if constraints.distractors > 0 && (others.is_empty() || sites.is_empty()) {
        return Err(QuestionError::Infeasible("no room for distractors".into()));
    }
    let mut placed = 0;
    let mut attempts = 0;
    while placed < constraints.distractors {
        attempts += 1;
        if attempts > 1000 * (constraints.distractors + 1) {
            return Err(QuestionError::Infeasible(
                "distractor capacity exhausted".into(),
            ));
        }
        let class = others[rng.random_range(0..others.len())];
        let site = sites[rng.random_range(0..sites.len())];
        let taken = used.entry(class).or_default();
        if taken.contains(&site) {
            continue;
        }
        taken.push(site);
        placed += 1;
    }

    // emit in a canonical order so identical draws serialize identically
    let mut flat: Vec<(Site, ObjectClass)> = used
        .iter()
        .flat_map(|(&class, ss)| ss.iter().map(move |&s| (s, class)))
        .collect();
    flat.sort();
    for (site, class) in flat {
        placements.push(Placement {
            instance_id: next_id,
            class,
            location: site.location(room),
        });
        next_id += 1;
    }

    let free = room.free_cells();
    if free.is_empty() {
        return Err(QuestionError::Infeasible("room has no free cell".into()));
    }
    let cell = free[rng.random_range(0..free.len())];
    let heading = Heading::ALL[rng.random_range(0..4)];
    Ok(SceneConfig {
        room_id: room.room_id.clone(),
        seed: rng.random(),
        start: AgentState::new(cell, heading, Pitch::Level),
        placements,
    })
}

fn class_of_location(room: &RoomSpec, loc: Location) -> Option<ReceptacleClass> {
    match loc {
        Location::Floor(_) => None,
        Location::Inside(i) | Location::On(i) => room.receptacles.get(i).map(|r| r.class),
    }
}

/// Ground-truth answer index into `q.choices()`.
pub fn answer_of(room: &RoomSpec, config: &SceneConfig, q: &Question) -> usize {
    let matching = config.placements.iter().filter(|p| p.class == q.object);
    match q.qtype {
        QuestionType::Existence => {
            if matching.count() > 0 {
                YES
            } else {
                NO
            }
        }
        QuestionType::Counting => matching.count().min(MAX_COUNT),
        QuestionType::SpatialRelationship => {
            let hit = matching
                .filter(|p| class_of_location(room, p.location).is_some())
                .any(|p| class_of_location(room, p.location) == q.container);
            if hit {
                YES
            } else {
                NO
            }
        }
    }
}

/// Same as [`answer_of`], read off a loaded scene.
pub fn answer_of_scene(scene: &Scene, q: &Question) -> usize {
    let objects = scene.all_objects();
    let matching = objects.iter().filter(|(_, o, _)| o.class == q.object);
    match q.qtype {
        QuestionType::Existence => {
            if matching.count() > 0 {
                YES
            } else {
                NO
            }
        }
        QuestionType::Counting => matching.count().min(MAX_COUNT),
        QuestionType::SpatialRelationship => {
            let hit = matching
                .filter_map(|(_, _, r)| *r)
                .any(|r| Some(scene.receptacles[r].class) == q.container);
            if hit {
                YES
            } else {
                NO
            }
        }
    }
}

/// Constraints that force `answer` for `q`, with randomized extra structure.
pub fn constraints_for(
    room: &RoomSpec,
    q: &Question,
    answer: usize,
    rng: &mut impl Rng,
) -> Constraints {
    let n_sites = eligible_sites(room).len();
    let cap = MAX_COUNT.min(n_sites);
    let distractors = rng.random_range(1..=3usize).min(n_sites);
    let req = |count, region| Requirement {
        class: q.object,
        count,
        region,
    };
    let requirements = match q.qtype {
        QuestionType::Existence if answer == YES => {
            vec![req(rng.random_range(1..=cap.max(1)), Region::Anywhere)]
        }
        QuestionType::Existence => vec![req(0, Region::Anywhere)],
        QuestionType::Counting => vec![req(answer, Region::Anywhere)],
        QuestionType::SpatialRelationship => {
            let container = q.container.expect("spatial question without container");
            let inside_sites = room
                .receptacles
                .iter()
                .filter(|r| r.class == container)
                .count();
            let outside_sites = n_sites - inside_sites;
            if answer == YES {
                let k_in = rng.random_range(1..=inside_sites.clamp(1, MAX_COUNT));
                let k_out = rng.random_range(0..=(MAX_COUNT - k_in).min(1).min(outside_sites));
                vec![
                    req(k_in, Region::InClass(container)),
                    req(k_out, Region::NotInClass(container)),
                ]
            } else {
                let k_out = rng.random_range(0..=2usize.min(outside_sites));
                vec![req(k_out, Region::NotInClass(container))]
            }
        }
    };
    Constraints {
        requirements,
        distractors,
    }
}

/// All questions of `qtype` that make sense in `room`.
pub fn question_pool(room: &RoomSpec, qtype: QuestionType) -> Vec<Question> {
    match qtype {
        QuestionType::Existence => ObjectClass::ALL
            .into_iter()
            .map(Question::existence)
            .collect(),
        QuestionType::Counting => ObjectClass::ALL
            .into_iter()
            .map(Question::counting)
            .collect(),
        QuestionType::SpatialRelationship => {
            let mut present: Vec<ReceptacleClass> =
                room.receptacles.iter().map(|r| r.class).collect();
            present.sort();
            present.dedup();
            ObjectClass::ALL
                .into_iter()
                .flat_map(|o| present.iter().map(move |&r| Question::spatial(o, r)))
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    /// New configurations of training rooms, for seen-room evaluation.
    Seen,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Seen => "seen",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub item_id: String,
    pub question: Question,
    pub text: String,
    pub config: SceneConfig,
    pub answer: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub seed: u64,
    pub scale: f64,
    /// Emit a seen-room evaluation split alongside train/test.
    pub seen_split: bool,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            seed: 0,
            scale: 1.0,
            seen_split: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub items: Vec<DatasetItem>,
    pub rooms: RoomSplit,
    pub seed: u64,
    pub scale: f64,
}

/// Items per (room, qtype): scaled count rounded up to a whole number of
/// balanced blocks.
pub fn items_per_room(base: usize, scale: f64, qtype: QuestionType) -> usize {
    let k = qtype.num_choices();
    let raw = (base as f64 * scale).ceil().max(1.0) as usize;
    raw.div_ceil(k) * k
}

/// Stable 64-bit FNV-1a, used to derive per-block seeds.
pub fn stable_hash(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in part.as_bytes().iter().chain(std::iter::once(&0x1f)) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

struct Block<'a> {
    room: &'a RoomSpec,
    qtype: QuestionType,
    split: Split,
    question: Question,
    index: usize,
}

fn generate_block(block: &Block<'_>, seed: u64) -> Result<Vec<DatasetItem>, QuestionError> {
    let room = block.room;
    let q = block.question;
    let text = q.text();
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[
        &seed.to_string(),
        &room.room_id,
        block.qtype.name(),
        block.split.name(),
        &text,
        &block.index.to_string(),
    ]));
    let k = q.qtype.num_choices();
    let mut out = Vec::with_capacity(k);
    for answer in 0..k {
        let fail = |reason: String| QuestionError::InfeasibleItem {
            room: room.room_id.clone(),
            question: text.clone(),
            reason,
        };
        let cons = constraints_for(room, &q, answer, &mut rng);
        let config =
            generate_configuration(room, &cons, &mut rng).map_err(|e| fail(e.to_string()))?;
        load_scene(room, &config).map_err(|e| fail(e.to_string()))?;
        let got = answer_of(room, &config, &q);
        if got != answer {
            return Err(fail(format!("constructed answer {got}, wanted {answer}")));
        }
        out.push(DatasetItem {
            item_id: format!(
                "{}/{}/{}/{:05}",
                block.split.name(),
                room.room_id,
                block.qtype.name(),
                block.index * k + answer
            ),
            question: q,
            text: text.clone(),
            config,
            answer,
            split: block.split,
        });
    }
    Ok(out)
}

fn plan_blocks<'a>(
    rooms: &'a [RoomSpec],
    split_map: &RoomSplit,
    opts: &DatasetOptions,
) -> Result<Vec<Block<'a>>, QuestionError> {
    let by_id: BTreeMap<&str, &RoomSpec> = rooms.iter().map(|r| (r.room_id.as_str(), r)).collect();
    let lookup = |id: &String| {
        by_id.get(id.as_str()).copied().ok_or_else(|| {
            QuestionError::Infeasible(format!("room {id:?} in split map but not loaded"))
        })
    };
    let mut plan: Vec<(&RoomSpec, Split, usize)> = Vec::new();
    for id in &split_map.train {
        plan.push((lookup(id)?, Split::Train, TRAIN_PER_ROOM));
    }
    for id in &split_map.test {
        plan.push((lookup(id)?, Split::Test, TEST_PER_ROOM));
    }
    if opts.seen_split {
        for id in &split_map.train {
            plan.push((lookup(id)?, Split::Seen, TEST_PER_ROOM));
        }
    }

    let mut blocks = Vec::new();
    for (room, split, base) in plan {
        for qtype in QuestionType::ALL {
            let mut pool = question_pool(room, qtype);
            if pool.is_empty() {
                return Err(QuestionError::Infeasible(format!(
                    "room {:?} supports no {qtype} questions",
                    room.room_id
                )));
            }
            let mut prng = ChaCha8Rng::seed_from_u64(stable_hash(&[
                &opts.seed.to_string(),
                &room.room_id,
                qtype.name(),
                split.name(),
                "pool",
            ]));
            pool.shuffle(&mut prng);
            let n_blocks = items_per_room(base, opts.scale, qtype) / qtype.num_choices();
            for index in 0..n_blocks {
                blocks.push(Block {
                    room,
                    qtype,
                    split,
                    question: pool[index % pool.len()],
                    index,
                });
            }
        }
    }
    Ok(blocks)
}

/// Generate a balanced dataset. Output order and content depend only on
/// the inputs, whether or not generation runs in parallel.
pub fn generate_dataset(
    rooms: &[RoomSpec],
    split_map: &RoomSplit,
    opts: &DatasetOptions,
) -> Result<Dataset, QuestionError> {
    if split_map.train.is_empty() || split_map.test.is_empty() {
        return Err(QuestionError::Infeasible(
            "need at least one room per split".into(),
        ));
    }
    let blocks = plan_blocks(rooms, split_map, opts)?;
    let seed = opts.seed;
    #[cfg(feature = "parallel")]
    let chunks: Vec<Result<Vec<DatasetItem>, QuestionError>> = {
        use rayon::prelude::*;
        blocks.par_iter().map(|b| generate_block(b, seed)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Result<Vec<DatasetItem>, QuestionError>> =
        blocks.iter().map(|b| generate_block(b, seed)).collect();
    let mut items = Vec::new();
    for c in chunks {
        items.extend(c?);
    }
    Ok(Dataset {
        items,
        rooms: split_map.clone(),
        seed,
        scale: opts.scale,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    /// split -> qtype -> item count
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub question_texts: usize,
}

impl BalanceReport {
    pub fn count(&self, split: Split, qtype: QuestionType) -> usize {
        self.counts
            .get(split.name())
            .and_then(|m| m.get(qtype.name()))
            .copied()
            .unwrap_or(0)
    }

    pub fn split_total(&self, split: Split) -> usize {
        self.counts
            .get(split.name())
            .map(|m| m.values().sum())
            .unwrap_or(0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BalanceError {
    #[error("imbalanced answers for {question:?} in room {room:?} ({split}): {histogram:?}")]
    ImbalanceFound {
        split: String,
        room: String,
        question: String,
        histogram: Vec<usize>,
    },
}

/// Check that every question text has a uniform answer histogram within
/// each (split, room).
pub fn verify_balance(items: &[DatasetItem]) -> Result<BalanceReport, BalanceError> {
    let mut hist: BTreeMap<(Split, &str, String), Vec<usize>> = BTreeMap::new();
    let mut report = BalanceReport::default();
    for it in items {
        let h = hist
            .entry((it.split, it.config.room_id.as_str(), it.question.text()))
            .or_insert_with(|| vec![0; it.question.qtype.num_choices()]);
        if it.answer < h.len() {
            h[it.answer] += 1;
        }
        *report
            .counts
            .entry(it.split.name().to_string())
            .or_default()
            .entry(it.question.qtype.name().to_string())
            .or_default() += 1;
    }
    let mut texts = std::collections::BTreeSet::new();
    for ((split, room, text), h) in hist {
        let total: usize = h.iter().sum();
        if h.iter().any(|&c| c * h.len() != total) {
            return Err(BalanceError::ImbalanceFound {
                split: split.name().to_string(),
                room: room.to_string(),
                question: text,
                histogram: h,
            });
        }
        texts.insert(text);
    }
    report.question_texts = texts.len();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub scale_factor: f64,
    pub rooms: RoomSplit,
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub files: BTreeMap<String, String>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetItem> {
        self.items.iter().filter(move |it| it.split == split)
    }

    /// One JSON object per line.
    pub fn to_jsonl(items: &[&DatasetItem]) -> String {
        let mut s = String::new();
        for it in items {
            s.push_str(&serde_json::to_string(it).expect("dataset item serializes"));
            s.push('\n');
        }
        s
    }

    pub fn parse_jsonl(text: &str) -> Result<Vec<DatasetItem>, serde_json::Error> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect()
    }

    pub fn manifest(&self) -> Manifest {
        let report = verify_balance(&self.items).unwrap_or_default();
        let mut files = BTreeMap::new();
        for split in [Split::Train, Split::Test, Split::Seen] {
            if self.split(split).next().is_some() {
                files.insert(split.name().to_string(), format!("{}.jsonl", split.name()));
            }
        }
        Manifest {
            schema_version: DATASET_SCHEMA_VERSION,
            seed: self.seed,
            scale_factor: self.scale,
            rooms: self.rooms.clone(),
            counts: report.counts,
            files,
        }
    }

    /// Write `<split>.jsonl` files and `manifest.json` into `dir`.
    pub fn write_dir(&self, dir: &std::path::Path) -> std::io::Result<Manifest> {
        std::fs::create_dir_all(dir)?;
        let manifest = self.manifest();
        for (split_name, file) in &manifest.files {
            let items: Vec<&DatasetItem> = self
                .items
                .iter()
                .filter(|it| it.split.name() == split_name)
                .collect();
            std::fs::write(dir.join(file), Self::to_jsonl(&items))?;
        }
        let m = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), m + "\n")?;
        Ok(manifest)
    }

    pub fn read_dir(dir: &std::path::Path) -> std::io::Result<Dataset> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(std::io::Error::other)?;
        let mut items = Vec::new();
        for file in manifest.files.values() {
            let text = std::fs::read_to_string(dir.join(file))?;
            items.extend(Self::parse_jsonl(&text).map_err(std::io::Error::other)?);
        }
        // generation order: train, test, seen
        items.sort_by_key(|it| it.split);
        Ok(Dataset {
            items,
            rooms: manifest.rooms,
            seed: manifest.seed,
            scale: manifest.scale_factor,
        })
    }
}
