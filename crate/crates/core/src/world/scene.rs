use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{HeightBand, ObjectClass, ReceptacleClass};
use crate::geom::{Cell, Heading, Pitch, Pose};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("malformed spec: {0}")]
    MalformedSpec(String),
    #[error("layout has {unreachable} free cells unreachable from {from:?}")]
    UnreachableLayout { from: Cell, unreachable: usize },
}

fn malformed<T>(msg: impl Into<String>) -> Result<T, SceneError> {
    Err(SceneError::MalformedSpec(msg.into()))
}

/// Visibility and interaction constants, in cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewParams {
    pub view_range: i32,
    pub interaction_range: i32,
    /// Inclusive `[min, max]` viewing distance at pitch -30.
    pub down_window: (i32, i32),
    pub level_window: (i32, i32),
    pub up_window: (i32, i32),
}

impl Default for ViewParams {
    fn default() -> Self {
        ViewParams {
            view_range: 12,
            interaction_range: 4,
            down_window: (0, 4),
            level_window: (2, 12),
            up_window: (4, 12),
        }
    }
}

impl ViewParams {
    pub fn window(&self, pitch: Pitch) -> (i32, i32) {
        match pitch {
            Pitch::Down => self.down_window,
            Pitch::Level => self.level_window,
            Pitch::Up => self.up_window,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceptacleSpec {
    pub class: ReceptacleClass,
    pub cell: Cell,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_band: Option<HeightBand>,
    #[serde(default)]
    pub open: bool,
}

/// Static room layout. The outer ring of cells is always wall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub room_id: String,
    pub width: i32,
    pub height: i32,
    #[serde(default)]
    pub blocked: Vec<Cell>,
    #[serde(default)]
    pub receptacles: Vec<ReceptacleSpec>,
    /// Floor cells where loose objects may be placed.
    #[serde(default)]
    pub floor_sites: Vec<Cell>,
}

impl RoomSpec {
    pub fn empty(room_id: impl Into<String>, width: i32, height: i32) -> Self {
        RoomSpec {
            room_id: room_id.into(),
            width,
            height,
            blocked: Vec::new(),
            receptacles: Vec::new(),
            floor_sites: Vec::new(),
        }
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn on_perimeter(&self, c: Cell) -> bool {
        c.x == 0 || c.y == 0 || c.x == self.width - 1 || c.y == self.height - 1
    }

    /// Cells an agent may stand on: interior, not blocked, no receptacle.
    pub fn free_cells(&self) -> Vec<Cell> {
        let blocked: HashSet<Cell> = self
            .blocked
            .iter()
            .copied()
            .chain(self.receptacles.iter().map(|r| r.cell))
            .collect();
        let mut out = Vec::new();
        for y in 1..self.height - 1 {
            for x in 1..self.width - 1 {
                let c = Cell::new(x, y);
                if !blocked.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub class: ObjectClass,
    pub instance_id: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Receptacle {
    pub class: ReceptacleClass,
    pub cell: Cell,
    pub openable: bool,
    pub is_open: bool,
    pub height_band: HeightBand,
    pub contents: Vec<ObjectInstance>,
    pub surface: Vec<ObjectInstance>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloorObject {
    pub cell: Cell,
    pub object: ObjectInstance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentState {
    pub cell: Cell,
    pub heading: Heading,
    pub pitch: Pitch,
}

impl AgentState {
    pub fn new(cell: Cell, heading: Heading, pitch: Pitch) -> Self {
        AgentState {
            cell,
            heading,
            pitch,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.cell, self.heading)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Floor(Cell),
    /// Index into the room's receptacle list.
    Inside(usize),
    On(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub instance_id: u32,
    pub class: ObjectClass,
    pub location: Location,
}

/// A movable-object arrangement for one room, plus the agent's start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub room_id: String,
    pub seed: u64,
    pub start: AgentState,
    pub placements: Vec<Placement>,
}

impl SceneConfig {
    /// No objects; agent at the first free cell facing north.
    pub fn empty(room: &RoomSpec) -> Self {
        let start = room
            .free_cells()
            .first()
            .copied()
            .unwrap_or(Cell::new(1, 1));
        SceneConfig {
            room_id: room.room_id.clone(),
            seed: 0,
            start: AgentState::new(start, Heading::N, Pitch::Level),
            placements: Vec::new(),
        }
    }
}

/// On-disk document holding a room and optionally one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub schema_version: u32,
    pub room: RoomSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SceneConfig>,
}

impl SceneDocument {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let doc: SceneDocument = serde_json::from_str(text)
            .map_err(|e| SceneError::MalformedSpec(format!("json: {e}")))?;
        if doc.schema_version != SCHEMA_VERSION {
            return malformed(format!("unsupported schema version {}", doc.schema_version));
        }
        Ok(doc)
    }
}

/// A loaded, validated room with objects in place.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub room_id: String,
    pub width: i32,
    pub height: i32,
    blocked: Vec<bool>,
    receptacle_at: Vec<Option<usize>>,
    pub receptacles: Vec<Receptacle>,
    pub loose_objects: Vec<FloorObject>,
    pub rng_seed: u64,
    pub params: ViewParams,
}

impl Scene {
    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn index(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.blocked[self.index(c)]
    }

    pub fn receptacle_at(&self, c: Cell) -> Option<usize> {
        if self.in_bounds(c) {
            self.receptacle_at[self.index(c)]
        } else {
            None
        }
    }

    /// Walkable: in bounds, not wall, not a receptacle.
    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.blocked[self.index(c)] && self.receptacle_at(c).is_none()
    }

    /// Whether `c` stops a line of sight passing through it.
    pub fn is_opaque(&self, c: Cell) -> bool {
        !self.is_free(c)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        self.cells().filter(|&c| self.is_free(c)).collect()
    }

    pub fn free_mask(&self) -> Vec<bool> {
        self.cells().map(|c| self.is_free(c)).collect()
    }

    /// Cells that can hold objects: free floor and receptacles.
    pub fn object_site_mask(&self) -> Vec<bool> {
        self.cells()
            .map(|c| self.is_free(c) || self.receptacle_at(c).is_some())
            .collect()
    }

    pub fn floor_objects_at(&self, c: Cell) -> impl Iterator<Item = &ObjectInstance> {
        self.loose_objects
            .iter()
            .filter(move |f| f.cell == c)
            .map(|f| &f.object)
    }

    /// Every object instance with the cell it sits at.
    pub fn all_objects(&self) -> Vec<(Cell, ObjectInstance, Option<usize>)> {
        let mut out: Vec<_> = self
            .loose_objects
            .iter()
            .map(|f| (f.cell, f.object, None))
            .collect();
        for (i, r) in self.receptacles.iter().enumerate() {
            for o in r.contents.iter().chain(r.surface.iter()) {
                out.push((r.cell, *o, Some(i)));
            }
        }
        out.sort_by_key(|(_, o, _)| o.instance_id);
        out
    }

    /// Receptacle open flags; the only mutable scene state.
    pub fn open_flags(&self) -> Vec<bool> {
        self.receptacles.iter().map(|r| r.is_open).collect()
    }
}

/// Build a scene from a room layout and an object configuration.
pub fn load_scene(room: &RoomSpec, config: &SceneConfig) -> Result<Scene, SceneError> {
    load_scene_with(room, config, ViewParams::default())
}

pub fn load_scene_with(
    room: &RoomSpec,
    config: &SceneConfig,
    params: ViewParams,
) -> Result<Scene, SceneError> {
    if room.width < 3 || room.height < 3 {
        return malformed(format!("grid {}x{} too small", room.width, room.height));
    }
    if config.room_id != room.room_id {
        return malformed(format!(
            "config for room {:?} applied to room {:?}",
            config.room_id, room.room_id
        ));
    }
    let n = (room.width * room.height) as usize;
    let idx = |c: Cell| (c.y * room.width + c.x) as usize;
    let mut blocked = vec![false; n];
    for y in 0..room.height {
        for x in 0..room.width {
            let c = Cell::new(x, y);
            if room.on_perimeter(c) {
                blocked[idx(c)] = true;
            }
        }
    }
    for &c in &room.blocked {
        if !room.in_bounds(c) {
            return malformed(format!("blocked cell {c:?} out of bounds"));
        }
        blocked[idx(c)] = true;
    }

    let mut receptacle_at = vec![None; n];
    let mut receptacles = Vec::with_capacity(room.receptacles.len());
    for (i, spec) in room.receptacles.iter().enumerate() {
        let c = spec.cell;
        if !room.in_bounds(c) || room.on_perimeter(c) {
            return malformed(format!("receptacle {i} at {c:?} is not an interior cell"));
        }
        if blocked[idx(c)] {
            return malformed(format!("receptacle {i} at {c:?} sits on a wall"));
        }
        if receptacle_at[idx(c)].is_some() {
            return malformed(format!("two receptacles at {c:?}"));
        }
        let openable = spec.class.openable();
        if spec.open && !openable {
            return malformed(format!("receptacle {i} ({}) cannot be open", spec.class));
        }
        receptacle_at[idx(c)] = Some(i);
        receptacles.push(Receptacle {
            class: spec.class,
            cell: c,
            openable,
            is_open: spec.open,
            height_band: spec.height_band.unwrap_or(spec.class.default_band()),
            contents: Vec::new(),
            surface: Vec::new(),
        });
    }

    let is_free =
        |c: Cell| room.in_bounds(c) && !blocked[idx(c)] && receptacle_at[idx(c)].is_none();

    let mut ids = HashSet::new();
    let mut loose_objects: Vec<FloorObject> = Vec::new();
    for p in &config.placements {
        if !ids.insert(p.instance_id) {
            return malformed(format!("duplicate instance id {}", p.instance_id));
        }
        let obj = ObjectInstance {
            class: p.class,
            instance_id: p.instance_id,
        };
        match p.location {
            Location::Floor(c) => {
                if !is_free(c) {
                    return malformed(format!("floor placement at non-free cell {c:?}"));
                }
                if loose_objects
                    .iter()
                    .any(|f| f.cell == c && f.object.class == p.class)
                {
                    return malformed(format!("two {} on floor cell {c:?}", p.class));
                }
                loose_objects.push(FloorObject {
                    cell: c,
                    object: obj,
                });
            }
            Location::Inside(r) | Location::On(r) => {
                let Some(rec) = receptacles.get_mut(r) else {
                    return malformed(format!("missing receptacle {r}"));
                };
                let inside = matches!(p.location, Location::Inside(_));
                if inside && !rec.openable {
                    return malformed(format!("{} has no interior", rec.class));
                }
                let list = if inside {
                    &mut rec.contents
                } else {
                    &mut rec.surface
                };
                if list.iter().any(|o| o.class == p.class) {
                    return malformed(format!("two {} at receptacle {r}", p.class));
                }
                list.push(obj);
            }
        }
    }

    // connectivity over free cells
    let free: Vec<Cell> = (0..room.height)
        .flat_map(|y| (0..room.width).map(move |x| Cell::new(x, y)))
        .filter(|&c| is_free(c))
        .collect();
    if let Some(&first) = free.first() {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([first]);
        seen[idx(first)] = true;
        let mut count = 1;
        while let Some(c) = queue.pop_front() {
            for nb in c.neighbors4() {
                if is_free(nb) && !seen[idx(nb)] {
                    seen[idx(nb)] = true;
                    count += 1;
                    queue.push_back(nb);
                }
            }
        }
        if count != free.len() {
            return Err(SceneError::UnreachableLayout {
                from: first,
                unreachable: free.len() - count,
            });
        }
    }

    if !is_free(config.start.cell) {
        return malformed(format!("agent start {:?} is not free", config.start.cell));
    }

    Ok(Scene {
        room_id: room.room_id.clone(),
        width: room.width,
        height: room.height,
        blocked,
        receptacle_at,
        receptacles,
        loose_objects,
        rng_seed: config.seed,
        params,
    })
}
