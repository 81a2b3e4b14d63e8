//! Object and receptacle vocabularies, and their memory channel assignment.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::Pitch;

/// Small movable objects that questions ask about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Apple,
    Bread,
    Cup,
    Fork,
    Lettuce,
    Book,
    Potato,
    Tomato,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 8] = [
        ObjectClass::Apple,
        ObjectClass::Bread,
        ObjectClass::Cup,
        ObjectClass::Fork,
        ObjectClass::Lettuce,
        ObjectClass::Book,
        ObjectClass::Potato,
        ObjectClass::Tomato,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Apple => "apple",
            ObjectClass::Bread => "bread",
            ObjectClass::Cup => "cup",
            ObjectClass::Fork => "fork",
            ObjectClass::Lettuce => "lettuce",
            ObjectClass::Book => "book",
            ObjectClass::Potato => "potato",
            ObjectClass::Tomato => "tomato",
        }
    }

    pub fn plural(self) -> &'static str {
        match self {
            ObjectClass::Apple => "apples",
            ObjectClass::Bread => "loaves of bread",
            ObjectClass::Cup => "cups",
            ObjectClass::Fork => "forks",
            ObjectClass::Lettuce => "heads of lettuce",
            ObjectClass::Book => "books",
            ObjectClass::Potato => "potatoes",
            ObjectClass::Tomato => "tomatoes",
        }
    }

    /// Indefinite phrase used by the question templates.
    pub fn with_article(self) -> &'static str {
        match self {
            ObjectClass::Apple => "an apple",
            ObjectClass::Bread => "bread",
            ObjectClass::Cup => "a cup",
            ObjectClass::Fork => "a fork",
            ObjectClass::Lettuce => "lettuce",
            ObjectClass::Book => "a book",
            ObjectClass::Potato => "a potato",
            ObjectClass::Tomato => "a tomato",
        }
    }

    pub fn channel(self) -> usize {
        self.index()
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Fixed fixtures that hold objects inside (openable) or on top.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceptacleClass {
    Fridge,
    Cabinet,
    Microwave,
    Drawer,
    Countertop,
    Table,
}

impl ReceptacleClass {
    pub const ALL: [ReceptacleClass; 6] = [
        ReceptacleClass::Fridge,
        ReceptacleClass::Cabinet,
        ReceptacleClass::Microwave,
        ReceptacleClass::Drawer,
        ReceptacleClass::Countertop,
        ReceptacleClass::Table,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ReceptacleClass::Fridge => "fridge",
            ReceptacleClass::Cabinet => "cabinet",
            ReceptacleClass::Microwave => "microwave",
            ReceptacleClass::Drawer => "drawer",
            ReceptacleClass::Countertop => "countertop",
            ReceptacleClass::Table => "table",
        }
    }

    pub fn openable(self) -> bool {
        matches!(
            self,
            ReceptacleClass::Fridge
                | ReceptacleClass::Cabinet
                | ReceptacleClass::Microwave
                | ReceptacleClass::Drawer
        )
    }

    /// Preposition used in spatial-relationship templates.
    pub fn preposition(self) -> &'static str {
        if self.openable() {
            "in"
        } else {
            "on"
        }
    }

    pub fn default_band(self) -> HeightBand {
        match self {
            ReceptacleClass::Fridge => HeightBand::Mid,
            ReceptacleClass::Cabinet => HeightBand::Low,
            ReceptacleClass::Microwave => HeightBand::High,
            ReceptacleClass::Drawer => HeightBand::Low,
            ReceptacleClass::Countertop => HeightBand::Mid,
            ReceptacleClass::Table => HeightBand::Mid,
        }
    }

    pub fn channel(self) -> usize {
        ObjectClass::ALL.len() + self.index()
    }
}

impl fmt::Display for ReceptacleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Vertical band a receptacle's contents sit in; gated by camera pitch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeightBand {
    Low,
    Mid,
    High,
}

impl HeightBand {
    /// The pitch at which this band is in view.
    pub fn pitch(self) -> Pitch {
        match self {
            HeightBand::Low => Pitch::Down,
            HeightBand::Mid => Pitch::Level,
            HeightBand::High => Pitch::Up,
        }
    }
}

/// Number of semantic detection channels (objects plus receptacles).
pub const NUM_CLASSES: usize = ObjectClass::ALL.len() + ReceptacleClass::ALL.len();

pub fn channel_names() -> Vec<String> {
    ObjectClass::ALL
        .iter()
        .map(|c| c.name().to_string())
        .chain(ReceptacleClass::ALL.iter().map(|r| r.name().to_string()))
        .chain(["free", "coverage", "intent"].iter().map(|s| s.to_string()))
        .collect()
}
