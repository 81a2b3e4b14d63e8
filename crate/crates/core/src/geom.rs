//! Grid coordinates, headings and camera pitch.

use serde::{Deserialize, Serialize};

/// A grid cell. `x` grows east, `y` grows south; one cell is 25 cm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Cell {
        Cell::new(self.x + dx, self.y + dy)
    }

    pub fn manhattan(self, other: Cell) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn dist2(self, other: Cell) -> i32 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn neighbors4(self) -> [Cell; 4] {
        [
            self.offset(0, -1),
            self.offset(1, 0),
            self.offset(0, 1),
            self.offset(-1, 0),
        ]
    }
}

impl From<[i32; 2]> for Cell {
    fn from(v: [i32; 2]) -> Self {
        Cell::new(v[0], v[1])
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    N,
    E,
    S,
    W,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];

    /// Unit step `(dx, dy)` along the heading.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Heading::N => (0, -1),
            Heading::E => (1, 0),
            Heading::S => (0, 1),
            Heading::W => (-1, 0),
        }
    }

    pub fn left(self) -> Heading {
        match self {
            Heading::N => Heading::W,
            Heading::W => Heading::S,
            Heading::S => Heading::E,
            Heading::E => Heading::N,
        }
    }

    pub fn right(self) -> Heading {
        match self {
            Heading::N => Heading::E,
            Heading::E => Heading::S,
            Heading::S => Heading::W,
            Heading::W => Heading::N,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Heading of a unit 4-neighbour step, if `d` is one.
    pub fn from_delta(dx: i32, dy: i32) -> Option<Heading> {
        Heading::ALL.into_iter().find(|h| h.delta() == (dx, dy))
    }
}

/// Camera pitch, in 30 degree bands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pitch {
    #[serde(rename = "down")]
    Down,
    #[serde(rename = "level")]
    Level,
    #[serde(rename = "up")]
    Up,
}

impl Pitch {
    pub const ALL: [Pitch; 3] = [Pitch::Down, Pitch::Level, Pitch::Up];

    pub fn degrees(self) -> i32 {
        match self {
            Pitch::Down => -30,
            Pitch::Level => 0,
            Pitch::Up => 30,
        }
    }

    pub fn raised(self) -> Option<Pitch> {
        match self {
            Pitch::Down => Some(Pitch::Level),
            Pitch::Level => Some(Pitch::Up),
            Pitch::Up => None,
        }
    }

    pub fn lowered(self) -> Option<Pitch> {
        match self {
            Pitch::Up => Some(Pitch::Level),
            Pitch::Level => Some(Pitch::Down),
            Pitch::Down => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Cell and heading; the frame in which egocentric windows are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub cell: Cell,
    pub heading: Heading,
}

impl Pose {
    pub fn new(cell: Cell, heading: Heading) -> Self {
        Pose { cell, heading }
    }

    /// World cell at `forward` cells ahead and `lateral` cells to the right.
    pub fn to_world(self, forward: i32, lateral: i32) -> Cell {
        let (fx, fy) = self.heading.delta();
        let (rx, ry) = self.heading.right().delta();
        Cell::new(
            self.cell.x + forward * fx + lateral * rx,
            self.cell.y + forward * fy + lateral * ry,
        )
    }

    /// Inverse of [`Pose::to_world`]: `(forward, lateral)` of `c`.
    pub fn to_ego(self, c: Cell) -> (i32, i32) {
        let dx = c.x - self.cell.x;
        let dy = c.y - self.cell.y;
        let (fx, fy) = self.heading.delta();
        let (rx, ry) = self.heading.right().delta();
        (dx * fx + dy * fy, dx * rx + dy * ry)
    }
}

/// Integer Bresenham line from `a` to `b`, both endpoints included.
pub fn bresenham(a: Cell, b: Cell) -> Vec<Cell> {
    let mut out = Vec::new();
    let (mut x, mut y) = (a.x, a.y);
    let dx = (b.x - a.x).abs();
    let dy = -(b.y - a.y).abs();
    let sx = if a.x < b.x { 1 } else { -1 };
    let sy = if a.y < b.y { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        out.push(Cell::new(x, y));
        if x == b.x && y == b.y {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotations_compose() {
        for h in Heading::ALL {
            assert_eq!(h.left().right(), h);
            assert_eq!(h.left().left().left().left(), h);
        }
        assert_eq!(Heading::N.left(), Heading::W);
    }

    #[test]
    fn ego_round_trip() {
        for h in Heading::ALL {
            let p = Pose::new(Cell::new(4, 7), h);
            for f in -3..4 {
                for l in -3..4 {
                    assert_eq!(p.to_ego(p.to_world(f, l)), (f, l));
                }
            }
        }
    }

    #[test]
    fn bresenham_endpoints_and_adjacency() {
        let line = bresenham(Cell::new(0, 0), Cell::new(5, -3));
        assert_eq!(line.first(), Some(&Cell::new(0, 0)));
        assert_eq!(line.last(), Some(&Cell::new(5, -3)));
        for w in line.windows(2) {
            assert!((w[0].x - w[1].x).abs() <= 1 && (w[0].y - w[1].y).abs() <= 1);
        }
    }
}
