//! The deterministic warehouse grid world.
//!
//! Coordinates: `x` grows east, `y` grows north, `(0, 0)` is the south-west
//! cell. Everything outside `[0, width) x [0, height)` behaves like a wall.

mod bfs;
mod scan;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::OOState;

pub use bfs::{bfs_optimal_steps, Unsolvable};
pub use scan::{scan_to_relations, simulate_scan, Beam, Echo, Scan, ScanError, TouchRelations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dir: Direction) -> Self {
        let (dx, dy) = dir.delta();
        Self::new(self.x + dx, self.y + dy)
    }

    /// Continuous coordinates of the cell center.
    pub fn center(self) -> (f64, f64) {
        (self.x as f64 + 0.5, self.y as f64 + 0.5)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::South,
        Direction::East,
        Direction::West,
    ];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::North => (0, 1),
            Direction::South => (0, -1),
            Direction::East => (1, 0),
            Direction::West => (-1, 0),
        }
    }

    /// World bearing in radians, counter-clockwise from east.
    pub fn bearing(self) -> f64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            Direction::East => 0.0,
            Direction::North => FRAC_PI_2,
            Direction::West => PI,
            Direction::South => 3.0 * FRAC_PI_2,
        }
    }
}

/// The six taxi actions. Declaration order is the planner's tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    North,
    South,
    East,
    West,
    Pickup,
    Dropoff,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::North,
        Action::South,
        Action::East,
        Action::West,
        Action::Pickup,
        Action::Dropoff,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            Action::North => Some(Direction::North),
            Action::South => Some(Direction::South),
            Action::East => Some(Direction::East),
            Action::West => Some(Direction::West),
            Action::Pickup | Action::Dropoff => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::North => "North",
            Action::South => "South",
            Action::East => "East",
            Action::West => "West",
            Action::Pickup => "PICKUP",
            Action::Dropoff => "DROPOFF",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown action {s:?}"))
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("map dimensions must be positive, got {width}x{height}")]
    EmptyGrid { width: u32, height: u32 },
    #[error("{what} {cell} lies outside the {width}x{height} grid")]
    OutOfBounds {
        what: &'static str,
        cell: Cell,
        width: u32,
        height: u32,
    },
    #[error("{what} {cell} is a wall cell")]
    OnWall { what: &'static str, cell: Cell },
}

/// Occupancy grid plus the fixed task locations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: u32,
    height: u32,
    walls: BTreeSet<Cell>,
    destination: Cell,
    box_spawns: Vec<Cell>,
    agent_start: Cell,
    occupied: Vec<bool>,
}

impl GridMap {
    pub fn new(
        width: u32,
        height: u32,
        walls: impl IntoIterator<Item = Cell>,
        destination: Cell,
        box_spawns: Vec<Cell>,
        agent_start: Cell,
    ) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::EmptyGrid { width, height });
        }
        let walls: BTreeSet<Cell> = walls.into_iter().collect();
        let in_bounds = |c: Cell| c.x >= 0 && c.y >= 0 && (c.x as u32) < width && (c.y as u32) < height;
        let check = |what: &'static str, cell: Cell| {
            if !in_bounds(cell) {
                Err(MapError::OutOfBounds {
                    what,
                    cell,
                    width,
                    height,
                })
            } else {
                Ok(())
            }
        };
        for &w in &walls {
            check("wall", w)?;
        }
        let mut special = vec![("destination", destination), ("agent start", agent_start)];
        special.extend(box_spawns.iter().map(|&b| ("box spawn", b)));
        for (what, cell) in special {
            check(what, cell)?;
            if walls.contains(&cell) {
                return Err(MapError::OnWall { what, cell });
            }
        }
        let mut occupied = vec![false; (width * height) as usize];
        for w in &walls {
            occupied[(w.y as u32 * width + w.x as u32) as usize] = true;
        }
        Ok(Self {
            width,
            height,
            walls,
            destination,
            box_spawns,
            agent_start,
            occupied,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn walls(&self) -> &BTreeSet<Cell> {
        &self.walls
    }

    pub fn destination(&self) -> Cell {
        self.destination
    }

    pub fn box_spawns(&self) -> &[Cell] {
        &self.box_spawns
    }

    pub fn agent_start(&self) -> Cell {
        self.agent_start
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as u32) < self.width && (c.y as u32) < self.height
    }

    /// Wall cells and everything off the grid.
    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.occupied[(c.y as u32 * self.width + c.x as u32) as usize]
    }

    /// All non-wall cells, row-major from the south-west corner.
    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height as i32)
            .flat_map(move |y| (0..self.width as i32).map(move |x| Cell::new(x, y)))
            .filter(move |&c| !self.is_blocked(c))
    }
}

/// Reward constants. Only their signs matter to the acceptance checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rewards {
    pub step: f64,
    pub success: f64,
    pub illegal: f64,
}

impl Default for Rewards {
    fn default() -> Self {
        Self {
            step: -1.0,
            success: 20.0,
            illegal: -10.0,
        }
    }
}

impl Rewards {
    /// Reward of an observed or predicted transition.
    pub fn of(&self, s: &OOState, a: Action, next: &OOState) -> f64 {
        if is_delivery(s, a, next) {
            self.success
        } else if matches!(a, Action::Pickup | Action::Dropoff) && s == next {
            self.illegal
        } else {
            self.step
        }
    }
}

/// A transition that completes the task: the carried box is put down.
pub fn is_delivery(s: &OOState, a: Action, next: &OOState) -> bool {
    a == Action::Dropoff && s.carrying() && !next.carrying()
}

/// One simulator transition.
pub fn step(s: &OOState, a: Action, map: &GridMap, rewards: &Rewards) -> (OOState, f64) {
    let mut next = s.clone();
    match a.direction() {
        Some(dir) => {
            let target = s.agent.offset(dir);
            if !map.is_blocked(target) {
                next.agent = target;
                for b in next.boxes.iter_mut().filter(|b| b.in_bot) {
                    b.x = target.x;
                    b.y = target.y;
                }
            }
        }
        None if a == Action::Pickup => {
            let free_hands = !s.carrying();
            if let Some(b) = next.target_mut() {
                if free_hands && b.cell() == s.agent {
                    b.in_bot = true;
                }
            }
        }
        None => {
            if s.agent == map.destination() {
                if let Some(b) = next.boxes.iter_mut().find(|b| b.in_bot) {
                    b.in_bot = false;
                }
            }
        }
    }
    let r = rewards.of(s, a, &next);
    (next, r)
}
