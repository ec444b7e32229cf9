//! Simulated planar LIDAR and the scan-to-relation mapping.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

use super::{Cell, Direction, GridMap};
use crate::model::OOState;
use crate::raycast;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("a scan needs at least 4 beams, got {0}")]
    TooFewBeams(usize),
    #[error("max range must be positive and finite, got {0}")]
    BadMaxRange(f64),
    #[error("beam {index}: range {range} outside [0, {max_range}]")]
    RangeOutOfBounds { index: usize, range: f64, max_range: f64 },
    #[error("beam {index}: bearing {bearing} is not strictly increasing within [0, 2pi)")]
    BadBearing { index: usize, bearing: f64 },
    #[error("no beam covers the {0:?} direction")]
    MissingCardinal(Direction),
}

/// What stopped a beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Echo {
    Wall,
    Box,
    /// An obstacle of unknown class (scans loaded from range data).
    Unclassified,
    /// Nothing within range.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beam {
    pub bearing: f64,
    pub range: f64,
    pub echo: Echo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    beams: Vec<Beam>,
    max_range: f64,
}

impl Scan {
    pub fn new(beams: Vec<Beam>, max_range: f64) -> Result<Self, ScanError> {
        if !(max_range.is_finite() && max_range > 0.0) {
            return Err(ScanError::BadMaxRange(max_range));
        }
        let mut prev = f64::NEG_INFINITY;
        for (index, b) in beams.iter().enumerate() {
            if !(b.range >= 0.0 && b.range <= max_range) {
                return Err(ScanError::RangeOutOfBounds {
                    index,
                    range: b.range,
                    max_range,
                });
            }
            if !(b.bearing >= 0.0 && b.bearing < TAU && b.bearing > prev) {
                return Err(ScanError::BadBearing {
                    index,
                    bearing: b.bearing,
                });
            }
            prev = b.bearing;
        }
        Ok(Self { beams, max_range })
    }

    /// Builds a scan from `(bearing, range)` pairs; obstacles are unclassified.
    pub fn from_ranges(pairs: &[(f64, f64)], max_range: f64) -> Result<Self, ScanError> {
        let beams = pairs
            .iter()
            .map(|&(bearing, range)| Beam {
                bearing,
                range,
                echo: if range < max_range { Echo::Unclassified } else { Echo::None },
            })
            .collect();
        Self::new(beams, max_range)
    }

    pub fn beams(&self) -> &[Beam] {
        &self.beams
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    /// Equally spaced bearings starting at 0.
    pub fn bearings(beams: usize) -> impl Iterator<Item = f64> {
        (0..beams).map(move |i| TAU * i as f64 / beams as f64)
    }

    /// The beam closest in angle to `bearing`; ties, up to rounding, go to
    /// the earlier beam.
    pub fn nearest(&self, bearing: f64) -> Option<&Beam> {
        let dist = |b: &Beam| {
            let d = (b.bearing - bearing).rem_euclid(TAU);
            d.min(TAU - d)
        };
        self.beams
            .iter()
            .fold(None, |best: Option<&Beam>, b| match best {
                Some(cur) if dist(cur) <= dist(b) + 1e-9 => Some(cur),
                _ => Some(b),
            })
    }
}

/// Casts `beams` rays from the agent's cell center. Walls, the map border
/// and boxes resting in other cells stop a beam; the box the agent stands on
/// or carries does not.
pub fn simulate_scan(s: &OOState, map: &GridMap, beams: usize, max_range: f64) -> Result<Scan, ScanError> {
    if beams < 4 {
        return Err(ScanError::TooFewBeams(beams));
    }
    if !(max_range.is_finite() && max_range > 0.0) {
        return Err(ScanError::BadMaxRange(max_range));
    }
    let boxes: Vec<Cell> = s
        .boxes
        .iter()
        .map(|b| b.cell())
        .filter(|&c| c != s.agent)
        .collect();
    let origin = s.agent.center();
    let beams = Scan::bearings(beams)
        .map(|bearing| {
            let (range, echo) = raycast::cast(origin, bearing, max_range, |c| {
                if map.is_blocked(c) {
                    Some(Echo::Wall)
                } else if boxes.contains(&c) {
                    Some(Echo::Box)
                } else {
                    None
                }
            });
            Beam {
                bearing,
                range,
                echo: echo.unwrap_or(Echo::None),
            }
        })
        .collect();
    Scan::new(beams, max_range)
}

/// Agent-to-wall contacts in the four cardinal directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TouchRelations {
    pub north: bool,
    pub south: bool,
    pub east: bool,
    pub west: bool,
}

impl TouchRelations {
    pub fn get(&self, d: Direction) -> bool {
        match d {
            Direction::North => self.north,
            Direction::South => self.south,
            Direction::East => self.east,
            Direction::West => self.west,
        }
    }
}

/// A cardinal contact holds when the nearest beam to that direction stops
/// short of one cell on something other than a box. A beam 30 degrees off
/// the cardinal reaches the diagonal cell at exactly one cell, so ranges
/// within rounding of 1.0 count as open.
pub fn scan_to_relations(scan: &Scan) -> Result<TouchRelations, ScanError> {
    let mut out = TouchRelations::default();
    for d in Direction::ALL {
        let beam = scan
            .nearest(d.bearing())
            .filter(|b| {
                let diff = (b.bearing - d.bearing()).rem_euclid(TAU);
                diff.min(TAU - diff) <= PI / 4.0
            })
            .ok_or(ScanError::MissingCardinal(d))?;
        let touching = beam.range < 1.0 - 1e-9 && beam.echo != Echo::Box && beam.echo != Echo::None;
        match d {
            Direction::North => out.north = touching,
            Direction::South => out.south = touching,
            Direction::East => out.east = touching,
            Direction::West => out.west = touching,
        }
    }
    Ok(out)
}
