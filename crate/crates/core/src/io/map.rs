//! ASCII map files.
//!
//! ```text
//! % optional comment lines
//! #####
//! #A.D#
//! #.B.#
//! #####
//! ```
//!
//! The first grid line is the north edge, so file row `r` of an `h`-row grid
//! holds cells with `y = h - 1 - r`.

use std::fmt;

use thiserror::Error;

use crate::domain::{Cell, GridMap, MapError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapParseErrorKind {
    UnknownGlyph(u8),
    /// Row length differs from the first grid row.
    Ragged { expected: usize, found: usize },
    MissingAgent,
    MissingDestination,
    DuplicateAgent { first_line: usize, first_column: usize },
    DuplicateDestination { first_line: usize, first_column: usize },
    /// A `%` line after the grid started.
    CommentInGrid,
    EmptyGrid,
    TooLarge,
    Invalid(MapError),
}

impl fmt::Display for MapParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use MapParseErrorKind::*;
        match self {
            UnknownGlyph(b) if b.is_ascii_graphic() => write!(f, "unknown glyph '{}'", *b as char),
            UnknownGlyph(b) => write!(f, "unknown byte 0x{b:02x}"),
            Ragged { expected, found } => {
                write!(f, "row has {found} cells, expected {expected}")
            }
            MissingAgent => f.write_str("missing agent start 'A'"),
            MissingDestination => f.write_str("missing destination 'D'"),
            DuplicateAgent {
                first_line,
                first_column,
            } => write!(f, "second agent start, first at {first_line}:{first_column}"),
            DuplicateDestination {
                first_line,
                first_column,
            } => write!(f, "second destination, first at {first_line}:{first_column}"),
            CommentInGrid => f.write_str("comment lines must precede the grid"),
            EmptyGrid => f.write_str("no grid rows"),
            TooLarge => write!(f, "grid exceeds {MAX_SIDE} cells on a side"),
            Invalid(e) => e.fmt(f),
        }
    }
}

/// A map syntax or validation error at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct MapParseError {
    pub line: usize,
    pub column: usize,
    pub kind: MapParseErrorKind,
}

pub const MAX_SIDE: usize = 4096;

pub fn parse_map(text: &str) -> Result<GridMap, MapParseError> {
    parse_map_bytes(text.as_bytes())
}

pub fn parse_map_bytes(bytes: &[u8]) -> Result<GridMap, MapParseError> {
    let err = |line, column, kind| MapParseError { line, column, kind };
    let mut rows: Vec<(usize, &[u8])> = Vec::new();
    let mut trailing_blank: Option<usize> = None;
    let mut line_no = 0;
    for raw in bytes.split(|&b| b == b'\n') {
        line_no += 1;
        let line = trim_end(raw);
        if line.first() == Some(&b'%') {
            if !rows.is_empty() {
                return Err(err(line_no, 1, MapParseErrorKind::CommentInGrid));
            }
            continue;
        }
        if line.is_empty() {
            trailing_blank.get_or_insert(line_no);
            continue;
        }
        if let Some(blank) = trailing_blank.filter(|_| !rows.is_empty()) {
            let expected = rows[0].1.len();
            return Err(err(blank, 1, MapParseErrorKind::Ragged { expected, found: 0 }));
        }
        trailing_blank = None;
        rows.push((line_no, line));
    }
    if bytes.ends_with(b"\n") {
        line_no -= 1;
    }
    let Some(&(_, first)) = rows.first() else {
        return Err(err(line_no.max(1), 1, MapParseErrorKind::EmptyGrid));
    };
    let width = first.len();
    if width > MAX_SIDE || rows.len() > MAX_SIDE {
        return Err(err(rows[0].0, 1, MapParseErrorKind::TooLarge));
    }
    let height = rows.len();
    let mut walls = Vec::new();
    let mut boxes = Vec::new();
    let mut agent: Option<(Cell, usize, usize)> = None;
    let mut dest: Option<(Cell, usize, usize)> = None;
    for (r, &(line, row)) in rows.iter().enumerate() {
        if row.len() != width {
            let column = row.len().min(width) + 1;
            let kind = MapParseErrorKind::Ragged {
                expected: width,
                found: row.len(),
            };
            return Err(err(line, column, kind));
        }
        let y = (height - 1 - r) as i32;
        for (x, &b) in row.iter().enumerate() {
            let cell = Cell::new(x as i32, y);
            let column = x + 1;
            match b {
                b'#' => walls.push(cell),
                b'.' => {}
                b'B' => boxes.push(cell),
                b'A' => {
                    if let Some((_, l, c)) = agent {
                        let kind = MapParseErrorKind::DuplicateAgent {
                            first_line: l,
                            first_column: c,
                        };
                        return Err(err(line, column, kind));
                    }
                    agent = Some((cell, line, column));
                }
                b'D' => {
                    if let Some((_, l, c)) = dest {
                        let kind = MapParseErrorKind::DuplicateDestination {
                            first_line: l,
                            first_column: c,
                        };
                        return Err(err(line, column, kind));
                    }
                    dest = Some((cell, line, column));
                }
                other => return Err(err(line, column, MapParseErrorKind::UnknownGlyph(other))),
            }
        }
    }
    let end_line = rows[rows.len() - 1].0;
    let (agent, ..) = agent.ok_or(err(end_line, 1, MapParseErrorKind::MissingAgent))?;
    let (dest, ..) = dest.ok_or(err(end_line, 1, MapParseErrorKind::MissingDestination))?;
    GridMap::new(width as u32, height as u32, walls, dest, boxes, agent)
        .map_err(|e| err(rows[0].0, 1, MapParseErrorKind::Invalid(e)))
}

fn trim_end(mut s: &[u8]) -> &[u8] {
    while let [rest @ .., last] = s {
        if last.is_ascii_whitespace() {
            s = rest;
        } else {
            break;
        }
    }
    s
}

/// Canonical text of a map, one `\n`-terminated line per row, north first.
/// Where task locations coincide the agent is drawn over the destination,
/// and both over a box spawn.
pub fn render_map(map: &GridMap) -> String {
    let w = map.width() as usize;
    let h = map.height() as usize;
    let mut out = String::with_capacity((w + 1) * h);
    for r in 0..h {
        let y = (h - 1 - r) as i32;
        for x in 0..w as i32 {
            let c = Cell::new(x, y);
            out.push(if c == map.agent_start() {
                'A'
            } else if c == map.destination() {
                'D'
            } else if map.box_spawns().contains(&c) {
                'B'
            } else if map.is_blocked(c) {
                '#'
            } else {
                '.'
            });
        }
        out.push('\n');
    }
    out
}
