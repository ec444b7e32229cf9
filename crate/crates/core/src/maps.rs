//! Maps compiled into the binary.

use crate::domain::GridMap;
use crate::io::{parse_map, MapParseError};

pub const BUNDLED: [(&str, &str); 5] = [
    ("taxi5", include_str!("../maps/taxi5.map")),
    ("warehouse8", include_str!("../maps/warehouse8.map")),
    ("warehouse10", include_str!("../maps/warehouse10.map")),
    ("maze", include_str!("../maps/maze.map")),
    ("two_rooms", include_str!("../maps/two_rooms.map")),
];

/// Text of a bundled map by name, with or without the `.map` suffix.
pub fn text(name: &str) -> Option<&'static str> {
    let stem = name.strip_suffix(".map").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == stem).map(|(_, t)| *t)
}

pub fn load(name: &str) -> Option<Result<GridMap, MapParseError>> {
    text(name).map(parse_map)
}
