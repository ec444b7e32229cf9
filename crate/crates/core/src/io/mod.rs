//! Map files, run configuration and output artifacts.

mod config;
mod map;
pub mod output;

pub use config::{ConfigError, RunConfig};
pub use map::{parse_map, parse_map_bytes, render_map, MapParseError, MapParseErrorKind, MAX_SIDE};
