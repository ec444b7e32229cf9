//! Deterministic text artifacts: CSV tables and JSON lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serializer;

use crate::domain::Scan;
use crate::localization::TraceRow;
use crate::planner::EpisodeRecord;

/// Rounds to 6 significant digits.
pub fn round6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Shortest decimal text of `x` rounded to 6 significant digits.
pub fn fmt_float(x: f64) -> String {
    let r = round6(x);
    if r == 0.0 {
        "0".to_owned()
    } else {
        r.to_string()
    }
}

pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round6(*x))
}

pub fn episodes_jsonl(records: &[EpisodeRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("episode records always serialize"));
        out.push('\n');
    }
    out
}

pub fn summary_csv(records: &[EpisodeRecord]) -> String {
    let mut out = String::from("episode,steps,reward,unknown_predictions,converged\n");
    for (i, r) in records.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            r.steps,
            fmt_float(r.reward),
            r.unknown_predictions,
            r.converged()
        );
    }
    out
}

pub fn scan_csv(scan: &Scan) -> String {
    let mut out = String::from("bearing_rad,range_cells\n");
    for b in scan.beams() {
        let _ = writeln!(out, "{},{}", fmt_float(b.bearing), fmt_float(b.range));
    }
    out
}

pub fn pose_trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("t,true_x,true_y,true_theta,est_x,est_y,est_theta,n_particles,modes,rmse\n");
    for r in rows {
        let f = fmt_float;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            f(r.truth.x),
            f(r.truth.y),
            f(r.truth.theta),
            f(r.estimate.x),
            f(r.estimate.y),
            f(r.estimate.theta),
            r.particles,
            r.modes,
            f(r.rmse)
        );
    }
    out
}

/// Writes each `(file name, contents)` pair under `dir`, creating it.
pub fn write_artifacts(dir: &Path, files: &[(&str, &str)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}
