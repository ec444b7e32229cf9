//! The `oomdp` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use thiserror::Error;

use crate::domain::{bfs_optimal_steps, GridMap, Unsolvable};
use crate::io::output::{episodes_jsonl, pose_trace_csv, scan_csv, summary_csv, write_artifacts};
use crate::io::{parse_map_bytes, render_map, ConfigError, MapParseError, RunConfig};
use crate::learner::{Doormax, LearnError};
use crate::localization::{localize, scripted_path, LocError, LocalizeConfig};
use crate::maps;
use crate::model::{ModelError, OOState};
use crate::planner::{choose_target, run_episode, train, EpisodeConfig, EpisodeRecord, PlanError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{source}")]
    Map {
        path: PathBuf,
        #[source]
        source: MapParseError,
    },
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("no map given; pass --map or set `map` in the config file")]
    NoMap,
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Localize(#[from] LocError),
    #[error(transparent)]
    Unsolvable(#[from] Unsolvable),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "oomdp", version, about = "Learn, plan and localize in grid warehouse worlds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the transition-model learner over repeated episodes
    Learn(RunArgs),
    /// Roll out the greedy policy of a saved model without learning
    Plan(PlanArgs),
    /// Run global localization along a scripted trajectory
    Localize(RunArgs),
    /// Train, then report optimal steps, convergence and KWIK counters
    Eval(RunArgs),
    /// Validate a map and print its canonical form
    Map(MapArgs),
}

/// Flags shared by the run subcommands. Each mirrors a config-file key;
/// a flag wins over the file, the file over the built-in default.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Map file, or a bundled map name (taxi5, warehouse8, warehouse10, maze, two_rooms) [default: none]
    #[arg(long, value_name = "PATH")]
    pub map: Option<PathBuf>,
    /// Configuration file of `key = value` lines [default: none]
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Number of training episodes [default: 30]
    #[arg(long, value_name = "N")]
    pub episodes: Option<usize>,
    /// Seed for every random choice, including which box is the task [default: 0]
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Discount factor [default: 0.95]
    #[arg(long, value_name = "F")]
    pub gamma: Option<f64>,
    /// Value-iteration stopping residual [default: 0.000001]
    #[arg(long, value_name = "F")]
    pub epsilon: Option<f64>,
    /// Maximum predictions kept per action, attribute and effect type [default: 2]
    #[arg(long, value_name = "N")]
    pub k: Option<usize>,
    /// Optimistic reward for unpredictable transitions [default: 20]
    #[arg(long, value_name = "F")]
    pub rmax: Option<f64>,
    /// Step cap per episode [default: 500]
    #[arg(long, value_name = "N")]
    pub horizon: Option<usize>,
    /// Directory receiving every artifact [default: none, print to stdout]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Reward per ordinary step [default: -1]
    #[arg(long, value_name = "F", allow_hyphen_values = true)]
    pub reward_step: Option<f64>,
    /// Reward for a delivery [default: 20]
    #[arg(long, value_name = "F", allow_hyphen_values = true)]
    pub reward_success: Option<f64>,
    /// Reward for a pickup or dropoff that does nothing [default: -10]
    #[arg(long, value_name = "F", allow_hyphen_values = true)]
    pub reward_illegal: Option<f64>,
    /// Lower bound on the particle count [default: 100]
    #[arg(long, value_name = "N")]
    pub particles_min: Option<usize>,
    /// Upper bound on the particle count, also the initial count [default: 5000]
    #[arg(long, value_name = "N")]
    pub particles_max: Option<usize>,
    /// Laser beams per scan [default: 16]
    #[arg(long, value_name = "N")]
    pub beams: Option<usize>,
    /// Laser range in cells [default: 5]
    #[arg(long, value_name = "F")]
    pub max_range: Option<f64>,
    /// Translational motion noise, cells per step [default: 0.1]
    #[arg(long, value_name = "F")]
    pub trans_sd: Option<f64>,
    /// Rotational motion noise, radians per step [default: 0.02]
    #[arg(long, value_name = "F")]
    pub rot_sd: Option<f64>,
    /// Range noise of the simulated scanner in cells [default: 0.2]
    #[arg(long, value_name = "F")]
    pub range_sd: Option<f64>,
    /// Range deviation assumed by the filter's beam model [default: 0.8]
    #[arg(long, value_name = "F")]
    pub model_range_sd: Option<f64>,
    /// Weight of the Gaussian hit component of the beam model [default: 0.9]
    #[arg(long, value_name = "F")]
    pub z_hit: Option<f64>,
    /// KLD-sampling error bound [default: 0.05]
    #[arg(long, value_name = "F")]
    pub kld_epsilon: Option<f64>,
    /// KLD-sampling confidence parameter [default: 0.01]
    #[arg(long, value_name = "F")]
    pub kld_delta: Option<f64>,
    /// Motions along the scripted localization path [default: 20]
    #[arg(long, value_name = "N")]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    /// Model file written by `learn`
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MapArgs {
    /// Map file, or a bundled map name [default: none]
    #[arg(long, value_name = "PATH")]
    pub map: PathBuf,
    /// Directory receiving the canonical map [default: none, print to stdout]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        fn put<T: ToString>(v: &mut Vec<(&'static str, String)>, key: &'static str, x: &Option<T>) {
            if let Some(x) = x {
                v.push((key, x.to_string()));
            }
        }
        let mut v = Vec::new();
        put(&mut v, "map", &self.map.as_ref().map(|p| p.display().to_string()));
        put(&mut v, "out", &self.out.as_ref().map(|p| p.display().to_string()));
        put(&mut v, "episodes", &self.episodes);
        put(&mut v, "seed", &self.seed);
        put(&mut v, "gamma", &self.gamma);
        put(&mut v, "epsilon", &self.epsilon);
        put(&mut v, "k", &self.k);
        put(&mut v, "rmax", &self.rmax);
        put(&mut v, "horizon", &self.horizon);
        put(&mut v, "reward-step", &self.reward_step);
        put(&mut v, "reward-success", &self.reward_success);
        put(&mut v, "reward-illegal", &self.reward_illegal);
        put(&mut v, "particles-min", &self.particles_min);
        put(&mut v, "particles-max", &self.particles_max);
        put(&mut v, "beams", &self.beams);
        put(&mut v, "max-range", &self.max_range);
        put(&mut v, "trans-sd", &self.trans_sd);
        put(&mut v, "rot-sd", &self.rot_sd);
        put(&mut v, "range-sd", &self.range_sd);
        put(&mut v, "model-range-sd", &self.model_range_sd);
        put(&mut v, "z-hit", &self.z_hit);
        put(&mut v, "kld-epsilon", &self.kld_epsilon);
        put(&mut v, "kld-delta", &self.kld_delta);
        put(&mut v, "steps", &self.steps);
        v
    }

    /// Defaults, then the config file, then the flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            cfg.apply_text(&text)?;
        }
        for (key, value) in self.overrides() {
            cfg.set(key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads a map from disk, falling back to the bundled map of that name.
pub fn load_map(path: &Path) -> Result<GridMap, CliError> {
    match fs::read(path) {
        Ok(bytes) => parse_map_bytes(&bytes).map_err(|source| CliError::Map {
            path: path.to_owned(),
            source,
        }),
        Err(e) => {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            match maps::load(name) {
                Some(parsed) => parsed.map_err(|source| CliError::Map {
                    path: path.to_owned(),
                    source,
                }),
                None => Err(io_err(path)(e)),
            }
        }
    }
}

fn map_of(cfg: &RunConfig) -> Result<GridMap, CliError> {
    load_map(cfg.map.as_deref().ok_or(CliError::NoMap)?)
}

/// Writes artifacts to `--out` when given, else prints `stdout_body`.
fn emit(cfg: &RunConfig, files: &[(&str, &str)], stdout_body: &str) -> Result<String, CliError> {
    if let Some(dir) = &cfg.out {
        write_artifacts(dir, files).map_err(io_err(dir))?;
        info!("wrote {} files to {}", files.len(), dir.display());
    }
    Ok(stdout_body.to_owned())
}

fn learn(cfg: &RunConfig) -> Result<String, CliError> {
    let map = map_of(cfg)?;
    let mut learner = Doormax::warehouse(cfg.k)?;
    let records = train(&map, &mut learner, &cfg.episode(), cfg.episodes, cfg.seed)?;
    let summary = summary_csv(&records);
    emit(
        cfg,
        &[
            ("model.json", &learner.to_json()),
            ("episodes.jsonl", &episodes_jsonl(&records)),
            ("summary.csv", &summary),
        ],
        &summary,
    )
}

fn plan(model: &Path, cfg: &RunConfig) -> Result<String, CliError> {
    let map = map_of(cfg)?;
    let text = fs::read_to_string(model).map_err(io_err(model))?;
    let mut learner = Doormax::from_json(&text)?;
    let ep = EpisodeConfig {
        frozen: true,
        ..cfg.episode()
    };
    let records = vec![run_episode(&map, &mut learner, &ep, cfg.seed)?];
    let summary = summary_csv(&records);
    emit(
        cfg,
        &[("episodes.jsonl", &episodes_jsonl(&records)), ("summary.csv", &summary)],
        &summary,
    )
}

fn localize_cmd(cfg: &RunConfig) -> Result<String, CliError> {
    let map = map_of(cfg)?;
    let lc = LocalizeConfig {
        motion: cfg.motion_noise(),
        sensor: cfg.sensor_noise(),
        kld: cfg.kld(),
        beams: cfg.beams,
        max_range: cfg.max_range,
        scan_sd: cfg.range_sd,
        steps: cfg.steps,
        ..Default::default()
    };
    let truth = scripted_path(&map, lc.steps)?;
    let report = localize(&map, &truth, &lc, cfg.seed)?;
    let trace = pose_trace_csv(&report.rows);
    let scans: Vec<(String, String)> = report
        .scans
        .iter()
        .enumerate()
        .map(|(t, s)| (format!("scan_{t:03}.csv"), scan_csv(s)))
        .collect();
    let mut files: Vec<(&str, &str)> = vec![("pose_trace.csv", &trace)];
    files.extend(scans.iter().map(|(n, b)| (n.as_str(), b.as_str())));
    emit(cfg, &files, &trace)
}

/// First 1-based episode from which every episode completes optimally
/// without an unknown prediction.
fn converged_episode(records: &[EpisodeRecord], optimal: u32) -> Option<usize> {
    let ok = |r: &EpisodeRecord| r.converged() && r.steps as u32 == optimal;
    let tail = records.iter().rev().take_while(|r| ok(r)).count();
    (tail > 0).then(|| records.len() - tail + 1)
}

fn eval(cfg: &RunConfig) -> Result<String, CliError> {
    let map = map_of(cfg)?;
    let target = choose_target(&map, cfg.seed)?;
    let optimal = bfs_optimal_steps(&map, &OOState::initial(&map, target)?)?;
    let mut learner = Doormax::warehouse(cfg.k)?;
    let records = train(&map, &mut learner, &cfg.episode(), cfg.episodes, cfg.seed)?;
    let mut out = String::new();
    let _ = writeln!(out, "optimal_steps {optimal}");
    match converged_episode(&records, optimal) {
        Some(e) => writeln!(out, "converged_episode {e}"),
        None => writeln!(out, "converged_episode none"),
    }
    .ok();
    let last = records.last().map_or(0, |r| r.steps);
    let _ = writeln!(out, "final_steps {last}");
    let mispredictions: usize = records.iter().map(|r| r.mispredictions).sum();
    let _ = writeln!(out, "mispredictions {mispredictions}");
    let _ = writeln!(out, "kwik_bound {}", learner.kwik_bound());
    let max = learner.unknown_counts().values().copied().max().unwrap_or(0);
    let _ = writeln!(out, "max_unknown_count {max}");
    let _ = writeln!(out, "kwik_violations {}", learner.kwik_violations().len());
    for ((a, att, kind), n) in learner.unknown_counts() {
        let _ = writeln!(out, "unknown_count {a} {att} {kind} {n}");
    }
    for (a, n) in learner.failure_unknowns() {
        let _ = writeln!(out, "failure_unknowns {a} {n}");
    }
    let _ = writeln!(out, "unattributed_unknowns {}", learner.unattributed_unknowns());
    emit(
        cfg,
        &[
            ("eval.txt", &out),
            ("model.json", &learner.to_json()),
            ("episodes.jsonl", &episodes_jsonl(&records)),
            ("summary.csv", &summary_csv(&records)),
        ],
        &out,
    )
}

fn map_cmd(args: &MapArgs) -> Result<String, CliError> {
    let text = render_map(&load_map(&args.map)?);
    if let Some(dir) = &args.out {
        let name = args
            .map
            .file_stem()
            .map(|s| format!("{}.map", s.to_string_lossy()))
            .unwrap_or_else(|| "map.map".to_owned());
        write_artifacts(dir, &[(&name, &text)]).map_err(io_err(dir))?;
    }
    Ok(text)
}

/// Runs a parsed command and returns what it prints.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Learn(a) => learn(&a.resolve()?),
        Command::Plan(p) => plan(&p.model, &p.run.resolve()?),
        Command::Localize(a) => localize_cmd(&a.resolve()?),
        Command::Eval(a) => eval(&a.resolve()?),
        Command::Map(m) => map_cmd(m),
    }
}

/// Exit code 0 on success, 1 on a usage error, 2 on a runtime or
/// configuration error.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("OOMDP_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn help_states_every_default() {
        let d = RunConfig::default();
        let expect = [
            ("episodes", d.episodes.to_string()),
            ("seed", d.seed.to_string()),
            ("gamma", d.gamma.to_string()),
            ("epsilon", d.epsilon.to_string()),
            ("k", d.k.to_string()),
            ("rmax", d.rmax.to_string()),
            ("horizon", d.horizon.to_string()),
            ("reward-step", d.reward_step.to_string()),
            ("reward-success", d.reward_success.to_string()),
            ("reward-illegal", d.reward_illegal.to_string()),
            ("particles-min", d.particles_min.to_string()),
            ("particles-max", d.particles_max.to_string()),
            ("beams", d.beams.to_string()),
            ("max-range", d.max_range.to_string()),
            ("trans-sd", d.trans_sd.to_string()),
            ("rot-sd", d.rot_sd.to_string()),
            ("range-sd", d.range_sd.to_string()),
            ("model-range-sd", d.model_range_sd.to_string()),
            ("z-hit", d.z_hit.to_string()),
            ("kld-epsilon", d.kld_epsilon.to_string()),
            ("kld-delta", d.kld_delta.to_string()),
            ("steps", d.steps.to_string()),
        ];
        let mut cmd = Cli::command();
        for sub in ["learn", "plan", "localize", "eval"] {
            let help = cmd.find_subcommand_mut(sub).unwrap().render_long_help().to_string();
            for key in RunConfig::KEYS {
                assert!(help.contains(&format!("--{key}")), "{sub} lacks --{key}");
            }
            assert!(help.contains("--config"));
            for (key, value) in &expect {
                let tail = &help[help.find(&format!("--{key} ")).unwrap()..];
                let block = &tail[..tail.find("\n\n").unwrap_or(tail.len())];
                assert!(block.contains(&format!("[default: {value}]")), "{sub} --{key}: {block}");
            }
        }
        let help = cmd.find_subcommand_mut("map").unwrap().render_long_help().to_string();
        assert!(help.contains("[default: none"));
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "seed = 4\nepisodes = 9\n").unwrap();
        let args = RunArgs {
            config: Some(path),
            seed: Some(11),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!((cfg.seed, cfg.episodes, cfg.k), (11, 9, 2));
    }

    #[test]
    fn usage_and_runtime_exit_codes() {
        assert_eq!(main(["oomdp", "learn", "--bogus"]), 1);
        assert_eq!(main(["oomdp"]), 1);
        assert_eq!(main(["oomdp", "learn", "--help"]), 0);
        assert_eq!(main(["oomdp", "learn", "--map", "/nonexistent/x.map"]), 2);
        assert_eq!(main(["oomdp", "learn"]), 2);
        assert_eq!(main(["oomdp", "learn", "--map", "taxi5", "--gamma", "1.5"]), 2);
    }

    #[test]
    fn convergence_is_the_start_of_the_optimal_tail() {
        let map = maps::load("taxi5").unwrap().unwrap();
        let mut l = Doormax::warehouse(2).unwrap();
        let recs = train(&map, &mut l, &EpisodeConfig::default(), 12, 7).unwrap();
        let target = choose_target(&map, 7).unwrap();
        let opt = bfs_optimal_steps(&map, &OOState::initial(&map, target).unwrap()).unwrap();
        let e = converged_episode(&recs, opt).unwrap();
        assert!(recs[e - 1..].iter().all(|r| r.steps as u32 == opt));
        assert!(e == 1 || !(recs[e - 2].converged() && recs[e - 2].steps as u32 == opt));
    }
}
