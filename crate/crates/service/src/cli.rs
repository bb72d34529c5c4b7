//! `cobot` subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cobot_core::gantt::{executed_rows, schedule_rows, write_csv};
use cobot_core::log::{read_jsonl, write_jsonl, LogEvent};
use cobot_core::planner::PlannerConfig;
use cobot_core::replay::replay_file;
use cobot_core::scenario::{ScenarioConfig, StudyPattern};
use cobot_core::sim::{run_sim, HumanScript, RunSummary, SimConfig};
use serde_json::Value;
use thiserror::Error;

use crate::server::{serve, ServerConfig};
use crate::session::SessionConfig;

#[derive(Debug, Parser)]
#[command(
    name = "cobot",
    version,
    about = "Adaptive human-robot task planning: simulate, replay, export, serve"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run simulated sessions with scripted humans.
    Sim(SimArgs),
    /// Re-derive logs and report the first record that does not follow.
    Replay {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
    /// Write `agent,id,start,finish` rows for a logged run.
    Gantt {
        log: PathBuf,
        /// Export the last planned schedule instead of what was executed.
        #[arg(long)]
        planned: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve live sessions over WebSocket at `/ws`.
    Serve(ServeArgs),
    /// Print a built-in scenario as JSON.
    Scenario {
        #[arg(long, value_enum, default_value = "a")]
        pattern: PatternArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PatternArg {
    A,
    B,
    C,
    D,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Scenario JSON; the built-in study scenario when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Comma-separated scripts, e.g. `leader,follower,error_prone:0.3`.
    #[arg(long, default_value = "follower")]
    pub human: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Log file for a single run.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Batch over seeds, e.g. `seeds=1..20`.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Directory for sweep logs, named `<human>-<seed>.jsonl`.
    #[arg(long, default_value = "runs")]
    pub out_dir: PathBuf,
    /// JSON overrides for planner settings (cost, estimator, limits).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Print summaries as JSON lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Wall seconds per simulated second.
    #[arg(long, default_value_t = 0.2)]
    pub realtime_factor: f64,
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    /// Send belief estimates to the client.
    #[arg(long)]
    pub debug_beliefs: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: missing or malformed files and flags.
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn input<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Input(format!("{context}: {e}"))
}

fn runtime<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

pub fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    match path {
        Some(p) => ScenarioConfig::load(p).map_err(|e| CliError::Input(e.to_string())),
        None => Ok(ScenarioConfig::study()),
    }
}

fn merge(base: &mut Value, patch: &Value, path: &str) -> Result<(), String> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let here = format!("{path}.{k}");
                let slot = b
                    .get_mut(k)
                    .ok_or_else(|| format!("unknown setting {}", &here[1..]))?;
                if slot.is_object() {
                    merge(slot, v, &here)?;
                } else {
                    *slot = v.clone();
                }
            }
            Ok(())
        }
        (b, p) => {
            *b = p.clone();
            Ok(())
        }
    }
}

/// Planner settings: node-limited defaults with the file's overrides on top.
pub fn load_params(path: Option<&Path>) -> Result<PlannerConfig, CliError> {
    let base = PlannerConfig::deterministic();
    let Some(p) = path else { return Ok(base) };
    let text = std::fs::read_to_string(p).map_err(input(p.display()))?;
    let patch: Value = serde_json::from_str(&text).map_err(input(p.display()))?;
    let mut value = serde_json::to_value(base).expect("config serializes");
    merge(&mut value, &patch, "").map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
    let config: PlannerConfig = serde_json::from_value(value).map_err(input(p.display()))?;
    config.estimator.validate().map_err(input(p.display()))?;
    Ok(config)
}

/// `seeds=1..20` (inclusive).
pub fn parse_sweep(spec: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Input(format!("sweep must look like seeds=1..20, got '{spec}'"));
    let range = spec.strip_prefix("seeds=").ok_or_else(bad)?;
    let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
    let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u64 = hi
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn file_stem(human: &str) -> String {
    human
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

const TABLE_HEADER: &str =
    "human                      seed  status      makespan      op     p_f     p_e  R2  H6  err";

fn table_row(human: &str, seed: u64, s: &RunSummary) -> String {
    format!(
        "{:<24} {:>6}  {:<10} {:>9.1} {:>7.3} {:>7.3} {:>7.3} {:>3} {:>3} {:>4}",
        human,
        seed,
        format!("{:?}", s.status).to_lowercase(),
        s.makespan,
        s.overall_preference,
        s.final_pf,
        s.final_pe,
        s.robot_assignments,
        s.rejected,
        s.human_errors
    )
}

fn sim(args: &SimArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let scenario = load_scenario(args.scenario.as_deref())?;
    let planner = load_params(args.params.as_deref())?;
    let humans: Vec<(String, HumanScript)> = args
        .human
        .split(',')
        .map(str::trim)
        .filter(|h| !h.is_empty())
        .map(|h| {
            HumanScript::by_name(h)
                .map(|s| (h.to_string(), s))
                .map_err(input("--human"))
        })
        .collect::<Result<_, _>>()?;
    if humans.is_empty() {
        return Err(CliError::Input("--human names no script".into()));
    }
    let seeds = match &args.sweep {
        Some(spec) => parse_sweep(spec)?,
        None => vec![args.seed],
    };
    let batch = args.sweep.is_some() || humans.len() > 1;
    if !batch && args.out.is_none() && !args.json {
        writeln!(out, "note: no --out given, the log is not kept").map_err(runtime("stdout"))?;
    }
    let config = SimConfig {
        scenario,
        planner,
        ..SimConfig::default()
    };
    if batch {
        std::fs::create_dir_all(&args.out_dir).map_err(input(args.out_dir.display()))?;
    }
    let w = |e: std::io::Error| CliError::Runtime(format!("stdout: {e}"));
    if !args.json {
        writeln!(out, "{TABLE_HEADER}").map_err(w)?;
    }
    let mut all: Vec<(String, RunSummary)> = Vec::new();
    for (name, script) in &humans {
        for &seed in &seeds {
            let run =
                run_sim(&config, script, seed).map_err(runtime(format!("{name} seed {seed}")))?;
            let path = if batch {
                Some(
                    args.out_dir
                        .join(format!("{}-{seed}.jsonl", file_stem(name))),
                )
            } else {
                args.out.clone()
            };
            if let Some(p) = &path {
                write_jsonl(p, &run.records).map_err(runtime(p.display()))?;
            }
            if args.json {
                let mut v = serde_json::to_value(&run.summary).expect("summary serializes");
                v["human"] = Value::from(name.as_str());
                v["seed"] = Value::from(seed);
                if let Some(p) = &path {
                    v["log"] = Value::from(p.display().to_string());
                }
                writeln!(out, "{v}").map_err(w)?;
            } else {
                writeln!(out, "{}", table_row(name, seed, &run.summary)).map_err(w)?;
            }
            all.push((name.clone(), run.summary));
        }
    }
    if batch && !args.json {
        writeln!(out).map_err(w)?;
        writeln!(
            out,
            "{:<24} {:>5} {:>9} {:>9} {:>7} {:>7} {:>7} {:>6} {:>6} {:>6}",
            "human", "runs", "completed", "makespan", "op", "p_f", "p_e", "R2", "H6", "err"
        )
        .map_err(w)?;
        for (name, _) in &humans {
            let rows: Vec<&RunSummary> = all
                .iter()
                .filter(|(n, _)| n == name)
                .map(|(_, s)| s)
                .collect();
            let n = rows.len() as f64;
            let mean = |f: &dyn Fn(&RunSummary) -> f64| rows.iter().map(|s| f(s)).sum::<f64>() / n;
            let completed = rows
                .iter()
                .filter(|s| s.status == cobot_core::planner::RunStatus::Completed)
                .count();
            writeln!(
                out,
                "{:<24} {:>5} {:>9} {:>9.1} {:>7.3} {:>7.3} {:>7.3} {:>6.1} {:>6.1} {:>6.1}",
                name,
                rows.len(),
                completed,
                mean(&|s| s.makespan),
                mean(&|s| s.overall_preference),
                mean(&|s| s.final_pf),
                mean(&|s| s.final_pe),
                mean(&|s| s.robot_assignments as f64),
                mean(&|s| s.rejected as f64),
                mean(&|s| s.human_errors as f64),
            )
            .map_err(w)?;
        }
    }
    let failed = all
        .iter()
        .any(|(_, s)| s.status != cobot_core::planner::RunStatus::Completed);
    Ok(i32::from(failed))
}

fn replay(logs: &[PathBuf], out: &mut dyn Write) -> Result<i32, CliError> {
    let mut code = 0;
    for path in logs {
        let report = replay_file(path).map_err(input(path.display()))?;
        if !report.is_exact() {
            code = 1;
        }
        writeln!(out, "{}: {}", path.display(), report.status).map_err(runtime("stdout"))?;
    }
    Ok(code)
}

fn gantt(
    log: &Path,
    planned: bool,
    dest: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let records = read_jsonl(log).map_err(input(log.display()))?;
    let rows = if planned {
        let (t, schedule) = records
            .iter()
            .rev()
            .find_map(|r| match &r.event {
                LogEvent::Schedule(s) => Some((r.sim_time, &s.schedule)),
                _ => None,
            })
            .ok_or_else(|| CliError::Input(format!("{}: no schedule in log", log.display())))?;
        schedule_rows(schedule, t)
    } else {
        executed_rows(&records)
    };
    match dest {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(runtime(p.display()))?;
            write_csv(&rows, file).map_err(runtime(p.display()))?;
        }
        None => write_csv(&rows, out).map_err(runtime("stdout"))?,
    }
    Ok(0)
}

fn serve_cmd(args: &ServeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let scenario = load_scenario(args.scenario.as_deref())?;
    let planner = load_params(args.params.as_deref())?;
    if !(args.realtime_factor > 0.0) {
        return Err(CliError::Input(format!(
            "--realtime-factor must be positive, got {}",
            args.realtime_factor
        )));
    }
    if let Some(d) = &args.log_dir {
        std::fs::create_dir_all(d).map_err(input(d.display()))?;
    }
    let config = ServerConfig {
        session: SessionConfig {
            scenario,
            planner,
            realtime_factor: args.realtime_factor,
            debug_beliefs: args.debug_beliefs,
            ..SessionConfig::default()
        },
        log_dir: args.log_dir.clone(),
    };
    let rt = tokio::runtime::Runtime::new().map_err(runtime("runtime"))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", args.port))
            .await
            .map_err(input(format!("port {}", args.port)))?;
        let addr = listener.local_addr().map_err(runtime("listener"))?;
        writeln!(out, "listening on ws://{addr}/ws").map_err(runtime("stdout"))?;
        serve(listener, config).await.map_err(runtime("server"))
    })?;
    Ok(0)
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Sim(args) => sim(args, out),
        Command::Replay { logs } => replay(logs, out),
        Command::Gantt {
            log,
            planned,
            out: dest,
        } => gantt(log, *planned, dest.as_deref(), out),
        Command::Serve(args) => serve_cmd(args, out),
        Command::Scenario { pattern } => {
            let which = match pattern {
                PatternArg::A => StudyPattern::A,
                PatternArg::B => StudyPattern::B,
                PatternArg::C => StudyPattern::C,
                PatternArg::D => StudyPattern::D,
            };
            writeln!(
                out,
                "{}",
                ScenarioConfig::study_pattern(which).to_json_pretty()
            )
            .map_err(runtime("stdout"))?;
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_ranges() {
        assert_eq!(parse_sweep("seeds=1..20").unwrap().len(), 20);
        assert_eq!(parse_sweep("seeds=3..=4").unwrap(), vec![3, 4]);
        assert!(parse_sweep("1..20").is_err());
        assert!(parse_sweep("seeds=5..1").is_err());
    }

    #[test]
    fn params_merge_and_reject_unknown() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.json");
        std::fs::write(&p, r#"{"cost": {"c_f": 40.0}, "retry_cap": 3}"#).unwrap();
        let c = load_params(Some(&p)).unwrap();
        assert_eq!(c.cost.c_f, 40.0);
        assert_eq!(c.retry_cap, 3);
        assert_eq!(c.cost.c_e, PlannerConfig::deterministic().cost.c_e);
        std::fs::write(&p, r#"{"cost": {"c_x": 1}}"#).unwrap();
        assert!(matches!(load_params(Some(&p)), Err(CliError::Input(_))));
    }
}
