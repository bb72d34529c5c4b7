//! Simulated runs with scripted humans.

mod human;

pub use human::{HumanScript, ScriptError, ScriptedHuman, Style};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{init_belief, BeliefKind};
use crate::log::{EventLog, EventLogRecord, LogEvent};
use crate::metrics::{overall_preference_from_log, PreferenceSummary};
use crate::planner::{
    run_to_completion, HumanDriver, Planner, PlannerConfig, PlannerError, RunOptions, RunOutcome,
    RunStatus,
};
use crate::scenario::ScenarioConfig;
use crate::task::{ActionKind, Agent, SubtaskState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: ScenarioConfig,
    pub planner: PlannerConfig,
    pub run: RunOptions,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scenario: ScenarioConfig::study(),
            planner: PlannerConfig::deterministic(),
            run: RunOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub makespan: f64,
    pub overall_preference: f64,
    /// The polynomial fit was ill-conditioned and a trapezoid rule was used.
    pub op_fallback: bool,
    pub final_pf: f64,
    pub final_pe: f64,
    pub human_placements: usize,
    pub robot_placements: usize,
    pub human_errors: usize,
    pub robot_assignments: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub human_assignments: usize,
    pub error_fixes: usize,
    pub replans: usize,
}

#[derive(Debug)]
pub struct SimRun {
    pub records: Vec<EventLogRecord>,
    pub outcome: RunOutcome,
    pub summary: RunSummary,
}

/// Runs one simulated session. The script's own seed is replaced by `seed`.
pub fn run_sim(config: &SimConfig, script: &HumanScript, seed: u64) -> Result<SimRun, SimError> {
    run_sim_logged(config, script, seed, EventLog::new())
}

/// Like [`run_sim`], streaming each record to `sink` as it is written.
pub fn run_sim_to(
    config: &SimConfig,
    script: &HumanScript,
    seed: u64,
    sink: Box<dyn Write + Send>,
) -> Result<SimRun, SimError> {
    run_sim_logged(config, script, seed, EventLog::with_sink(sink))
}

fn run_sim_logged(
    config: &SimConfig,
    script: &HumanScript,
    seed: u64,
    log: EventLog,
) -> Result<SimRun, SimError> {
    script.validate()?;
    let script = script.clone().with_seed(seed);
    let mut human = ScriptedHuman::new(script, &config.scenario);
    let mut planner = Planner::new(config.scenario.clone(), config.planner, log)?;
    planner.log_meta(human.describe(), Some(seed));
    let outcome = run_to_completion(&mut planner, &mut human, &config.run)?;
    let records = planner.log.into_records();
    let mut summary = summarize(&records);
    summary.status = outcome.status;
    summary.makespan = outcome.end_time;
    Ok(SimRun {
        records,
        outcome,
        summary,
    })
}

/// Counts what happened in a log.
pub fn summarize(records: &[EventLogRecord]) -> RunSummary {
    let mut s = RunSummary {
        status: RunStatus::Stalled,
        makespan: records.last().map_or(0.0, |r| r.sim_time),
        overall_preference: f64::NAN,
        op_fallback: false,
        final_pf: f64::NAN,
        final_pe: f64::NAN,
        human_placements: 0,
        robot_placements: 0,
        human_errors: 0,
        robot_assignments: 0,
        accepted: 0,
        rejected: 0,
        human_assignments: 0,
        error_fixes: 0,
        replans: 0,
    };
    let mut placed = 0;
    let mut total = 0;
    for r in records {
        match &r.event {
            LogEvent::RunMeta(meta) => {
                total = (meta.scenario.workspaces * meta.scenario.spots_per_workspace) as usize;
                s.final_pf =
                    init_belief(BeliefKind::Following, &meta.planner.estimator).expected_value();
                s.final_pe =
                    init_belief(BeliefKind::Error, &meta.planner.estimator).expected_value();
            }
            LogEvent::HumanAction(a) | LogEvent::RobotAction(a) => {
                let Some((_, after)) = a.applied() else {
                    continue;
                };
                match a.action.kind {
                    ActionKind::H1 | ActionKind::R1 | ActionKind::R4 => {
                        if a.action.agent == Agent::Human {
                            s.human_placements += 1;
                        } else {
                            s.robot_placements += 1;
                        }
                    }
                    ActionKind::R2 => s.robot_assignments += 1,
                    ActionKind::H2 => s.human_assignments += 1,
                    ActionKind::H4 => s.accepted += 1,
                    ActionKind::H6 => s.rejected += 1,
                    ActionKind::R3
                    | ActionKind::R6
                    | ActionKind::H3
                    | ActionKind::H5
                    | ActionKind::R5 => s.error_fixes += 1,
                }
                if a.action.kind == ActionKind::H4 {
                    s.human_placements += 1;
                }
                if a.action.agent == Agent::Human
                    && matches!(
                        after,
                        SubtaskState::Misplaced | SubtaskState::AssignedToRobotIncorrectly
                    )
                {
                    s.human_errors += 1;
                }
            }
            LogEvent::BeliefF(b) => s.final_pf = b.mean,
            LogEvent::BeliefE(b) => s.final_pe = b.mean,
            LogEvent::Allocation(_) => s.replans += 1,
            LogEvent::Schedule(_) => {}
            LogEvent::StateChange(c) => {
                if c.to == SubtaskState::PlacedCorrectly {
                    placed += 1;
                } else if c.from == SubtaskState::PlacedCorrectly {
                    placed -= 1;
                }
            }
        }
    }
    if total > 0 && placed == total {
        s.status = RunStatus::Completed;
    }
    if let Some(PreferenceSummary {
        value, fallback, ..
    }) = overall_preference_from_log(records)
    {
        s.overall_preference = value;
        s.op_fallback = fallback;
    }
    s
}
