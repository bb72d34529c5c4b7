//! Re-derives a run from its event log and reports the first record that
//! does not follow.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocation::{Allocation, AllocationProblem, PointEstimates};
use crate::belief::{
    init_belief, update_error, update_following, ActionHistory, BeliefGrid, BeliefKind, ErrorClass,
    FollowingClass,
};
use crate::log::{
    parse_line, ActionOutcome, ActionRecord, EventLogRecord, LogError, LogEvent, RunMeta,
};
use crate::schedule::{validate_schedule, BuildContext, SchedulingProblem};
use crate::task::{ActionKind, Agent, TaskGraph, TaskId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReplayStatus {
    Exact,
    Diverged {
        seq: u64,
        reason: String,
    },
    /// A line could not be parsed.
    Corrupt {
        line: usize,
        seq: Option<u64>,
        message: String,
    },
}

impl std::fmt::Display for ReplayStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReplayStatus::Exact => write!(f, "exact"),
            ReplayStatus::Diverged { seq, reason } => write!(f, "diverged at seq {seq}: {reason}"),
            ReplayStatus::Corrupt {
                line,
                seq: Some(seq),
                message,
            } => {
                write!(f, "corrupt record seq {seq} (line {line}): {message}")
            }
            ReplayStatus::Corrupt {
                line,
                seq: None,
                message,
            } => write!(f, "corrupt line {line}: {message}"),
        }
    }
}

/// State rebuilt from a log.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayState {
    pub graph: TaskGraph,
    pub belief_f: BeliefGrid,
    pub belief_e: BeliefGrid,
    pub history_f: ActionHistory<FollowingClass>,
    pub history_e: ActionHistory<ErrorClass>,
    pub allocation: Option<Allocation>,
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub status: ReplayStatus,
    pub records: usize,
    /// State after the last record that replayed.
    pub state: Option<ReplayState>,
}

impl ReplayReport {
    pub fn is_exact(&self) -> bool {
        self.status == ReplayStatus::Exact
    }
}

struct Replayer {
    meta: RunMeta,
    state: ReplayState,
    /// Allocation waiting for its schedule.
    pending: Option<Allocation>,
    last_action: Option<(ActionKind, TaskId)>,
    last_time: f64,
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

impl Replayer {
    fn new(meta: RunMeta) -> Result<Self, String> {
        let graph = TaskGraph::build(&meta.scenario).map_err(|e| format!("scenario: {e}"))?;
        let est = &meta.planner.estimator;
        let state = ReplayState {
            graph,
            belief_f: init_belief(BeliefKind::Following, est),
            belief_e: init_belief(BeliefKind::Error, est),
            history_f: ActionHistory::new(est.memory),
            history_e: ActionHistory::new(est.memory),
            allocation: None,
        };
        Ok(Replayer {
            meta,
            state,
            pending: None,
            last_action: None,
            last_time: 0.0,
        })
    }

    fn action(&mut self, rec: &ActionRecord, agent: Agent) -> Result<(), String> {
        if rec.action.agent != agent || rec.action.kind.agent() != agent {
            return Err(format!("{} action logged for the {agent}", rec.action.kind));
        }
        let g = &mut self.state.graph;
        match &rec.outcome {
            ActionOutcome::Applied { before, after } => {
                let now = g.state(rec.action.subtask);
                if now != Some(*before) {
                    return Err(format!(
                        "{:?} was {now:?}, log says {before:?}",
                        rec.action.subtask
                    ));
                }
                g.apply_in_place(&rec.action).map_err(|e| e.to_string())?;
                let got = g.state(rec.action.subtask).expect("known subtask");
                if got != *after {
                    return Err(format!(
                        "{} led to {got:?}, log says {after:?}",
                        rec.action.kind
                    ));
                }
                self.last_action = Some((rec.action.kind, rec.action.subtask));
            }
            ActionOutcome::Rejected { reason } => match g.check_action(&rec.action) {
                Ok(_) => {
                    return Err(format!(
                        "{} is legal but was logged as rejected",
                        rec.action.kind
                    ))
                }
                Err(r) if r != *reason => {
                    return Err(format!("rejected for {r:?}, log says {reason:?}"))
                }
                Err(_) => self.last_action = None,
            },
        }
        Ok(())
    }

    fn step(&mut self, record: &EventLogRecord) -> Result<(), String> {
        if record.sim_time + 1e-12 < self.last_time || !record.sim_time.is_finite() {
            return Err(format!(
                "time went from {} to {}",
                self.last_time, record.sim_time
            ));
        }
        self.last_time = record.sim_time;
        let est = self.meta.planner.estimator;
        match &record.event {
            LogEvent::RunMeta(_) => return Err("second run header".into()),
            LogEvent::HumanAction(a) => self.action(a, Agent::Human)?,
            LogEvent::RobotAction(a) => self.action(a, Agent::Robot)?,
            LogEvent::StateChange(c) => {
                if self.last_action != Some((c.cause, c.subtask)) {
                    return Err(format!(
                        "state change by {} on {:?} without that action",
                        c.cause, c.subtask
                    ));
                }
                if self.state.graph.state(c.subtask) != Some(c.to) {
                    return Err(format!("{:?} is not {:?}", c.subtask, c.to));
                }
            }
            LogEvent::BeliefF(b) => {
                self.state.history_f.push(b.observed);
                let next = update_following(
                    &self.state.belief_f,
                    &self.state.history_f,
                    b.observed,
                    &est,
                );
                check_belief(&next, &self.state.history_f, &b.probs, b.mean, &b.history)?;
                self.state.belief_f = next;
            }
            LogEvent::BeliefE(b) => {
                self.state.history_e.push(b.observed);
                let next = update_error(
                    &self.state.belief_e,
                    &self.state.history_e,
                    b.observed,
                    &est,
                );
                check_belief(&next, &self.state.history_e, &b.probs, b.mean, &b.history)?;
                self.state.belief_e = next;
            }
            LogEvent::Allocation(a) => {
                let expect = PointEstimates {
                    p_f: self.state.belief_f.expected_value(),
                    p_e: self.state.belief_e.expected_value(),
                };
                if !same_bits(
                    &[expect.p_f, expect.p_e],
                    &[a.estimates.p_f, a.estimates.p_e],
                ) {
                    return Err(format!(
                        "estimates {:?} do not match beliefs {expect:?}",
                        a.estimates
                    ));
                }
                let mut problem = AllocationProblem::from_graph(
                    &self.state.graph,
                    &a.claimed,
                    a.estimates,
                    self.meta.planner.cost,
                    self.state.allocation.clone(),
                );
                if a.relaxed != problem.immediate.is_empty() {
                    return Err("relaxed flag does not match the immediate set".into());
                }
                problem.require_robot_start = !a.relaxed;
                problem.excluded = a.excluded.clone();
                check_allocation(&problem, &a.allocation)?;
                self.pending = Some(a.allocation.clone());
            }
            LogEvent::Schedule(s) => {
                let alloc = self
                    .pending
                    .take()
                    .ok_or("schedule without an allocation")?;
                let ctx = BuildContext {
                    in_flight: s.in_flight.clone(),
                    error_fix_time: self.meta.scenario.nominal_times.robot.near,
                };
                let mut problem =
                    SchedulingProblem::from_graph(&self.state.graph, &alloc, &ctx, 0.0);
                if s.v != problem.v {
                    return Err("V set differs".into());
                }
                if s.enforce_v_start && !problem.enforce_v_start {
                    return Err("V start enforced where it cannot be".into());
                }
                problem.enforce_v_start = s.enforce_v_start;
                validate_schedule(&problem, &s.schedule)
                    .map_err(|v| format!("schedule violates {v:?}"))?;
                self.state.allocation = Some(alloc);
            }
        }
        Ok(())
    }
}

fn check_belief<C: Copy + PartialEq + std::fmt::Debug>(
    next: &BeliefGrid,
    history: &ActionHistory<C>,
    probs: &[f64],
    mean: f64,
    logged_history: &[C],
) -> Result<(), String> {
    if !same_bits(&next.probs, probs) {
        return Err("belief differs".into());
    }
    if next.expected_value().to_bits() != mean.to_bits() {
        return Err("belief mean differs".into());
    }
    if !history.iter().copied().eq(logged_history.iter().copied()) {
        return Err(format!("history differs: {logged_history:?}"));
    }
    Ok(())
}

fn check_allocation(problem: &AllocationProblem, alloc: &Allocation) -> Result<(), String> {
    let ids: BTreeSet<TaskId> = problem.tasks.iter().map(|t| t.id).collect();
    let got: BTreeSet<TaskId> = alloc.q.keys().copied().collect();
    if ids != got {
        return Err(format!("allocation covers {got:?}, open tasks are {ids:?}"));
    }
    for t in &problem.tasks {
        if let Some(agent) = t.fixed {
            if alloc.q[&t.id] != agent {
                return Err(format!("{:?} is fixed to the {agent}", t.id));
            }
        }
    }
    if problem.require_robot_start
        && !problem
            .immediate
            .iter()
            .any(|id| alloc.q.get(id) == Some(&Agent::Robot))
    {
        return Err("robot has nothing to start".into());
    }
    if problem.excluded.contains(&alloc.q) {
        return Err("allocation was excluded".into());
    }
    let z = problem.objective(&alloc.q);
    if (z - alloc.objective).abs() > 1e-9 * z.abs().max(1.0) {
        return Err(format!("objective {} recomputes to {z}", alloc.objective));
    }
    Ok(())
}

/// Replays parsed records. The first must be the run header.
pub fn replay_records(records: &[EventLogRecord]) -> ReplayReport {
    let fail = |seq, reason: String, state| ReplayReport {
        status: ReplayStatus::Diverged { seq, reason },
        records: records.len(),
        state,
    };
    let Some(first) = records.first() else {
        return fail(0, "empty log".into(), None);
    };
    let LogEvent::RunMeta(meta) = &first.event else {
        return fail(
            first.seq,
            "log does not start with a run header".into(),
            None,
        );
    };
    if first.seq != 0 {
        return fail(first.seq, "first record is not seq 0".into(), None);
    }
    let mut r = match Replayer::new((**meta).clone()) {
        Ok(r) => r,
        Err(e) => return fail(0, e, None),
    };
    for (i, rec) in records.iter().enumerate().skip(1) {
        if rec.seq != i as u64 {
            return fail(rec.seq, format!("expected seq {i}"), Some(r.state));
        }
        if let Err(e) = r.step(rec) {
            return fail(rec.seq, e, Some(r.state));
        }
    }
    ReplayReport {
        status: ReplayStatus::Exact,
        records: records.len(),
        state: Some(r.state),
    }
}

/// Parses and replays JSON-lines text.
pub fn replay_text(text: &str) -> ReplayReport {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line, i + 1) {
            Ok(r) => records.push(r),
            Err(LogError::Parse { line, seq, message }) => {
                return ReplayReport {
                    status: ReplayStatus::Corrupt { line, seq, message },
                    records: records.len(),
                    state: None,
                };
            }
            Err(e) => unreachable!("parsing text does no io: {e}"),
        }
    }
    replay_records(&records)
}

pub fn replay_file(path: impl AsRef<Path>) -> std::io::Result<ReplayReport> {
    Ok(replay_text(&std::fs::read_to_string(path)?))
}

/// Final subtask states of a replayed log, for quick comparisons.
pub fn final_states(report: &ReplayReport) -> Option<BTreeMap<TaskId, crate::task::SubtaskState>> {
    let s = report.state.as_ref()?;
    Some(
        s.graph
            .subtasks
            .iter()
            .map(|(id, t)| (*id, t.state))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::to_jsonl;
    use crate::sim::{run_sim, HumanScript, SimConfig};

    fn run() -> Vec<EventLogRecord> {
        run_sim(&SimConfig::default(), &HumanScript::error_prone(0.3), 4)
            .unwrap()
            .records
    }

    #[test]
    fn fresh_log_is_exact() {
        let records = run();
        let report = replay_records(&records);
        assert_eq!(report.status, ReplayStatus::Exact);
        assert!(report.state.unwrap().graph.all_placed());
    }

    #[test]
    fn altered_belief_diverges_at_its_seq() {
        let mut records = run();
        let idx = records
            .iter()
            .position(|r| matches!(r.event, LogEvent::BeliefE(_)))
            .unwrap();
        if let LogEvent::BeliefE(b) = &mut records[idx].event {
            b.probs[3] = f64::from_bits(b.probs[3].to_bits() ^ 1);
        }
        let report = replay_records(&records);
        assert!(
            matches!(report.status, ReplayStatus::Diverged { seq, .. } if seq == idx as u64),
            "{}",
            report.status
        );
    }

    #[test]
    fn altered_action_diverges() {
        let mut records = run();
        let idx = records
            .iter()
            .position(
                |r| matches!(&r.event, LogEvent::HumanAction(a) if a.action.kind == ActionKind::H1),
            )
            .unwrap();
        if let LogEvent::HumanAction(a) = &mut records[idx].event {
            a.action.subtask = TaskId(a.action.subtask.0 % 20 + 1);
        }
        let report = replay_records(&records);
        assert!(
            matches!(report.status, ReplayStatus::Diverged { seq, .. } if seq == idx as u64),
            "{}",
            report.status
        );
    }

    #[test]
    fn garbled_line_is_corrupt() {
        let text = to_jsonl(&run());
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let half = lines[5].len() / 2;
        lines[5].truncate(half);
        let report = replay_text(&lines.join("\n"));
        match report.status {
            ReplayStatus::Corrupt { line, seq, .. } => {
                assert_eq!(line, 6);
                assert_eq!(seq, Some(5));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn headerless_log_diverges() {
        let records = run();
        assert!(matches!(
            replay_records(&records[1..]).status,
            ReplayStatus::Diverged { .. }
        ));
        assert!(matches!(
            replay_records(&[]).status,
            ReplayStatus::Diverged { seq: 0, .. }
        ));
    }
}
