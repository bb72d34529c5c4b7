//! The robot's sense, estimate, allocate, schedule and act loop.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{
    solve_allocation_with, Allocation, AllocationError, AllocationProblem, CostParams,
    PointEstimates, SolverOptions,
};
use crate::belief::{
    init_belief, update_error, update_following, ActionHistory, BeliefGrid, BeliefKind, ErrorClass,
    EstimatorParams, FollowingClass,
};
use crate::log::{
    ActionOutcome, ActionRecord, AllocationRecord, BeliefRecord, EventLog, LogEvent, RunMeta,
    ScheduleRecord, StateChangeRecord,
};
use crate::scenario::ScenarioConfig;
use crate::schedule::{
    next_robot_action, solve_schedule, BuildContext, InFlight, Schedule, ScheduleError,
    SchedulingProblem,
};
use crate::task::{
    ActionKind, Agent, AgentAction, RejectReason, SubtaskState, TaskError, TaskGraph, TaskId,
};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub cost: CostParams,
    pub estimator: EstimatorParams,
    /// Replan when the following mean moved at least this much.
    pub belief_shift: f64,
    /// Allocation attempts per replan before giving up.
    pub retry_cap: u32,
    /// Longest the robot waits for the human to start, seconds.
    pub initial_wait: f64,
    pub allocation_node_limit: Option<u64>,
    pub schedule_time_limit: f64,
    pub schedule_node_limit: Option<u64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            cost: CostParams::default(),
            estimator: EstimatorParams::default(),
            belief_shift: 0.1,
            retry_cap: 5,
            initial_wait: 30.0,
            allocation_node_limit: None,
            schedule_time_limit: 2.0,
            schedule_node_limit: None,
        }
    }
}

impl PlannerConfig {
    /// Node budgets instead of wall-clock cutoffs, so runs are reproducible
    /// on any machine.
    pub fn deterministic() -> Self {
        PlannerConfig {
            allocation_node_limit: Some(200_000),
            schedule_node_limit: Some(20_000),
            cost: CostParams {
                time_limit: 60.0,
                ..CostParams::default()
            },
            schedule_time_limit: 60.0,
            ..PlannerConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanTrigger {
    HumanActionChangedState,
    RobotActionCompleted,
    ErrorDetected,
    ScheduleInvalidated,
    BeliefShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedAction {
    pub action: AgentAction,
    pub start: f64,
    pub finish: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerState {
    pub graph: TaskGraph,
    pub belief_f: BeliefGrid,
    pub belief_e: BeliefGrid,
    pub history_f: ActionHistory<FollowingClass>,
    pub history_e: ActionHistory<ErrorClass>,
    pub current_allocation: Option<Allocation>,
    pub current_schedule: Option<Schedule>,
    /// Time the current schedule's zero refers to.
    pub plan_time: f64,
    pub clock: f64,
    pub triggers: BTreeSet<ReplanTrigger>,
    pub pf_at_last_plan: f64,
    /// The human has made a first self-initiated move.
    pub human_started: bool,
    pub robot_task: Option<TimedAction>,
    pub human_task: Option<TimedAction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlanOutcome {
    /// A zero-duration action was applied; ask again.
    Instant(AgentAction),
    /// The robot is now busy until `finish`.
    Started(TimedAction),
    WaitUntil(f64),
    Idle,
    Done,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("no feasible allocation/schedule after {attempts} attempts: {last}")]
    RetryCap { attempts: u32, last: String },
    #[error("scheduling failed: {0}")]
    Schedule(ScheduleError),
    #[error("allocation failed: {0}")]
    Allocation(AllocationError),
    #[error("robot is busy until {0}")]
    RobotBusy(f64),
    #[error("no robot action in progress")]
    RobotIdle,
    #[error(transparent)]
    Task(#[from] TaskError),
}

/// Following and error classes of a human action, given the state it left
/// behind. Robot-assigned placements are not evidence about errors.
pub fn classify(
    kind: ActionKind,
    after: SubtaskState,
) -> (Option<FollowingClass>, Option<ErrorClass>) {
    let err = |wrong: bool| {
        Some(if wrong {
            ErrorClass::M1
        } else {
            ErrorClass::M2
        })
    };
    match kind {
        ActionKind::H1 => (None, err(after == SubtaskState::Misplaced)),
        ActionKind::H2 => (
            Some(FollowingClass::F1),
            err(after == SubtaskState::AssignedToRobotIncorrectly),
        ),
        ActionKind::H4 => (Some(FollowingClass::F2), None),
        ActionKind::H6 => (Some(FollowingClass::F3), None),
        _ => (None, None),
    }
}

/// Time an agent needs for an action on the given graph.
pub fn action_duration(graph: &TaskGraph, scenario: &ScenarioConfig, action: &AgentAction) -> f64 {
    let Some(sub) = graph.get(action.subtask) else {
        return 0.0;
    };
    match action.kind {
        ActionKind::R1 | ActionKind::R4 => sub.t_r,
        ActionKind::R3 => scenario.nominal_times.robot.near,
        ActionKind::H1 => {
            scenario.nominal_time(Agent::Human, action.color.unwrap_or(sub.required_color))
        }
        ActionKind::H4 => sub.t_h,
        ActionKind::H3 => scenario.nominal_times.human.near,
        _ => 0.0,
    }
}

pub struct Planner {
    pub state: PlannerState,
    pub config: PlannerConfig,
    pub scenario: ScenarioConfig,
    pub log: EventLog,
}

impl Planner {
    pub fn new(
        scenario: ScenarioConfig,
        config: PlannerConfig,
        log: EventLog,
    ) -> Result<Self, PlannerError> {
        let graph = TaskGraph::build(&scenario)?;
        let est = &config.estimator;
        let belief_f = init_belief(BeliefKind::Following, est);
        let state = PlannerState {
            graph,
            pf_at_last_plan: belief_f.expected_value(),
            belief_f,
            belief_e: init_belief(BeliefKind::Error, est),
            history_f: ActionHistory::new(est.memory),
            history_e: ActionHistory::new(est.memory),
            current_allocation: None,
            current_schedule: None,
            plan_time: 0.0,
            clock: 0.0,
            triggers: BTreeSet::new(),
            human_started: false,
            robot_task: None,
            human_task: None,
        };
        Ok(Planner {
            state,
            config,
            scenario,
            log,
        })
    }

    /// Writes the run header. Call once, before anything else is logged.
    pub fn log_meta(&mut self, driver: Option<serde_json::Value>, seed: Option<u64>) {
        let meta = RunMeta {
            scenario: self.scenario.clone(),
            planner: self.config,
            driver,
            seed,
        };
        self.log
            .push(self.state.clock, LogEvent::RunMeta(Box::new(meta)));
    }

    pub fn graph(&self) -> &TaskGraph {
        &self.state.graph
    }

    pub fn estimates(&self) -> PointEstimates {
        PointEstimates {
            p_f: self.state.belief_f.expected_value(),
            p_e: self.state.belief_e.expected_value(),
        }
    }

    /// Subtasks someone is working on.
    pub fn claimed(&self) -> BTreeSet<TaskId> {
        [self.state.robot_task, self.state.human_task]
            .iter()
            .flatten()
            .map(|t| t.action.subtask)
            .collect()
    }

    pub fn is_done(&self) -> bool {
        self.state.graph.all_placed()
            && self.state.robot_task.is_none()
            && self.state.human_task.is_none()
    }

    fn tick(&mut self, now: f64) {
        if now > self.state.clock {
            self.state.clock = now;
        }
    }

    /// The human announced an action that completes at `finish`.
    pub fn human_started(
        &mut self,
        action: AgentAction,
        now: f64,
        finish: f64,
    ) -> Result<(), RejectReason> {
        self.tick(now);
        self.state.graph.check_action(&action)?;
        if self.claimed().contains(&action.subtask) {
            return Err(RejectReason::IllegalTransition {
                state: self
                    .state
                    .graph
                    .state(action.subtask)
                    .unwrap_or(SubtaskState::Initial),
            });
        }
        if matches!(action.kind, ActionKind::H1 | ActionKind::H2) {
            self.state.human_started = true;
        }
        self.state.human_task = Some(TimedAction {
            action,
            start: now,
            finish,
        });
        self.state
            .triggers
            .insert(ReplanTrigger::ScheduleInvalidated);
        Ok(())
    }

    /// Applies a completed human action, updates beliefs and logs it.
    /// Rejected actions leave the state untouched.
    pub fn observe_human_action(
        &mut self,
        action: AgentAction,
        now: f64,
        started_at: f64,
    ) -> Result<SubtaskState, RejectReason> {
        self.tick(now);
        if self
            .state
            .human_task
            .is_some_and(|t| t.action.subtask == action.subtask)
        {
            self.state.human_task = None;
        }
        let realized_as =
            (action.kind == ActionKind::H6).then(|| vec![ActionKind::H4, ActionKind::H3]);
        let before = match self.state.graph.check_action(&action) {
            Ok(_) => self.state.graph.state(action.subtask).expect("checked"),
            Err(reason) => {
                let rec = ActionRecord {
                    action,
                    started_at,
                    outcome: ActionOutcome::Rejected {
                        reason: reason.clone(),
                    },
                    realized_as,
                };
                self.log.push(now, LogEvent::HumanAction(rec));
                return Err(reason);
            }
        };
        self.state.graph.apply_in_place(&action).expect("checked");
        let after = self.state.graph.state(action.subtask).expect("checked");
        let rec = ActionRecord {
            action,
            started_at,
            outcome: ActionOutcome::Applied { before, after },
            realized_as,
        };
        self.log.push(now, LogEvent::HumanAction(rec));
        self.log.push(
            now,
            LogEvent::StateChange(StateChangeRecord {
                subtask: action.subtask,
                from: before,
                to: after,
                cause: action.kind,
            }),
        );
        if matches!(action.kind, ActionKind::H1 | ActionKind::H2) {
            self.state.human_started = true;
        }
        let (fc, ec) = classify(action.kind, after);
        let est = self.config.estimator;
        if let Some(c) = fc {
            self.state.history_f.push(c);
            self.state.belief_f =
                update_following(&self.state.belief_f, &self.state.history_f, c, &est);
            let b = &self.state.belief_f;
            let rec = BeliefRecord {
                probs: b.probs,
                mean: b.expected_value(),
                observed: c,
                history: self.state.history_f.iter().copied().collect(),
            };
            self.log.push(now, LogEvent::BeliefF(rec));
        }
        if let Some(c) = ec {
            self.state.history_e.push(c);
            self.state.belief_e =
                update_error(&self.state.belief_e, &self.state.history_e, c, &est);
            let b = &self.state.belief_e;
            let rec = BeliefRecord {
                probs: b.probs,
                mean: b.expected_value(),
                observed: c,
                history: self.state.history_e.iter().copied().collect(),
            };
            self.log.push(now, LogEvent::BeliefE(rec));
        }
        if before != after {
            self.state
                .triggers
                .insert(ReplanTrigger::HumanActionChangedState);
        }
        if matches!(
            after,
            SubtaskState::Misplaced | SubtaskState::AssignedToRobotIncorrectly
        ) {
            self.state.triggers.insert(ReplanTrigger::ErrorDetected);
        }
        if (self.state.belief_f.expected_value() - self.state.pf_at_last_plan).abs()
            >= self.config.belief_shift
        {
            self.state.triggers.insert(ReplanTrigger::BeliefShift);
        }
        Ok(after)
    }

    fn apply_robot(
        &mut self,
        action: AgentAction,
        now: f64,
        started_at: f64,
    ) -> Result<SubtaskState, RejectReason> {
        let before = match self.state.graph.check_action(&action) {
            Ok(_) => self.state.graph.state(action.subtask).expect("checked"),
            Err(reason) => {
                let rec = ActionRecord {
                    action,
                    started_at,
                    outcome: ActionOutcome::Rejected {
                        reason: reason.clone(),
                    },
                    realized_as: None,
                };
                self.log.push(now, LogEvent::RobotAction(rec));
                return Err(reason);
            }
        };
        self.state.graph.apply_in_place(&action).expect("checked");
        let after = self.state.graph.state(action.subtask).expect("checked");
        let rec = ActionRecord {
            action,
            started_at,
            outcome: ActionOutcome::Applied { before, after },
            realized_as: None,
        };
        self.log.push(now, LogEvent::RobotAction(rec));
        self.log.push(
            now,
            LogEvent::StateChange(StateChangeRecord {
                subtask: action.subtask,
                from: before,
                to: after,
                cause: action.kind,
            }),
        );
        Ok(after)
    }

    /// Finishes the robot's current action.
    pub fn complete_robot_action(&mut self, now: f64) -> Result<AgentAction, PlannerError> {
        self.tick(now);
        let task = self
            .state
            .robot_task
            .take()
            .ok_or(PlannerError::RobotIdle)?;
        if self.apply_robot(task.action, now, task.start).is_err() {
            self.state
                .triggers
                .insert(ReplanTrigger::ScheduleInvalidated);
        }
        self.state
            .triggers
            .insert(ReplanTrigger::RobotActionCompleted);
        Ok(task.action)
    }

    fn build_context(&self, now: f64) -> BuildContext {
        let in_flight = self
            .state
            .human_task
            .iter()
            .map(|t| InFlight {
                subtask: t.action.subtask,
                agent: Agent::Human,
                remaining: (t.finish - now).max(0.0),
            })
            .collect();
        BuildContext {
            in_flight,
            error_fix_time: self.scenario.nominal_times.robot.near,
        }
    }

    /// Allocation followed by scheduling, retrying with the failed
    /// allocation excluded when no schedule exists.
    pub fn replan(&mut self, now: f64) -> Result<(), PlannerError> {
        let claimed = self.claimed();
        let estimates = self.estimates();
        let ctx = self.build_context(now);
        let mut excluded: Vec<BTreeMap<TaskId, Agent>> = Vec::new();
        let mut last = String::new();
        self.state.triggers.clear();
        self.state.pf_at_last_plan = estimates.p_f;
        for attempt in 0..self.config.retry_cap.max(1) {
            let mut problem = AllocationProblem::from_graph(
                &self.state.graph,
                &claimed,
                estimates,
                self.config.cost,
                self.state.current_allocation.clone(),
            );
            if problem.tasks.is_empty() {
                self.state.current_schedule = None;
                return Ok(());
            }
            let relaxed = problem.immediate.is_empty();
            problem.require_robot_start = !relaxed;
            problem.excluded = excluded.clone();
            let options = SolverOptions {
                warm_start: true,
                node_limit: self.config.allocation_node_limit,
            };
            let (allocation, stats) = match solve_allocation_with(&problem, options) {
                Ok(r) => r,
                Err(AllocationError::Infeasible) => {
                    last = AllocationError::Infeasible.to_string();
                    break;
                }
                Err(e) => return Err(PlannerError::Allocation(e)),
            };
            self.log.push(
                now,
                LogEvent::Allocation(Box::new(AllocationRecord {
                    allocation: allocation.clone(),
                    estimates,
                    claimed: claimed.clone(),
                    relaxed,
                    excluded: excluded.clone(),
                    attempt,
                    nodes: stats.nodes,
                })),
            );
            let mut sp = SchedulingProblem::from_graph(
                &self.state.graph,
                &allocation,
                &ctx,
                self.config.schedule_time_limit,
            );
            sp.node_limit = self.config.schedule_node_limit;
            if relaxed {
                sp.enforce_v_start = false;
            }
            match solve_schedule(&sp) {
                Ok((schedule, sstats)) => {
                    self.log.push(
                        now,
                        LogEvent::Schedule(Box::new(ScheduleRecord {
                            schedule: schedule.clone(),
                            v: sp.v.clone(),
                            enforce_v_start: sp.enforce_v_start,
                            in_flight: ctx.in_flight.clone(),
                            nodes: sstats.nodes,
                        })),
                    );
                    self.state.current_allocation = Some(allocation);
                    self.state.current_schedule = Some(schedule);
                    self.state.plan_time = now;
                    return Ok(());
                }
                Err(e @ (ScheduleError::EmptyV | ScheduleError::Infeasible)) => {
                    last = e.to_string();
                    excluded.push(allocation.q);
                }
                Err(e) => return Err(PlannerError::Schedule(e)),
            }
        }
        Err(PlannerError::RetryCap {
            attempts: self.config.retry_cap,
            last,
        })
    }

    fn needs_replan(&self) -> bool {
        !self.state.triggers.is_empty() || self.state.current_schedule.is_none()
    }

    /// One robot decision while the robot is idle.
    pub fn plan_step(&mut self, now: f64) -> Result<PlanOutcome, PlannerError> {
        self.tick(now);
        if let Some(t) = self.state.robot_task {
            return Err(PlannerError::RobotBusy(t.finish));
        }
        if self.state.graph.all_placed() {
            return Ok(PlanOutcome::Done);
        }
        let claimed = self.claimed();
        // Wrong assignments are turned down straight away.
        let wrong = self
            .state
            .graph
            .open_subtasks()
            .find(|s| {
                s.state == SubtaskState::AssignedToRobotIncorrectly && !claimed.contains(&s.id)
            })
            .map(|s| s.id);
        if let Some(id) = wrong {
            let action = AgentAction::new(ActionKind::R6, id, None);
            self.apply_robot(action, now, now)
                .map_err(|reason| TaskError::Rejected { action, reason })?;
            self.state
                .triggers
                .insert(ReplanTrigger::ScheduleInvalidated);
            return Ok(PlanOutcome::Instant(action));
        }
        if !self.state.human_started && now + EPS < self.config.initial_wait {
            return Ok(PlanOutcome::WaitUntil(self.config.initial_wait));
        }
        let mut replanned = false;
        if self.needs_replan() {
            self.replan(now)?;
            replanned = true;
        }
        loop {
            let Some(schedule) = &self.state.current_schedule else {
                return Ok(PlanOutcome::Idle);
            };
            let Some(step) = next_robot_action(schedule, &self.state.graph) else {
                return Ok(PlanOutcome::Idle);
            };
            let offset = now - self.state.plan_time;
            if step.entry.start - offset > EPS {
                return Ok(PlanOutcome::WaitUntil(
                    self.state.plan_time + step.entry.start,
                ));
            }
            let legal = self.state.graph.check_action(&step.action).is_ok()
                && !claimed.contains(&step.action.subtask);
            if !legal {
                if replanned {
                    return Ok(PlanOutcome::Idle);
                }
                self.state
                    .triggers
                    .insert(ReplanTrigger::ScheduleInvalidated);
                self.replan(now)?;
                replanned = true;
                continue;
            }
            if let Some(s) = self.state.current_schedule.as_mut() {
                s.entries.retain(|e| e.id != step.entry.id);
            }
            let duration = step.entry.finish - step.entry.start;
            if duration <= 0.0 {
                self.apply_robot(step.action, now, now)
                    .map_err(|reason| TaskError::Rejected {
                        action: step.action,
                        reason,
                    })?;
                return Ok(PlanOutcome::Instant(step.action));
            }
            let task = TimedAction {
                action: step.action,
                start: now,
                finish: now + duration,
            };
            self.state.robot_task = Some(task);
            return Ok(PlanOutcome::Started(task));
        }
    }
}

/// What the simulated human does when free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HumanDecision {
    Act {
        action: AgentAction,
        duration: f64,
    },
    WaitUntil(f64),
    /// Nothing to do until the task state changes.
    Idle,
}

pub struct HumanView<'a> {
    pub graph: &'a TaskGraph,
    pub scenario: &'a ScenarioConfig,
    pub now: f64,
    pub robot_task: Option<TimedAction>,
}

pub trait HumanDriver {
    fn decide(&mut self, view: &HumanView<'_>) -> HumanDecision;

    /// Description recorded in the run header.
    fn describe(&self) -> Option<serde_json::Value> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Final stretch of a robot placement during which the shared area is
    /// locked for the human.
    pub lock_window: f64,
    /// Give up at this simulated time.
    pub horizon: f64,
    /// Give up when no subtask got placed for this long.
    pub livelock_window: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            lock_window: 8.0,
            horizon: 7200.0,
            livelock_window: 1800.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    HorizonExceeded,
    Livelock,
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub end_time: f64,
}

fn in_lock(robot: Option<TimedAction>, t: f64, window: f64) -> Option<f64> {
    let r = robot?;
    let shared = matches!(
        r.action.kind,
        ActionKind::R1 | ActionKind::R3 | ActionKind::R4
    );
    (shared && t + EPS >= r.finish - window && t < r.finish - EPS).then_some(r.finish)
}

/// Interleaves human and robot on the event clock until every subtask is
/// placed or a guard fires. Robot completions at a time are processed before
/// human ones; the human chooses before the robot plans.
pub fn run_to_completion(
    planner: &mut Planner,
    driver: &mut dyn HumanDriver,
    options: &RunOptions,
) -> Result<RunOutcome, PlannerError> {
    let mut t = planner.state.clock;
    let mut human_wake: Option<f64> = None;
    let mut robot_wake: Option<f64> = None;
    let mut last_progress = (planner.state.graph.placed_count(), t);
    loop {
        if let Some(r) = planner.state.robot_task {
            if r.finish <= t + EPS {
                planner.complete_robot_action(t)?;
            }
        }
        if let Some(h) = planner.state.human_task {
            if h.finish <= t + EPS {
                match (
                    h.action.kind.is_placement(),
                    in_lock(planner.state.robot_task, t, options.lock_window),
                ) {
                    (true, Some(until)) => {
                        planner.state.human_task = Some(TimedAction { finish: until, ..h });
                    }
                    _ => {
                        let _ = planner.observe_human_action(h.action, t, h.start);
                        planner.state.human_task = None;
                        human_wake = None;
                    }
                }
            }
        }
        if planner.is_done() {
            return Ok(RunOutcome {
                status: RunStatus::Completed,
                end_time: t,
            });
        }
        let placed = planner.state.graph.placed_count();
        if placed != last_progress.0 {
            last_progress = (placed, t);
        }
        if t > options.horizon {
            return Ok(RunOutcome {
                status: RunStatus::HorizonExceeded,
                end_time: t,
            });
        }
        if t - last_progress.1 > options.livelock_window {
            return Ok(RunOutcome {
                status: RunStatus::Livelock,
                end_time: t,
            });
        }

        // Decisions at time t, until neither side changes anything.
        for _ in 0..64 {
            let mut changed = false;
            if planner.state.human_task.is_none() && human_wake.is_none_or(|w| w <= t + EPS) {
                let view = HumanView {
                    graph: &planner.state.graph,
                    scenario: &planner.scenario,
                    now: t,
                    robot_task: planner.state.robot_task,
                };
                match driver.decide(&view) {
                    HumanDecision::Act { action, duration } => {
                        if planner
                            .human_started(action, t, t + duration.max(0.0))
                            .is_ok()
                        {
                            human_wake = None;
                            changed = true;
                        }
                    }
                    HumanDecision::WaitUntil(w) => human_wake = Some(w.max(t)),
                    HumanDecision::Idle => human_wake = Some(f64::INFINITY),
                }
            }
            if planner.state.robot_task.is_none() {
                match planner.plan_step(t)? {
                    PlanOutcome::Instant(_) => {
                        changed = true;
                        // The human may react to the new state.
                        if human_wake == Some(f64::INFINITY) {
                            human_wake = None;
                        }
                    }
                    PlanOutcome::Started(_) => {
                        robot_wake = None;
                        changed = true;
                    }
                    PlanOutcome::WaitUntil(w) => robot_wake = Some(w),
                    PlanOutcome::Idle | PlanOutcome::Done => robot_wake = None,
                }
            }
            if !changed {
                break;
            }
        }
        // A human that idled may act once anything changes.
        let next = [
            planner.state.robot_task.map(|r| r.finish),
            planner.state.human_task.map(|h| h.finish),
            human_wake.filter(|w| w.is_finite() && *w > t + EPS),
            robot_wake.filter(|w| *w > t + EPS),
        ]
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
        if !next.is_finite() {
            return Ok(RunOutcome {
                status: RunStatus::Stalled,
                end_time: t,
            });
        }
        if human_wake == Some(f64::INFINITY) {
            human_wake = None;
        }
        t = next.max(t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::Color;

    fn planner() -> Planner {
        Planner::new(
            ScenarioConfig::study(),
            PlannerConfig::deterministic(),
            EventLog::new(),
        )
        .unwrap()
    }

    #[test]
    fn classification() {
        use SubtaskState::*;
        assert_eq!(
            classify(ActionKind::H1, Misplaced),
            (None, Some(ErrorClass::M1))
        );
        assert_eq!(
            classify(ActionKind::H1, PlacedCorrectly),
            (None, Some(ErrorClass::M2))
        );
        assert_eq!(
            classify(ActionKind::H2, AssignedToRobotIncorrectly),
            (Some(FollowingClass::F1), Some(ErrorClass::M1))
        );
        assert_eq!(
            classify(ActionKind::H4, PlacedCorrectly),
            (Some(FollowingClass::F2), None)
        );
        assert_eq!(
            classify(ActionKind::H6, Initial),
            (Some(FollowingClass::F3), None)
        );
        assert_eq!(classify(ActionKind::H3, Initial), (None, None));
    }

    #[test]
    fn wrong_placement_raises_error_belief() {
        let mut p = planner();
        let before = p.state.belief_e.expected_value();
        let wrong = Color::ALL
            .into_iter()
            .find(|&c| c != p.scenario.pattern[&TaskId(1)])
            .unwrap();
        let after = p
            .observe_human_action(
                AgentAction::new(ActionKind::H1, TaskId(1), Some(wrong)),
                12.0,
                0.0,
            )
            .unwrap();
        assert_eq!(after, SubtaskState::Misplaced);
        assert!(p.state.belief_e.expected_value() > before);
        assert!(p.state.triggers.contains(&ReplanTrigger::ErrorDetected));
    }

    #[test]
    fn illegal_observation_leaves_state() {
        let mut p = planner();
        let g = p.state.graph.clone();
        let c = p.scenario.pattern[&TaskId(2)];
        let err = p
            .observe_human_action(
                AgentAction::new(ActionKind::H1, TaskId(2), Some(c)),
                1.0,
                0.0,
            )
            .unwrap_err();
        assert!(matches!(err, RejectReason::Precedence { .. }));
        assert_eq!(p.state.graph, g);
        assert_eq!(p.log.len(), 1);
    }

    #[test]
    fn robot_waits_for_the_human_first() {
        let mut p = planner();
        assert_eq!(p.plan_step(0.0).unwrap(), PlanOutcome::WaitUntil(30.0));
        let c = p.scenario.pattern[&TaskId(1)];
        p.human_started(
            AgentAction::new(ActionKind::H1, TaskId(1), Some(c)),
            1.0,
            13.0,
        )
        .unwrap();
        let out = p.plan_step(1.0).unwrap();
        assert!(
            matches!(out, PlanOutcome::Instant(_) | PlanOutcome::Started(_)),
            "{out:?}"
        );
    }

    #[test]
    fn wrong_robot_assignment_is_rejected_immediately() {
        let mut p = planner();
        let wrong = Color::ALL
            .into_iter()
            .find(|&c| c != p.scenario.pattern[&TaskId(6)])
            .unwrap();
        p.observe_human_action(
            AgentAction::new(ActionKind::H2, TaskId(6), Some(wrong)),
            2.0,
            0.0,
        )
        .unwrap();
        let out = p.plan_step(2.0).unwrap();
        assert_eq!(
            out,
            PlanOutcome::Instant(AgentAction::new(ActionKind::R6, TaskId(6), None))
        );
        assert_eq!(p.state.graph.state(TaskId(6)), Some(SubtaskState::Initial));
    }
}
