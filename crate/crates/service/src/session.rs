//! One live session: a planner driven by a remote human.
//!
//! Time is session time in seconds; the server maps wall-clock time onto it.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use cobot_core::log::{EventLog, LogEvent};
use cobot_core::planner::{PlanOutcome, Planner, PlannerConfig, PlannerError, RunOptions};
use cobot_core::scenario::ScenarioConfig;
use cobot_core::task::{ActionKind, Agent, AgentAction, Color, TaskId};
use thiserror::Error;

use crate::protocol::{EngineMessage, RobotActionStatus, Snapshot};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub scenario: ScenarioConfig,
    pub planner: PlannerConfig,
    pub run: RunOptions,
    /// Wall seconds per session second.
    pub realtime_factor: f64,
    /// Where the session log goes; `None` keeps it in memory only.
    pub log_path: Option<PathBuf>,
    /// Send belief estimates to the client.
    pub debug_beliefs: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            scenario: ScenarioConfig::study(),
            planner: PlannerConfig::deterministic(),
            run: RunOptions::default(),
            realtime_factor: 0.2,
            log_path: None,
            debug_beliefs: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error("cannot open session log: {0}")]
    Log(#[from] std::io::Error),
    #[error("realtime factor must be positive, got {0}")]
    Factor(f64),
}

pub struct Session {
    token: String,
    planner: Planner,
    config: SessionConfig,
    robot_wake: Option<f64>,
    red_sent: Option<bool>,
    paused: bool,
    completed: bool,
}

impl Session {
    pub fn new(token: impl Into<String>, config: SessionConfig) -> Result<Self, SessionError> {
        if !(config.realtime_factor > 0.0) {
            return Err(SessionError::Factor(config.realtime_factor));
        }
        let log = match &config.log_path {
            Some(path) => EventLog::with_sink(Box::new(BufWriter::new(File::create(path)?))),
            None => EventLog::new(),
        };
        let mut planner = Planner::new(config.scenario.clone(), config.planner, log)?;
        planner.log_meta(Some(serde_json::json!({ "live": true })), None);
        Ok(Session {
            token: token.into(),
            planner,
            config,
            robot_wake: None,
            red_sent: None,
            paused: false,
            completed: false,
        })
    }

    pub fn token(&self) -> &str {
        &self.token
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn planner(&self) -> &Planner {
        &self.planner
    }

    pub fn now(&self) -> f64 {
        self.planner.state.clock
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn is_complete(&self) -> bool {
        self.planner.is_done()
    }

    /// Shared area closed to the human: the last stretch of a robot move
    /// onto the table.
    pub fn red_light(&self, now: f64) -> Option<f64> {
        let r = self.planner.state.robot_task?;
        let shared = matches!(
            r.action.kind,
            ActionKind::R1 | ActionKind::R3 | ActionKind::R4
        );
        (shared && now + EPS >= r.finish - self.config.run.lock_window && now < r.finish - EPS)
            .then_some(r.finish)
    }

    /// Human actions that would be accepted right now.
    pub fn legal_actions(&self, now: f64) -> Vec<AgentAction> {
        let red = self.red_light(now).is_some();
        let robot_claim = self.planner.state.robot_task.map(|t| t.action.subtask);
        self.planner
            .graph()
            .feasible_actions(Agent::Human)
            .into_iter()
            .filter(|a| Some(a.subtask) != robot_claim && !(red && a.kind.is_placement()))
            .collect()
    }

    pub fn snapshot(&self, now: f64) -> Snapshot {
        Snapshot::build(
            &self.token,
            now,
            self.planner.graph(),
            self.planner.state.robot_task,
            self.red_light(now).is_some(),
            self.paused,
        )
    }

    fn board(&self, now: f64, out: &mut Vec<EngineMessage>) {
        out.push(EngineMessage::Snapshot(self.snapshot(now)));
        out.push(EngineMessage::LegalActions {
            actions: self.legal_actions(now),
        });
    }

    /// Messages for a client that (re)connects.
    pub fn join(&mut self, now: f64) -> Vec<EngineMessage> {
        self.paused = false;
        let mut out = self.advance(now);
        self.red_sent = None;
        self.light(now, &mut out);
        self.board(now, &mut out);
        out
    }

    /// Freezes the session until the next join.
    pub fn pause(&mut self) {
        self.paused = true;
    }

    fn light(&mut self, now: f64, out: &mut Vec<EngineMessage>) {
        let until = self.red_light(now);
        if self.red_sent != Some(until.is_some()) {
            self.red_sent = Some(until.is_some());
            out.push(EngineMessage::LightState {
                red: until.is_some(),
                until,
            });
        }
    }

    /// Next session time at which [`Session::advance`] has something to do.
    pub fn next_wakeup(&self) -> Option<f64> {
        if self.paused || self.completed {
            return None;
        }
        let mut times = vec![];
        if let Some(r) = self.planner.state.robot_task {
            times.push(r.finish);
            let lock = r.finish - self.config.run.lock_window;
            if lock > self.now() + EPS {
                times.push(lock);
            }
        }
        times.extend(self.robot_wake);
        times.into_iter().reduce(f64::min)
    }

    /// Runs the robot side up to `now`.
    pub fn advance(&mut self, now: f64) -> Vec<EngineMessage> {
        let mut out = Vec::new();
        if self.paused {
            return out;
        }
        let mut changed = false;
        loop {
            let t = self.planner.state.clock;
            if self.planner.state.robot_task.is_none() && !self.planner.is_done() {
                changed |= self.plan_at(t, &mut out);
            }
            let next = [
                self.planner.state.robot_task.map(|r| r.finish),
                self.robot_wake,
            ]
            .into_iter()
            .flatten()
            .reduce(f64::min);
            match next {
                Some(w) if w <= now + EPS => {
                    self.planner.state.clock = w.max(t);
                    self.robot_wake = None;
                    if let Some(r) = self
                        .planner
                        .state
                        .robot_task
                        .filter(|r| r.finish <= w + EPS)
                    {
                        let applied = self.planner.complete_robot_action(w).is_ok()
                            && self.last_robot_applied();
                        let status = if applied {
                            RobotActionStatus::Completed
                        } else {
                            RobotActionStatus::Failed
                        };
                        out.push(EngineMessage::RobotAction {
                            action: r.action,
                            start: r.start,
                            finish: w,
                            status,
                        });
                        changed = true;
                    }
                }
                _ => break,
            }
        }
        if now > self.planner.state.clock {
            self.planner.state.clock = now;
        }
        self.light(now, &mut out);
        if changed {
            self.board(now, &mut out);
        }
        if self.planner.is_done() && !self.completed {
            self.completed = true;
            out.push(EngineMessage::TaskComplete {
                makespan: self.planner.state.clock,
            });
        }
        out
    }

    fn last_robot_applied(&self) -> bool {
        self.planner
            .log
            .records()
            .iter()
            .rev()
            .find_map(|r| match &r.event {
                LogEvent::RobotAction(a) => Some(a.applied().is_some()),
                _ => None,
            })
            == Some(true)
    }

    /// Lets the robot act at `t` until it starts something durative or has
    /// nothing to do. Returns whether anything changed.
    fn plan_at(&mut self, t: f64, out: &mut Vec<EngineMessage>) -> bool {
        let mut changed = false;
        for _ in 0..64 {
            match self.planner.plan_step(t) {
                Ok(PlanOutcome::Instant(action)) => {
                    out.push(EngineMessage::RobotAction {
                        action,
                        start: t,
                        finish: t,
                        status: RobotActionStatus::Completed,
                    });
                    if action.kind == ActionKind::R2 {
                        if let Some(s) = self.planner.graph().get(action.subtask) {
                            out.push(EngineMessage::AssignmentNotice {
                                subtask: s.id,
                                color: s.required_color,
                            });
                        }
                    }
                    changed = true;
                }
                Ok(PlanOutcome::Started(task)) => {
                    out.push(EngineMessage::RobotAction {
                        action: task.action,
                        start: task.start,
                        finish: task.finish,
                        status: RobotActionStatus::Started,
                    });
                    self.robot_wake = None;
                    return true;
                }
                Ok(PlanOutcome::WaitUntil(w)) => {
                    self.robot_wake = Some(w);
                    return changed;
                }
                Ok(PlanOutcome::Idle | PlanOutcome::Done) => {
                    self.robot_wake = None;
                    return changed;
                }
                Err(e) => {
                    out.push(EngineMessage::Error {
                        message: e.to_string(),
                    });
                    self.robot_wake = None;
                    return changed;
                }
            }
        }
        changed
    }

    /// A completed human action. Always answered with either
    /// `action_rejected` or a fresh snapshot.
    pub fn human_action(
        &mut self,
        kind: ActionKind,
        subtask: TaskId,
        color: Option<Color>,
        now: f64,
    ) -> Vec<EngineMessage> {
        let mut out = self.advance(now);
        let action = AgentAction::new(kind, subtask, color);
        let reject = |out: &mut Vec<EngineMessage>, reason: String| {
            out.push(EngineMessage::ActionRejected { action, reason });
        };
        if self.paused {
            reject(&mut out, "session is paused".into());
            return out;
        }
        if kind.agent() != Agent::Human {
            reject(&mut out, format!("{kind} is a robot action"));
            return out;
        }
        if kind.is_placement() && self.red_light(now).is_some() {
            reject(
                &mut out,
                "the shared area is locked while the robot places a block".into(),
            );
            return out;
        }
        if self
            .planner
            .state
            .robot_task
            .is_some_and(|r| r.action.subtask == subtask)
        {
            reject(&mut out, format!("the robot is working on {subtask}"));
            return out;
        }
        match self.planner.observe_human_action(action, now, now) {
            Err(reason) => reject(&mut out, reason.to_string()),
            Ok(_) => {
                if self.config.debug_beliefs {
                    let e = self.planner.estimates();
                    out.push(EngineMessage::BeliefDebug {
                        p_f: e.p_f,
                        p_e: e.p_e,
                    });
                }
                let more = self.advance(now);
                let boarded = more.iter().any(|m| matches!(m, EngineMessage::Snapshot(_)));
                out.extend(more);
                if !boarded {
                    self.board(now, &mut out);
                }
            }
        }
        out
    }

    pub fn log_error(&self) -> Option<&str> {
        self.planner.log.sink_error()
    }

    pub fn records(&self) -> &[cobot_core::log::EventLogRecord] {
        self.planner.log.records()
    }
}
