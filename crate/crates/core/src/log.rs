//! Append-only event log, one JSON record per line.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{Allocation, PointEstimates};
use crate::belief::{ErrorClass, FollowingClass, GRID_POINTS};
use crate::planner::PlannerConfig;
use crate::scenario::ScenarioConfig;
use crate::schedule::{ExtId, InFlight, Schedule};
use crate::task::{ActionKind, Agent, AgentAction, RejectReason, SubtaskState, TaskId};

/// One line of the log: `{"seq", "sim_time", "kind", "payload"}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventLogRecord {
    pub seq: u64,
    pub sim_time: f64,
    #[serde(flatten)]
    pub event: LogEvent,
}

// Flattened fields are buffered by serde, which turns integer map keys into
// strings; reading the payload directly keeps them intact.
impl<'de> Deserialize<'de> for EventLogRecord {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::{Error, MapAccess, Visitor};

        struct RecordVisitor;

        impl<'de> Visitor<'de> for RecordVisitor {
            type Value = EventLogRecord;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("an event log record")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<EventLogRecord, A::Error> {
                let mut seq = None;
                let mut sim_time = None;
                let mut kind: Option<String> = None;
                let mut event = None;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "seq" => seq = Some(map.next_value()?),
                        "sim_time" => sim_time = Some(map.next_value()?),
                        "kind" => kind = Some(map.next_value()?),
                        "payload" => {
                            let k = kind
                                .as_deref()
                                .ok_or_else(|| A::Error::custom("payload before kind"))?;
                            event = Some(match k {
                                "run_meta" => LogEvent::RunMeta(map.next_value()?),
                                "human_action" => LogEvent::HumanAction(map.next_value()?),
                                "robot_action" => LogEvent::RobotAction(map.next_value()?),
                                "belief_f" => LogEvent::BeliefF(map.next_value()?),
                                "belief_e" => LogEvent::BeliefE(map.next_value()?),
                                "allocation" => LogEvent::Allocation(map.next_value()?),
                                "schedule" => LogEvent::Schedule(map.next_value()?),
                                "state_change" => LogEvent::StateChange(map.next_value()?),
                                other => return Err(A::Error::unknown_variant(other, KINDS)),
                            });
                        }
                        other => {
                            return Err(A::Error::unknown_field(
                                other,
                                &["seq", "sim_time", "kind", "payload"],
                            ))
                        }
                    }
                }
                Ok(EventLogRecord {
                    seq: seq.ok_or_else(|| A::Error::missing_field("seq"))?,
                    sim_time: sim_time.ok_or_else(|| A::Error::missing_field("sim_time"))?,
                    event: event.ok_or_else(|| A::Error::missing_field("payload"))?,
                })
            }
        }

        deserializer.deserialize_map(RecordVisitor)
    }
}

const KINDS: &[&str] = &[
    "run_meta",
    "human_action",
    "robot_action",
    "belief_f",
    "belief_e",
    "allocation",
    "schedule",
    "state_change",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum LogEvent {
    RunMeta(Box<RunMeta>),
    HumanAction(ActionRecord),
    RobotAction(ActionRecord),
    BeliefF(BeliefRecord<FollowingClass>),
    BeliefE(BeliefRecord<ErrorClass>),
    Allocation(Box<AllocationRecord>),
    Schedule(Box<ScheduleRecord>),
    StateChange(StateChangeRecord),
}

impl LogEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            LogEvent::RunMeta(_) => "run_meta",
            LogEvent::HumanAction(_) => "human_action",
            LogEvent::RobotAction(_) => "robot_action",
            LogEvent::BeliefF(_) => "belief_f",
            LogEvent::BeliefE(_) => "belief_e",
            LogEvent::Allocation(_) => "allocation",
            LogEvent::Schedule(_) => "schedule",
            LogEvent::StateChange(_) => "state_change",
        }
    }
}

/// Everything needed to rebuild the initial planner state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub scenario: ScenarioConfig,
    pub planner: PlannerConfig,
    /// Free-form description of whoever drove the human side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driver: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ActionOutcome {
    Applied {
        before: SubtaskState,
        after: SubtaskState,
    },
    Rejected {
        reason: RejectReason,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub action: AgentAction,
    pub started_at: f64,
    pub outcome: ActionOutcome,
    /// GUI steps an atomic action stands for (a rejection is entered as
    /// "perform" followed by "return").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realized_as: Option<Vec<ActionKind>>,
}

impl ActionRecord {
    pub fn applied(&self) -> Option<(SubtaskState, SubtaskState)> {
        match self.outcome {
            ActionOutcome::Applied { before, after } => Some((before, after)),
            ActionOutcome::Rejected { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefRecord<C> {
    pub probs: [f64; GRID_POINTS],
    pub mean: f64,
    pub observed: C,
    pub history: Vec<C>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub allocation: Allocation,
    pub estimates: PointEstimates,
    pub claimed: BTreeSet<TaskId>,
    /// The robot-start constraint was dropped because nothing could start.
    pub relaxed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<BTreeMap<TaskId, Agent>>,
    pub attempt: u32,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub schedule: Schedule,
    pub v: BTreeSet<ExtId>,
    pub enforce_v_start: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub in_flight: Vec<InFlight>,
    pub nodes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateChangeRecord {
    pub subtask: TaskId,
    pub from: SubtaskState,
    pub to: SubtaskState,
    pub cause: ActionKind,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse {
        line: usize,
        seq: Option<u64>,
        message: String,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// In-memory log with an optional line sink that is flushed per record.
#[derive(Default)]
pub struct EventLog {
    records: Vec<EventLogRecord>,
    sink: Option<Box<dyn Write + Send>>,
    sink_error: Option<String>,
}

impl std::fmt::Debug for EventLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLog")
            .field("records", &self.records.len())
            .finish()
    }
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_sink(sink: Box<dyn Write + Send>) -> Self {
        EventLog {
            records: Vec::new(),
            sink: Some(sink),
            sink_error: None,
        }
    }

    pub fn push(&mut self, sim_time: f64, event: LogEvent) -> u64 {
        let seq = self.records.len() as u64;
        let record = EventLogRecord {
            seq,
            sim_time,
            event,
        };
        if let Some(sink) = self.sink.as_mut() {
            let line = serde_json::to_string(&record).expect("log records serialize");
            let res = writeln!(sink, "{line}").and_then(|_| sink.flush());
            if let Err(e) = res {
                self.sink_error.get_or_insert(e.to_string());
            }
        }
        self.records.push(record);
        seq
    }

    pub fn records(&self) -> &[EventLogRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<EventLogRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// First write failure of the sink, if any.
    pub fn sink_error(&self) -> Option<&str> {
        self.sink_error.as_deref()
    }

    pub fn to_jsonl(&self) -> String {
        to_jsonl(&self.records)
    }
}

pub fn to_jsonl(records: &[EventLogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("log records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: impl AsRef<Path>, records: &[EventLogRecord]) -> std::io::Result<()> {
    std::fs::write(path, to_jsonl(records))
}

/// Parses one line; on failure reports the line number and, when it can be
/// recovered, the record's sequence number.
pub fn parse_line(line: &str, line_no: usize) -> Result<EventLogRecord, LogError> {
    serde_json::from_str(line).map_err(|e| {
        let seq = serde_json::from_str::<serde_json::Value>(line)
            .ok()
            .and_then(|v| v.get("seq").and_then(|s| s.as_u64()))
            .or_else(|| leading_seq(line));
        LogError::Parse {
            line: line_no,
            seq,
            message: e.to_string(),
        }
    })
}

/// `seq` of a truncated line that still starts the way records are written.
fn leading_seq(line: &str) -> Option<u64> {
    let rest = line.trim_start().strip_prefix("{\"seq\":")?;
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

pub fn parse_jsonl(text: &str) -> Result<Vec<EventLogRecord>, LogError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<EventLogRecord>, LogError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(parse_line(&line, i + 1)?);
        }
    }
    Ok(out)
}
