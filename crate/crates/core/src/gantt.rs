//! Gantt rows (`agent,id,start,finish`) for schedules and executed runs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::log::{EventLogRecord, LogEvent};
use crate::schedule::Schedule;
use crate::task::Agent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanttRow {
    pub agent: Agent,
    pub id: String,
    pub start: f64,
    pub finish: f64,
}

/// Planned entries, shifted by `offset` (the time the plan was made).
pub fn schedule_rows(schedule: &Schedule, offset: f64) -> Vec<GanttRow> {
    let mut rows: Vec<GanttRow> = schedule
        .entries
        .iter()
        .map(|e| GanttRow {
            agent: e.agent,
            id: e.id.to_string(),
            start: e.start + offset,
            finish: e.finish + offset,
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.agent, a.start)
            .partial_cmp(&(b.agent, b.start))
            .expect("finite times")
    });
    rows
}

/// Actions that took effect, as `t3:H1` style ids.
pub fn executed_rows(records: &[EventLogRecord]) -> Vec<GanttRow> {
    let mut rows = Vec::new();
    for r in records {
        if let LogEvent::HumanAction(a) | LogEvent::RobotAction(a) = &r.event {
            if a.applied().is_some() {
                rows.push(GanttRow {
                    agent: a.action.agent,
                    id: format!("{}:{}", a.action.subtask, a.action.kind),
                    start: a.started_at,
                    finish: r.sim_time,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.agent, a.start, a.finish)
            .partial_cmp(&(b.agent, b.start, b.finish))
            .expect("finite")
    });
    rows
}

pub fn write_csv<W: Write>(rows: &[GanttRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv(rows: &[GanttRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

pub fn read_csv(text: &str) -> csv::Result<Vec<GanttRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{ExtId, ScheduleEntry};
    use crate::task::TaskId;

    #[test]
    fn schedule_round_trip() {
        let schedule = Schedule {
            entries: vec![
                ScheduleEntry {
                    id: ExtId::allocate(TaskId(7)),
                    agent: Agent::Robot,
                    start: 0.0,
                    finish: 0.0,
                },
                ScheduleEntry {
                    id: ExtId::base(TaskId(7)),
                    agent: Agent::Human,
                    start: 0.0,
                    finish: 12.0,
                },
                ScheduleEntry {
                    id: ExtId::error_fix(TaskId(17)),
                    agent: Agent::Robot,
                    start: 0.0,
                    finish: 35.0,
                },
            ],
            makespan: 35.0,
            incumbent_optimal: true,
        };
        let rows = schedule_rows(&schedule, 100.0);
        let text = to_csv(&rows);
        assert!(text.starts_with("agent,id,start,finish\n"), "{text}");
        assert!(text.contains("human,t7,100.0,112.0"), "{text}");
        assert!(text.contains("robot,t17^e,100.0,135.0"), "{text}");
        assert_eq!(read_csv(&text).unwrap(), rows);
    }
}
