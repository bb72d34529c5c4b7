//! JSON messages exchanged with the console over a WebSocket.

use std::collections::BTreeMap;

use cobot_core::planner::TimedAction;
use cobot_core::task::{ActionKind, Agent, AgentAction, Color, SubtaskState, TaskGraph, TaskId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Starts a session, or resumes a paused one when `token` is given.
    Join {
        #[serde(default)]
        token: Option<String>,
    },
    /// An action the human just completed.
    HumanAction {
        kind: ActionKind,
        subtask: TaskId,
        #[serde(default)]
        color: Option<Color>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EngineMessage {
    Snapshot(Snapshot),
    LegalActions {
        actions: Vec<AgentAction>,
    },
    ActionRejected {
        action: AgentAction,
        reason: String,
    },
    RobotAction {
        action: AgentAction,
        start: f64,
        finish: f64,
        status: RobotActionStatus,
    },
    AssignmentNotice {
        subtask: TaskId,
        color: Color,
    },
    LightState {
        red: bool,
        until: Option<f64>,
    },
    TaskComplete {
        makespan: f64,
    },
    BeliefDebug {
        p_f: f64,
        p_e: f64,
    },
    Error {
        message: String,
    },
}

impl EngineMessage {
    pub fn type_name(&self) -> &'static str {
        match self {
            EngineMessage::Snapshot(_) => "snapshot",
            EngineMessage::LegalActions { .. } => "legal_actions",
            EngineMessage::ActionRejected { .. } => "action_rejected",
            EngineMessage::RobotAction { .. } => "robot_action",
            EngineMessage::AssignmentNotice { .. } => "assignment_notice",
            EngineMessage::LightState { .. } => "light_state",
            EngineMessage::TaskComplete { .. } => "task_complete",
            EngineMessage::BeliefDebug { .. } => "belief_debug",
            EngineMessage::Error { .. } => "error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotActionStatus {
    Started,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotView {
    pub id: TaskId,
    pub workspace: u32,
    pub spot: u32,
    pub state: SubtaskState,
    /// Color of the block sitting on the spot.
    pub block: Option<Color>,
    /// Color the robot asked for, while the spot is assigned to the human.
    pub assigned_color: Option<Color>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotView {
    pub action: AgentAction,
    pub start: f64,
    pub finish: f64,
}

/// Full board state; small enough to resend after every change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub token: String,
    pub sim_time: f64,
    pub spots: Vec<SpotView>,
    pub inventory: BTreeMap<Agent, BTreeMap<Color, u32>>,
    pub robot: Option<RobotView>,
    pub red_light: bool,
    pub paused: bool,
    pub complete: bool,
}

impl Snapshot {
    pub fn build(
        token: &str,
        sim_time: f64,
        graph: &TaskGraph,
        robot: Option<TimedAction>,
        red_light: bool,
        paused: bool,
    ) -> Self {
        let spots = graph
            .subtasks
            .values()
            .map(|s| SpotView {
                id: s.id,
                workspace: s.workspace,
                spot: s.spot,
                state: s.state,
                block: s.block.map(|b| b.color),
                assigned_color: (s.state == SubtaskState::AssignedToHuman)
                    .then_some(s.required_color),
            })
            .collect();
        let inventory = [Agent::Human, Agent::Robot]
            .into_iter()
            .map(|a| (a, graph.inventory.of(a).0.clone()))
            .collect();
        Snapshot {
            token: token.to_string(),
            sim_time,
            spots,
            inventory,
            robot: robot.map(|r| RobotView {
                action: r.action,
                start: r.start,
                finish: r.finish,
            }),
            red_light,
            paused,
            complete: graph.all_placed() && robot.is_none(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_messages_parse() {
        let m: ClientMessage = serde_json::from_str(
            r#"{"type":"human_action","kind":"H2","subtask":1,"color":"pink"}"#,
        )
        .unwrap();
        assert_eq!(
            m,
            ClientMessage::HumanAction {
                kind: ActionKind::H2,
                subtask: TaskId(1),
                color: Some(Color::Pink)
            }
        );
        let m: ClientMessage = serde_json::from_str(r#"{"type":"join"}"#).unwrap();
        assert_eq!(m, ClientMessage::Join { token: None });
    }

    #[test]
    fn engine_messages_are_tagged() {
        let m = EngineMessage::LightState {
            red: true,
            until: Some(35.0),
        };
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["type"], "light_state");
        assert_eq!(v["type"], m.type_name());
    }
}
