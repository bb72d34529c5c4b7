//! Scripted human behaviour for simulated runs.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::{HumanDecision, HumanDriver, HumanView};
use crate::scenario::ScenarioConfig;
use crate::task::{
    ActionKind, Agent, AgentAction, Color, Distance, SubtaskState, TaskGraph, TaskId,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "style", rename_all = "snake_case")]
pub enum Style {
    Leader,
    CollaborativeLeader,
    CollaborativeFollower,
    Follower,
    /// Leads until `t_switch`, then follows.
    Switcher {
        t_switch: f64,
    },
    /// Collaborative leader that picks a wrong color with probability `epsilon`.
    ErrorProne {
        epsilon: f64,
    },
    /// Leads well but misremembers spot `row` of every workspace.
    ConfusedTail {
        row: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanScript {
    pub style: Style,
    /// Chance of acting on their own when an assigned subtask is also waiting.
    pub initiative: f64,
    /// Chance of turning down a robot assignment.
    pub reject_prob: f64,
    /// Rejections in a row before acting on one's own again.
    pub rejection_streak: u32,
    /// Chance of handing a self-selected subtask of this color to the robot.
    pub assign_to_robot_bias: BTreeMap<Color, f64>,
    /// Chance of remembering a partially known spot correctly.
    pub memory_accuracy: f64,
    /// Multiplier on nominal placement times.
    pub speed_factor: f64,
    /// Time to enter an action on the tablet, seconds.
    pub gui_time: f64,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScriptError {
    #[error("{name} must lie in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("speed factor must be positive, got {0}")]
    Speed(f64),
    #[error("unknown human style '{0}'")]
    UnknownStyle(String),
}

fn bias(green: f64, pink: f64, orange: f64, blue: f64) -> BTreeMap<Color, f64> {
    BTreeMap::from([
        (Color::Green, green),
        (Color::Pink, pink),
        (Color::Orange, orange),
        (Color::Blue, blue),
    ])
}

impl HumanScript {
    fn base(style: Style, initiative: f64, reject_prob: f64, assign: BTreeMap<Color, f64>) -> Self {
        HumanScript {
            style,
            initiative,
            reject_prob,
            rejection_streak: 1,
            assign_to_robot_bias: assign,
            memory_accuracy: 0.85,
            speed_factor: 1.0,
            gui_time: 2.0,
            rng_seed: 0,
        }
    }

    pub fn leader() -> Self {
        Self {
            rejection_streak: 2,
            ..Self::base(Style::Leader, 1.0, 1.0, bias(0.0, 0.1, 0.0, 0.05))
        }
    }

    pub fn collaborative_leader() -> Self {
        Self::base(
            Style::CollaborativeLeader,
            0.75,
            0.4,
            bias(0.1, 0.5, 0.1, 0.4),
        )
    }

    pub fn collaborative_follower() -> Self {
        Self::base(
            Style::CollaborativeFollower,
            0.3,
            0.1,
            bias(0.2, 0.6, 0.2, 0.6),
        )
    }

    pub fn follower() -> Self {
        Self::base(Style::Follower, 0.0, 0.0, bias(0.0, 0.0, 0.0, 0.0))
    }

    pub fn switcher(t_switch: f64) -> Self {
        Self {
            style: Style::Switcher { t_switch },
            ..Self::leader()
        }
    }

    pub fn error_prone(epsilon: f64) -> Self {
        Self {
            style: Style::ErrorProne { epsilon },
            ..Self::collaborative_leader()
        }
    }

    /// Leads, but misremembers the colors of pattern row `row` (spot `row`
    /// of every workspace).
    pub fn confused_tail(row: u32) -> Self {
        Self {
            style: Style::ConfusedTail { row },
            initiative: 1.0,
            reject_prob: 0.7,
            memory_accuracy: 1.0,
            ..Self::collaborative_leader()
        }
    }

    /// Parses `leader`, `follower`, `switcher:300`, `error_prone:0.3`,
    /// `confused_tail:5` and the like.
    pub fn by_name(spec: &str) -> Result<Self, ScriptError> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        let num = |default: f64| -> Result<f64, ScriptError> {
            arg.map(|a| {
                a.parse::<f64>()
                    .map_err(|_| ScriptError::UnknownStyle(spec.to_string()))
            })
            .unwrap_or(Ok(default))
        };
        let script = match name {
            "leader" => Self::leader(),
            "collaborative_leader" => Self::collaborative_leader(),
            "collaborative_follower" => Self::collaborative_follower(),
            "follower" => Self::follower(),
            "switcher" => Self::switcher(num(300.0)?),
            "error_prone" => Self::error_prone(num(0.3)?),
            "confused_tail" => Self::confused_tail(num(5.0)? as u32),
            _ => return Err(ScriptError::UnknownStyle(spec.to_string())),
        };
        script.validate()?;
        Ok(script)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ScriptError> {
        let mut probs = vec![
            ("initiative", self.initiative),
            ("reject_prob", self.reject_prob),
            ("memory_accuracy", self.memory_accuracy),
        ];
        if let Style::ErrorProne { epsilon } = self.style {
            probs.push(("epsilon", epsilon));
        }
        probs.extend(
            self.assign_to_robot_bias
                .values()
                .map(|&v| ("assign_to_robot_bias", v)),
        );
        for (name, value) in probs {
            if !(0.0..=1.0).contains(&value) {
                return Err(ScriptError::Probability { name, value });
            }
        }
        if !(self.speed_factor > 0.0) {
            return Err(ScriptError::Speed(self.speed_factor));
        }
        Ok(())
    }
}

/// A [`HumanDriver`] following a [`HumanScript`].
pub struct ScriptedHuman {
    script: HumanScript,
    rng: ChaCha8Rng,
    /// Color the human believes each spot needs.
    believed: BTreeMap<TaskId, Color>,
    /// Colors the human has seen fail at a spot.
    ruled_out: BTreeMap<TaskId, BTreeSet<Color>>,
    /// Own placements or assignments whose outcome is not yet known.
    attempts: BTreeMap<TaskId, Color>,
    /// Per pending assignment: will it be turned down?
    verdicts: BTreeMap<TaskId, bool>,
    last_kind: Option<ActionKind>,
    streak: u32,
    confused_errors: u32,
}

impl ScriptedHuman {
    pub fn new(script: HumanScript, scenario: &ScenarioConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(script.rng_seed);
        let mut believed = BTreeMap::new();
        for (&id, &truth) in &scenario.pattern {
            let mut c = truth;
            if let Some(&decoy) = scenario.partially_known.get(&id) {
                if rng.gen::<f64>() >= script.memory_accuracy && rng.gen_bool(0.5) {
                    c = decoy;
                }
            }
            if let Style::ConfusedTail { row } = script.style {
                let spot = (id.0 - 1) % scenario.spots_per_workspace + 1;
                if spot == row {
                    let pos = Color::ALL.iter().position(|&x| x == truth).unwrap();
                    c = Color::ALL[(pos + 2) % Color::ALL.len()];
                }
            }
            believed.insert(id, c);
        }
        ScriptedHuman {
            script,
            rng,
            believed,
            ruled_out: BTreeMap::new(),
            attempts: BTreeMap::new(),
            verdicts: BTreeMap::new(),
            last_kind: None,
            streak: 0,
            confused_errors: 0,
        }
    }

    pub fn script(&self) -> &HumanScript {
        &self.script
    }

    fn follows_now(&self, now: f64) -> bool {
        match self.script.style {
            Style::Follower => true,
            Style::Switcher { t_switch } => now >= t_switch,
            _ => false,
        }
    }

    fn in_confused_row(&self, graph: &TaskGraph, id: TaskId) -> bool {
        match self.script.style {
            Style::ConfusedTail { row } => graph.get(id).is_some_and(|s| s.spot == row),
            _ => false,
        }
    }

    fn learn(&mut self, graph: &TaskGraph) {
        let done: Vec<(TaskId, Color)> = self.attempts.iter().map(|(&id, &c)| (id, c)).collect();
        for (id, c) in done {
            let ok = matches!(
                graph.state(id),
                Some(SubtaskState::PlacedCorrectly | SubtaskState::AssignedToRobotCorrectly)
            );
            if !ok {
                self.ruled_out.entry(id).or_default().insert(c);
                if self.in_confused_row(graph, id) {
                    self.confused_errors += 1;
                }
            }
            self.attempts.remove(&id);
        }
        self.verdicts
            .retain(|id, _| graph.state(*id) == Some(SubtaskState::AssignedToHuman));
    }

    fn pick_color(&mut self, graph: &TaskGraph, id: TaskId) -> Color {
        let truth = graph.get(id).expect("known subtask").required_color;
        let ruled = self.ruled_out.get(&id).cloned().unwrap_or_default();
        let mut c = self.believed[&id];
        if ruled.contains(&c) {
            let candidates: Vec<Color> = Color::ALL
                .into_iter()
                .filter(|x| !ruled.contains(x))
                .collect();
            c = if self.in_confused_row(graph, id) && candidates.len() > 1 {
                candidates[self.rng.gen_range(0..candidates.len())]
            } else {
                truth
            };
            self.believed.insert(id, c);
        }
        if let Style::ErrorProne { epsilon } = self.script.style {
            if self.rng.gen::<f64>() < epsilon {
                let wrong: Vec<Color> = Color::ALL.into_iter().filter(|&x| x != truth).collect();
                c = wrong[self.rng.gen_range(0..wrong.len())];
            }
        }
        c
    }

    fn human_distance(view: &HumanView<'_>, c: Color) -> Distance {
        view.scenario.distance(Agent::Human, c)
    }
}

impl HumanDriver for ScriptedHuman {
    fn decide(&mut self, view: &HumanView<'_>) -> HumanDecision {
        let graph = view.graph;
        self.learn(graph);
        let robot_claim = view.robot_task.map(|t| t.action.subtask);
        let free = |id: TaskId| Some(id) != robot_claim;
        let gui = self.script.gui_time;
        let speed = self.script.speed_factor;
        let following = self.follows_now(view.now);

        let pending: Vec<TaskId> = graph
            .open_subtasks()
            .filter(|s| s.state == SubtaskState::AssignedToHuman && free(s.id))
            .map(|s| s.id)
            .collect();
        for &id in &pending {
            if !self.verdicts.contains_key(&id) {
                let unsure = self.confused_errors > 0 && self.in_confused_row(graph, id);
                let reject_prob = if following || unsure {
                    0.0
                } else {
                    self.script.reject_prob
                };
                let v = self.rng.gen::<f64>() < reject_prob;
                self.verdicts.insert(id, v);
            }
        }
        let ready_self: Vec<TaskId> = graph
            .open_subtasks()
            .filter(|s| {
                s.state == SubtaskState::Initial && free(s.id) && graph.predecessors_complete(s.id)
            })
            .map(|s| s.id)
            .collect();
        let initiative = if following {
            0.0
        } else {
            self.script.initiative
        };

        // Turn down assignments, but only so many in a row while there is
        // something to do on one's own.
        if self.last_kind != Some(ActionKind::H6) {
            self.streak = 0;
        }
        if let Some(&id) = pending.iter().find(|id| self.verdicts[id]) {
            if !(self.streak >= self.script.rejection_streak
                && !ready_self.is_empty()
                && initiative > 0.0)
            {
                let action = AgentAction::new(ActionKind::H6, id, None);
                if graph.check_action(&action).is_ok() {
                    self.last_kind = Some(ActionKind::H6);
                    self.streak += 1;
                    // Entered on the tablet as "perform" then "return".
                    return HumanDecision::Act {
                        action,
                        duration: 2.0 * gui,
                    };
                }
            }
        }

        let mut acceptable: Vec<TaskId> = pending
            .iter()
            .copied()
            .filter(|id| !self.verdicts[id] && graph.predecessors_complete(*id))
            .collect();
        acceptable.sort_by_key(|id| {
            let c = graph.get(*id).expect("open").required_color;
            (Self::human_distance(view, c), *id)
        });

        let go_self = !ready_self.is_empty()
            && initiative > 0.0
            && (acceptable.is_empty() || self.rng.gen::<f64>() < initiative);
        if go_self {
            let mut order = ready_self.clone();
            // Confused spots are left for last once the human noticed.
            order.sort_by_key(|id| {
                let hesitant = self.confused_errors > 0 && self.in_confused_row(graph, *id);
                (hesitant, Self::human_distance(view, self.believed[id]), *id)
            });
            for id in order {
                let hesitant = self.confused_errors > 0 && self.in_confused_row(graph, id);
                if hesitant && (!acceptable.is_empty() || self.rng.gen::<f64>() < 0.8) {
                    continue;
                }
                let color = self.pick_color(graph, id);
                let to_robot = self.rng.gen::<f64>()
                    < self
                        .script
                        .assign_to_robot_bias
                        .get(&color)
                        .copied()
                        .unwrap_or(0.0);
                let (kind, duration) = if to_robot {
                    (ActionKind::H2, gui)
                } else {
                    (
                        ActionKind::H1,
                        view.scenario.nominal_time(Agent::Human, color) * speed,
                    )
                };
                let action = AgentAction::new(kind, id, Some(color));
                if graph.check_action(&action).is_ok() {
                    self.attempts.insert(id, color);
                    self.last_kind = Some(kind);
                    return HumanDecision::Act { action, duration };
                }
            }
        }
        if let Some(&id) = acceptable.first() {
            let action = AgentAction::new(ActionKind::H4, id, None);
            if graph.check_action(&action).is_ok() {
                let sub = graph.get(id).expect("open");
                let duration = view.scenario.nominal_time(Agent::Human, sub.required_color) * speed;
                self.last_kind = Some(ActionKind::H4);
                return HumanDecision::Act { action, duration };
            }
        }
        HumanDecision::Idle
    }

    fn describe(&self) -> Option<serde_json::Value> {
        serde_json::to_value(&self.script).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view<'a>(graph: &'a TaskGraph, scenario: &'a ScenarioConfig) -> HumanView<'a> {
        HumanView {
            graph,
            scenario,
            now: 0.0,
            robot_task: None,
        }
    }

    #[test]
    fn follower_without_assignment_waits() {
        let cfg = ScenarioConfig::study();
        let g = TaskGraph::build(&cfg).unwrap();
        let mut h = ScriptedHuman::new(HumanScript::follower(), &cfg);
        assert_eq!(h.decide(&view(&g, &cfg)), HumanDecision::Idle);
    }

    #[test]
    fn leader_starts_on_a_near_chain_head() {
        let cfg = ScenarioConfig::study();
        let g = TaskGraph::build(&cfg).unwrap();
        let mut h = ScriptedHuman::new(
            HumanScript {
                memory_accuracy: 1.0,
                ..HumanScript::leader()
            },
            &cfg,
        );
        match h.decide(&view(&g, &cfg)) {
            HumanDecision::Act { action, .. } => {
                assert!([1, 6, 11, 16].contains(&action.subtask.0));
                let c = cfg.pattern[&action.subtask];
                assert!(matches!(c, Color::Green | Color::Orange), "{c}");
                assert_eq!(action.kind, ActionKind::H1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn certain_error_misplaces() {
        let cfg = ScenarioConfig::study();
        let g = TaskGraph::build(&cfg).unwrap();
        let script = HumanScript {
            initiative: 1.0,
            assign_to_robot_bias: bias(0.0, 0.0, 0.0, 0.0),
            ..HumanScript::error_prone(1.0)
        };
        let mut h = ScriptedHuman::new(script, &cfg);
        let HumanDecision::Act { action, .. } = h.decide(&view(&g, &cfg)) else {
            panic!()
        };
        let next = g.apply_action(&action).unwrap();
        assert_eq!(next.state(action.subtask), Some(SubtaskState::Misplaced));
    }

    #[test]
    fn names_parse() {
        assert_eq!(
            HumanScript::by_name("error_prone:0.3").unwrap().style,
            Style::ErrorProne { epsilon: 0.3 }
        );
        assert_eq!(
            HumanScript::by_name("confused_tail").unwrap().style,
            Style::ConfusedTail { row: 5 }
        );
        assert!(HumanScript::by_name("error_prone:1.5").is_err());
        assert!(HumanScript::by_name("pilot").is_err());
    }
}
