//! Collaborative task model: the precedence graph of block placements, the
//! per-subtask state machine and the twelve agent actions that drive it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{ConfigError, ScenarioConfig};

/// Identifier of a node in the task graph. `TaskId(0)` is the dummy start
/// node, `n + 1` the dummy finish node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Green,
    Pink,
    Orange,
    Blue,
}

impl Color {
    pub const ALL: [Color; 4] = [Color::Green, Color::Pink, Color::Orange, Color::Blue];
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Color::Green => "green",
            Color::Pink => "pink",
            Color::Orange => "orange",
            Color::Blue => "blue",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    Human,
    Robot,
}

impl Agent {
    pub fn other(self) -> Agent {
        match self {
            Agent::Human => Agent::Robot,
            Agent::Robot => Agent::Human,
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Agent::Human => "human",
            Agent::Robot => "robot",
        })
    }
}

/// Distance of a block table from the shared area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Near,
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtaskState {
    Initial,
    PlacedCorrectly,
    Misplaced,
    AssignedToRobotCorrectly,
    AssignedToRobotIncorrectly,
    AssignedToHuman,
}

impl SubtaskState {
    pub const ALL: [SubtaskState; 6] = [
        SubtaskState::Initial,
        SubtaskState::PlacedCorrectly,
        SubtaskState::Misplaced,
        SubtaskState::AssignedToRobotCorrectly,
        SubtaskState::AssignedToRobotIncorrectly,
        SubtaskState::AssignedToHuman,
    ];
}

/// The six actions available to each agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    /// Select a task for themselves (place a block).
    H1,
    /// Assign a task to the robot.
    H2,
    /// Return a block from the shared area.
    H3,
    /// Perform a task assigned by the robot.
    H4,
    /// Cancel a task assigned to the robot.
    H5,
    /// Reject a task assigned by the robot.
    H6,
    /// Select a task for itself.
    R1,
    /// Assign a task to the human.
    R2,
    /// Return a wrong block from the shared area.
    R3,
    /// Perform a correct task assigned by the human.
    R4,
    /// Cancel a task assigned to the human.
    R5,
    /// Reject a task assigned by the human.
    R6,
}

impl ActionKind {
    pub const ALL: [ActionKind; 12] = [
        ActionKind::H1,
        ActionKind::H2,
        ActionKind::H3,
        ActionKind::H4,
        ActionKind::H5,
        ActionKind::H6,
        ActionKind::R1,
        ActionKind::R2,
        ActionKind::R3,
        ActionKind::R4,
        ActionKind::R5,
        ActionKind::R6,
    ];

    pub fn agent(self) -> Agent {
        use ActionKind::*;
        match self {
            H1 | H2 | H3 | H4 | H5 | H6 => Agent::Human,
            R1 | R2 | R3 | R4 | R5 | R6 => Agent::Robot,
        }
    }

    /// Kinds that move the subtask forward and therefore need every
    /// predecessor placed correctly.
    pub fn needs_precedence(self) -> bool {
        use ActionKind::*;
        matches!(self, H1 | H2 | H4 | R1 | R2 | R4)
    }

    /// Kinds whose payload must name the block color chosen by the human.
    pub fn needs_color(self) -> bool {
        matches!(self, ActionKind::H1 | ActionKind::H2)
    }

    /// Kinds that physically put a block on the shared area.
    pub fn is_placement(self) -> bool {
        use ActionKind::*;
        matches!(self, H1 | H4 | R1 | R4)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentAction {
    pub agent: Agent,
    pub kind: ActionKind,
    pub subtask: TaskId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Color>,
}

impl AgentAction {
    pub fn new(kind: ActionKind, subtask: TaskId, color: Option<Color>) -> Self {
        AgentAction {
            agent: kind.agent(),
            kind,
            subtask,
            color,
        }
    }
}

impl fmt::Display for AgentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.color {
            Some(c) => write!(f, "{}({}, {})", self.kind, self.subtask, c),
            None => write!(f, "{}({})", self.kind, self.subtask),
        }
    }
}

/// A block currently lying on the shared area, and who it must go back to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacedBlock {
    pub color: Color,
    pub owner: Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub id: TaskId,
    pub workspace: u32,
    pub spot: u32,
    pub required_color: Color,
    pub state: SubtaskState,
    pub predecessors: BTreeSet<TaskId>,
    /// Nominal human processing time, seconds.
    pub t_h: f64,
    /// Nominal robot processing time, seconds.
    pub t_r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<PlacedBlock>,
}

/// Per-color block counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColorCounts(pub BTreeMap<Color, u32>);

impl ColorCounts {
    pub fn uniform(count: u32) -> Self {
        ColorCounts(Color::ALL.iter().map(|&c| (c, count)).collect())
    }

    pub fn get(&self, color: Color) -> u32 {
        self.0.get(&color).copied().unwrap_or(0)
    }

    fn take(&mut self, color: Color) -> bool {
        match self.0.get_mut(&color) {
            Some(n) if *n > 0 => {
                *n -= 1;
                true
            }
            _ => false,
        }
    }

    fn put(&mut self, color: Color) {
        *self.0.entry(color).or_insert(0) += 1;
    }

    pub fn total(&self) -> u32 {
        self.0.values().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inventory {
    pub human: ColorCounts,
    pub robot: ColorCounts,
}

impl Inventory {
    pub fn of(&self, agent: Agent) -> &ColorCounts {
        match agent {
            Agent::Human => &self.human,
            Agent::Robot => &self.robot,
        }
    }

    fn of_mut(&mut self, agent: Agent) -> &mut ColorCounts {
        match agent {
            Agent::Human => &mut self.human,
            Agent::Robot => &mut self.robot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    UnknownSubtask,
    AgentMismatch,
    MissingColor,
    WrongColor { expected: Color },
    IllegalTransition { state: SubtaskState },
    Precedence { blocking: TaskId },
    OutOfBlocks { color: Color },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::UnknownSubtask => f.write_str("unknown subtask"),
            RejectReason::AgentMismatch => {
                f.write_str("action kind does not belong to the acting agent")
            }
            RejectReason::MissingColor => f.write_str("a block color is required"),
            RejectReason::WrongColor { expected } => write!(f, "only {expected} may be used here"),
            RejectReason::IllegalTransition { state } => {
                write!(f, "not allowed while the subtask is {state:?}")
            }
            RejectReason::Precedence { blocking } => {
                write!(f, "{blocking} must be completed first")
            }
            RejectReason::OutOfBlocks { color } => write!(f, "no {color} blocks left"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TaskError {
    #[error("rejected {action}: {reason}")]
    Rejected {
        action: AgentAction,
        reason: RejectReason,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Target state of the `(state, kind)` edge, if the edge exists. H1 and H2
/// have two targets depending on whether the named color is correct.
pub fn transition(
    state: SubtaskState,
    kind: ActionKind,
    correct_color: bool,
) -> Option<SubtaskState> {
    use ActionKind::*;
    use SubtaskState::*;
    match (state, kind) {
        (Initial, H1) if correct_color => Some(PlacedCorrectly),
        (Initial, H1) => Some(Misplaced),
        (Initial, H2) if correct_color => Some(AssignedToRobotCorrectly),
        (Initial, H2) => Some(AssignedToRobotIncorrectly),
        (Initial, R1) => Some(PlacedCorrectly),
        (Initial, R2) => Some(AssignedToHuman),
        (Misplaced, H3 | R3) => Some(Initial),
        (AssignedToRobotIncorrectly, H5 | R6) => Some(Initial),
        (AssignedToRobotCorrectly, H5) => Some(Initial),
        (AssignedToRobotCorrectly, R4) => Some(PlacedCorrectly),
        (AssignedToHuman, R5 | H6) => Some(Initial),
        (AssignedToHuman, H4) => Some(PlacedCorrectly),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGraph {
    pub subtasks: BTreeMap<TaskId, Subtask>,
    pub inventory: Inventory,
}

impl TaskGraph {
    /// Builds the chain-structured graph: one chain per workspace, spot `n`
    /// depending on spot `n - 1` and chain heads on the dummy start node.
    pub fn build(config: &ScenarioConfig) -> Result<TaskGraph, TaskError> {
        config.validate()?;
        let mut subtasks = BTreeMap::new();
        for w in 1..=config.workspaces {
            for s in 1..=config.spots_per_workspace {
                let id = config.subtask_id(w, s);
                let color = config.pattern[&id];
                let pred = if s == 1 {
                    TaskId(0)
                } else {
                    config.subtask_id(w, s - 1)
                };
                subtasks.insert(
                    id,
                    Subtask {
                        id,
                        workspace: w,
                        spot: s,
                        required_color: color,
                        state: SubtaskState::Initial,
                        predecessors: BTreeSet::from([pred]),
                        t_h: config.nominal_time(Agent::Human, color),
                        t_r: config.nominal_time(Agent::Robot, color),
                        block: None,
                    },
                );
            }
        }
        Ok(TaskGraph {
            subtasks,
            inventory: config.block_inventory.clone(),
        })
    }

    pub fn start_node(&self) -> TaskId {
        TaskId(0)
    }

    pub fn finish_node(&self) -> TaskId {
        TaskId(self.subtasks.keys().next_back().map_or(1, |id| id.0 + 1))
    }

    /// Number of nodes including the two dummy nodes.
    pub fn node_count(&self) -> usize {
        self.subtasks.len() + 2
    }

    /// Predecessors of any node, dummy finish included.
    pub fn node_predecessors(&self, id: TaskId) -> BTreeSet<TaskId> {
        if id == self.finish_node() {
            let has_successor: BTreeSet<TaskId> = self
                .subtasks
                .values()
                .flat_map(|s| s.predecessors.iter().copied())
                .collect();
            self.subtasks
                .keys()
                .filter(|k| !has_successor.contains(k))
                .copied()
                .collect()
        } else {
            self.subtasks
                .get(&id)
                .map(|s| s.predecessors.clone())
                .unwrap_or_default()
        }
    }

    /// Kahn's algorithm over all nodes; `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<TaskId>> {
        let mut nodes: Vec<TaskId> = vec![self.start_node()];
        nodes.extend(self.subtasks.keys().copied());
        nodes.push(self.finish_node());
        let preds: BTreeMap<TaskId, BTreeSet<TaskId>> = nodes
            .iter()
            .map(|&n| (n, self.node_predecessors(n)))
            .collect();
        let mut indegree: BTreeMap<TaskId, usize> =
            preds.iter().map(|(&n, p)| (n, p.len())).collect();
        let mut ready: BTreeSet<TaskId> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&n, _)| n)
            .collect();
        let mut order = Vec::with_capacity(nodes.len());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for (&m, p) in &preds {
                if p.contains(&n) {
                    let d = indegree.get_mut(&m).expect("node");
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(m);
                    }
                }
            }
        }
        (order.len() == nodes.len()).then_some(order)
    }

    pub fn get(&self, id: TaskId) -> Option<&Subtask> {
        self.subtasks.get(&id)
    }

    pub fn state(&self, id: TaskId) -> Option<SubtaskState> {
        self.subtasks.get(&id).map(|s| s.state)
    }

    /// The dummy start node counts as complete.
    pub fn is_complete(&self, id: TaskId) -> bool {
        id == self.start_node()
            || self
                .subtasks
                .get(&id)
                .is_some_and(|s| s.state == SubtaskState::PlacedCorrectly)
    }

    pub fn predecessors_complete(&self, id: TaskId) -> bool {
        self.first_blocking_predecessor(id).is_none()
    }

    fn first_blocking_predecessor(&self, id: TaskId) -> Option<TaskId> {
        self.subtasks
            .get(&id)?
            .predecessors
            .iter()
            .copied()
            .find(|&p| !self.is_complete(p))
    }

    pub fn all_placed(&self) -> bool {
        self.subtasks
            .values()
            .all(|s| s.state == SubtaskState::PlacedCorrectly)
    }

    pub fn placed_count(&self) -> usize {
        self.subtasks
            .values()
            .filter(|s| s.state == SubtaskState::PlacedCorrectly)
            .count()
    }

    /// Blocks in inventories plus blocks on the shared area, per color.
    pub fn block_totals(&self) -> ColorCounts {
        let mut totals = ColorCounts::default();
        for c in Color::ALL {
            let on_table = self
                .subtasks
                .values()
                .filter(|s| s.block.is_some_and(|b| b.color == c))
                .count();
            totals.0.insert(
                c,
                self.inventory.human.get(c) + self.inventory.robot.get(c) + on_table as u32,
            );
        }
        totals
    }

    /// Checks an action without applying it.
    pub fn check_action(&self, action: &AgentAction) -> Result<SubtaskState, RejectReason> {
        let sub = self
            .subtasks
            .get(&action.subtask)
            .ok_or(RejectReason::UnknownSubtask)?;
        if action.kind.agent() != action.agent {
            return Err(RejectReason::AgentMismatch);
        }
        let correct = match action.kind {
            ActionKind::H1 | ActionKind::H2 => {
                action.color.ok_or(RejectReason::MissingColor)? == sub.required_color
            }
            _ => {
                if let Some(c) = action.color {
                    if c != sub.required_color && action.kind.is_placement() {
                        return Err(RejectReason::WrongColor {
                            expected: sub.required_color,
                        });
                    }
                }
                true
            }
        };
        let next = transition(sub.state, action.kind, correct)
            .ok_or(RejectReason::IllegalTransition { state: sub.state })?;
        if action.kind.needs_precedence() {
            if let Some(blocking) = self.first_blocking_predecessor(sub.id) {
                return Err(RejectReason::Precedence { blocking });
            }
        }
        if action.kind.is_placement() {
            let color = placement_color(action, sub);
            if self.inventory.of(action.agent).get(color) == 0 {
                return Err(RejectReason::OutOfBlocks { color });
            }
        }
        Ok(next)
    }

    /// Applies a legal action, returning the new graph. The receiver is left
    /// untouched on error.
    pub fn apply_action(&self, action: &AgentAction) -> Result<TaskGraph, TaskError> {
        let mut next = self.clone();
        next.apply_in_place(action)?;
        Ok(next)
    }

    /// In-place variant of [`TaskGraph::apply_action`]; returns the previous
    /// state of the subtask.
    pub fn apply_in_place(&mut self, action: &AgentAction) -> Result<SubtaskState, TaskError> {
        let next = self
            .check_action(action)
            .map_err(|reason| TaskError::Rejected {
                action: *action,
                reason,
            })?;
        let sub = self.subtasks.get_mut(&action.subtask).expect("checked");
        let prev = sub.state;
        if action.kind.is_placement() {
            let color = placement_color(action, sub);
            let taken = match action.agent {
                Agent::Human => self.inventory.human.take(color),
                Agent::Robot => self.inventory.robot.take(color),
            };
            debug_assert!(taken);
            sub.block = Some(PlacedBlock {
                color,
                owner: action.agent,
            });
        }
        if matches!(action.kind, ActionKind::H3 | ActionKind::R3) {
            if let Some(block) = sub.block.take() {
                self.inventory.of_mut(block.owner).put(block.color);
            }
        }
        sub.state = next;
        Ok(prev)
    }

    /// Every action `agent` could legally take right now.
    pub fn feasible_actions(&self, agent: Agent) -> Vec<AgentAction> {
        let kinds: Vec<ActionKind> = ActionKind::ALL
            .into_iter()
            .filter(|k| k.agent() == agent)
            .collect();
        let mut out = Vec::new();
        for sub in self.subtasks.values() {
            for &kind in &kinds {
                if kind.needs_color() {
                    for c in Color::ALL {
                        let a = AgentAction::new(kind, sub.id, Some(c));
                        if self.check_action(&a).is_ok() {
                            out.push(a);
                        }
                    }
                } else {
                    let a = AgentAction::new(kind, sub.id, None);
                    if self.check_action(&a).is_ok() {
                        out.push(a);
                    }
                }
            }
        }
        out
    }

    /// Subtasks the robot could begin working on immediately: predecessors
    /// done and state Initial (place) or Misplaced (fix, then place).
    pub fn immediately_feasible_robot_set(&self) -> BTreeSet<TaskId> {
        self.subtasks
            .values()
            .filter(|s| matches!(s.state, SubtaskState::Initial | SubtaskState::Misplaced))
            .filter(|s| self.predecessors_complete(s.id))
            .map(|s| s.id)
            .collect()
    }

    /// Subtasks not yet placed correctly.
    pub fn open_subtasks(&self) -> impl Iterator<Item = &Subtask> {
        self.subtasks
            .values()
            .filter(|s| s.state != SubtaskState::PlacedCorrectly)
    }

    /// Same-workspace successor, if any.
    pub fn successor(&self, id: TaskId) -> Option<TaskId> {
        self.subtasks
            .values()
            .find(|s| s.predecessors.contains(&id))
            .map(|s| s.id)
    }
}

fn placement_color(action: &AgentAction, sub: &Subtask) -> Color {
    match action.kind {
        ActionKind::H1 => action.color.unwrap_or(sub.required_color),
        _ => sub.required_color,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    fn study() -> TaskGraph {
        TaskGraph::build(&ScenarioConfig::study()).unwrap()
    }

    fn act(kind: ActionKind, id: u32, color: Option<Color>) -> AgentAction {
        AgentAction::new(kind, TaskId(id), color)
    }

    #[test]
    fn study_graph_shape() {
        let g = study();
        assert_eq!(g.node_count(), 22);
        assert_eq!(g.finish_node(), TaskId(21));
        for head in [1, 6, 11, 16] {
            assert_eq!(
                g.get(TaskId(head)).unwrap().predecessors,
                BTreeSet::from([TaskId(0)])
            );
        }
        assert_eq!(
            g.get(TaskId(7)).unwrap().predecessors,
            BTreeSet::from([TaskId(6)])
        );
        assert_eq!(
            g.node_predecessors(TaskId(21)),
            BTreeSet::from([TaskId(5), TaskId(10), TaskId(15), TaskId(20)])
        );
        assert!(g
            .subtasks
            .values()
            .all(|s| s.state == SubtaskState::Initial));
    }

    #[test]
    fn minimal_graph_has_three_nodes() {
        let mut cfg = ScenarioConfig::study();
        cfg.workspaces = 1;
        cfg.spots_per_workspace = 1;
        cfg.pattern.retain(|id, _| id.0 == 1);
        cfg.partially_known.clear();
        let g = TaskGraph::build(&cfg).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(
            g.topological_order().unwrap(),
            vec![TaskId(0), TaskId(1), TaskId(2)]
        );
    }

    #[test]
    fn missing_pattern_entry_is_config_error() {
        let mut cfg = ScenarioConfig::study();
        cfg.pattern.remove(&TaskId(7));
        assert!(matches!(TaskGraph::build(&cfg), Err(TaskError::Config(_))));
    }

    #[test]
    fn correct_h1_places() {
        let mut g = study();
        for id in 1..=2 {
            let c = g.get(TaskId(id)).unwrap().required_color;
            g = g.apply_action(&act(ActionKind::H1, id, Some(c))).unwrap();
        }
        let c3 = g.get(TaskId(3)).unwrap().required_color;
        let g = g.apply_action(&act(ActionKind::H1, 3, Some(c3))).unwrap();
        assert_eq!(g.state(TaskId(3)), Some(SubtaskState::PlacedCorrectly));
        for kind in ActionKind::ALL {
            let a = AgentAction::new(kind, TaskId(3), Some(c3));
            assert!(g.apply_action(&a).is_err(), "{kind} on placed subtask");
        }
    }

    #[test]
    fn wrong_h1_misplaces_and_returns_block() {
        let g = study();
        let req = g.get(TaskId(1)).unwrap().required_color;
        let wrong = Color::ALL.into_iter().find(|&c| c != req).unwrap();
        let g2 = g
            .apply_action(&act(ActionKind::H1, 1, Some(wrong)))
            .unwrap();
        assert_eq!(g2.state(TaskId(1)), Some(SubtaskState::Misplaced));
        assert_eq!(
            g2.inventory.human.get(wrong),
            g.inventory.human.get(wrong) - 1
        );
        let g3 = g2.apply_action(&act(ActionKind::R3, 1, None)).unwrap();
        assert_eq!(g3.state(TaskId(1)), Some(SubtaskState::Initial));
        assert_eq!(g3.inventory, g.inventory);
    }

    #[test]
    fn precedence_violation_is_rejected() {
        let g = study();
        let c = g.get(TaskId(2)).unwrap().required_color;
        let err = g
            .apply_action(&act(ActionKind::H1, 2, Some(c)))
            .unwrap_err();
        assert!(matches!(
            err,
            TaskError::Rejected {
                reason: RejectReason::Precedence {
                    blocking: TaskId(1)
                },
                ..
            }
        ));
    }

    #[test]
    fn fresh_graph_human_options_are_chain_heads() {
        let g = study();
        let ids: BTreeSet<u32> = g
            .feasible_actions(Agent::Human)
            .iter()
            .map(|a| a.subtask.0)
            .collect();
        assert_eq!(ids, BTreeSet::from([1, 6, 11, 16]));
        assert!(g
            .feasible_actions(Agent::Human)
            .iter()
            .all(|a| matches!(a.kind, ActionKind::H1 | ActionKind::H2)));
    }

    #[test]
    fn immediate_robot_set_fresh_and_done() {
        let g = study();
        let expected: BTreeSet<TaskId> = [1, 6, 11, 16].map(TaskId).into();
        assert_eq!(g.immediately_feasible_robot_set(), expected);

        let mut done = g.clone();
        for s in done.subtasks.values_mut() {
            s.state = SubtaskState::PlacedCorrectly;
        }
        assert!(done.immediately_feasible_robot_set().is_empty());
        assert!(done.all_placed());
    }

    #[test]
    fn out_of_blocks_is_rejected() {
        let mut g = study();
        let c = g.get(TaskId(1)).unwrap().required_color;
        g.inventory.robot.0.insert(c, 0);
        let err = g.apply_action(&act(ActionKind::R1, 1, None)).unwrap_err();
        assert!(matches!(
            err,
            TaskError::Rejected {
                reason: RejectReason::OutOfBlocks { .. },
                ..
            }
        ));
    }
}
