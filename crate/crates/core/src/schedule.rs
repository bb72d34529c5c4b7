//! Makespan scheduling of the extended task set.
//!
//! The extended set adds two kinds of robot-executed helper tasks to the open
//! subtasks: `τ^a` communicates a human assignment (zero duration) and `τ^e`
//! returns a misplaced block. The schedule minimises the makespan subject to
//! precedence, per-agent non-overlap and, when the robot is idle, the
//! requirement that at least one robot task from `V` starts at time zero.
//!
//! The solver enumerates active schedules (Giffler-Thompson branching) with a
//! head/tail and workload bound. Active schedules dominate for the makespan,
//! and left-shifting never moves a task away from time zero, so filtering the
//! `V` condition over active schedules is exact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::Allocation;
use crate::task::{ActionKind, Agent, AgentAction, SubtaskState, TaskGraph, TaskId};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtKind {
    ErrorFix,
    Allocate,
    Base,
}

/// Identifier of an extended task: the subtask it belongs to plus its kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExtId {
    pub subtask: TaskId,
    pub kind: ExtKind,
}

impl ExtId {
    pub fn base(id: TaskId) -> Self {
        ExtId {
            subtask: id,
            kind: ExtKind::Base,
        }
    }
    pub fn allocate(id: TaskId) -> Self {
        ExtId {
            subtask: id,
            kind: ExtKind::Allocate,
        }
    }
    pub fn error_fix(id: TaskId) -> Self {
        ExtId {
            subtask: id,
            kind: ExtKind::ErrorFix,
        }
    }
}

impl fmt::Display for ExtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ExtKind::Base => write!(f, "{}", self.subtask),
            ExtKind::Allocate => write!(f, "{}^a", self.subtask),
            ExtKind::ErrorFix => write!(f, "{}^e", self.subtask),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedTask {
    pub id: ExtId,
    pub agent: Agent,
    pub duration: f64,
    pub predecessors: BTreeSet<ExtId>,
    /// Earliest start, relative to now.
    #[serde(default)]
    pub release: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentReady {
    pub human: f64,
    pub robot: f64,
}

impl AgentReady {
    pub const NOW: AgentReady = AgentReady {
        human: 0.0,
        robot: 0.0,
    };

    pub fn of(&self, agent: Agent) -> f64 {
        match agent {
            Agent::Human => self.human,
            Agent::Robot => self.robot,
        }
    }
}

impl Default for AgentReady {
    fn default() -> Self {
        AgentReady::NOW
    }
}

/// Work already under way when the schedule is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InFlight {
    pub subtask: TaskId,
    pub agent: Agent,
    /// Remaining time until it finishes.
    pub remaining: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildContext {
    pub in_flight: Vec<InFlight>,
    /// Duration of a block return.
    pub error_fix_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulingProblem {
    pub tasks: Vec<ExtendedTask>,
    pub v: BTreeSet<ExtId>,
    /// Require some task of `v` to start at time zero.
    pub enforce_v_start: bool,
    pub ready: AgentReady,
    pub time_limit: f64,
    /// Deterministic cutoff on explored nodes, on top of the time limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_limit: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub id: ExtId,
    pub agent: Agent,
    pub start: f64,
    pub finish: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
    pub makespan: f64,
    pub incumbent_optimal: bool,
}

impl Schedule {
    pub fn entry(&self, id: ExtId) -> Option<&ScheduleEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn agent_entries(&self, agent: Agent) -> impl Iterator<Item = &ScheduleEntry> {
        self.entries.iter().filter(move |e| e.agent == agent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("precedence relation is cyclic")]
    Cyclic,
    #[error("robot tasks exist but none can start immediately")]
    EmptyV,
    #[error("{0} refers to an unknown predecessor")]
    UnknownPredecessor(ExtId),
    #[error("duplicate extended task {0}")]
    Duplicate(ExtId),
    #[error("no schedule satisfies the immediate-start constraint")]
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScheduleStats {
    pub nodes: u64,
    pub elapsed_us: u64,
}

fn chain_predecessor(graph: &TaskGraph, id: TaskId) -> Option<TaskId> {
    graph
        .get(id)?
        .predecessors
        .iter()
        .copied()
        .find(|p| graph.get(*p).is_some())
}

/// Builds the extended task set for `allocation`.
///
/// In-flight subtasks are left out; their successors get a release time
/// instead. Subtasks already assigned to the human need no `τ^a`, correct
/// robot assignments stay with the robot, and incorrect robot assignments are
/// left out because they are rejected without scheduling.
pub fn build_tau_new(
    graph: &TaskGraph,
    allocation: &Allocation,
    ctx: &BuildContext,
) -> Vec<ExtendedTask> {
    let in_flight: BTreeMap<TaskId, f64> = ctx
        .in_flight
        .iter()
        .map(|f| (f.subtask, f.remaining))
        .collect();
    let included = |id: TaskId| -> bool {
        graph.get(id).is_some_and(|s| {
            s.state != SubtaskState::PlacedCorrectly
                && s.state != SubtaskState::AssignedToRobotIncorrectly
                && !in_flight.contains_key(&id)
        })
    };
    let mut out = Vec::new();
    for sub in graph.open_subtasks() {
        if !included(sub.id) {
            continue;
        }
        let agent = match sub.state {
            SubtaskState::AssignedToHuman => Agent::Human,
            SubtaskState::AssignedToRobotCorrectly => Agent::Robot,
            _ => allocation.agent_of(sub.id).unwrap_or(Agent::Robot),
        };
        let mut release = 0.0f64;
        let mut chain_preds = BTreeSet::new();
        if let Some(p) = chain_predecessor(graph, sub.id) {
            if let Some(&rem) = in_flight.get(&p) {
                release = release.max(rem);
            } else if included(p) {
                chain_preds.insert(ExtId::base(p));
            }
        }
        let mut base_preds = chain_preds.clone();
        let mut helper_preds = chain_preds;

        if sub.state == SubtaskState::Misplaced {
            let e = ExtId::error_fix(sub.id);
            out.push(ExtendedTask {
                id: e,
                agent: Agent::Robot,
                duration: ctx.error_fix_time,
                predecessors: BTreeSet::new(),
                release: 0.0,
            });
            base_preds.insert(e);
            helper_preds.insert(e);
        }
        let uncommunicated = agent == Agent::Human
            && matches!(sub.state, SubtaskState::Initial | SubtaskState::Misplaced);
        if uncommunicated {
            let a = ExtId::allocate(sub.id);
            out.push(ExtendedTask {
                id: a,
                agent: Agent::Robot,
                duration: 0.0,
                predecessors: helper_preds,
                release,
            });
            base_preds.insert(a);
        }
        out.push(ExtendedTask {
            id: ExtId::base(sub.id),
            agent,
            duration: if agent == Agent::Human {
                sub.t_h
            } else {
                sub.t_r
            },
            predecessors: base_preds,
            release,
        });
    }
    out.sort_by_key(|t| t.id);
    out
}

/// Robot tasks of the extended set that start immediately startable
/// subtasks: the return trip for a misplaced block, otherwise the robot's own
/// placement.
pub fn v_set(graph: &TaskGraph, tasks: &[ExtendedTask]) -> BTreeSet<ExtId> {
    let by_id: BTreeMap<ExtId, &ExtendedTask> = tasks.iter().map(|t| (t.id, t)).collect();
    let mut v = BTreeSet::new();
    for sub in graph.open_subtasks() {
        if !graph.predecessors_complete(sub.id) {
            continue;
        }
        let candidate = match sub.state {
            SubtaskState::Misplaced => ExtId::error_fix(sub.id),
            SubtaskState::Initial | SubtaskState::AssignedToRobotCorrectly => ExtId::base(sub.id),
            _ => continue,
        };
        if let Some(t) = by_id.get(&candidate) {
            if t.agent == Agent::Robot && t.release <= EPS {
                v.insert(candidate);
            }
        }
    }
    v
}

impl SchedulingProblem {
    /// Extended tasks, `V` and agent readiness for the current graph.
    pub fn from_graph(
        graph: &TaskGraph,
        allocation: &Allocation,
        ctx: &BuildContext,
        time_limit: f64,
    ) -> Self {
        let tasks = build_tau_new(graph, allocation, ctx);
        let v = v_set(graph, &tasks);
        let mut ready = AgentReady::NOW;
        for f in &ctx.in_flight {
            match f.agent {
                Agent::Human => ready.human = ready.human.max(f.remaining),
                Agent::Robot => ready.robot = ready.robot.max(f.remaining),
            }
        }
        let has_robot = tasks
            .iter()
            .any(|t| t.agent == Agent::Robot && t.duration > 0.0);
        SchedulingProblem {
            tasks,
            v,
            enforce_v_start: has_robot && ready.robot <= EPS,
            ready,
            time_limit,
            node_limit: None,
        }
    }

    /// Makespan lower bound: agent workloads and the critical path.
    pub fn lower_bound(&self) -> f64 {
        let mut load = [self.ready.human, self.ready.robot];
        for t in &self.tasks {
            load[agent_index(t.agent)] += t.duration;
        }
        let cp = match Compiled::new(self) {
            Ok(c) => (0..c.n).map(|j| c.head0[j] + c.tail[j]).fold(0.0, f64::max),
            Err(_) => 0.0,
        };
        load[0].max(load[1]).max(cp)
    }
}

fn agent_index(a: Agent) -> usize {
    match a {
        Agent::Human => 0,
        Agent::Robot => 1,
    }
}

struct Compiled {
    n: usize,
    ids: Vec<ExtId>,
    agent: Vec<usize>,
    dur: Vec<f64>,
    release: Vec<f64>,
    preds: Vec<Vec<usize>>,
    topo: Vec<usize>,
    tail: Vec<f64>,
    head0: Vec<f64>,
    in_v: Vec<bool>,
}

impl Compiled {
    fn new(p: &SchedulingProblem) -> Result<Self, ScheduleError> {
        let mut tasks = p.tasks.clone();
        tasks.sort_by_key(|t| t.id);
        let n = tasks.len();
        let mut index = BTreeMap::new();
        for (i, t) in tasks.iter().enumerate() {
            if index.insert(t.id, i).is_some() {
                return Err(ScheduleError::Duplicate(t.id));
            }
        }
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for (i, t) in tasks.iter().enumerate() {
            for p in &t.predecessors {
                let &j = index
                    .get(p)
                    .ok_or(ScheduleError::UnknownPredecessor(t.id))?;
                preds[i].push(j);
                succs[j].push(i);
            }
        }
        let mut indeg: Vec<usize> = preds.iter().map(|p| p.len()).collect();
        let mut queue: std::collections::VecDeque<usize> =
            (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            topo.push(i);
            for &s in &succs[i] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    queue.push_back(s);
                }
            }
        }
        if topo.len() != n {
            return Err(ScheduleError::Cyclic);
        }
        let agent: Vec<usize> = tasks.iter().map(|t| agent_index(t.agent)).collect();
        let dur: Vec<f64> = tasks.iter().map(|t| t.duration.max(0.0)).collect();
        let release: Vec<f64> = tasks.iter().map(|t| t.release.max(0.0)).collect();
        let mut tail = vec![0.0; n];
        for &i in topo.iter().rev() {
            let after = succs[i].iter().map(|&s| tail[s]).fold(0.0, f64::max);
            tail[i] = dur[i] + after;
        }
        let ready = [p.ready.human, p.ready.robot];
        let mut head0 = vec![0.0; n];
        for &i in &topo {
            let from_preds = preds[i]
                .iter()
                .map(|&q| head0[q] + dur[q])
                .fold(0.0, f64::max);
            head0[i] = release[i].max(ready[agent[i]]).max(from_preds);
        }
        let in_v = tasks.iter().map(|t| p.v.contains(&t.id)).collect();
        Ok(Compiled {
            n,
            ids: tasks.iter().map(|t| t.id).collect(),
            agent,
            dur,
            release,
            preds,
            topo,
            tail,
            head0,
            in_v,
        })
    }
}

pub fn solve_schedule(
    problem: &SchedulingProblem,
) -> Result<(Schedule, ScheduleStats), ScheduleError> {
    let started = Instant::now();
    let c = Compiled::new(problem)?;
    let has_robot_v = c.in_v.iter().any(|&v| v);
    let enforce = problem.enforce_v_start && (0..c.n).any(|i| c.agent[i] == 1);
    if enforce && !has_robot_v {
        return Err(ScheduleError::EmptyV);
    }
    let root_lb = problem.lower_bound();
    let mut s = Search {
        c: &c,
        enforce,
        scheduled: vec![false; c.n],
        start: vec![0.0; c.n],
        finish: vec![0.0; c.n],
        avail: [problem.ready.human, problem.ready.robot],
        v_ok: false,
        best: None,
        root_lb,
        nodes: 0,
        deadline: started + Duration::from_secs_f64(problem.time_limit.max(0.0)),
        node_limit: problem.node_limit.unwrap_or(u64::MAX),
        timed_out: false,
        done: false,
    };
    s.dfs(0);
    let timed_out = s.timed_out;
    let nodes = s.nodes;
    let (makespan, start) = s.best.ok_or(ScheduleError::Infeasible)?;
    let mut entries: Vec<ScheduleEntry> = (0..c.n)
        .map(|i| ScheduleEntry {
            id: c.ids[i],
            agent: if c.agent[i] == 0 {
                Agent::Human
            } else {
                Agent::Robot
            },
            start: start[i],
            finish: start[i] + c.dur[i],
        })
        .collect();
    entries.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.id.cmp(&b.id)));
    debug_assert!(makespan + 1e-6 >= root_lb);
    Ok((
        Schedule {
            entries,
            makespan,
            incumbent_optimal: !timed_out,
        },
        ScheduleStats {
            nodes,
            elapsed_us: started.elapsed().as_micros() as u64,
        },
    ))
}

struct Search<'a> {
    c: &'a Compiled,
    enforce: bool,
    scheduled: Vec<bool>,
    start: Vec<f64>,
    finish: Vec<f64>,
    avail: [f64; 2],
    v_ok: bool,
    best: Option<(f64, Vec<f64>)>,
    root_lb: f64,
    nodes: u64,
    deadline: Instant,
    node_limit: u64,
    timed_out: bool,
    done: bool,
}

impl Search<'_> {
    fn est(&self, j: usize) -> f64 {
        let c = self.c;
        let p = c.preds[j]
            .iter()
            .map(|&q| self.finish[q])
            .fold(0.0, f64::max);
        c.release[j].max(self.avail[c.agent[j]]).max(p)
    }

    fn eligible(&self, j: usize) -> bool {
        !self.scheduled[j] && self.c.preds[j].iter().all(|&q| self.scheduled[q])
    }

    fn bound(&self) -> f64 {
        let c = self.c;
        let mut head = vec![0.0; c.n];
        let mut lb = 0.0f64;
        let mut load = self.avail;
        let mut min_head = [f64::INFINITY; 2];
        for &i in &c.topo {
            if self.scheduled[i] {
                lb = lb.max(self.finish[i]);
                continue;
            }
            let p = c.preds[i]
                .iter()
                .map(|&q| {
                    if self.scheduled[q] {
                        self.finish[q]
                    } else {
                        head[q] + c.dur[q]
                    }
                })
                .fold(0.0, f64::max);
            head[i] = c.release[i].max(self.avail[c.agent[i]]).max(p);
            lb = lb.max(head[i] + c.tail[i]);
            load[c.agent[i]] += c.dur[i];
            min_head[c.agent[i]] = min_head[c.agent[i]].min(head[i]);
        }
        for a in 0..2 {
            if min_head[a].is_finite() {
                let extra = load[a] - self.avail[a];
                lb = lb.max(min_head[a] + extra);
            }
        }
        lb
    }

    fn place(&mut self, j: usize, t: f64) -> (f64, bool) {
        let a = self.c.agent[j];
        let saved = (self.avail[a], self.v_ok);
        self.scheduled[j] = true;
        self.start[j] = t;
        self.finish[j] = t + self.c.dur[j];
        self.avail[a] = self.finish[j];
        if self.c.in_v[j] && t <= EPS {
            self.v_ok = true;
        }
        saved
    }

    fn unplace(&mut self, j: usize, saved: (f64, bool)) {
        self.scheduled[j] = false;
        self.avail[self.c.agent[j]] = saved.0;
        self.v_ok = saved.1;
    }

    fn dfs(&mut self, depth: usize) {
        if self.timed_out || self.done {
            return;
        }
        self.nodes += 1;
        if self.nodes >= self.node_limit
            || (self.nodes.is_multiple_of(1024) && Instant::now() >= self.deadline)
        {
            self.timed_out = true;
            return;
        }
        if self.enforce && !self.v_ok && self.avail[1] > EPS {
            return;
        }
        let c = self.c;
        if depth == c.n {
            if self.enforce && !self.v_ok {
                return;
            }
            let z = (0..c.n).map(|i| self.finish[i]).fold(0.0, f64::max);
            if self.best.as_ref().is_none_or(|(b, _)| z < b - EPS) {
                self.best = Some((z, self.start.clone()));
                if z <= self.root_lb + EPS {
                    self.done = true;
                }
            }
            return;
        }
        if let Some((b, _)) = &self.best {
            if self.bound() >= b - EPS {
                return;
            }
        }
        // A zero-duration task that can go right now delays nothing.
        if let Some(j) = (0..c.n).find(|&j| {
            self.eligible(j) && c.dur[j] == 0.0 && self.est(j) <= self.avail[c.agent[j]] + EPS
        }) {
            let t = self.est(j);
            let saved = self.place(j, t);
            self.dfs(depth + 1);
            self.unplace(j, saved);
            return;
        }
        let mut jstar = None;
        let mut ect_star = f64::INFINITY;
        for j in 0..c.n {
            if self.eligible(j) {
                let ect = self.est(j) + c.dur[j];
                if ect < ect_star - EPS {
                    ect_star = ect;
                    jstar = Some(j);
                }
            }
        }
        let Some(jstar) = jstar else { return };
        let m = c.agent[jstar];
        let mut conflict: Vec<(usize, f64)> = (0..c.n)
            .filter(|&j| self.eligible(j) && c.agent[j] == m)
            .map(|j| (j, self.est(j)))
            .filter(|&(j, est)| j == jstar || est < ect_star - EPS)
            .collect();
        conflict.sort_by(|a, b| c.tail[b.0].total_cmp(&c.tail[a.0]).then(a.0.cmp(&b.0)));
        for (j, t) in conflict {
            let saved = self.place(j, t);
            self.dfs(depth + 1);
            self.unplace(j, saved);
            if self.timed_out || self.done {
                return;
            }
        }
    }
}

/// A constraint of the scheduling program that a schedule breaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Missing(ExtId),
    Unexpected(ExtId),
    WrongAgent(ExtId),
    Duration(ExtId),
    Release(ExtId),
    Precedence { before: ExtId, after: ExtId },
    Overlap(ExtId, ExtId),
    NoImmediateStart,
    Makespan,
}

/// Checks a schedule against the literal constraints, with disjunctions in
/// big-M form using `M = Σ durations + 1`.
pub fn validate_schedule(
    problem: &SchedulingProblem,
    schedule: &Schedule,
) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    let tol = 1e-7;
    let by_id: BTreeMap<ExtId, &ScheduleEntry> =
        schedule.entries.iter().map(|e| (e.id, e)).collect();
    let tasks: BTreeMap<ExtId, &ExtendedTask> = problem.tasks.iter().map(|t| (t.id, t)).collect();
    for e in &schedule.entries {
        if !tasks.contains_key(&e.id) {
            v.push(Violation::Unexpected(e.id));
        }
    }
    let big_m: f64 = problem.tasks.iter().map(|t| t.duration).sum::<f64>()
        + problem.ready.human.max(problem.ready.robot)
        + problem.tasks.iter().map(|t| t.release).fold(0.0, f64::max)
        + 1.0;
    for t in &problem.tasks {
        let Some(e) = by_id.get(&t.id) else {
            v.push(Violation::Missing(t.id));
            continue;
        };
        if e.agent != t.agent {
            v.push(Violation::WrongAgent(t.id));
        }
        if (e.finish - e.start - t.duration).abs() > tol {
            v.push(Violation::Duration(t.id));
        }
        if e.start + tol < t.release.max(problem.ready.of(t.agent)) || e.start < -tol {
            v.push(Violation::Release(t.id));
        }
        for p in &t.predecessors {
            if let Some(pe) = by_id.get(p) {
                if e.start + tol < pe.finish {
                    v.push(Violation::Precedence {
                        before: *p,
                        after: t.id,
                    });
                }
            }
        }
    }
    let entries: Vec<&ScheduleEntry> = schedule.entries.iter().collect();
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            if a.agent != b.agent {
                continue;
            }
            // s_a ≥ f_b − M·y  and  s_b ≥ f_a − M·(1 − y), y ∈ {0, 1}
            let ok = [0.0, 1.0].iter().any(|&y| {
                a.start + tol >= b.finish - big_m * y
                    && b.start + tol >= a.finish - big_m * (1.0 - y)
            });
            if !ok {
                v.push(Violation::Overlap(a.id, b.id));
            }
        }
    }
    if problem.enforce_v_start && !problem.v.is_empty() {
        // s_i ≤ M·b_i with Σ_{i∈V} b_i ≤ |V| − 1: some b_i = 0, so s_i ≤ 0.
        let zero_starts = problem
            .v
            .iter()
            .filter(|id| by_id.get(id).is_some_and(|e| e.start <= tol))
            .count();
        if zero_starts == 0 {
            v.push(Violation::NoImmediateStart);
        }
    }
    let max_finish = schedule
        .entries
        .iter()
        .map(|e| e.finish)
        .fold(0.0, f64::max);
    if (schedule.makespan - max_finish).abs() > tol {
        v.push(Violation::Makespan);
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// The robot's next step according to a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotStep {
    pub entry: ScheduleEntry,
    pub action: AgentAction,
}

/// Earliest robot entry (zero-duration entries first on ties, then by id),
/// translated to a robot action. `None` when the robot has nothing to do.
pub fn next_robot_action(schedule: &Schedule, graph: &TaskGraph) -> Option<RobotStep> {
    let entry = schedule
        .agent_entries(Agent::Robot)
        .min_by(|a, b| {
            a.start
                .total_cmp(&b.start)
                .then((a.finish - a.start > 0.0).cmp(&(b.finish - b.start > 0.0)))
                .then(a.id.cmp(&b.id))
        })
        .copied()?;
    let kind = match entry.id.kind {
        ExtKind::ErrorFix => ActionKind::R3,
        ExtKind::Allocate => ActionKind::R2,
        ExtKind::Base => match graph.state(entry.id.subtask) {
            Some(SubtaskState::AssignedToRobotCorrectly) => ActionKind::R4,
            _ => ActionKind::R1,
        },
    };
    Some(RobotStep {
        entry,
        action: AgentAction::new(kind, entry.id.subtask, None),
    })
}

/// Exhaustive reference solver: every precedence-consistent permutation,
/// scheduled by a forward pass. Only for small instances.
pub fn brute_force_makespan(problem: &SchedulingProblem) -> Option<f64> {
    let c = Compiled::new(problem).ok()?;
    let enforce = problem.enforce_v_start && (0..c.n).any(|i| c.agent[i] == 1);
    let mut best: Option<f64> = None;
    let mut order = Vec::with_capacity(c.n);
    let mut used = vec![false; c.n];
    permute(&c, problem, enforce, &mut order, &mut used, &mut best);
    best
}

fn permute(
    c: &Compiled,
    p: &SchedulingProblem,
    enforce: bool,
    order: &mut Vec<usize>,
    used: &mut Vec<bool>,
    best: &mut Option<f64>,
) {
    if order.len() == c.n {
        let mut avail = [p.ready.human, p.ready.robot];
        let mut finish = vec![0.0; c.n];
        let mut v_ok = false;
        for &j in order.iter() {
            let pre = c.preds[j].iter().map(|&q| finish[q]).fold(0.0, f64::max);
            let s = c.release[j].max(avail[c.agent[j]]).max(pre);
            finish[j] = s + c.dur[j];
            avail[c.agent[j]] = finish[j];
            if c.in_v[j] && s <= EPS {
                v_ok = true;
            }
        }
        if enforce && !v_ok {
            return;
        }
        let z = finish.iter().copied().fold(0.0, f64::max);
        if best.is_none_or(|b| z < b) {
            *best = Some(z);
        }
        return;
    }
    for j in 0..c.n {
        if !used[j] && c.preds[j].iter().all(|&q| used[q]) {
            used[j] = true;
            order.push(j);
            permute(c, p, enforce, order, used, best);
            order.pop();
            used[j] = false;
        }
    }
}
