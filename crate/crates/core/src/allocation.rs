//! Min-max allocation of open subtasks to the human or the robot.
//!
//! Minimises `z = max(Σ_human C_h, Σ_robot C_r)` subject to each task going
//! to exactly one agent and at least one immediately startable task going to
//! the robot. Solved exactly by depth-first branch-and-bound over the binary
//! assignment vector, bounded by the LP relaxation of the two-sum problem.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{Agent, SubtaskState, TaskGraph, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Penalty for handing a task to a human who prefers to lead, seconds.
    pub c_f: f64,
    /// Penalty for keeping tasks away from an error-prone human, seconds.
    pub c_e: f64,
    /// Penalty for moving a task to the other agent, seconds.
    pub c_v: f64,
    /// Anytime cutoff of the search, seconds.
    pub time_limit: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            c_f: 25.0,
            c_e: 30.0,
            c_v: 5.0,
            time_limit: 2.0,
        }
    }
}

/// Belief means plugged into the linear cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEstimates {
    pub p_f: f64,
    pub p_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationTask {
    pub id: TaskId,
    pub t_h: f64,
    pub t_r: f64,
    /// Agent the task is already committed to, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<Agent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub q: BTreeMap<TaskId, Agent>,
    pub objective: f64,
    pub incumbent_optimal: bool,
}

impl Allocation {
    pub fn agent_of(&self, id: TaskId) -> Option<Agent> {
        self.q.get(&id).copied()
    }

    pub fn tasks_for(&self, agent: Agent) -> impl Iterator<Item = TaskId> + '_ {
        self.q
            .iter()
            .filter(move |(_, &a)| a == agent)
            .map(|(&id, _)| id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub tasks: Vec<AllocationTask>,
    /// Tasks the robot could start right now.
    pub immediate: BTreeSet<TaskId>,
    /// Enforce `Σ_{i∈U} q_i ≤ |U| - 1`.
    pub require_robot_start: bool,
    pub estimates: PointEstimates,
    pub params: CostParams,
    pub previous: Option<Allocation>,
    /// Assignment vectors ruled out by earlier scheduling failures.
    pub excluded: Vec<BTreeMap<TaskId, Agent>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AllocationError {
    #[error("no open subtasks to allocate")]
    NoOpenTasks,
    #[error("no subtask the robot could start immediately")]
    NoImmediateTask,
    #[error("every feasible allocation is excluded")]
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: u64,
    pub elapsed_us: u64,
    pub warm_started: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    pub warm_start: bool,
    /// Deterministic cutoff on explored nodes, on top of the time limit.
    pub node_limit: Option<u64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            warm_start: true,
            node_limit: None,
        }
    }
}

/// Cost of giving `task` to `agent`:
/// human `t_h·p_f + c_f·(1-p_f) + c_v·[prev: robot]`,
/// robot `t_r + p_e·c_e + c_v·[prev: human]`.
pub fn assignment_cost(
    task: &AllocationTask,
    agent: Agent,
    estimates: PointEstimates,
    params: &CostParams,
    prev: Option<&Allocation>,
) -> f64 {
    let churn = match prev.and_then(|p| p.agent_of(task.id)) {
        Some(previous) if previous != agent => params.c_v,
        _ => 0.0,
    };
    match agent {
        Agent::Human => task.t_h * estimates.p_f + params.c_f * (1.0 - estimates.p_f) + churn,
        Agent::Robot => task.t_r + estimates.p_e * params.c_e + churn,
    }
}

impl AllocationProblem {
    /// Builds the problem for the current graph. Subtasks in `claimed` are
    /// being worked on and stay out; rejected robot assignments are handled
    /// before planning and stay out as well.
    pub fn from_graph(
        graph: &TaskGraph,
        claimed: &BTreeSet<TaskId>,
        estimates: PointEstimates,
        params: CostParams,
        previous: Option<Allocation>,
    ) -> Self {
        let tasks: Vec<AllocationTask> = graph
            .open_subtasks()
            .filter(|s| !claimed.contains(&s.id))
            .filter(|s| s.state != SubtaskState::AssignedToRobotIncorrectly)
            .map(|s| AllocationTask {
                id: s.id,
                t_h: s.t_h,
                t_r: s.t_r,
                fixed: match s.state {
                    SubtaskState::AssignedToRobotCorrectly => Some(Agent::Robot),
                    SubtaskState::AssignedToHuman => Some(Agent::Human),
                    _ => None,
                },
            })
            .collect();
        let mut immediate = graph.immediately_feasible_robot_set();
        immediate.extend(
            graph
                .open_subtasks()
                .filter(|s| {
                    s.state == SubtaskState::AssignedToRobotCorrectly
                        && graph.predecessors_complete(s.id)
                })
                .map(|s| s.id),
        );
        immediate.retain(|id| !claimed.contains(id));
        AllocationProblem {
            tasks,
            require_robot_start: !immediate.is_empty(),
            immediate,
            estimates,
            params,
            previous,
            excluded: Vec::new(),
        }
    }

    fn sorted_tasks(&self) -> Vec<AllocationTask> {
        let mut tasks = self.tasks.clone();
        tasks.sort_by_key(|t| t.id);
        tasks
    }

    fn costs(&self, tasks: &[AllocationTask]) -> (Vec<f64>, Vec<f64>) {
        let prev = self.previous.as_ref();
        let h = tasks
            .iter()
            .map(|t| assignment_cost(t, Agent::Human, self.estimates, &self.params, prev))
            .collect();
        let r = tasks
            .iter()
            .map(|t| assignment_cost(t, Agent::Robot, self.estimates, &self.params, prev))
            .collect();
        (h, r)
    }

    /// `max(Σ_human, Σ_robot)` for a full assignment.
    pub fn objective(&self, q: &BTreeMap<TaskId, Agent>) -> f64 {
        let tasks = self.sorted_tasks();
        let (h, r) = self.costs(&tasks);
        let bits: Vec<bool> = tasks
            .iter()
            .map(|t| q.get(&t.id) == Some(&Agent::Human))
            .collect();
        objective_of(&bits, &h, &r)
    }
}

fn objective_of(bits: &[bool], h: &[f64], r: &[f64]) -> f64 {
    let mut hs = 0.0;
    let mut rs = 0.0;
    for (i, &human) in bits.iter().enumerate() {
        if human {
            hs += h[i];
        } else {
            rs += r[i];
        }
    }
    hs.max(rs)
}

/// Previous allocation restricted to the still-open tasks.
pub fn warm_start_from(prev: &Allocation, open: &BTreeSet<TaskId>) -> BTreeMap<TaskId, Agent> {
    prev.q
        .iter()
        .filter(|(id, _)| open.contains(id))
        .map(|(&id, &a)| (id, a))
        .collect()
}

pub fn solve_allocation(
    problem: &AllocationProblem,
) -> Result<(Allocation, SolveStats), AllocationError> {
    solve_allocation_with(problem, SolverOptions::default())
}

pub fn solve_allocation_with(
    problem: &AllocationProblem,
    options: SolverOptions,
) -> Result<(Allocation, SolveStats), AllocationError> {
    let started = Instant::now();
    if problem.tasks.is_empty() {
        return Err(AllocationError::NoOpenTasks);
    }
    let tasks = problem.sorted_tasks();
    let in_u: Vec<bool> = tasks
        .iter()
        .map(|t| problem.immediate.contains(&t.id))
        .collect();
    if problem.require_robot_start && !in_u.iter().any(|&u| u) {
        return Err(AllocationError::NoImmediateTask);
    }
    let (h, r) = problem.costs(&tasks);
    let fixed: Vec<Option<bool>> = tasks
        .iter()
        .map(|t| t.fixed.map(|a| a == Agent::Human))
        .collect();
    let excluded: Vec<Vec<bool>> = problem
        .excluded
        .iter()
        .map(|q| {
            tasks
                .iter()
                .map(|t| q.get(&t.id) == Some(&Agent::Human))
                .collect()
        })
        .collect();

    let mut ratio_order: Vec<usize> = (0..tasks.len()).collect();
    ratio_order.sort_by(|&a, &b| (h[a] / r[a]).total_cmp(&(h[b] / r[b])).then(a.cmp(&b)));

    let mut search = Search {
        h: &h,
        r: &r,
        fixed: &fixed,
        in_u: &in_u,
        require_u: problem.require_robot_start,
        excluded: &excluded,
        ratio_order,
        best: None,
        path: Vec::with_capacity(tasks.len()),
        nodes: 0,
        deadline: started + Duration::from_secs_f64(problem.params.time_limit.max(0.0)),
        node_limit: options.node_limit.unwrap_or(u64::MAX),
        timed_out: false,
    };

    let mut warm_started = false;
    if options.warm_start {
        if let Some(prev) = &problem.previous {
            let open: BTreeSet<TaskId> = tasks.iter().map(|t| t.id).collect();
            let seed = warm_start_from(prev, &open);
            if let Some(bits) = search.complete_seed(&tasks, &seed) {
                let obj = objective_of(&bits, &h, &r);
                search.best = Some((obj, bits));
                warm_started = true;
            }
        }
    }

    let u_total = in_u.iter().filter(|&&u| u).count();
    search.dfs(0, 0.0, 0.0, false, u_total);

    let (objective, bits) = search.best.ok_or(AllocationError::Infeasible)?;
    let q = tasks
        .iter()
        .zip(&bits)
        .map(|(t, &human)| (t.id, if human { Agent::Human } else { Agent::Robot }))
        .collect();
    let stats = SolveStats {
        nodes: search.nodes,
        elapsed_us: started.elapsed().as_micros() as u64,
        warm_started,
    };
    Ok((
        Allocation {
            q,
            objective,
            incumbent_optimal: !search.timed_out,
        },
        stats,
    ))
}

struct Search<'a> {
    h: &'a [f64],
    r: &'a [f64],
    fixed: &'a [Option<bool>],
    in_u: &'a [bool],
    require_u: bool,
    excluded: &'a [Vec<bool>],
    ratio_order: Vec<usize>,
    best: Option<(f64, Vec<bool>)>,
    path: Vec<bool>,
    nodes: u64,
    deadline: Instant,
    node_limit: u64,
    timed_out: bool,
}

fn tolerance(z: f64) -> f64 {
    1e-9 * z.abs().max(1.0)
}

impl Search<'_> {
    fn n(&self) -> usize {
        self.h.len()
    }

    /// Fills the tasks the seed does not cover greedily (to the agent whose
    /// sum stays smaller), honours fixed tasks and checks feasibility.
    fn complete_seed(
        &self,
        tasks: &[AllocationTask],
        seed: &BTreeMap<TaskId, Agent>,
    ) -> Option<Vec<bool>> {
        let mut bits = vec![false; tasks.len()];
        let mut known = vec![false; tasks.len()];
        let (mut hs, mut rs) = (0.0, 0.0);
        for (i, t) in tasks.iter().enumerate() {
            let v = self.fixed[i].or_else(|| seed.get(&t.id).map(|&a| a == Agent::Human));
            if let Some(v) = v {
                bits[i] = v;
                known[i] = true;
                if v {
                    hs += self.h[i];
                } else {
                    rs += self.r[i];
                }
            }
        }
        if !known.iter().any(|&k| k) {
            return None;
        }
        for i in 0..tasks.len() {
            if !known[i] {
                let human = hs + self.h[i] < rs + self.r[i];
                bits[i] = human;
                if human {
                    hs += self.h[i];
                } else {
                    rs += self.r[i];
                }
            }
        }
        if self.require_u && !(0..bits.len()).any(|i| self.in_u[i] && !bits[i]) {
            // Move the first immediate task to the robot to restore feasibility.
            let i = (0..bits.len()).find(|&i| self.in_u[i] && self.fixed[i].is_none())?;
            bits[i] = false;
        }
        if self.excluded.contains(&bits) {
            return None;
        }
        Some(bits)
    }

    /// LP relaxation of the remaining subproblem: move free tasks from the
    /// robot to the human in order of increasing `h/r` until the sums cross.
    fn lower_bound(&self, depth: usize, hsum: f64, rsum: f64) -> f64 {
        let mut hs = hsum;
        let mut rs = rsum;
        for i in depth..self.n() {
            match self.fixed[i] {
                Some(true) => hs += self.h[i],
                Some(false) => rs += self.r[i],
                None => rs += self.r[i],
            }
        }
        if hs >= rs {
            return hs;
        }
        for &i in &self.ratio_order {
            if i < depth || self.fixed[i].is_some() {
                continue;
            }
            let (hi, ri) = (self.h[i], self.r[i]);
            if hs + hi <= rs - ri {
                hs += hi;
                rs -= ri;
            } else {
                let lambda = (rs - hs) / (hi + ri);
                return hs + lambda * hi;
            }
        }
        hs.max(rs)
    }

    /// Ordering of the current path prefix against the incumbent's prefix.
    fn path_vs_incumbent(&self) -> std::cmp::Ordering {
        match &self.best {
            Some((_, inc)) => self.path.as_slice().cmp(&inc[..self.path.len()]),
            None => std::cmp::Ordering::Less,
        }
    }

    fn dfs(&mut self, depth: usize, hsum: f64, rsum: f64, robot_in_u: bool, u_left: usize) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes >= self.node_limit
            || (self.nodes.is_multiple_of(1024) && Instant::now() >= self.deadline)
        {
            self.timed_out = true;
            return;
        }
        if self.require_u && !robot_in_u && u_left == 0 {
            return;
        }
        if depth == self.n() {
            self.leaf();
            return;
        }
        if let Some((best, _)) = &self.best {
            let best = *best;
            let lb = self.lower_bound(depth, hsum, rsum);
            let tol = tolerance(best);
            if lb > best + tol {
                return;
            }
            if lb >= best - tol && self.path_vs_incumbent() == std::cmp::Ordering::Greater {
                return;
            }
        }
        let u_here = self.in_u[depth];
        let u_next = u_left - usize::from(u_here);
        for human in [false, true] {
            if self.fixed[depth].is_some_and(|f| f != human) {
                continue;
            }
            self.path.push(human);
            if human {
                self.dfs(depth + 1, hsum + self.h[depth], rsum, robot_in_u, u_next);
            } else {
                self.dfs(
                    depth + 1,
                    hsum,
                    rsum + self.r[depth],
                    robot_in_u || u_here,
                    u_next,
                );
            }
            self.path.pop();
        }
    }

    fn leaf(&mut self) {
        if self.excluded.contains(&self.path) {
            return;
        }
        let obj = objective_of(&self.path, self.h, self.r);
        let better = match &self.best {
            None => true,
            Some((best, inc)) => {
                let tol = tolerance(*best);
                obj < best - tol || (obj <= best + tol && self.path < *inc)
            }
        };
        if better {
            self.best = Some((obj, self.path.clone()));
        }
    }
}
