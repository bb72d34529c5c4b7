//! Reference implementations and instance generators for the integration
//! tests. Written from the problem statements, not from the solvers.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cobot_core::allocation::{
    Allocation, AllocationProblem, AllocationTask, CostParams, PointEstimates,
};
use cobot_core::schedule::{AgentReady, ExtId, ExtKind, ExtendedTask, Schedule, SchedulingProblem};
use cobot_core::task::{ActionKind, Agent, SubtaskState, TaskId};
use rand::seq::SliceRandom;
use rand::Rng;

pub const TOL: f64 = 1e-9;

// ---------------------------------------------------------------- allocation

pub fn human_cost(
    t: &AllocationTask,
    e: PointEstimates,
    c: &CostParams,
    prev: Option<&Allocation>,
) -> f64 {
    let moved = prev
        .and_then(|p| p.q.get(&t.id))
        .is_some_and(|a| *a == Agent::Robot);
    t.t_h * e.p_f + c.c_f * (1.0 - e.p_f) + if moved { c.c_v } else { 0.0 }
}

pub fn robot_cost(
    t: &AllocationTask,
    e: PointEstimates,
    c: &CostParams,
    prev: Option<&Allocation>,
) -> f64 {
    let moved = prev
        .and_then(|p| p.q.get(&t.id))
        .is_some_and(|a| *a == Agent::Human);
    t.t_r + e.p_e * c.c_e + if moved { c.c_v } else { 0.0 }
}

/// Every feasible assignment vector with its objective.
pub fn enumerate_allocations(p: &AllocationProblem) -> Vec<(BTreeMap<TaskId, Agent>, f64)> {
    let n = p.tasks.len();
    assert!(n <= 16, "exhaustive oracle is for small instances");
    let prev = p.previous.as_ref();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let q: BTreeMap<TaskId, Agent> = p
            .tasks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                (
                    t.id,
                    if mask >> i & 1 == 1 {
                        Agent::Human
                    } else {
                        Agent::Robot
                    },
                )
            })
            .collect();
        if p.tasks
            .iter()
            .any(|t| t.fixed.is_some_and(|a| q[&t.id] != a))
        {
            continue;
        }
        if p.require_robot_start
            && !p
                .immediate
                .iter()
                .any(|id| q.get(id) == Some(&Agent::Robot))
        {
            continue;
        }
        if p.excluded.iter().any(|x| x == &q) {
            continue;
        }
        let (mut h, mut r) = (0.0, 0.0);
        for t in &p.tasks {
            match q[&t.id] {
                Agent::Human => h += human_cost(t, p.estimates, &p.params, prev),
                Agent::Robot => r += robot_cost(t, p.estimates, &p.params, prev),
            }
        }
        out.push((q, f64::max(h, r)));
    }
    out
}

pub fn allocation_optimum(p: &AllocationProblem) -> Option<f64> {
    enumerate_allocations(p)
        .into_iter()
        .map(|(_, z)| z)
        .reduce(f64::min)
}

pub fn random_allocation_problem(rng: &mut impl Rng, max_tasks: usize) -> AllocationProblem {
    let n = rng.gen_range(1..=max_tasks);
    let tasks: Vec<AllocationTask> = (1..=n as u32)
        .map(|i| AllocationTask {
            id: TaskId(i),
            t_h: rng.gen_range(5.0..=60.0),
            t_r: rng.gen_range(5.0..=60.0),
            fixed: None,
        })
        .collect();
    let levels = [0.0, 0.5, 1.0];
    let mut immediate: BTreeSet<TaskId> = tasks
        .iter()
        .filter(|_| rng.gen_bool(0.4))
        .map(|t| t.id)
        .collect();
    if immediate.is_empty() {
        immediate.insert(tasks[rng.gen_range(0..n)].id);
    }
    AllocationProblem {
        tasks,
        immediate,
        require_robot_start: rng.gen_bool(0.8),
        estimates: PointEstimates {
            p_f: *levels.choose(rng).unwrap(),
            p_e: *levels.choose(rng).unwrap(),
        },
        params: CostParams::default(),
        previous: None,
        excluded: Vec::new(),
    }
}

// ---------------------------------------------------------------- schedule

/// Optimal makespan over all pairs of per-agent task orders. Each pair of
/// orders fixes the schedule up to left-shifting, so the earliest start
/// times of that pair are evaluated by longest paths.
pub fn schedule_optimum(p: &SchedulingProblem) -> Option<f64> {
    let human: Vec<usize> = (0..p.tasks.len())
        .filter(|&i| p.tasks[i].agent == Agent::Human)
        .collect();
    let robot: Vec<usize> = (0..p.tasks.len())
        .filter(|&i| p.tasks[i].agent == Agent::Robot)
        .collect();
    let robot_work = p.tasks.iter().any(|t| t.agent == Agent::Robot);
    let enforce = p.enforce_v_start && robot_work;
    let mut best: Option<f64> = None;
    for ho in permutations(&human) {
        for ro in permutations(&robot) {
            let Some(start) = earliest_starts(p, &ho, &ro) else {
                continue;
            };
            if enforce
                && !p
                    .tasks
                    .iter()
                    .enumerate()
                    .any(|(i, t)| p.v.contains(&t.id) && start[i] <= TOL)
            {
                continue;
            }
            let z = p
                .tasks
                .iter()
                .enumerate()
                .map(|(i, t)| start[i] + t.duration)
                .fold(0.0, f64::max);
            if best.is_none_or(|b| z < b) {
                best = Some(z);
            }
        }
    }
    best
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

/// Start times when each agent works through its order as early as
/// possible; `None` if the orders contradict the precedences.
fn earliest_starts(p: &SchedulingProblem, human: &[usize], robot: &[usize]) -> Option<Vec<f64>> {
    let n = p.tasks.len();
    let index: BTreeMap<ExtId, usize> =
        p.tasks.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
    let mut preds: Vec<Vec<usize>> = p
        .tasks
        .iter()
        .map(|t| t.predecessors.iter().map(|q| index[q]).collect())
        .collect();
    for order in [human, robot] {
        for w in order.windows(2) {
            preds[w[1]].push(w[0]);
        }
    }
    let mut start = vec![f64::NAN; n];
    let mut done = 0;
    while done < n {
        let mut progressed = false;
        for i in 0..n {
            if !start[i].is_nan() || preds[i].iter().any(|&q| start[q].is_nan()) {
                continue;
            }
            let t = &p.tasks[i];
            let s = preds[i]
                .iter()
                .map(|&q| start[q] + p.tasks[q].duration)
                .fold(t.release.max(p.ready.of(t.agent)), f64::max);
            start[i] = s;
            done += 1;
            progressed = true;
        }
        if !progressed {
            return None;
        }
    }
    Some(start)
}

/// Constraint check written directly from the scheduling program:
/// every task once on its agent with its duration, releases, precedences,
/// no overlap on an agent, some task of `V` at time zero when required,
/// and the makespan equal to the last finish.
pub fn schedule_violations(p: &SchedulingProblem, s: &Schedule) -> Vec<String> {
    let mut bad = Vec::new();
    let tol = 1e-7;
    for t in &p.tasks {
        let found: Vec<_> = s.entries.iter().filter(|e| e.id == t.id).collect();
        if found.len() != 1 {
            bad.push(format!("{} scheduled {} times", t.id, found.len()));
            continue;
        }
        let e = found[0];
        if e.agent != t.agent {
            bad.push(format!("{} on wrong agent", t.id));
        }
        if (e.finish - e.start - t.duration).abs() > tol {
            bad.push(format!("{} has wrong duration", t.id));
        }
        if e.start < t.release.max(p.ready.of(t.agent)) - tol {
            bad.push(format!("{} starts before release", t.id));
        }
        for q in &t.predecessors {
            let pe = s
                .entries
                .iter()
                .find(|x| x.id == *q)
                .map(|x| x.finish)
                .unwrap_or(f64::INFINITY);
            if e.start < pe - tol {
                bad.push(format!("{} starts before {} finishes", t.id, q));
            }
        }
    }
    if s.entries.len() != p.tasks.len() {
        bad.push("extra entries".into());
    }
    for a in &s.entries {
        for b in &s.entries {
            if a.id < b.id
                && a.agent == b.agent
                && a.start < b.finish - tol
                && b.start < a.finish - tol
            {
                bad.push(format!("{} overlaps {}", a.id, b.id));
            }
        }
    }
    let robot_work = p.tasks.iter().any(|t| t.agent == Agent::Robot);
    if p.enforce_v_start
        && robot_work
        && !s
            .entries
            .iter()
            .any(|e| p.v.contains(&e.id) && e.start <= tol)
    {
        bad.push("no task of V starts at zero".into());
    }
    let last = s.entries.iter().map(|e| e.finish).fold(0.0, f64::max);
    if (s.makespan - last).abs() > tol {
        bad.push(format!("makespan {} but last finish {}", s.makespan, last));
    }
    bad
}

/// Up to `max_tasks` extended tasks with random precedences, at most two
/// zero-duration assignment tasks and an occasional error fix.
pub fn random_schedule_problem(rng: &mut impl Rng, max_tasks: usize) -> SchedulingProblem {
    let n = rng.gen_range(1..=max_tasks);
    let alloc_slots = rng.gen_range(0..=2usize.min(n));
    let mut tasks: Vec<ExtendedTask> = Vec::new();
    for i in 0..n {
        let sub = TaskId(i as u32 + 1);
        let (kind, agent, duration) = if i < alloc_slots {
            (ExtKind::Allocate, Agent::Robot, 0.0)
        } else if i == alloc_slots && rng.gen_bool(0.2) {
            (
                ExtKind::ErrorFix,
                Agent::Robot,
                rng.gen_range(5..=60) as f64,
            )
        } else {
            let agent = if rng.gen_bool(0.5) {
                Agent::Human
            } else {
                Agent::Robot
            };
            (ExtKind::Base, agent, rng.gen_range(5..=60) as f64)
        };
        let mut predecessors = BTreeSet::new();
        for t in &tasks {
            if rng.gen_bool(0.3) {
                predecessors.insert(t.id);
            }
        }
        tasks.push(ExtendedTask {
            id: ExtId { subtask: sub, kind },
            agent,
            duration,
            predecessors,
            release: 0.0,
        });
    }
    tasks.shuffle(rng);
    let v: BTreeSet<ExtId> = tasks
        .iter()
        .filter(|t| t.agent == Agent::Robot && t.predecessors.is_empty() && t.duration > 0.0)
        .filter(|_| rng.gen_bool(0.7))
        .map(|t| t.id)
        .collect();
    SchedulingProblem {
        enforce_v_start: !v.is_empty() && rng.gen_bool(0.8),
        v,
        tasks,
        ready: AgentReady::NOW,
        time_limit: 5.0,
        node_limit: None,
    }
}

// ---------------------------------------------------------------- state graph

/// Edges of the per-subtask state graph: `(from, action, color correct?, to)`.
/// `None` in the color slot means the edge does not depend on a color.
pub const STATE_EDGES: &[(SubtaskState, ActionKind, Option<bool>, SubtaskState)] = {
    use ActionKind::*;
    use SubtaskState::*;
    &[
        (Initial, H1, Some(true), PlacedCorrectly),
        (Initial, H1, Some(false), Misplaced),
        (Initial, R1, None, PlacedCorrectly),
        (Initial, H2, Some(true), AssignedToRobotCorrectly),
        (Initial, H2, Some(false), AssignedToRobotIncorrectly),
        (Initial, R2, None, AssignedToHuman),
        (Misplaced, H3, None, Initial),
        (Misplaced, R3, None, Initial),
        (AssignedToRobotIncorrectly, H5, None, Initial),
        (AssignedToRobotIncorrectly, R6, None, Initial),
        (AssignedToRobotCorrectly, H5, None, Initial),
        (AssignedToRobotCorrectly, R4, None, PlacedCorrectly),
        (AssignedToHuman, R5, None, Initial),
        (AssignedToHuman, H6, None, Initial),
        (AssignedToHuman, H4, None, PlacedCorrectly),
    ]
};

pub fn edge_target(from: SubtaskState, kind: ActionKind, correct: bool) -> Option<SubtaskState> {
    STATE_EDGES
        .iter()
        .find(|(f, k, c, _)| *f == from && *k == kind && c.is_none_or(|c| c == correct))
        .map(|e| e.3)
}
