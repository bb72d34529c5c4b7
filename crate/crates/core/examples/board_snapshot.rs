//! Replans a half-finished board with two misplaced blocks.
//!
//! cargo run --example board_snapshot

use std::collections::{BTreeMap, BTreeSet};

use cobot_core::allocation::{solve_allocation, AllocationProblem, CostParams, PointEstimates};
use cobot_core::scenario::ScenarioConfig;
use cobot_core::schedule::{
    build_tau_new, next_robot_action, solve_schedule, BuildContext, SchedulingProblem,
};
use cobot_core::task::{ActionKind, AgentAction, Color, TaskGraph, TaskId};

fn main() {
    let scenario = ScenarioConfig::study();
    let mut graph = TaskGraph::build(&scenario).expect("valid scenario");
    for id in [6, 16] {
        graph
            .apply_in_place(&AgentAction::new(ActionKind::R1, TaskId(id), None))
            .expect("legal");
    }
    for id in [1, 17] {
        let want = graph.get(TaskId(id)).expect("exists").required_color;
        let wrong = Color::ALL
            .into_iter()
            .find(|&c| c != want)
            .expect("four colors");
        graph
            .apply_in_place(&AgentAction::new(ActionKind::H1, TaskId(id), Some(wrong)))
            .expect("legal");
    }
    let states: BTreeMap<TaskId, _> = graph.subtasks.values().map(|s| (s.id, s.state)).collect();
    for (id, s) in states
        .iter()
        .filter(|(_, s)| !matches!(s, cobot_core::task::SubtaskState::Initial))
    {
        println!("{id}: {s:?}");
    }
    let u: Vec<String> = graph
        .immediately_feasible_robot_set()
        .iter()
        .map(|t| t.to_string())
        .collect();
    println!("robot could start: {}", u.join(" "));

    let problem = AllocationProblem::from_graph(
        &graph,
        &BTreeSet::new(),
        PointEstimates { p_f: 0.6, p_e: 0.4 },
        CostParams::default(),
        None,
    );
    let (alloc, _) = solve_allocation(&problem).expect("feasible");
    let ctx = BuildContext {
        in_flight: Vec::new(),
        error_fix_time: scenario.nominal_times.robot.near,
    };
    for t in build_tau_new(&graph, &alloc, &ctx) {
        let preds: Vec<String> = t.predecessors.iter().map(|p| p.to_string()).collect();
        println!(
            "{:<8} {:<6} {:>5.1}s  after [{}]",
            t.id.to_string(),
            t.agent.to_string(),
            t.duration,
            preds.join(" ")
        );
    }
    let sp = SchedulingProblem::from_graph(&graph, &alloc, &ctx, 1.0);
    let (schedule, _) = solve_schedule(&sp).expect("schedulable");
    println!("makespan {:.1}", schedule.makespan);
    if let Some(step) = next_robot_action(&schedule, &graph) {
        println!("robot next: {}", step.action);
    }
}
