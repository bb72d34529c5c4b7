//! Schedules an allocation of the study board and prints the plan.
//!
//! cargo run --example schedule

use std::collections::BTreeSet;

use cobot_core::allocation::{solve_allocation, AllocationProblem, CostParams, PointEstimates};
use cobot_core::scenario::ScenarioConfig;
use cobot_core::schedule::{
    next_robot_action, solve_schedule, validate_schedule, BuildContext, SchedulingProblem,
};
use cobot_core::task::TaskGraph;

fn main() {
    let scenario = ScenarioConfig::study();
    let graph = TaskGraph::build(&scenario).expect("valid scenario");
    let estimates = PointEstimates { p_f: 0.5, p_e: 0.3 };
    let problem = AllocationProblem::from_graph(
        &graph,
        &BTreeSet::new(),
        estimates,
        CostParams::default(),
        None,
    );
    let (alloc, _) = solve_allocation(&problem).expect("feasible");

    let ctx = BuildContext {
        in_flight: Vec::new(),
        error_fix_time: scenario.nominal_times.robot.near,
    };
    let sp = SchedulingProblem::from_graph(&graph, &alloc, &ctx, 1.0);
    let (schedule, stats) = solve_schedule(&sp).expect("schedulable");
    validate_schedule(&sp, &schedule).expect("valid");

    let mut entries = schedule.entries.clone();
    entries.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.id.cmp(&b.id)));
    for e in &entries {
        println!(
            "{:<6} {:<8} {:>7.1} {:>7.1}",
            e.agent.to_string(),
            e.id.to_string(),
            e.start,
            e.finish
        );
    }
    println!(
        "makespan {:.1} (bound {:.1}), optimal {}, {} nodes",
        schedule.makespan,
        sp.lower_bound(),
        schedule.incumbent_optimal,
        stats.nodes
    );
    if let Some(step) = next_robot_action(&schedule, &graph) {
        println!("robot starts with {}", step.action);
    }
}
