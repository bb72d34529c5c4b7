//! Splits the study board between human and robot for a few belief levels.
//!
//! cargo run --example allocate

use std::collections::BTreeSet;

use cobot_core::allocation::{solve_allocation, AllocationProblem, CostParams, PointEstimates};
use cobot_core::scenario::ScenarioConfig;
use cobot_core::task::{Agent, TaskGraph};

fn main() {
    let graph = TaskGraph::build(&ScenarioConfig::study()).expect("valid scenario");
    for (p_f, p_e) in [(0.9, 0.1), (0.5, 0.5), (0.1, 0.1), (0.5, 0.9)] {
        let estimates = PointEstimates { p_f, p_e };
        let problem = AllocationProblem::from_graph(
            &graph,
            &BTreeSet::new(),
            estimates,
            CostParams::default(),
            None,
        );
        let (alloc, stats) = solve_allocation(&problem).expect("feasible");
        let human: Vec<String> = alloc
            .tasks_for(Agent::Human)
            .map(|t| t.to_string())
            .collect();
        println!(
            "p_f={p_f:.1} p_e={p_e:.1}  z={:.1}  nodes={}  human: {}",
            alloc.objective,
            stats.nodes,
            if human.is_empty() {
                "-".into()
            } else {
                human.join(" ")
            }
        );
    }
}
