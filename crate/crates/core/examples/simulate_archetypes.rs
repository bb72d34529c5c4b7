//! Runs every scripted human over a few seeds and prints one line per run.
//!
//! cargo run --release --example simulate_archetypes -- [seeds]

use cobot_core::sim::{run_sim, HumanScript, SimConfig};

fn main() {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let config = SimConfig::default();
    let humans = [
        "leader",
        "collaborative_leader",
        "collaborative_follower",
        "follower",
        "switcher:300",
        "error_prone:0.3",
        "confused_tail:5",
    ];
    println!(
        "{:<24} {:>4} {:>10} {:>9} {:>6} {:>6} {:>6} {:>4} {:>4} {:>4} {:>6} {:>8} {:>8}",
        "human",
        "seed",
        "status",
        "makespan",
        "op",
        "pf",
        "pe",
        "R2",
        "H6",
        "err",
        "fixes",
        "H2",
        "ms"
    );
    for name in humans {
        let script = HumanScript::by_name(name).expect("known archetype");
        for seed in 1..=seeds {
            let t = std::time::Instant::now();
            let run = run_sim(&config, &script, seed).expect("simulation runs");
            let s = &run.summary;
            println!(
                "{:<24} {:>4} {:>10} {:>9.1} {:>6.3} {:>6.3} {:>6.3} {:>4} {:>4} {:>4} {:>6} {:>8} {:>8.1}",
                name,
                seed,
                format!("{:?}", s.status),
                s.makespan,
                s.overall_preference,
                s.final_pf,
                s.final_pe,
                s.robot_assignments,
                s.rejected,
                s.human_errors,
                s.error_fixes,
                s.human_assignments,
                t.elapsed().as_secs_f64() * 1e3
            );
        }
    }
}
