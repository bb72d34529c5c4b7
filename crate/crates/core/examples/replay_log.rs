//! Simulates a run, writes its event log and replays it from disk.
//!
//! cargo run --example replay_log -- [human] [seed]

use cobot_core::log::to_jsonl;
use cobot_core::replay::{final_states, replay_file};
use cobot_core::sim::{run_sim, HumanScript, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let human = args.next().unwrap_or_else(|| "collaborative_leader".into());
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let run = run_sim(&SimConfig::default(), &HumanScript::by_name(&human)?, seed)?;

    let path = std::env::temp_dir().join(format!("cobot-{human}-{seed}.jsonl"));
    std::fs::write(&path, to_jsonl(&run.records))?;
    let report = replay_file(&path)?;
    println!(
        "{}: {} records, {:?}",
        path.display(),
        report.records,
        report.status
    );
    if let Some(states) = final_states(&report) {
        let placed = states
            .values()
            .filter(|s| **s == cobot_core::task::SubtaskState::PlacedCorrectly)
            .count();
        println!("{placed}/{} subtasks placed after replay", states.len());
    }
    Ok(())
}
