//! Prints the executed Gantt chart of a simulated run as CSV.
//!
//! cargo run --example gantt_export -- [human] [seed] > run.csv

use cobot_core::gantt::{executed_rows, to_csv};
use cobot_core::sim::{run_sim, HumanScript, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let human = args.next().unwrap_or_else(|| "follower".into());
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let run = run_sim(&SimConfig::default(), &HumanScript::by_name(&human)?, seed)?;
    print!("{}", to_csv(&executed_rows(&run.records)));
    eprintln!("makespan {:.1}", run.summary.makespan);
    Ok(())
}
