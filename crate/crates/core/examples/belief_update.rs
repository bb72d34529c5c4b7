//! Feeds a sequence of observed behaviours to both estimators.
//!
//! cargo run --example belief_update -- F3 F3 F1 M2 M1

use cobot_core::belief::{
    init_belief, update_error, update_following, ActionHistory, BeliefKind, ErrorClass,
    EstimatorParams, FollowingClass,
};

fn main() {
    let params = EstimatorParams::default();
    let mut f = init_belief(BeliefKind::Following, &params);
    let mut e = init_belief(BeliefKind::Error, &params);
    let mut hf = ActionHistory::new(params.memory);
    let mut he = ActionHistory::new(params.memory);
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        args = "F3 F3 F3 F1 F2 M2 M2 M1"
            .split(' ')
            .map(String::from)
            .collect();
    }
    println!(
        "prior        p_f={:.3} p_e={:.3}",
        f.expected_value(),
        e.expected_value()
    );
    for a in args {
        match a.as_str() {
            "F1" | "F2" | "F3" => {
                let c = match a.as_str() {
                    "F1" => FollowingClass::F1,
                    "F2" => FollowingClass::F2,
                    _ => FollowingClass::F3,
                };
                hf.push(c);
                f = update_following(&f, &hf, c, &params);
            }
            "M1" | "M2" => {
                let c = if a == "M1" {
                    ErrorClass::M1
                } else {
                    ErrorClass::M2
                };
                he.push(c);
                e = update_error(&e, &he, c, &params);
            }
            other => {
                eprintln!("unknown observation {other}; use F1 F2 F3 M1 M2");
                std::process::exit(2);
            }
        }
        let bars: String = f
            .probs
            .iter()
            .map(|p| " .:-=+*#%@".chars().nth((p * 9.99) as usize).unwrap_or('@'))
            .collect();
        println!(
            "after {a:<6} p_f={:.3} p_e={:.3}  [{bars}]",
            f.expected_value(),
            e.expected_value()
        );
    }
}
