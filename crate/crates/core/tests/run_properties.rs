use std::collections::BTreeMap;

use cobot_core::log::{to_jsonl, EventLogRecord, LogEvent};
use cobot_core::planner::RunStatus;
use cobot_core::sim::{run_sim, HumanScript, SimConfig, Style};
use cobot_core::task::{ActionKind, Agent, Color, TaskGraph};
use proptest::prelude::*;

const LOCK_WINDOW: f64 = 8.0;

fn style() -> impl Strategy<Value = Style> {
    prop_oneof![
        Just(Style::Leader),
        Just(Style::CollaborativeLeader),
        Just(Style::CollaborativeFollower),
        Just(Style::Follower),
        (0.0f64..600.0).prop_map(|t_switch| Style::Switcher { t_switch }),
        (0.0f64..0.5).prop_map(|epsilon| Style::ErrorProne { epsilon }),
        (1u32..=5).prop_map(|row| Style::ConfusedTail { row }),
    ]
}

fn script() -> impl Strategy<Value = HumanScript> {
    (
        style(),
        0.0f64..=1.0,
        0.0f64..=1.0,
        1u32..4,
        prop::array::uniform4(0.0f64..0.6),
        0.5f64..=1.0,
        0.5f64..2.0,
    )
        .prop_map(
            |(style, initiative, reject_prob, streak, bias, memory, speed)| HumanScript {
                style,
                initiative,
                reject_prob,
                rejection_streak: streak,
                assign_to_robot_bias: Color::ALL.into_iter().zip(bias).collect::<BTreeMap<_, _>>(),
                memory_accuracy: memory,
                speed_factor: speed,
                gui_time: 2.0,
                rng_seed: 0,
            },
        )
}

/// Replays every applied action on a fresh board and checks that it is
/// accepted and that no block appears or vanishes.
fn check_blocks(records: &[EventLogRecord]) -> Result<(), TestCaseError> {
    let LogEvent::RunMeta(meta) = &records[0].event else {
        return Err(TestCaseError::fail("log does not start with run metadata"));
    };
    let mut graph = TaskGraph::build(&meta.scenario).unwrap();
    let totals = graph.block_totals();
    for r in records {
        let (LogEvent::HumanAction(a) | LogEvent::RobotAction(a)) = &r.event else {
            continue;
        };
        if let Some((before, after)) = a.applied() {
            let got = graph
                .apply_in_place(&a.action)
                .map_err(|e| TestCaseError::fail(format!("{e}")))?;
            prop_assert_eq!(got, before);
            prop_assert_eq!(graph.state(a.action.subtask), Some(after));
            prop_assert_eq!(&graph.block_totals(), &totals);
        }
    }
    prop_assert!(graph.all_placed());
    Ok(())
}

/// No human placement completes while a robot placement is in its final
/// stretch.
fn check_lock(records: &[EventLogRecord]) -> Result<(), TestCaseError> {
    let robot: Vec<f64> = records
        .iter()
        .filter_map(|r| match &r.event {
            LogEvent::RobotAction(a)
                if a.applied().is_some()
                    && matches!(
                        a.action.kind,
                        ActionKind::R1 | ActionKind::R3 | ActionKind::R4
                    ) =>
            {
                Some(r.sim_time)
            }
            _ => None,
        })
        .collect();
    for r in records {
        let LogEvent::HumanAction(a) = &r.event else {
            continue;
        };
        if a.applied().is_none() || !a.action.kind.is_placement() {
            continue;
        }
        for &finish in &robot {
            let inside = r.sim_time > finish - LOCK_WINDOW + 1e-9 && r.sim_time < finish - 1e-9;
            prop_assert!(
                !inside,
                "{} at {} inside lock ending {}",
                a.action,
                r.sim_time,
                finish
            );
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scripted_runs_finish_cleanly(script in script(), seed in 0u64..1000) {
        let config = SimConfig::default();
        let run = run_sim(&config, &script, seed).unwrap();
        prop_assert_eq!(run.outcome.status, RunStatus::Completed);
        check_blocks(&run.records)?;
        check_lock(&run.records)?;
        let human_places = run
            .records
            .iter()
            .filter(|r| matches!(&r.event, LogEvent::HumanAction(a) if a.applied().is_some() && a.action.kind.is_placement()))
            .count();
        prop_assert!(human_places + run.summary.robot_placements >= 20);
        let agents_match = run.records.iter().all(|r| match &r.event {
            LogEvent::HumanAction(a) => a.action.agent == Agent::Human,
            LogEvent::RobotAction(a) => a.action.agent == Agent::Robot,
            _ => true,
        });
        prop_assert!(agents_match);
        let again = run_sim(&config, &script, seed).unwrap();
        prop_assert_eq!(to_jsonl(&run.records), to_jsonl(&again.records));
    }
}
