mod common;

use cobot_core::belief::{
    transition_row, update_error, update_following, ActionHistory, BeliefGrid, BeliefKind,
    ErrorClass, EstimatorParams, FollowingClass, GRID_POINTS,
};
use cobot_core::scenario::ScenarioConfig;
use cobot_core::task::{ActionKind, Agent, AgentAction, Color, SubtaskState, TaskGraph, TaskId};
use proptest::prelude::*;

use common::edge_target;

fn study_graph() -> TaskGraph {
    TaskGraph::build(&ScenarioConfig::study()).unwrap()
}

fn action_strategy() -> impl Strategy<Value = AgentAction> {
    (0usize..12, 1u32..=20, prop::option::of(0usize..4)).prop_map(|(k, id, c)| {
        AgentAction::new(ActionKind::ALL[k], TaskId(id), c.map(|i| Color::ALL[i]))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn actions_follow_state_graph(actions in prop::collection::vec(action_strategy(), 1..120)) {
        let mut g = study_graph();
        let totals = g.block_totals();
        for a in actions {
            let sub = g.get(a.subtask).unwrap().clone();
            let placed_before = g.placed_count();
            let correct = a.color.is_none_or(|c| c == sub.required_color);
            let expected = edge_target(sub.state, a.kind, correct);
            match g.apply_in_place(&a) {
                Ok(before) => {
                    prop_assert_eq!(before, sub.state);
                    prop_assert_eq!(g.state(a.subtask), expected);
                    prop_assert!(sub.predecessors.iter().all(|&p| g.is_complete(p)) || !a.kind.needs_precedence());
                }
                Err(_) => prop_assert_eq!(g.state(a.subtask), Some(sub.state)),
            }
            if expected.is_none() {
                prop_assert_eq!(g.state(a.subtask), Some(sub.state));
            }
            prop_assert!(g.placed_count() >= placed_before);
            prop_assert_eq!(&g.block_totals(), &totals);
            for id in g.immediately_feasible_robot_set() {
                prop_assert!(g.predecessors_complete(id));
            }
            prop_assert_eq!(g.state(a.subtask) == Some(SubtaskState::PlacedCorrectly) || sub.state != SubtaskState::PlacedCorrectly, true);
        }
    }

    #[test]
    fn feasible_actions_are_accepted(actions in prop::collection::vec(action_strategy(), 0..80)) {
        let mut g = study_graph();
        for a in actions {
            let _ = g.apply_in_place(&a);
        }
        for agent in [Agent::Human, Agent::Robot] {
            for a in g.feasible_actions(agent) {
                prop_assert_eq!(a.kind.agent(), agent);
                prop_assert!(g.apply_action(&a).is_ok());
            }
        }
    }
}

fn belief_strategy() -> impl Strategy<Value = [f64; GRID_POINTS]> {
    prop::array::uniform11(0.0f64..1.0).prop_filter_map("needs mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.map(|x| x / s))
    })
}

fn following_class() -> impl Strategy<Value = FollowingClass> {
    prop_oneof![
        Just(FollowingClass::F1),
        Just(FollowingClass::F2),
        Just(FollowingClass::F3)
    ]
}

fn error_class() -> impl Strategy<Value = ErrorClass> {
    prop_oneof![Just(ErrorClass::M1), Just(ErrorClass::M2)]
}

fn is_point_mass(p: &[f64; GRID_POINTS]) -> bool {
    p.iter().filter(|&&x| x > 0.0).count() <= 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn following_update_moves_the_right_way(
        probs in belief_strategy(),
        past in prop::collection::vec(following_class(), 0..3),
        observed in following_class(),
    ) {
        let params = EstimatorParams::default();
        let b = BeliefGrid { kind: BeliefKind::Following, probs };
        let mut h = ActionHistory::new(params.memory);
        for c in past { h.push(c); }
        h.push(observed);
        let out = update_following(&b, &h, observed, &params);
        prop_assert!((out.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(out.probs.iter().all(|&p| p >= 0.0));
        let (before, after) = (b.expected_value(), out.expected_value());
        match observed {
            FollowingClass::F1 | FollowingClass::F2 => prop_assert!(after >= before - 1e-12),
            FollowingClass::F3 => prop_assert!(after <= before + 1e-12),
        }
        if !is_point_mass(&probs) && (after - before).abs() <= 1e-12 {
            // Equality only when the likelihood leaves a single support point.
            prop_assert!(is_point_mass(&out.probs));
        }
        let again = update_following(&b, &h, observed, &params);
        prop_assert_eq!(out.probs.map(f64::to_bits), again.probs.map(f64::to_bits));
    }

    #[test]
    fn error_update_moves_the_right_way(
        probs in belief_strategy(),
        past in prop::collection::vec(error_class(), 0..3),
        observed in error_class(),
    ) {
        let params = EstimatorParams::default();
        let b = BeliefGrid { kind: BeliefKind::Error, probs };
        let mut h = ActionHistory::new(params.memory);
        for c in past { h.push(c); }
        h.push(observed);
        let out = update_error(&b, &h, observed, &params);
        prop_assert!((out.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(out.probs.iter().all(|&p| p >= 0.0));
        match observed {
            ErrorClass::M1 => prop_assert!(out.expected_value() >= b.expected_value() - 1e-12),
            ErrorClass::M2 => prop_assert!(out.expected_value() <= b.expected_value() + 1e-12),
        }
        let again = update_error(&b, &h, observed, &params);
        prop_assert_eq!(out.probs.map(f64::to_bits), again.probs.map(f64::to_bits));
    }

    #[test]
    fn kernel_rows_are_stochastic(sigma in 0.02f64..0.6, beta in -8.0f64..8.0, from in 0usize..GRID_POINTS) {
        let params = EstimatorParams { sigma, beta_wrong: beta.abs(), beta_correct: -beta.abs(), ..EstimatorParams::default() };
        for observed in [ErrorClass::M1, ErrorClass::M2] {
            let row = transition_row(from, observed, &params);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn history_counts_match_length(classes in prop::collection::vec(following_class(), 0..20)) {
        let mut h = ActionHistory::new(3);
        for c in classes { h.push(c); }
        prop_assert!(h.len() <= 3);
        let total: usize = [FollowingClass::F1, FollowingClass::F2, FollowingClass::F3].iter().map(|&c| h.count(c)).sum();
        prop_assert_eq!(total, h.len());
    }
}
