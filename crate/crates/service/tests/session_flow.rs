use cobot_core::task::{ActionKind, TaskId};
use cobot_service::protocol::EngineMessage;
use cobot_service::session::{Session, SessionConfig};

fn session() -> Session {
    Session::new(
        "s",
        SessionConfig {
            debug_beliefs: true,
            ..SessionConfig::default()
        },
    )
    .unwrap()
}

/// Steps the robot until it is moving a block onto the table.
fn until_shared_move(s: &mut Session) -> (TaskId, f64) {
    s.join(0.0);
    for _ in 0..200 {
        if let Some(r) = s.planner().state.robot_task {
            if matches!(
                r.action.kind,
                ActionKind::R1 | ActionKind::R3 | ActionKind::R4
            ) {
                return (r.action.subtask, r.finish);
            }
        }
        let t = s.next_wakeup().expect("robot has something to do");
        s.advance(t);
    }
    panic!("robot never moved a block");
}

#[test]
fn red_light_blocks_placements() {
    let mut s = session();
    let (claimed, finish) = until_shared_move(&mut s);
    let lock = s.config().run.lock_window;
    assert!(s.red_light(s.now()).is_none());
    let msgs = s.advance(finish - lock);
    assert!(
        msgs.iter().any(
            |m| matches!(m, EngineMessage::LightState { red: true, until: Some(u) } if *u == finish)
        ),
        "{msgs:?}"
    );
    let during = finish - lock / 2.0;
    assert!(s.red_light(during).is_some());
    assert!(s
        .legal_actions(during)
        .iter()
        .all(|a| !a.kind.is_placement()));

    let spot = s
        .planner()
        .graph()
        .feasible_actions(cobot_core::task::Agent::Human)
        .into_iter()
        .find(|a| a.kind == ActionKind::H1 && a.subtask != claimed)
        .expect("some spot the human could fill");
    let msgs = s.human_action(spot.kind, spot.subtask, spot.color, during);
    let reason = msgs
        .iter()
        .find_map(|m| match m {
            EngineMessage::ActionRejected { reason, .. } => Some(reason.clone()),
            _ => None,
        })
        .expect("placement rejected");
    assert!(reason.contains("locked"), "{reason}");

    let msgs = s.advance(finish);
    assert!(msgs
        .iter()
        .any(|m| matches!(m, EngineMessage::LightState { red: false, .. })));
    assert!(s.red_light(finish).is_none());
}

#[test]
fn rejecting_an_assignment_lowers_following_estimate() {
    let mut s = session();
    s.join(0.0);
    let mut assigned = None;
    let mut now = 0.0;
    for _ in 0..200 {
        let Some(t) = s.next_wakeup() else { break };
        now = t;
        for m in s.advance(t) {
            if let EngineMessage::AssignmentNotice { subtask, .. } = m {
                assigned.get_or_insert(subtask);
            }
        }
        if assigned.is_some() {
            break;
        }
    }
    let subtask = assigned.expect("robot hands a spot to the human");
    let before = s.planner().estimates().p_f;
    let msgs = s.human_action(ActionKind::H6, subtask, None, now + 1.0);
    let p_f = msgs
        .iter()
        .find_map(|m| match m {
            EngineMessage::BeliefDebug { p_f, .. } => Some(*p_f),
            _ => None,
        })
        .expect("belief debug sent");
    assert!(p_f < before, "{p_f} !< {before}");
}

#[test]
fn paused_session_rejects_actions_and_resumes() {
    let mut s = session();
    s.join(0.0);
    s.pause();
    assert_eq!(s.next_wakeup(), None);
    let c = s.config().scenario.pattern[&TaskId(1)];
    let msgs = s.human_action(ActionKind::H1, TaskId(1), Some(c), 1.0);
    assert!(msgs
        .iter()
        .any(|m| matches!(m, EngineMessage::ActionRejected { .. })));
    let msgs = s.join(1.0);
    assert!(msgs
        .iter()
        .any(|m| matches!(m, EngineMessage::Snapshot(snap) if !snap.paused)));
    let msgs = s.human_action(ActionKind::H1, TaskId(1), Some(c), 12.0);
    assert!(
        !msgs
            .iter()
            .any(|m| matches!(m, EngineMessage::ActionRejected { .. })),
        "{msgs:?}"
    );
}

#[test]
fn session_log_replays() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("live.jsonl");
    let mut s = Session::new(
        "s",
        SessionConfig {
            log_path: Some(path.clone()),
            ..SessionConfig::default()
        },
    )
    .unwrap();
    s.join(0.0);
    let c = s.config().scenario.pattern[&TaskId(1)];
    s.human_action(ActionKind::H2, TaskId(1), Some(c), 3.0);
    for _ in 0..20 {
        let Some(t) = s.next_wakeup() else { break };
        s.advance(t);
    }
    assert!(s.log_error().is_none());
    let report = cobot_core::replay::replay_file(&path).unwrap();
    assert!(report.is_exact(), "{}", report.status);
}
