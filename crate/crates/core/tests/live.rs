use intent_core::kinematics::dbar;
use intent_core::live::{Event, Session, StateEvent};
use intent_core::runner::Preset;
use intent_core::scenario::make_case1;
use intent_core::Cell;

fn small_session(seed: u64) -> Session {
    let mut s = make_case1();
    s.prediction.samples = 100;
    s.prediction.horizon = 8;
    Session::new(s, seed).unwrap()
}

fn state(ev: Event) -> StateEvent {
    match ev {
        Event::State(s) => *s,
        other => panic!("expected a state event, got {other:?}"),
    }
}

#[test]
fn steps_increase_without_gaps() {
    let mut s = small_session(1);
    let mut last = 0;
    for _ in 0..25 {
        let st = state(s.poll().unwrap());
        assert_eq!(st.k, last + 1);
        last = st.k;
    }
}

#[test]
fn paused_session_does_not_advance() {
    let mut s = small_session(2);
    s.poll();
    assert!(s.handle_command(r#"{"type":"pause"}"#).is_empty());
    for _ in 0..50 {
        assert!(s.poll().is_none());
    }
    assert_eq!(s.step(), 1);
    s.handle_command(r#"{"type":"resume"}"#);
    assert_eq!(state(s.poll().unwrap()).k, 2);
}

#[test]
fn set_goal_retargets_next_tick() {
    let mut s = small_session(3);
    for _ in 0..3 {
        s.poll();
    }
    let before = s.goal();
    let target = 3;
    assert_ne!(before, target);
    s.handle_command(r#"{"type":"set_alpha","value":10000}"#);
    s.handle_command(&format!(r#"{{"type":"set_goal","goal":{target}}}"#));
    let world = s.world().clone();
    let mut off_old = false;
    for _ in 0..15 {
        let prev = s.position();
        let st = state(s.poll().unwrap());
        assert_eq!(st.true_goal, target);
        let next = Cell::from(st.cell);
        // at this alpha only zero-cost moves toward the commanded goal carry mass
        let d_new = dbar(&world.map, &world.fields[target], prev, next).unwrap().unwrap();
        assert!(d_new < 1e-12, "move {prev:?} -> {next:?} is off the new goal's shortest paths");
        let d_old = dbar(&world.map, &world.fields[before], prev, next).unwrap().unwrap();
        off_old |= d_old > 1e-9;
    }
    assert!(off_old, "every move was also optimal for the previous goal");
}

#[test]
fn reset_reinitializes() {
    let mut s = small_session(4);
    for _ in 0..10 {
        s.poll();
    }
    let ev = s.handle_command(r#"{"type":"reset","scenario":"case2","seed":9}"#);
    assert_eq!(ev.len(), 2);
    match &ev[0] {
        Event::Hello { scenario } => assert_eq!(scenario.segments[0].goal, 10),
        other => panic!("{other:?}"),
    }
    let st = state(ev[1].clone());
    assert_eq!(st.k, 0);
    assert_eq!(st.true_goal, 10);
    for m in st.methods.values() {
        assert!(m.goal_post.iter().all(|&p| (p - 1.0 / 12.0).abs() < 1e-15));
        assert!(m.pred.is_none());
    }
    assert_eq!(s.step(), 0);
}

#[test]
fn events_round_trip() {
    let mut s = small_session(5);
    let mut events = vec![s.hello(), s.state()];
    for _ in 0..3 {
        events.push(s.poll().unwrap());
    }
    events.extend(s.handle_command("{bad"));
    for ev in events {
        let text = ev.to_json();
        let back: Event = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ev);
    }
}

#[test]
fn state_event_shape() {
    let mut s = small_session(6);
    let ev = s.poll().unwrap();
    let v: serde_json::Value = serde_json::from_str(&ev.to_json()).unwrap();
    assert_eq!(v["type"], "state");
    assert_eq!(v["k"], 1);
    assert_eq!(v["pos"].as_array().unwrap().len(), 2);
    let p = &v["methods"]["P"];
    assert_eq!(p["goal_post"].as_array().unwrap().len(), 12);
    assert!(p["alpha_hat"].is_number());
    assert!(p["timing_ms"].is_number());
    assert_eq!(p["pred"]["means"].as_array().unwrap().len(), 8);
    assert_eq!(p["pred"]["covs"][0].as_array().unwrap().len(), 3);
    assert_eq!(p["pred"]["ellipses"].as_array().unwrap().len(), 8);
    for name in ["A", "B", "G"] {
        assert!(v["methods"][name].is_object());
    }
}

#[test]
fn true_goal_dominates_without_switches() {
    let mut reached = Vec::new();
    for seed in 0..20 {
        let mut s = small_session(100 + seed);
        s.handle_command(r#"{"type":"set_alpha","value":100}"#);
        let mut p = 0.0;
        for _ in 0..30 {
            let st = state(s.poll().unwrap());
            p = st.methods["P"].goal_post[st.true_goal];
        }
        reached.push(p);
    }
    reached.sort_by(f64::total_cmp);
    let median = 0.5 * (reached[9] + reached[10]);
    assert!(median > 0.9, "median true-goal posterior after 30 ticks: {median}");
}

#[test]
fn default_config_is_real_time() {
    let mut s = Session::preset(Preset::Case1, 7).unwrap();
    let mut worst_mean = 0.0f64;
    for _ in 0..5 {
        s.poll();
    }
    let mut sums = std::collections::BTreeMap::new();
    for _ in 0..40 {
        let st = state(s.poll().unwrap());
        for (name, m) in &st.methods {
            assert!(m.timing_ms > 0.0);
            *sums.entry(name.clone()).or_insert(0.0) += m.timing_ms / 40.0;
        }
    }
    for (name, mean) in sums {
        assert!(mean < 10.0, "{name}: {mean} ms per step");
        worst_mean = worst_mean.max(mean);
    }
    assert!(worst_mean > 0.0);
}
