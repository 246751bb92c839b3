use intent_core::runner::{run, Preset, RunPlan, ScenarioSource};
use intent_core::scenario::make_case1;
use intent_core::{Execution, Variant};

fn small_plan(dir: Option<std::path::PathBuf>) -> RunPlan {
    let mut plan = RunPlan::preset(Preset::Mc);
    plan.trials = 3;
    plan.seed = 21;
    plan.out_dir = dir;
    plan
}

#[test]
fn writes_one_table_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&small_plan(Some(dir.path().to_path_buf()))).unwrap();
    assert_eq!(out.artifacts.len(), 6);
    for p in &out.artifacts {
        assert!(p.exists(), "{}", p.display());
    }
    for cmp in [&out.summary.prediction_error, &out.summary.true_goal_prob, &out.summary.alpha_error] {
        assert_eq!(cmp.methods, ["B", "A", "G", "P"]);
        assert!(cmp.test.is_some());
    }
    let steps: usize = out.trials.iter().map(|t| t.methods[&Variant::P].len()).sum();
    assert_eq!(out.summary.prediction_error.summaries[3].n, steps);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut one = small_plan(Some(a.path().to_path_buf()));
    one.jobs = Some(1);
    let mut many = small_plan(Some(b.path().to_path_buf()));
    many.jobs = Some(3);
    many.exec = Execution::Parallel;
    let ra = run(&one).unwrap();
    run(&many).unwrap();
    for p in &ra.artifacts {
        let name = p.file_name().unwrap();
        assert_eq!(std::fs::read(p).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name:?}");
    }
}

#[test]
fn benchmark_adds_timing_tables() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.json");
    let mut s = make_case1();
    s.prediction.samples = 50;
    s.segments.truncate(1);
    s.segments[0].duration = 20;
    std::fs::write(&file, serde_json::to_string(&s).unwrap()).unwrap();
    let plan = RunPlan {
        source: ScenarioSource::File(file),
        methods: vec![Variant::G, Variant::P],
        out_dir: Some(dir.path().join("out")),
        trials: 1,
        seed: 0,
        jobs: None,
        benchmark: true,
        exec: Execution::Serial,
    };
    let out = run(&plan).unwrap();
    let lat = out.latency.unwrap();
    assert_eq!(lat.methods.keys().collect::<Vec<_>>(), ["G", "P"]);
    for p in lat.methods.values() {
        assert!(p.total.mean_ms >= p.inference.mean_ms);
        assert!(p.total.max_ms >= p.total.p99_ms && p.total.p99_ms >= p.total.median_ms);
    }
    assert!(dir.path().join("out/timing.csv").exists());
    assert!(dir.path().join("out/bench.json").exists());
}

#[test]
fn repeated_methods_rejected() {
    let mut plan = small_plan(None);
    plan.methods = vec![Variant::P, Variant::P];
    assert!(run(&plan).is_err());
}
