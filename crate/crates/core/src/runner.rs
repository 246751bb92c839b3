//! Experiment driver: runs every method over the same observation streams,
//! records per-step metrics and timings, and writes CSV/JSON artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::Cell;
use crate::inference::{Belief, Method, MethodConfig, Variant, World};
use crate::metrics::{aggregate, prediction_error, StepMetrics, Summary};
use crate::parallel::{self, Execution};
use crate::predictor::{predict, PredictConfig};
use crate::scenario::{make_case1, make_case2, mc_trial, MethodSpec, Scenario, Trajectory};
use crate::stats::{compare, Adjustment, TestReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Case1,
    Case2,
    Mc,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "case1" => Ok(Preset::Case1),
            "case2" => Ok(Preset::Case2),
            "mc" => Ok(Preset::Mc),
            other => Err(Error::Config(format!("unknown preset '{other}' (expected case1, case2 or mc)"))),
        }
    }
}

impl Preset {
    pub fn default_trials(self) -> usize {
        match self {
            Preset::Case1 | Preset::Case2 => 1,
            Preset::Mc => crate::scenario::MC_TRIALS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    Preset(Preset),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub source: ScenarioSource,
    pub methods: Vec<Variant>,
    pub out_dir: Option<PathBuf>,
    pub trials: usize,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub benchmark: bool,
    /// Rollout schedule inside each prediction.
    pub exec: Execution,
}

impl RunPlan {
    pub fn preset(preset: Preset) -> Self {
        RunPlan {
            source: ScenarioSource::Preset(preset),
            methods: Variant::ALL.to_vec(),
            out_dir: None,
            trials: preset.default_trials(),
            seed: 0,
            jobs: None,
            benchmark: false,
            exec: Execution::Serial,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trial count must be at least 1".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Config("methods must not repeat".into()));
        }
        Ok(())
    }

    /// Scenario of one trial. Case presets and files vary only the seed.
    pub fn scenario(&self, trial: usize) -> Result<Scenario> {
        let trial_seed = self.seed.wrapping_add(trial as u64);
        let mut s = match &self.source {
            ScenarioSource::Preset(Preset::Case1) => make_case1(),
            ScenarioSource::Preset(Preset::Case2) => make_case2(),
            ScenarioSource::Preset(Preset::Mc) => mc_trial(self.seed, trial),
            ScenarioSource::File(path) => Scenario::load(path)?,
        };
        s.seed = trial_seed;
        Ok(s)
    }
}

/// Per-step log of one method on one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub step: usize,
    pub position: [usize; 2],
    pub true_goal: usize,
    pub true_alpha: f64,
    pub goal_post: Vec<f64>,
    pub alpha_hat: f64,
    pub prediction_error: f64,
    pub means: Vec<[f64; 2]>,
    pub covs: Vec<[f64; 3]>,
    pub degenerate: bool,
    pub inference_ms: f64,
    pub prediction_ms: f64,
}

impl TraceRecord {
    pub fn metrics(&self) -> StepMetrics {
        StepMetrics {
            step: self.step,
            prediction_error: self.prediction_error,
            true_goal_prob: self.goal_post[self.true_goal],
            alpha_hat: self.alpha_hat,
            alpha_error: (self.alpha_hat - self.true_alpha).abs(),
        }
    }

    pub fn compute_ms(&self) -> f64 {
        self.inference_ms + self.prediction_ms
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub trajectory: Trajectory,
    pub methods: BTreeMap<Variant, Vec<TraceRecord>>,
}

/// Mixes a trial seed, a method and a step into one rollout seed.
pub fn step_seed(trial_seed: u64, variant: Variant, step: usize) -> u64 {
    let mut z = trial_seed
        ^ (variant as u64).wrapping_mul(0xA24B_AED4_963E_E407)
        ^ (step as u64).wrapping_mul(0x9FB2_1C65_1E98_DF25);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Feeds one observation, bridging a gap with the shortest grid path.
pub fn observe(method: &Method, world: &World, b: &Belief, x: Cell) -> Result<Belief> {
    match method.update(world, b, x) {
        Err(Error::ObservationGap { .. }) => {
            let path = world.map.shortest_path(b.last_state, x)?;
            let mut cur = b.clone();
            for &c in &path[1..] {
                cur = method.update(world, &cur, c)?;
            }
            Ok(cur)
        }
        other => other,
    }
}

/// Runs one method over a trajectory, predicting from every position that
/// still has a future.
pub fn run_method(
    world: &World,
    method: &Method,
    traj: &Trajectory,
    predict_cfg: &PredictConfig,
    trial_seed: u64,
) -> Result<Vec<TraceRecord>> {
    let positions: Vec<[f64; 2]> = traj.cells.iter().map(|&c| world.map.position(c)).collect();
    let mut belief = method.init_belief(world, traj.cells[0])?;
    let mut out = Vec::with_capacity(traj.len().saturating_sub(2));
    for k in 1..traj.len().saturating_sub(1) {
        let t0 = Instant::now();
        belief = observe(method, world, &belief, traj.cells[k])?;
        let t1 = Instant::now();
        let pred = predict(world, method, &belief, predict_cfg, step_seed(trial_seed, method.variant(), k))?;
        let t2 = Instant::now();
        let end = (k + 1 + predict_cfg.horizon).min(traj.len());
        let err = prediction_error(&pred, &positions[k + 1..end]).expect("future positions exist");
        out.push(TraceRecord {
            step: k,
            position: traj.cells[k].into(),
            true_goal: traj.goals[k],
            true_alpha: traj.alphas[k],
            goal_post: belief.goal_post().to_vec(),
            alpha_hat: method.alpha_hat_overall(&belief).value(),
            prediction_error: err,
            means: pred.means,
            covs: pred.covs.iter().map(|c| c.to_array()).collect(),
            degenerate: belief.degenerate,
            inference_ms: (t1 - t0).as_secs_f64() * 1e3,
            prediction_ms: (t2 - t1).as_secs_f64() * 1e3,
        });
    }
    Ok(out)
}

fn method_config(s: &Scenario, v: Variant) -> Result<MethodConfig> {
    match s.method_spec(v) {
        Some(spec) => spec.config(),
        None => {
            let fixed = s.methods.first().map_or(10.0, |m| m.fixed_alpha);
            MethodSpec::new(v, fixed).config()
        }
    }
}

/// Generates one trial's ground truth and runs every method on it.
pub fn run_trial(s: &Scenario, methods: &[Variant], trial: usize, exec: Execution) -> Result<TrialResult> {
    let world = s.world()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let trajectory = s.generate_trajectory(&world, &mut rng)?;
    let predict_cfg = PredictConfig { exec, ..s.prediction };
    let mut out = BTreeMap::new();
    for &v in methods {
        let method = Method::new(method_config(s, v)?, world.n_goals())?;
        out.insert(v, run_method(&world, &method, &trajectory, &predict_cfg, s.seed)?);
    }
    Ok(TrialResult {
        trial,
        trajectory,
        methods: out,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub n: usize,
}

impl LatencyStats {
    pub fn from_samples(ms: &[f64]) -> Self {
        let mut v = ms.to_vec();
        v.sort_by(f64::total_cmp);
        let s = aggregate(&v);
        LatencyStats {
            mean_ms: s.mean,
            median_ms: s.median,
            p99_ms: crate::metrics::quantile_sorted(&v, 0.99),
            max_ms: s.max,
            n: v.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseLatency {
    pub inference: LatencyStats,
    pub prediction: LatencyStats,
    pub total: LatencyStats,
}

/// Per-method latency report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyReport {
    pub methods: BTreeMap<String, PhaseLatency>,
}

pub fn latency_report(trials: &[TrialResult]) -> LatencyReport {
    let mut methods = BTreeMap::new();
    if let Some(first) = trials.first() {
        for &v in first.methods.keys() {
            let recs: Vec<&TraceRecord> = trials.iter().flat_map(|t| &t.methods[&v]).collect();
            let inf: Vec<f64> = recs.iter().map(|r| r.inference_ms).collect();
            let pre: Vec<f64> = recs.iter().map(|r| r.prediction_ms).collect();
            let tot: Vec<f64> = recs.iter().map(|r| r.compute_ms()).collect();
            methods.insert(
                v.to_string(),
                PhaseLatency {
                    inference: LatencyStats::from_samples(&inf),
                    prediction: LatencyStats::from_samples(&pre),
                    total: LatencyStats::from_samples(&tot),
                },
            );
        }
    }
    LatencyReport { methods }
}

/// Times the inference and prediction phases over `steps` observations of a
/// fixed-seed trajectory, with the given rollout schedule.
pub fn bench(
    world: &World,
    cfg: &MethodConfig,
    traj: &Trajectory,
    predict_cfg: &PredictConfig,
    seed: u64,
) -> Result<PhaseLatency> {
    let method = Method::new(cfg.clone(), world.n_goals())?;
    let recs = run_method(world, &method, traj, predict_cfg, seed)?;
    let inf: Vec<f64> = recs.iter().map(|r| r.inference_ms).collect();
    let pre: Vec<f64> = recs.iter().map(|r| r.prediction_ms).collect();
    let tot: Vec<f64> = recs.iter().map(|r| r.compute_ms()).collect();
    Ok(PhaseLatency {
        inference: LatencyStats::from_samples(&inf),
        prediction: LatencyStats::from_samples(&pre),
        total: LatencyStats::from_samples(&tot),
    })
}

/// Pooled per-method series of one index.
pub fn pooled(trials: &[TrialResult], v: Variant, f: impl Fn(&TraceRecord) -> f64) -> Vec<f64> {
    trials.iter().flat_map(|t| t.methods[&v].iter().map(&f)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexComparison {
    pub methods: Vec<String>,
    pub summaries: Vec<Summary>,
    pub test: Option<TestReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub trials: usize,
    pub prediction_error: IndexComparison,
    pub true_goal_prob: IndexComparison,
    pub alpha_error: IndexComparison,
}

fn comparison(trials: &[TrialResult], methods: &[Variant], f: impl Fn(&TraceRecord) -> f64 + Copy) -> Result<IndexComparison> {
    let series: Vec<Vec<f64>> = methods.iter().map(|&v| pooled(trials, v, f)).collect();
    let summaries = series.iter().map(|s| aggregate(s)).collect();
    let test = if methods.len() >= 2 && series.iter().all(|s| !s.is_empty()) {
        let groups: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
        Some(compare(&groups, Adjustment::None)?)
    } else {
        None
    };
    Ok(IndexComparison {
        methods: methods.iter().map(|v| v.to_string()).collect(),
        summaries,
        test,
    })
}

pub fn summarize(trials: &[TrialResult], methods: &[Variant]) -> Result<RunSummary> {
    Ok(RunSummary {
        trials: trials.len(),
        prediction_error: comparison(trials, methods, |r| r.prediction_error)?,
        true_goal_prob: comparison(trials, methods, |r| r.goal_post[r.true_goal])?,
        alpha_error: comparison(trials, methods, |r| (r.alpha_hat - r.true_alpha).abs())?,
    })
}

#[derive(Debug)]
pub struct RunOutput {
    pub trials: Vec<TrialResult>,
    pub summary: RunSummary,
    pub latency: Option<LatencyReport>,
    pub artifacts: Vec<PathBuf>,
}

/// Executes a plan: trials in parallel, methods sequentially per trial.
pub fn run(plan: &RunPlan) -> Result<RunOutput> {
    plan.validate()?;
    let scenarios = (0..plan.trials).map(|t| plan.scenario(t)).collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &plan.out_dir {
        fs::create_dir_all(dir)?;
    }
    let trial_exec = if plan.benchmark { Execution::Serial } else { Execution::Parallel };
    let trials = parallel::with_jobs(plan.jobs, || {
        parallel::map_indexed(trial_exec, scenarios.len(), |t| run_trial(&scenarios[t], &plan.methods, t, plan.exec))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&trials, &plan.methods)?;
    let latency = plan.benchmark.then(|| latency_report(&trials));
    let mut artifacts = Vec::new();
    if let Some(dir) = &plan.out_dir {
        artifacts = write_artifacts(dir, &trials, &summary, latency.as_ref(), &plan.methods)?;
    }
    Ok(RunOutput {
        trials,
        summary,
        latency,
        artifacts,
    })
}

const METRIC_HEADER: [&str; 11] = [
    "trial",
    "step",
    "x",
    "y",
    "true_goal",
    "true_alpha",
    "prediction_error",
    "true_goal_prob",
    "alpha_hat",
    "alpha_error",
    "degenerate",
];

pub fn write_artifacts(
    dir: &Path,
    trials: &[TrialResult],
    summary: &RunSummary,
    latency: Option<&LatencyReport>,
    methods: &[Variant],
) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for &v in methods {
        let path = dir.join(format!("metrics_{v}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(METRIC_HEADER)?;
        for t in trials {
            for r in &t.methods[&v] {
                let m = r.metrics();
                w.write_record([
                    t.trial.to_string(),
                    r.step.to_string(),
                    r.position[0].to_string(),
                    r.position[1].to_string(),
                    r.true_goal.to_string(),
                    r.true_alpha.to_string(),
                    m.prediction_error.to_string(),
                    m.true_goal_prob.to_string(),
                    m.alpha_hat.to_string(),
                    m.alpha_error.to_string(),
                    (r.degenerate as u8).to_string(),
                ])?;
            }
        }
        w.flush()?;
        paths.push(path);
    }

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["index", "method", "n", "mean", "std_pop", "median", "q1", "q3", "min", "max"])?;
    for (name, cmp) in [
        ("prediction_error", &summary.prediction_error),
        ("true_goal_prob", &summary.true_goal_prob),
        ("alpha_error", &summary.alpha_error),
    ] {
        for (m, s) in cmp.methods.iter().zip(&cmp.summaries) {
            w.write_record([
                name.to_string(),
                m.clone(),
                s.n.to_string(),
                s.mean.to_string(),
                s.std.to_string(),
                s.median.to_string(),
                s.q1.to_string(),
                s.q3.to_string(),
                s.min.to_string(),
                s.max.to_string(),
            ])?;
        }
    }
    w.flush()?;
    paths.push(path);

    let path = dir.join("stats.json");
    fs::write(&path, serde_json::to_string_pretty(summary)?)?;
    paths.push(path);

    if let Some(lat) = latency {
        let path = dir.join("timing.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["trial", "method", "step", "inference_ms", "prediction_ms", "total_ms"])?;
        for t in trials {
            for (v, recs) in &t.methods {
                for r in recs {
                    w.write_record([
                        t.trial.to_string(),
                        v.to_string(),
                        r.step.to_string(),
                        format!("{:.4}", r.inference_ms),
                        format!("{:.4}", r.prediction_ms),
                        format!("{:.4}", r.compute_ms()),
                    ])?;
                }
            }
        }
        w.flush()?;
        paths.push(path);
        let path = dir.join("bench.json");
        fs::write(&path, serde_json::to_string_pretty(lat)?)?;
        paths.push(path);
    }
    Ok(paths)
}
