mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use intent_core::inference::Variant;
use intent_core::runner::{self, Preset, RunPlan, ScenarioSource};
use intent_core::Error;

#[derive(Parser)]
#[command(name = "intent", version, about = "Goal inference and trajectory forecasting on grid maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch study and write metric tables.
    Run(RunArgs),
    /// Serve live steering sessions over a websocket.
    Serve(serve::ServeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario: case1, case2 or mc.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    preset: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Comma-separated methods.
    #[arg(long, default_value = "B,A,G,P")]
    methods: String,
    /// Number of trials (defaults: 1 for case studies and files, 500 for mc).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also record per-step timings (timing.csv, bench.json).
    #[arg(long)]
    benchmark: bool,
    /// Worker threads for trials.
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_methods(list: &str) -> Result<Vec<Variant>, Error> {
    list.split(',').map(|s| s.trim().parse()).collect()
}

fn plan(args: &RunArgs) -> Result<RunPlan, Error> {
    let (source, default_trials) = match (&args.preset, &args.scenario) {
        (Some(p), _) => {
            let preset: Preset = p.parse()?;
            (ScenarioSource::Preset(preset), preset.default_trials())
        }
        (None, Some(path)) => (ScenarioSource::File(path.clone()), 1),
        (None, None) => return Err(Error::Config("either --preset or --scenario is required".into())),
    };
    if args.jobs == Some(0) {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    Ok(RunPlan {
        source,
        methods: parse_methods(&args.methods)?,
        out_dir: Some(args.out.clone()),
        trials: args.trials.unwrap_or(default_trials),
        seed: args.seed,
        jobs: args.jobs,
        benchmark: args.benchmark,
        exec: intent_core::Execution::Serial,
    })
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let plan = plan(&args)?;
    let out = runner::run(&plan)?;
    let s = &out.summary;
    println!("{} trial(s), {} method(s)", s.trials, plan.methods.len());
    println!("{:<8}{:>18}{:>18}{:>18}", "method", "prediction_error", "true_goal_prob", "alpha_error");
    for (i, name) in s.prediction_error.methods.iter().enumerate() {
        println!(
            "{:<8}{:>18.4}{:>18.4}{:>18.4}",
            name, s.prediction_error.summaries[i].mean, s.true_goal_prob.summaries[i].mean, s.alpha_error.summaries[i].mean
        );
    }
    if let Some(t) = &s.prediction_error.test {
        println!("Kruskal-Wallis prediction_error: H = {:.3}, p = {:.3e}", t.h_statistic, t.p_omnibus);
    }
    if let Some(t) = &s.true_goal_prob.test {
        println!("Kruskal-Wallis true_goal_prob:   H = {:.3}, p = {:.3e}", t.h_statistic, t.p_omnibus);
    }
    if let Some(lat) = &out.latency {
        for (name, p) in &lat.methods {
            println!("{name}: mean {:.3} ms/step, p99 {:.3} ms", p.total.mean_ms, p.total.p99_ms);
        }
    }
    for path in &out.artifacts {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io(_) | Error::Csv(_)) => 3,
        Some(
            Error::Config(_)
            | Error::Json(_)
            | Error::Input(_)
            | Error::OutOfBounds { .. }
            | Error::Blocked { .. }
            | Error::Model(_),
        ) => 2,
        Some(_) => 1,
        None if err.downcast_ref::<std::io::Error>().is_some() => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Serve(args) => serve::serve(args).context("server failed"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
