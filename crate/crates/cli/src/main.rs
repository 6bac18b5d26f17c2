//! Command-line surface over the experiment harness.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use greenwave_core::env::Trajectory;
use greenwave_core::fluid::{sweep_point, write_sweep_csv, FluidParams};
use greenwave_core::harness::{
    compare, detect_greenwave, run_experiment, solve_mdp_experiment, train_ddpg_experiment,
    train_dqn_experiment, write_json_lines, write_metrics_json, ExperimentConfig, HarnessError,
};
use greenwave_core::mdp::write_tables;

#[derive(Parser)]
#[command(name = "greenwave", version, about = "Traffic-light control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured policy and export metrics and the trajectory
    Simulate(RunArgs),
    /// Evaluate a configured policy (checkpoints welcome); same artifacts
    Eval(RunArgs),
    /// Solve the truncated single-intersection control problem exactly
    SolveMdp(RunArgs),
    /// Train DQN on the single intersection
    TrainDqn(RunArgs),
    /// Train DDPG on an avenue or grid scenario
    TrainDdpg(RunArgs),
    /// Check the fluid closed forms against the exact fluid simulator
    AnalyzeFluid(RunArgs),
    /// Detect greenwave structure in an exported trajectory CSV
    DetectGreenwave(DetectArgs),
    /// Paired-seed comparison of two configurations
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Replaces experiment.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dotted-path config override, repeatable (e.g. arrivals.avenue=0.5)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct DetectArgs {
    /// Trajectory CSV produced by simulate/eval
    #[arg(long)]
    trajectory: PathBuf,
    /// Cross streets per avenue row (defaults to all intersections in one
    /// row)
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long, default_value_t = 50)]
    window: usize,
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
    #[arg(long, default_value_t = 10)]
    max_lag: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Configuration of policy A
    #[arg(long)]
    config: PathBuf,
    /// Configuration of policy B (must share the experiment section)
    #[arg(long)]
    config_b: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Applied to both configurations
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate(args) | Command::Eval(args) => simulate(args),
        Command::SolveMdp(args) => solve_mdp(args),
        Command::TrainDqn(args) => train_dqn(args),
        Command::TrainDdpg(args) => train_ddpg(args),
        Command::AnalyzeFluid(args) => analyze_fluid(args),
        Command::DetectGreenwave(args) => detect(args),
        Command::Compare(args) => run_compare(args),
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("experiment.seed={seed}"));
    }
    ExperimentConfig::from_path(&args.config, &overrides)
}

fn ensure_dir(path: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    traj.write_csv(std::io::BufWriter::new(file))
        .map_err(HarnessError::from)
}

fn simulate(args: RunArgs) -> Result<(), HarnessError> {
    let cfg = load_config(&args)?;
    ensure_dir(&args.out)?;
    let (metrics, traj) = run_experiment(&cfg)?;
    write_metrics_json(&metrics, args.out.join("metrics.json"))?;
    write_trajectory(&traj, &args.out.join("trajectory.csv"))?;
    println!(
        "{} / {}: avg queue {:.4}, discounted cost {:.4}",
        metrics.scenario, metrics.policy, metrics.avg_queue_len, metrics.discounted_cost
    );
    if let Some(s) = metrics.synchrony_index {
        println!("synchrony index {s:.4}");
    }
    Ok(())
}

fn solve_mdp(args: RunArgs) -> Result<(), HarnessError> {
    let cfg = load_config(&args)?;
    ensure_dir(&args.out)?;
    let (model, solved, curve) = solve_mdp_experiment(&cfg)?;
    let table_path = args.out.join("policy_value.csv");
    let file = std::fs::File::create(&table_path)?;
    write_tables(
        &model.space(),
        &solved.policy,
        &solved.values,
        std::io::BufWriter::new(file),
    )?;
    let residual = greenwave_core::mdp::bellman_residual(&model, &solved.values, solved.gamma);
    let summary = serde_json::json!({
        "states": model.len(),
        "x_max": cfg.mdp.x_max,
        "gamma": solved.gamma,
        "evaluation_sweeps": solved.sweeps,
        "bellman_residual": residual,
        "threshold_upward_closed": curve.upward_closed,
        "switch_thresholds_phase0": curve.thresholds,
    });
    write_metrics_json(&summary, args.out.join("mdp_summary.json"))?;
    println!(
        "solved {} states, residual {residual:.3e}, thresholding structure: {}",
        model.len(),
        curve.upward_closed
    );
    Ok(())
}

fn train_dqn(args: RunArgs) -> Result<(), HarnessError> {
    let cfg = load_config(&args)?;
    ensure_dir(&args.out)?;
    ensure_dir(&args.out.join("ckpt"))?;
    let (agent, logs, metrics, traj) = train_dqn_experiment(&cfg)?;
    agent
        .q
        .save_to_path(args.out.join("ckpt").join("dqn_q.gwnn"))
        .map_err(HarnessError::from)?;
    write_json_lines(&logs, args.out.join("training_log.jsonl"))?;
    write_metrics_json(&metrics, args.out.join("metrics.json"))?;
    write_trajectory(&traj, &args.out.join("trajectory.csv"))?;
    println!(
        "trained {} episodes; eval avg queue {:.4}, discounted cost {:.4}",
        logs.len(),
        metrics.avg_queue_len,
        metrics.discounted_cost
    );
    Ok(())
}

fn train_ddpg(args: RunArgs) -> Result<(), HarnessError> {
    let cfg = load_config(&args)?;
    ensure_dir(&args.out)?;
    ensure_dir(&args.out.join("ckpt"))?;
    let (agent, logs, metrics, traj) = train_ddpg_experiment(&cfg)?;
    agent
        .actor
        .save_to_path(args.out.join("ckpt").join("ddpg_actor.gwnn"))
        .map_err(HarnessError::from)?;
    agent
        .critic
        .save_to_path(args.out.join("ckpt").join("ddpg_critic.gwnn"))
        .map_err(HarnessError::from)?;
    write_json_lines(&logs, args.out.join("training_log.jsonl"))?;
    write_metrics_json(&metrics, args.out.join("metrics.json"))?;
    write_trajectory(&traj, &args.out.join("trajectory.csv"))?;
    let gw = metrics
        .greenwave
        .as_ref()
        .map(|g| g.flag)
        .unwrap_or(false);
    println!(
        "trained {} episodes; eval avg queue {:.4}, synchrony {:.3}, greenwave {}",
        logs.len(),
        metrics.avg_queue_len,
        metrics.synchrony_index.unwrap_or(0.0),
        gw
    );
    Ok(())
}

fn analyze_fluid(args: RunArgs) -> Result<(), HarnessError> {
    let cfg = load_config(&args)?;
    ensure_dir(&args.out)?;
    let f = &cfg.fluid;
    let params = FluidParams::uniform(f.lambda0, f.lambda1, f.nodes, f.yellow, f.orange)?;
    let mut rows = Vec::new();
    for &delta in &f.deltas {
        let row = sweep_point(&params, delta, f.cycles)?;
        println!(
            "delta {:.4}: phi1 closed {:.6} sim {:.6}, psi err {:.2e}, gap {:.4e}",
            delta, row.phi1_closed, row.phi1_sim, row.psi_sim_max_err, row.phi1_gap
        );
        rows.push(row);
    }
    let file = std::fs::File::create(args.out.join("fluid_sweep.csv"))?;
    write_sweep_csv(&rows, std::io::BufWriter::new(file))?;
    Ok(())
}

fn detect(args: DetectArgs) -> Result<(), HarnessError> {
    let file = std::fs::File::open(&args.trajectory)?;
    let traj = Trajectory::read_csv(std::io::BufReader::new(file)).map_err(HarnessError::from)?;
    let cols = args.cols.unwrap_or_else(|| traj.intersections());
    if cols == 0 || traj.intersections() % cols != 0 {
        return Err(HarnessError::Config(format!(
            "{} intersections do not split into rows of {cols}",
            traj.intersections()
        )));
    }
    let window = args.window.min(traj.states().len());
    let report = detect_greenwave(&traj, cols, window, args.threshold, args.max_lag);
    ensure_dir(&args.out)?;
    write_metrics_json(&report, args.out.join("greenwave.json"))?;
    println!(
        "greenwave {} (best window synchrony {:.3} at t={}), lags {:?}",
        report.flag, report.best_window_synchrony, report.best_window_start, report.onset_lags
    );
    Ok(())
}

fn run_compare(args: CompareArgs) -> Result<(), HarnessError> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("experiment.seed={seed}"));
    }
    let cfg_a = ExperimentConfig::from_path(&args.config, &overrides)?;
    let cfg_b = ExperimentConfig::from_path(&args.config_b, &overrides)?;
    ensure_dir(&args.out)?;
    let report = compare(&cfg_a, &cfg_b)?;
    write_metrics_json(&report, args.out.join("compare.json"))?;
    println!(
        "A = {} (cost {:.4}), B = {} (cost {:.4}), paired delta {:.4}, A not worse in {}/{} episodes",
        report.a.policy,
        report.a.discounted_cost,
        report.b.policy,
        report.b.discounted_cost,
        report.paired_cost_delta,
        report.episodes_a_not_worse,
        report.a.episodes
    );
    Ok(())
}
