//! `smooco`: generate traffic, run experiments and sweeps, check the regret
//! bounds, and redraw plots.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 partial failure (some
//! trial failed or a bound check was violated), 4 numerical error.

mod manifest;
mod plot;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use smooco_core::bench::{run_experiment, sweep_windows, write_sweep_csv, Algorithm, ExperimentConfig};
use smooco_core::solve::{PlanSolver, SubproblemStrategy, DEFAULT_DP_STATE_LIMIT};
use smooco_core::traffic::{generate_traffic, write_traffic_csv};
use smooco_core::verify::{run_suite, write_report, Suite, VerifyOptions};

use manifest::{load_config, ConfigError, RunManifest};

#[derive(Parser)]
#[command(name = "smooco", version, about = "Smoothed online topic-to-server assignment with imperfect predictions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic traffic of trial 0 as CSV.
    Generate {
        #[command(flatten)]
        common: ConfigArgs,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every configured algorithm on every trial.
    Run {
        #[command(flatten)]
        common: ConfigArgs,
        #[command(flatten)]
        exec: ExecArgs,
        /// Comma-separated algorithm names.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<Algorithm>>,
        #[arg(long)]
        trials: Option<usize>,
        /// Number of online steps.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Fixed-window planning for several window sizes and solvers.
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        #[command(flatten)]
        exec: ExecArgs,
        /// Comma-separated window sizes.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
        sizes: Vec<usize>,
        /// Comma-separated solvers: iterative, iterative-local, exact.
        /// Defaults to the configured solver.
        #[arg(long, value_delimiter = ',')]
        solvers: Option<Vec<String>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Empirical checks of the regret bounds.
    Verify {
        /// thm1, thm2, fixed-point, rates or lower-bound.
        suite: String,
        /// Report CSV; printed to stdout only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the suite's instance count.
        #[arg(long)]
        instances: Option<usize>,
        /// Uncertainty exponent on the forecast offset (rates suite).
        #[arg(long, requires = "b")]
        a: Option<f64>,
        /// Uncertainty exponent on time (rates suite).
        #[arg(long, requires = "a")]
        b: Option<f64>,
    },
    /// Redraw plots from existing `steps.csv` and `sweep.csv` files.
    Plot {
        /// Directory holding the CSV outputs.
        #[arg(long)]
        input: PathBuf,
        /// Directory for the images; defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config or a manifest written by a previous run.
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExecArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "SMOOCO_WORKERS")]
    workers: Option<usize>,
    /// Also write SVG charts.
    #[arg(long)]
    plots: bool,
}

impl ExecArgs {
    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

fn resolve(common: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut config = load_config(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn revalidate(config: &ExperimentConfig) -> Result<()> {
    config.validate().map_err(|e| ConfigError(format!("invalid config: {e}")))?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn parse_solver(name: &str, config: &ExperimentConfig) -> Result<PlanSolver> {
    Ok(match name {
        "iterative" => match config.solver {
            solver @ PlanSolver::Iterative { .. } => solver,
            PlanSolver::Exact { .. } => PlanSolver::default(),
        },
        "iterative-local" => match PlanSolver::default() {
            PlanSolver::Iterative { passes, relax_c, .. } => PlanSolver::Iterative {
                passes,
                relax_c,
                strategy: SubproblemStrategy::Local { restarts: 5 },
            },
            exact => exact,
        },
        "exact" => PlanSolver::Exact {
            state_limit: DEFAULT_DP_STATE_LIMIT,
        },
        other => {
            return Err(ConfigError(format!("unknown solver `{other}` (valid: iterative, iterative-local, exact)")).into())
        }
    })
}

fn cmd_generate(common: ConfigArgs, out: PathBuf) -> Result<ExitCode> {
    let config = resolve(&common)?;
    let series = generate_traffic(&config.traffic_config(0))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        out_dir(parent)?;
    }
    write_traffic_csv(&series, create(&out)?)?;
    let mut manifest = RunManifest::new("generate", config.seed, Some(config));
    manifest.output(&out);
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    manifest.write(dir)?;
    eprintln!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(
    common: ConfigArgs,
    exec: ExecArgs,
    algorithms: Option<Vec<Algorithm>>,
    trials: Option<usize>,
    steps: Option<usize>,
) -> Result<ExitCode> {
    let mut config = resolve(&common)?;
    if let Some(a) = algorithms {
        config.algorithms = a;
    }
    if let Some(t) = trials {
        config.trials = t;
    }
    if let Some(s) = steps {
        config.online_steps = s;
    }
    revalidate(&config)?;
    out_dir(&exec.out)?;
    let result = run_experiment(&config, exec.workers())?;
    let mut manifest = RunManifest::new("run", config.seed, Some(config));
    let steps_path = exec.out.join("steps.csv");
    result.write_steps_csv(create(&steps_path)?)?;
    manifest.output(&steps_path);
    let summary_path = exec.out.join("summary.csv");
    result.write_summary_csv(create(&summary_path)?)?;
    manifest.output(&summary_path);
    if exec.plots {
        for p in plot::plot_steps(&steps_path, &exec.out)? {
            manifest.output(&p);
        }
    }
    manifest.write(&exec.out)?;
    for (alg, regret) in result.mean_final_regret() {
        println!("{alg:>12}  mean final regret {regret:.3}");
    }
    let failures = result.failure_messages();
    for (trial, alg, msg) in &failures {
        eprintln!("trial {trial} {alg} failed: {msg}");
    }
    Ok(if failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn cmd_sweep(
    common: ConfigArgs,
    exec: ExecArgs,
    sizes: Vec<usize>,
    solvers: Option<Vec<String>>,
    trials: Option<usize>,
    steps: Option<usize>,
) -> Result<ExitCode> {
    let mut config = resolve(&common)?;
    if let Some(t) = trials {
        config.trials = t;
    }
    if let Some(s) = steps {
        config.online_steps = s;
    }
    revalidate(&config)?;
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = sizes.iter().find(|s| !seen.insert(**s)) {
        return Err(ConfigError(format!("duplicate window size {dup}")).into());
    }
    if sizes.contains(&0) {
        return Err(ConfigError("window sizes must be at least 1".into()).into());
    }
    let names = solvers.unwrap_or_else(|| vec![config.solver.tag()]);
    let plan_solvers = names
        .iter()
        .map(|n| if *n == config.solver.tag() { Ok(config.solver) } else { parse_solver(n, &config) })
        .collect::<Result<Vec<_>>>()?;
    out_dir(&exec.out)?;
    let rows = sweep_windows(&config, &sizes, &plan_solvers, exec.workers())?;
    let mut manifest = RunManifest::new("sweep", config.seed, Some(config));
    manifest.manifest.sizes = Some(sizes);
    manifest.manifest.solvers = Some(names);
    let path = exec.out.join("sweep.csv");
    write_sweep_csv(&rows, create(&path)?)?;
    manifest.output(&path);
    if exec.plots {
        for p in plot::plot_sweep(&path, &exec.out)? {
            manifest.output(&p);
        }
    }
    manifest.write(&exec.out)?;
    for r in &rows {
        println!(
            "{:>24} S={:<3} regret {:>10.3} ± {:<8.3} {:.4}s/window",
            r.solver, r.window_size, r.mean_regret, r.std_regret, r.mean_window_solve_time
        );
    }
    let failed = rows.iter().any(|r| r.failures > 0);
    Ok(if failed { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn cmd_verify(
    suite: String,
    out: Option<PathBuf>,
    seed: u64,
    instances: Option<usize>,
    exponents: Option<(f64, f64)>,
) -> Result<ExitCode> {
    let suite: Suite = suite.parse().map_err(|e: smooco_core::Error| ConfigError(e.to_string()))?;
    let options = VerifyOptions {
        seed,
        instances,
        exponents,
    };
    let rows = run_suite(suite, &options)?;
    write_report(&rows, std::io::stdout().lock())?;
    if let Some(out) = out {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            out_dir(parent)?;
        }
        write_report(&rows, create(&out)?)?;
        let mut manifest = RunManifest::new("verify", seed, None);
        manifest.manifest.suite = Some(suite.to_string());
        manifest.output(&out);
        manifest.write(out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")))?;
    }
    Ok(if rows.iter().all(|r| r.passed()) { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn cmd_plot(input: PathBuf, out: Option<PathBuf>) -> Result<ExitCode> {
    let out = out.unwrap_or_else(|| input.clone());
    out_dir(&out)?;
    let mut written = Vec::new();
    let steps = input.join("steps.csv");
    if steps.exists() {
        written.extend(plot::plot_steps(&steps, &out)?);
    }
    let sweep = input.join("sweep.csv");
    if sweep.exists() {
        written.extend(plot::plot_sweep(&sweep, &out)?);
    }
    if written.is_empty() {
        return Err(ConfigError(format!("no steps.csv or sweep.csv in {}", input.display())).into());
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<smooco_core::Error>() {
        Some(smooco_core::Error::Numerical(_)) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate { common, out } => cmd_generate(common, out),
        Command::Run {
            common,
            exec,
            algorithms,
            trials,
            steps,
        } => cmd_run(common, exec, algorithms, trials, steps),
        Command::Sweep {
            common,
            exec,
            sizes,
            solvers,
            trials,
            steps,
        } => cmd_sweep(common, exec, sizes, solvers, trials, steps),
        Command::Verify {
            suite,
            out,
            seed,
            instances,
            a,
            b,
        } => cmd_verify(suite, out, seed, instances, a.zip(b)),
        Command::Plot { input, out } => cmd_plot(input, out),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
