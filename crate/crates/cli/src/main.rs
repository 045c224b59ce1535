use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use blocksplit::harness::check::run_checks;
use blocksplit::harness::report::{render_table, summarize_dir};
use blocksplit::harness::{run_experiment, ExperimentConfig, MethodName};
use blocksplit::problems::{gen_quadratic, ProblemArchive, QuadraticSpec};

/// Benchmark harness for block-structured accelerated first-order methods.
#[derive(Parser)]
#[command(name = "blocksplit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run(RunArgs),
    /// Generate a quadratic problem archive from a generator spec.
    Generate(GenerateArgs),
    /// Run the invariant-check suites.
    Check {
        /// Suite name (all suites when omitted).
        suite: Option<String>,
    },
    /// Summarize the trace CSVs of an experiment directory.
    Report {
        /// Directory written by `run`.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config (JSON).
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the stopping gap target.
    #[arg(long)]
    eps: Option<f64>,
    /// Replace the seed list of every randomized method.
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict to a comma-separated subset of methods.
    #[arg(long)]
    methods: Option<String>,
    /// Override the trace sampling stride.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Path to a quadratic generator spec (JSON).
    spec: PathBuf,
    /// Output path for the problem archive.
    #[arg(short, long)]
    out: PathBuf,
    /// Override the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn cmd_run(args: RunArgs) -> Result<bool> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read config {:?}", args.config))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(out) = args.out {
        config.output_dir = out.to_string_lossy().into_owned();
    }
    if let Some(eps) = args.eps {
        config.stopping.eps = Some(eps);
    }
    if let Some(stride) = args.stride {
        config.stride = stride;
    }
    if let Some(seed) = args.seed {
        for m in &mut config.methods {
            if m.method.is_randomized() {
                m.seeds = Some(vec![seed]);
            }
        }
    }
    if let Some(methods) = args.methods {
        let wanted: Vec<MethodName> = methods
            .split(',')
            .map(|s| {
                MethodName::parse(s.trim())
                    .with_context(|| format!("unknown method {s:?}"))
            })
            .collect::<Result<_>>()?;
        config.methods.retain(|m| wanted.contains(&m.method));
        if config.methods.is_empty() {
            bail!("--methods selected none of the configured methods");
        }
    }
    let summary = run_experiment(&config)?;
    for run in &summary.metadata.runs {
        match &run.error {
            None => println!(
                "{:<14} seed {:<6} iters {:>8} grad_x {:>8} grad_y {:>9} f_gap {:.3e}",
                run.method,
                run.seed.map_or_else(|| "-".into(), |s| s.to_string()),
                run.outer_iters,
                run.grad_x_calls,
                run.grad_y_calls,
                run.final_f_gap
            ),
            Some(e) => println!("{:<14} FAILED: {e}", run.method),
        }
    }
    println!("wrote {:?}", summary.output_dir.join("metadata.json"));
    Ok(summary.all_ok())
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec)
        .with_context(|| format!("cannot read spec {:?}", args.spec))?;
    let mut spec: QuadraticSpec = serde_json::from_str(&text).context("invalid quadratic spec")?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let problem = gen_quadratic(&spec)?;
    let archive = ProblemArchive::Quadratic(problem.to_archive(Some(spec.seed), Some(spec.coupling_rho)));
    fs::write(&args.out, serde_json::to_string_pretty(&archive)?)
        .with_context(|| format!("cannot write {:?}", args.out))?;
    println!(
        "wrote quadratic archive ({} x {}) to {:?}",
        spec.d_x + spec.d_y,
        spec.d_x + spec.d_y,
        args.out
    );
    Ok(())
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let ok = match cli.command {
        Command::Run(args) => cmd_run(args)?,
        Command::Generate(args) => {
            cmd_generate(args)?;
            true
        }
        Command::Check { suite } => {
            let report = run_checks(suite.as_deref())?;
            print!("{}", report.render());
            let json_path = PathBuf::from("check_report.json");
            fs::write(&json_path, report.to_json())
                .with_context(|| format!("cannot write {json_path:?}"))?;
            println!("wrote {json_path:?}");
            report.passed()
        }
        Command::Report { dir } => {
            let summaries = summarize_dir(&dir)?;
            print!("{}", render_table(&summaries));
            true
        }
    };
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
