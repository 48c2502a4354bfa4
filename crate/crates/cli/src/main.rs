use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use dissynth::admm::{self, AdmmConfig, Mode};
use dissynth::generate::{example1, example2, Example2Params};
use dissynth::io::{write_result, write_trace_file, ProblemFile};
use dissynth::synthesis::{synthesize_with_mode, SynthesisStatus};
use dissynth::Error;

/// Distributed structured state-feedback synthesis for interconnected LTI systems.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run ADMM synthesis on a problem file, recover and verify the gains.
    Solve(SolveArgs),
    /// Write a random ensemble problem (unstable, controllable subsystems).
    GenExample2(GenArgs),
    /// Write the built-in three-subsystem example.
    Example1 {
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run standard and accelerated ADMM from the same start and export both traces.
    Compare(CompareArgs),
}

#[derive(Args)]
struct Tuning {
    /// Synthesis mode; defaults to the mode stored in the problem file.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Margin of the strict inequalities.
    #[arg(long)]
    margin: Option<f64>,
    /// Run the local steps on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(long)]
    accel: bool,
    #[arg(long)]
    restart: bool,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Tolerance on both residuals.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// CSV residual trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// JSON result with gains, certificates and the verification report.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    states: usize,
    #[arg(long, default_value_t = 2)]
    inputs: usize,
    #[arg(long, default_value_t = 2)]
    outputs: usize,
    #[arg(long, default_value_t = 0.05)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Directory receiving standard.csv and accelerated.csv.
    #[arg(short, long)]
    out: PathBuf,
}

mod exit {
    pub const USAGE: u8 = 1;
    pub const VERIFICATION_FAILED: u8 = 2;
    pub const NOT_CONVERGED: u8 = 3;
    pub const INFEASIBLE: u8 = 4;
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which would read as a verification failure
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Solve(args) => solve(args),
        Command::GenExample2(args) => gen_example2(args),
        Command::Example1 { out } => ProblemFile::new(example1(), Some(Mode::Hinf))
            .write(&out)
            .with_context(|| format!("writing {}", out.display()))
            .map(|_| 0),
        Command::Compare(args) => compare(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<Error>() {
                Some(Error::ResampleExhausted { .. }) => exit::NOT_CONVERGED,
                _ => exit::USAGE,
            };
            ExitCode::from(code)
        }
    }
}

fn config(tuning: &Tuning, file_mode: Option<Mode>) -> anyhow::Result<admm::AdmmConfigBuilder> {
    let Some(mode) = tuning.mode.or(file_mode) else {
        bail!("no --mode given and the problem file does not name one");
    };
    let mut b = AdmmConfig::builder(mode).parallel(!tuning.sequential);
    if let Some(mu) = tuning.mu {
        b = b.mu(mu);
        // keep rho <= mu unless rho is given explicitly
        b = b.rho(tuning.rho.unwrap_or(mu.min(AdmmConfig::DEFAULT_MU)));
    }
    if let Some(rho) = tuning.rho {
        b = b.rho(rho);
    }
    if let Some(m) = tuning.margin {
        b = b.margin(m);
    }
    Ok(b)
}

fn read_problem(path: &PathBuf) -> anyhow::Result<ProblemFile> {
    ProblemFile::read(path).with_context(|| format!("reading {}", path.display()))
}

fn solve(args: SolveArgs) -> anyhow::Result<u8> {
    let file = read_problem(&args.input)?;
    let cfg = config(&args.tuning, file.mode)?
        .accelerated(args.accel)
        .restart(args.restart)
        .max_iter(args.max_iter)
        .tol(args.tol)
        .build()?;
    let result = synthesize_with_mode(&file.problem, &cfg)?;
    if let Some(path) = &args.trace {
        write_trace_file(&result.trace, path).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.out {
        write_result(&result, path).with_context(|| format!("writing {}", path.display()))?;
    }

    let eta = result.eta.map_or_else(|| "-".to_string(), |e| format!("{e:.6e}"));
    println!("status {} ({}) after {} iterations, eta {eta}", result.status, result.admm_status, result.iterations);
    if let Some(report) = &result.report {
        for f in report.failures() {
            println!("  failed: {f}");
        }
    }
    Ok(match result.status {
        SynthesisStatus::Verified => 0,
        SynthesisStatus::VerificationFailed => exit::VERIFICATION_FAILED,
        SynthesisStatus::NotConverged => exit::NOT_CONVERGED,
        SynthesisStatus::Infeasible => exit::INFEASIBLE,
    })
}

fn gen_example2(args: GenArgs) -> anyhow::Result<u8> {
    let params = Example2Params {
        subsystems: args.n,
        states: args.states,
        inputs: args.inputs,
        outputs: args.outputs,
        density: args.density,
        seed: args.seed,
        ..Example2Params::default()
    };
    let p = example2(&params)?;
    ProblemFile::new(p, Some(Mode::Hinf)).write(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(0)
}

fn compare(args: CompareArgs) -> anyhow::Result<u8> {
    let file = read_problem(&args.input)?;
    let base = config(&args.tuning, file.mode)?.max_iter(args.max_iter).tol(args.tol);
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut code = 0;
    for (name, accelerated) in [("standard", false), ("accelerated", true)] {
        let cfg = base.clone().accelerated(accelerated).build()?;
        let out = admm::run(&file.problem, &cfg)?;
        let path = args.out.join(format!("{name}.csv"));
        write_trace_file(&out.trace, &path).with_context(|| format!("writing {}", path.display()))?;
        let reached = out.trace.iterations_to(args.tol).map_or_else(|| "not reached".to_string(), |k| k.to_string());
        println!("{name}: iterations to {:.0e}: {reached} ({})", args.tol, out.status);
        if matches!(out.status, admm::AdmmStatus::Infeasible { .. }) {
            code = exit::INFEASIBLE;
        }
    }
    Ok(code)
}
