use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dopo_core::config::{parse_config_with, preset_document, ConfigError};
use dopo_core::convergence::{ou_weak_convergence, OuProblem, DEFAULT_STEP_SIZES};
use dopo_core::experiment::{run_experiment, ExperimentError, ExperimentSpec, RunOptions};
use dopo_core::output::write_outputs;
use dopo_core::sde::Scheme;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "dopo", version, about = "Positive-P simulation of two mutually injected DOPOs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment exactly as configured.
    Run(SpecArgs),
    /// Run the observable series of every sweep label, without distributions.
    Sweep(SpecArgs),
    /// Sample only the distribution times and write the quadrature distributions.
    Distributions(SpecArgs),
    /// Measure the weak convergence order of both schemes on an Ornstein-Uhlenbeck process.
    ConvergenceCheck(ConvergenceArgs),
}

#[derive(Args)]
struct SpecArgs {
    /// JSON experiment document.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset, e.g. case-a, case-b, superposition, case-a-desk.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<usize>,
    /// em or platen2.
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    dt: Option<f64>,
    /// Override any field, e.g. `--set base.gamma_s=0.5` or `--set sweep.0.label=a`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Suppress the per-label progress counter.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long, default_value_t = 100_000)]
    trajectories: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory for convergence.csv; nothing is written when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Self { code: EXIT_CONFIG, message: message.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::config(e)
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Invalid(_) => Self::config(e),
            ExperimentError::ThreadPool(_) => Self { code: EXIT_NUMERICAL, message: e.to_string() },
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run_spec(&a, Mode::Run),
        Command::Sweep(a) => run_spec(&a, Mode::Sweep),
        Command::Distributions(a) => run_spec(&a, Mode::Distributions),
        Command::ConvergenceCheck(a) => convergence_check(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Run,
    Sweep,
    Distributions,
}

fn threads_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var("DOPO_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::config(format!("DOPO_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

fn load_spec(a: &SpecArgs) -> Result<ExperimentSpec, Failure> {
    let text = match (&a.config, &a.preset) {
        (Some(path), _) => fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?,
        (None, Some(name)) => preset_document(name),
        (None, None) => return Err(Failure::config("either --config or --preset is required")),
    };
    let mut spec = parse_config_with(&text, &a.sets)?;
    if let Some(seed) = a.seed {
        spec.master_seed = seed;
    }
    if let Some(n) = a.trajectories {
        spec.n_trajectories = n;
    }
    if let Some(s) = a.scheme {
        spec.scheme = s;
    }
    if let Some(dt) = a.dt {
        spec.dt = dt;
    }
    Ok(spec)
}

fn restrict(mut spec: ExperimentSpec, mode: Mode) -> Result<ExperimentSpec, Failure> {
    match mode {
        Mode::Run => {}
        Mode::Sweep => spec.outputs.distributions = None,
        Mode::Distributions => {
            let Some(req) = &spec.outputs.distributions else {
                return Err(Failure::config("the configuration requests no distributions"));
            };
            let mut times = req.times.clone();
            times.sort_by(f64::total_cmp);
            times.dedup();
            spec.sample_times = times;
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn run_spec(a: &SpecArgs, mode: Mode) -> Result<(), Failure> {
    let spec = restrict(load_spec(a)?, mode)?;
    let options = RunOptions { threads: threads_from_env()?, progress: !a.quiet };
    let result = run_experiment(&spec, &options)?;
    let written = write_outputs(&result, &a.out).map_err(|e| Failure { code: EXIT_IO, message: e.to_string() })?;
    println!("wrote {} files to {}", written.len(), a.out.display());
    for label in &result.metadata.labels {
        for w in &label.warnings {
            eprintln!("warning [{}]: {w}", label.label);
        }
    }
    let failed = result.failed_labels();
    if failed.is_empty() {
        Ok(())
    } else {
        let detail: Vec<String> =
            failed.iter().map(|l| format!("{}: {}", l.label, l.error.as_deref().unwrap_or(""))).collect();
        Err(Failure { code: EXIT_NUMERICAL, message: format!("labels failed: {}", detail.join("; ")) })
    }
}

fn convergence_check(a: &ConvergenceArgs) -> Result<(), Failure> {
    let pool = match threads_from_env()? {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().ok(),
        None => None,
    };
    let measure = |scheme| {
        let run = || ou_weak_convergence(&OuProblem::default(), scheme, &DEFAULT_STEP_SIZES, a.trajectories, a.seed);
        match &pool {
            Some(p) => p.install(run),
            None => run(),
        }
    };
    let mut csv = String::from("scheme,dt,second_moment,second_moment_se,exact,error\n");
    let mut ok = true;
    for (scheme, expected) in [(Scheme::EulerMaruyama, 1.0), (Scheme::WeakOrder2Platen, 2.0)] {
        let r = measure(scheme).map_err(|e| Failure { code: EXIT_NUMERICAL, message: e.to_string() })?;
        for p in &r.points {
            csv += &format!(
                "{},{},{},{},{},{}\n",
                scheme.short_name(),
                p.dt,
                p.second_moment.value,
                p.second_moment.se,
                p.exact,
                p.error
            );
        }
        let pass = (r.slope - expected).abs() <= 0.3;
        ok &= pass;
        println!(
            "{:8} slope {:.3} (expected {expected} ± 0.3) {}",
            scheme.short_name(),
            r.slope,
            if pass { "ok" } else { "FAILED" }
        );
    }
    if let Some(dir) = &a.out {
        write_file(dir, "convergence.csv", &csv)?;
    }
    if ok {
        Ok(())
    } else {
        Err(Failure { code: EXIT_NUMERICAL, message: "measured order outside tolerance".into() })
    }
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error, p: &Path| Failure { code: EXIT_IO, message: format!("{}: {e}", p.display()) };
    fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| io(e, &path))
}
