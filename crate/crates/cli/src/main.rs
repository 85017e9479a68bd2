use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use specmult::config::{MeasureMode, Task};
use specmult::{report, run, write_outputs, ExperimentConfig, RunError, RunOptions};

#[derive(Parser)]
#[command(
    name = "specmult",
    version,
    about = "Finite-volume spectral multiplicity experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Resolvent identities, Herglotz sign, Schur form, adjoint symmetry.
    Green(Common),
    /// Sampled M_n per block and the degeneracy chain.
    Mult(Common),
    /// Clustering, gcd and exact multiplicities side by side.
    Sweep(Common),
    /// Simplicity checks on rooted trees.
    TreeCheck(Common),
    /// Atoms, matrix weights, Poltoratskii ratios, cyclic subspaces, kernel inclusions.
    Measure {
        #[command(flatten)]
        common: Common,
        /// Model document replacing the configured model.
        #[arg(long)]
        model: Option<String>,
        /// Block index.
        #[arg(long)]
        n: Option<usize>,
        /// atoms | weights | poltoratskii | cyclic | kernel
        #[arg(long)]
        mode: Option<MeasureMode>,
    },
    /// Spectral averaging scaling over nested intervals.
    Avg {
        #[command(flatten)]
        common: Common,
        /// Nested intervals as `first_len,count` or `center,first_len,count`.
        #[arg(long)]
        intervals: Option<String>,
        /// Coupling samples.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Every invariant suite on one model ensemble.
    VerifyAll(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Green(_) => "green",
            Command::Mult(_) => "mult",
            Command::Sweep(_) => "sweep",
            Command::TreeCheck(_) => "tree-check",
            Command::Measure { .. } => "measure",
            Command::Avg { .. } => "avg",
            Command::VerifyAll(_) => "verify-all",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Green(c)
            | Command::Mult(c)
            | Command::Sweep(c)
            | Command::TreeCheck(c)
            | Command::VerifyAll(c) => c,
            Command::Measure { common, .. } | Command::Avg { common, .. } => common,
        }
    }
}

fn parse_intervals(text: &str) -> Result<(Option<f64>, f64, usize), RunError> {
    let bad = || {
        RunError::Usage(format!(
            "--intervals expects `first_len,count` or `center,first_len,count`, got {text:?}"
        ))
    };
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let count = |s: &str| s.parse::<usize>().map_err(|_| bad());
    match parts.as_slice() {
        [len, n] => Ok((None, num(len)?, count(n)?)),
        [c, len, n] => Ok((Some(num(c)?), num(len)?, count(n)?)),
        _ => Err(bad()),
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, cmd: &Command) -> Result<(), RunError> {
    if cfg.task.name() != cmd.name() {
        return Err(RunError::Usage(format!(
            "subcommand `{}` does not match the configured task `{}`",
            cmd.name(),
            cfg.task.name()
        )));
    }
    let common = cmd.common();
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(dir) = &common.out {
        cfg.output.dir = dir.display().to_string();
    }
    match (cmd, &mut cfg.task) {
        (Command::Measure { model, n, mode, .. }, Task::Measure(p)) => {
            if let Some(path) = model {
                cfg.model = specmult::config::ModelSpec::File { path: path.clone() };
            }
            if let Some(n) = n {
                p.block = *n;
            }
            if let Some(m) = mode {
                p.mode = *m;
            }
        }
        (
            Command::Avg {
                intervals, samples, ..
            },
            Task::Avg(p),
        ) => {
            if let Some(text) = intervals {
                let (center, first_len, count) = parse_intervals(text)?;
                p.intervals.center = center.or(p.intervals.center);
                p.intervals.first_len = first_len;
                p.intervals.count = count;
            }
            if let Some(s) = samples {
                p.samples = *s;
            }
        }
        _ => {}
    }
    cfg.validate()
}

fn execute(cli: &Cli) -> Result<i32, RunError> {
    let common = cli.command.common();
    let text = std::fs::read_to_string(&common.config).map_err(|e| RunError::Input {
        path: common.config.display().to_string(),
        message: e.to_string(),
    })?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(dir) = common.config.parent() {
        cfg.resolve_paths(dir);
    }
    apply_overrides(&mut cfg, &cli.command)?;
    let record = run(&cfg, &RunOptions { jobs: common.jobs })?;
    let summary = report(std::slice::from_ref(&record));
    let dir = PathBuf::from(&cfg.output.dir);
    write_outputs(&record, &summary, &dir)?;
    for s in &summary.suites {
        println!(
            "{:<24} {:>6} checks {:>4} failed  {}",
            s.suite,
            s.checks,
            s.failures,
            if s.pass { "PASS" } else { "FAIL" }
        );
    }
    if let Some(marker) = &summary.marker {
        println!("{marker}");
    }
    println!("results in {}", dir.display());
    Ok(summary.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
