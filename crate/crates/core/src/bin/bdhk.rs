use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bdhk::experiment::{run_experiment, Budget, ExperimentConfig, QGrid, Subcommand};
use bdhk::Result;
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    FieldInfo,
    Phik,
    Constants,
    Variance,
    Verify,
    Regress,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::FieldInfo => Subcommand::FieldInfo,
            Command::Phik => Subcommand::Phik,
            Command::Constants => Subcommand::Constants,
            Command::Variance => Subcommand::Variance,
            Command::Verify => Subcommand::Verify,
            Command::Regress => Subcommand::Regress,
        }
    }
}

/// Prime ideals in arithmetic progressions: totients, constants and the
/// variance over moduli, written as CSV.
#[derive(Debug, Parser)]
#[command(name = "bdhk", version)]
struct Cli {
    /// Subcommand; may be omitted when a config file names one.
    command: Option<Command>,

    /// Field descriptor: Q, Q(i), quad:d, cyc:n or galois:c0,..,ck;mK;p1,..
    /// (repeatable).
    #[arg(long = "field")]
    fields: Vec<String>,

    /// Largest modulus for `phik`.
    #[arg(long)]
    q_max: Option<u64>,

    /// Comma-separated fit points for `constants`.
    #[arg(long, value_name = "A,B,C")]
    xs: Option<String>,

    /// Comma-separated values of x for `variance`.
    #[arg(long, value_name = "N[,N..]")]
    x: Option<String>,

    /// `geometric:k` gives Q in {x/2^k, .., x}.
    #[arg(long, value_name = "geometric:k", conflicts_with_all = ["q_list", "q_full"])]
    q_grid: Option<String>,

    /// Explicit comma-separated Q values.
    #[arg(long, value_name = "Q,Q,..", conflicts_with = "q_full")]
    q_list: Option<String>,

    /// Q = x only.
    #[arg(long)]
    q_full: bool,

    /// Also report the H and J parts of the variance.
    #[arg(long)]
    hj: bool,

    #[arg(long, value_name = "quick|full")]
    budget: Option<String>,

    /// Variance CSV read by `regress`.
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,

    /// Output CSV; stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long)]
    threads: Option<usize>,

    /// One worker and no timing column, for byte-identical output.
    #[arg(long)]
    sequential: bool,

    /// key=value file; flags given here win over it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Also write `<out>.dat` with two columns for plotting.
    #[arg(long)]
    gnuplot: bool,
}

fn build_config(cli: Cli) -> Result<ExperimentConfig> {
    let mut config = match (&cli.config, cli.command) {
        (Some(path), command) => {
            let mut c = ExperimentConfig::from_config_file(path)?;
            if let Some(command) = command {
                c.subcommand = command.into();
            }
            c
        }
        (None, Some(command)) => ExperimentConfig::new(command.into()),
        (None, None) => return Err(bdhk::Error::Config("no subcommand given".into())),
    };
    if !cli.fields.is_empty() {
        config.fields = cli.fields;
    }
    if let Some(q) = cli.q_max {
        config.q_max = q;
    }
    if let Some(xs) = &cli.xs {
        config.set("fit_xs", xs)?;
    }
    if let Some(x) = &cli.x {
        if config.subcommand == Subcommand::Constants {
            config.set("fit_xs", x)?;
        } else {
            config.set("x", x)?;
        }
    }
    if let Some(g) = &cli.q_grid {
        config.q_grid = g.parse()?;
    }
    if let Some(l) = &cli.q_list {
        config.q_grid = QGrid::Explicit(bdhk::experiment::parse_u64_list(l)?);
    }
    if cli.q_full {
        config.q_grid = QGrid::Full;
    }
    if cli.hj {
        config.with_hj = true;
    }
    if let Some(b) = &cli.budget {
        config.budget = b.parse::<Budget>()?;
    }
    if cli.input.is_some() {
        config.input = cli.input;
    }
    if cli.out.is_some() {
        config.output = cli.out;
    }
    if let Some(t) = cli.threads {
        config.threads = t;
    } else if cli.config.is_none() {
        config.threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    }
    if cli.sequential {
        config.sequential = true;
    }
    if config.sequential {
        config.threads = 1;
    }
    if cli.gnuplot {
        config.gnuplot = true;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let config = build_config(cli)?;
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| bdhk::Error::Config(e.to_string()))?;
    eprintln!(
        "bdhk {}: {} field(s), {} thread(s)",
        config.subcommand.as_str(),
        config.fields.len(),
        config.threads
    );
    let table = pool.install(|| run_experiment(&config))?;
    match &config.output {
        Some(path) => eprintln!("wrote {} rows to {}", table.rows.len(), path.display()),
        None => std::io::stdout().write_all(&table.to_csv()?)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
