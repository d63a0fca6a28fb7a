use clap::{Parser, Subcommand};
use heatmoi::config::RunConfig;
use heatmoi::emit::{emit, emit_at_dimension};
use heatmoi::modular::{write_k0d_grid, FIGURE_DIMENSIONS};
use heatmoi::recursion::local_invariant;
use heatmoi::torus::write_trace_csv;
use heatmoi::verify::{self, Suite};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

/// Local heat-kernel invariants as multiple operator integrals.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the LaTeX formula for I_k.
    Emit {
        #[arg(long)]
        k: u32,
        /// Substitute a concrete dimension.
        #[arg(long)]
        d: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the number of canonical terms of I_k.
    Count {
        #[arg(long)]
        k: u32,
    },
    /// Run a verification suite: dd, moi, symbols, conjugation or heatfit.
    Verify {
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write heat-trace samples as CSV and print the fitted coefficients.
    Heatfit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write K_0^d on a grid of s for several d as CSV.
    ModularGrid {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        smax: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
}

enum Failure {
    Check(String),
    Config(String),
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn check_err(e: impl std::fmt::Display) -> Failure {
    Failure::Check(e.to_string())
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(config_err)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn even_k(k: u32) -> Result<(), Failure> {
    if k % 2 == 1 {
        return Err(Failure::Config(format!("order k must be even, got {k}")));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Emit { k, d, out } => {
            even_k(k)?;
            let expr = local_invariant(k).map_err(config_err)?;
            let text = match d {
                None => emit(&expr),
                Some(d) => emit_at_dimension(&expr, d).map_err(config_err)?,
            };
            output(&out)?.write_all(text.as_bytes()).map_err(check_err)?;
        }
        Command::Count { k } => {
            even_k(k)?;
            let expr = local_invariant(k).map_err(config_err)?;
            println!("{}", expr.len());
        }
        Command::Verify { suite, config } => {
            let suite: Suite = suite.parse().map_err(config_err)?;
            let cfg = match config {
                Some(p) => RunConfig::load(&p).map_err(config_err)?,
                None => RunConfig::default(),
            };
            let report = verify::run(suite, &cfg).map_err(check_err)?;
            print!("{report}");
            if !report.passed() {
                return Err(Failure::Check(format!("suite {suite} failed")));
            }
        }
        Command::Heatfit { config, out } => {
            let cfg = RunConfig::load(&config).map_err(config_err)?;
            let (samples, asym) = verify::heat_samples(&cfg, cfg.truncation).map_err(check_err)?;
            let mut w = BufWriter::new(File::create(&out).map_err(config_err)?);
            write_trace_csv(&mut w, &samples).map_err(check_err)?;
            w.flush().map_err(check_err)?;
            let fit = verify::fit_samples(&cfg, &samples).map_err(check_err)?;
            for (k, c) in cfg.heat.orders.iter().zip(&fit.coefficients) {
                println!("c_{k}\t{c:.10}");
            }
            println!("# residual_rms={:.3e} condition={:.3e} asymmetry={asym:.1e}", fit.residual_rms, fit.condition);
        }
        Command::ModularGrid { out, smax, points } => {
            if points < 2 || !(smax > 0.0) {
                return Err(Failure::Config("need smax > 0 and at least two points".into()));
            }
            let mut w = BufWriter::new(File::create(&out).map_err(config_err)?);
            write_k0d_grid(&mut w, &FIGURE_DIMENSIONS, smax, points).map_err(check_err)?;
            w.flush().map_err(check_err)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
