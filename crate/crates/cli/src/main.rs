use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use tfps_core::cli_io::{configure_workers, parse_config, run, Command, ExitStatus, Overrides};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Ground state with full candidate report and density CSV.
    Solve,
    /// Candidate wall topologies.
    Enumerate,
    /// Hessian and exclusion verdict for the walls in [stability].
    Stability,
    /// Mixed versus separated energies over the [sweep] grid.
    Sweep,
    /// Brute-force minimization on a grid only.
    Oracle,
    /// Columnar x,V,rho1,rho2 files for every candidate.
    PlotData,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Solve => Command::Solve,
            Cmd::Enumerate => Command::Enumerate,
            Cmd::Stability => Command::Stability,
            Cmd::Sweep => Command::Sweep,
            Cmd::Oracle => Command::Oracle,
            Cmd::PlotData => Command::PlotData,
        }
    }
}

/// Thomas-Fermi ground states of two-component condensates in 1-D traps.
#[derive(Debug, Parser)]
#[command(name = "tfps", version)]
struct Args {
    command: Cmd,
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sample count for density and plot files.
    #[arg(long)]
    samples: Option<usize>,
    /// Seed for oracle restarts.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let command = Command::from(args.command);
    let result = parse_config(&args.config).and_then(|mut cfg| {
        Overrides {
            out: args.out,
            samples: args.samples,
            seed: args.seed,
        }
        .apply(&mut cfg)?;
        configure_workers(cfg.solver.workers)?;
        run(command, &cfg)
    });
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for a in &outcome.artifacts {
                println!("wrote {}", a.display());
            }
            if outcome.status == ExitStatus::OracleDisagreement {
                eprintln!("tfps {}: oracle disagrees with the analytic ground state", command.name());
            }
            ExitCode::from(outcome.status.code() as u8)
        }
        Err(e) => {
            eprintln!("tfps {}: {e}", command.name());
            ExitCode::from(ExitStatus::of_error(&e).code() as u8)
        }
    }
}
