use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bernoulli::commands::{self, Command, Options};
use bernoulli::config::RunConfig;

#[derive(Parser)]
#[command(name = "bernoulli", version, about = "Penalized shape optimization for a constrained Bernoulli problem")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Run configuration (key = value). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to `output` from the config, else out/<command>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write meshes and nodal fields of the initial and final designs.
    #[arg(long, global = true)]
    dump_mesh: bool,
    /// Boundary SVG every N iterations (0 disables).
    #[arg(long, global = true)]
    snapshot_stride: Option<usize>,
    /// Restart with ε halved after each converged stage.
    #[arg(long, global = true)]
    continuation: bool,
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Run the optimization and write the iteration log, boundaries and summary.
    Solve,
    /// Exactness, convergence-order and flux-balance checks of the FEM core.
    VerifyFem,
    /// Shape gradient against central finite differences.
    GradCheck,
    StudyMonotonicity,
    StudyAsymptotics,
    StudyPenalization,
    StudySymmetry,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Solve => Command::Solve,
            Cmd::VerifyFem => Command::VerifyFem,
            Cmd::GradCheck => Command::GradCheck,
            Cmd::StudyMonotonicity => Command::StudyMonotonicity,
            Cmd::StudyAsymptotics => Command::StudyAsymptotics,
            Cmd::StudyPenalization => Command::StudyPenalization,
            Cmd::StudySymmetry => Command::StudySymmetry,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = Command::from(cli.command);
    let loaded = match &cli.config {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    };
    let out = cli.out.clone().unwrap_or_else(|| match loaded.as_ref().ok().and_then(|c| c.output.clone()) {
        Some(o) => PathBuf::from(o),
        None => PathBuf::from("out").join(command.name()),
    });
    let result = loaded.and_then(|mut config| {
        if let Some(n) = cli.snapshot_stride {
            config.snapshot_stride = n;
        }
        if let Some(s) = cli.seed {
            config.seed = s;
        }
        let opts = Options { out: out.clone(), dump_mesh: cli.dump_mesh, continuation: cli.continuation };
        commands::run(command, &config, &opts)
    });
    match result {
        Ok(report) => {
            print!("{}", report.summary);
            match report.failure {
                None => ExitCode::SUCCESS,
                Some(f) => {
                    eprintln!("{}: {}", command.name(), f.message);
                    for c in &f.checks {
                        eprintln!("  {c}");
                    }
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("{}: {e}", command.name());
            if let Err(w) = commands::record_error(command.name(), &out, &e) {
                eprintln!("could not write failure record: {w}");
            }
            ExitCode::from(2)
        }
    }
}
