use clap::{Args, Parser, Subcommand};
use extvar::cli::{cmd_check, cmd_run, cmd_solve, CliConfig, SolverKind};
use std::path::PathBuf;
use std::process::ExitCode;

/// Extensible variants over coproducts: constraint solving and evaluation.
#[derive(Parser)]
#[command(name = "extvar", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonFlags {
    /// chains | families | rows
    #[arg(long, default_value = "chains")]
    solver: SolverKind,
    /// Enable the extra injection/subtraction clauses for compound sources
    /// and subtrahends.
    #[arg(long)]
    generalized: bool,
    /// Disable default declarations.
    #[arg(long = "no-default")]
    no_default: bool,
    /// Allow In/Inl/Inr patterns and raw tag constructors.
    #[arg(long = "expose-constructors")]
    expose_constructors: bool,
    /// Print one derivation line per clause or equation attempt (solve).
    #[arg(long)]
    trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Type-check a program and print one scheme per let binding.
    Check {
        #[command(flatten)]
        flags: CommonFlags,
        file: PathBuf,
    },
    /// Type-check a program and print the value of main.
    Run {
        #[command(flatten)]
        flags: CommonFlags,
        file: PathBuf,
    },
    /// Solve one predicate over coproducts of opaque atoms.
    Solve {
        #[command(flatten)]
        flags: CommonFlags,
        /// Inline predicate text.
        #[arg(short = 'e')]
        expr: Option<String>,
        /// File containing the predicate.
        file: Option<PathBuf>,
    },
}

impl CommonFlags {
    fn config(&self) -> CliConfig {
        CliConfig {
            solver: self.solver,
            generalized: self.generalized,
            defaulting: !self.no_default,
            expose: self.expose_constructors,
            trace: self.trace,
        }
    }
}

fn read_file(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {}", path.display(), e);
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check { flags, file } => {
            let cfg = flags.config();
            if let Err(m) = cfg.validate("check") {
                eprintln!("error: {}", m);
                return ExitCode::from(2);
            }
            let src = match read_file(&file) {
                Ok(s) => s,
                Err(code) => return code,
            };
            match cmd_check(&src, &cfg) {
                Ok(lines) => {
                    for l in lines {
                        println!("{}", l);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {}", e);
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Run { flags, file } => {
            let cfg = flags.config();
            if let Err(m) = cfg.validate("run") {
                eprintln!("error: {}", m);
                return ExitCode::from(2);
            }
            let src = match read_file(&file) {
                Ok(s) => s,
                Err(code) => return code,
            };
            match cmd_run(&src, &cfg) {
                Ok(v) => {
                    println!("{}", v);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {}", e);
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Solve { flags, expr, file } => {
            let cfg = flags.config();
            if let Err(m) = cfg.validate("solve") {
                eprintln!("error: {}", m);
                return ExitCode::from(2);
            }
            let text = match (expr, file) {
                (Some(t), None) => t,
                (None, Some(path)) => match read_file(&path) {
                    Ok(s) => s,
                    Err(code) => return code,
                },
                _ => {
                    eprintln!("error: solve takes exactly one of -e <text> or a file path");
                    return ExitCode::from(2);
                }
            };
            match cmd_solve(text.trim(), &cfg) {
                Ok(lines) => {
                    for l in lines {
                        println!("{}", l);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {}", e);
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
