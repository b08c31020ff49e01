//! The `nlgreen` command line tool.

pub mod commands;
pub mod output;
pub mod specfile;

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand};

pub use commands::CliError;

/// Output directory override used when `--out` is absent.
pub const OUT_ENV: &str = "NLGREEN_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridArg(pub usize, pub usize);

impl FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected NxM, got \"{s}\""))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad grid size \"{v}\": {e}"));
        let (a, b) = (parse(a)?, parse(b)?);
        if a < 2 || b < 2 {
            return Err("grid needs at least 2 points per axis".into());
        }
        Ok(GridArg(a, b))
    }
}

#[derive(Debug, Parser)]
#[command(name = "nlgreen", version, about = "Green's functions for ODEs with non-local boundary conditions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Problem file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub spec: Option<PathBuf>,

    /// Output directory; defaults to $NLGREEN_OUT, then the current directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Grid size NxM: (t, s) points for eval and verify-oracle, (M, δ) cells for scan.
    #[arg(long, global = true, value_name = "NxM")]
    pub grid: Option<GridArg>,

    /// Integrator tolerance for check/build/eval/solve, zero tolerance for
    /// scan, acceptance bound for verify-oracle.
    #[arg(long, global = true, value_name = "X")]
    pub tol: Option<f64>,

    /// Worker threads for scan.
    #[arg(long, global = true, value_name = "K")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Print the rank precheck, the uniqueness determinant and det(I - A).
    Check,
    /// Build G and write build.json.
    Build,
    /// Write G and g on a (t, s) grid.
    Eval,
    /// Solve the non-local problem for the file's forcing term.
    Solve,
    /// Classify the sign of G over an (M, δ) rectangle.
    Scan,
    /// Compare the numeric pipeline with the closed-form periodic kernel.
    VerifyOracle,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { commands::EXIT_USAGE } else { 0 };
        }
    };
    match commands::execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
