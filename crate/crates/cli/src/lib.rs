//! Command-line front end: configuration, dispatch and result files.
//!
//! ```text
//! koopman <command> [--system NAME | --input PATH] [--params k=v,...] [--out PATH] [--format csv|json]
//! ```

pub mod bundle;
pub mod commands;
pub mod error;
pub mod io;
pub mod params;
pub mod systems;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::bundle::{Metadata, ResultBundle};
pub use crate::error::{CliError, CliResult, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_NUMERICAL, EXIT_OK};
pub use crate::io::{emit_snapshots_csv, ingest_snapshots, Format};
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Iterate or integrate a built-in system.
    Simulate,
    /// Ritz values and modes from a snapshot sequence.
    Dmd,
    /// Projections onto given eigenvalues or frequencies.
    Gla,
    /// Ergodic and Fourier averages over seeds.
    Average,
    /// Diffusion-map embedding of ergodic quotient coordinates.
    Quotient,
    /// Ergodicity and mixing indicator series.
    Indicator,
    /// Greedy coverage search on the torus.
    Search,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Dmd => "dmd",
            Command::Gla => "gla",
            Command::Average => "average",
            Command::Quotient => "quotient",
            Command::Indicator => "indicator",
            Command::Search => "search",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    System(String),
    Input(PathBuf),
    /// Only `search`, which runs on the unit torus by itself.
    Neither,
}

#[derive(Debug, Parser)]
#[command(name = "koopman", version, about = "Spectral analysis of dynamical systems from trajectory data")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Built-in system, e.g. standard_map or double_well.
    #[arg(long, conflicts_with = "input")]
    system: Option<String>,
    /// Snapshot or density file (CSV, or JSON by extension).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated key=value pairs; lists use ':'.
    #[arg(long, default_value = "")]
    params: String,
    /// Output file (json) or directory (csv); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

/// A validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub source: Source,
    pub params: String,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn new(
        command: Command,
        system: Option<String>,
        input: Option<PathBuf>,
        params: impl Into<String>,
        out: Option<PathBuf>,
        format: Format,
    ) -> CliResult<Self> {
        let source = match (system, input) {
            (Some(_), Some(_)) => return Err(CliError::input("give either --system or --input, not both")),
            (Some(s), None) => Source::System(s),
            (None, Some(i)) => Source::Input(i),
            (None, None) => Source::Neither,
        };
        match (command, &source) {
            (Command::Search, Source::System(_)) => {
                return Err(CliError::input("search runs on the unit torus; use --input for a density grid instead of --system"))
            }
            (Command::Search, _) | (_, Source::System(_) | Source::Input(_)) => {}
            (c, Source::Neither) => return Err(CliError::input(format!("{} needs --system or --input", c.as_str()))),
        }
        Ok(RunConfig { command, source, params: params.into(), out, format })
    }

    /// Short description used in error messages.
    pub fn context(&self) -> String {
        let src = match &self.source {
            Source::System(s) => format!("system={s}"),
            Source::Input(p) => format!("input={}", p.display()),
            Source::Neither => "unit torus".to_string(),
        };
        if self.params.is_empty() {
            format!("command={}, {src}", self.command.as_str())
        } else {
            format!("command={}, {src}, params={}", self.command.as_str(), self.params)
        }
    }
}

/// A finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub bundle: ResultBundle,
    /// False when an adaptive average hit its iteration limit.
    pub converged: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.converged {
            EXIT_OK
        } else {
            EXIT_NOT_CONVERGED
        }
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs the command; nothing is written.
pub fn run(config: &RunConfig) -> CliResult<Outcome> {
    let started = timestamp();
    let mut params = Params::parse(&config.params)?;
    let output = commands::dispatch(config, &mut params)?;
    let (system, input) = match &config.source {
        Source::System(s) => (Some(s.clone()), None),
        Source::Input(p) => (None, Some(p.display().to_string())),
        Source::Neither => (None, None),
    };
    let metadata = Metadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: config.command.as_str().to_string(),
        system,
        input,
        params: params.finish()?,
        format: config.format.as_str().to_string(),
        out: config.out.as_ref().map(|p| p.display().to_string()),
        started,
        finished: timestamp(),
    };
    let bundle = ResultBundle {
        metadata,
        tables: output.tables,
        snapshots: output.snapshots,
        diagnostics: output.diagnostics,
    };
    Ok(Outcome { bundle, converged: output.converged })
}

/// Writes the bundle to `out` atomically, or to stdout.
pub fn write_bundle(bundle: &ResultBundle, out: Option<&Path>, format: Format) -> CliResult<()> {
    let fail = |e: std::io::Error| CliError::input(format!("cli_io: cannot write output: {e}"));
    match (format, out) {
        (Format::Json, Some(path)) => io::write_file_atomic(path, bundle.to_json_string().as_bytes()).map_err(fail),
        (Format::Csv, Some(path)) => io::write_dir_atomic(path, &bundle.csv_files()).map_err(fail),
        (Format::Json, None) => {
            print!("{}", bundle.to_json_string());
            Ok(())
        }
        (Format::Csv, None) => {
            print!("{}", bundle.csv_stream());
            Ok(())
        }
    }
}

/// Runs and writes; returns the process exit code.
pub fn execute(config: &RunConfig) -> i32 {
    let result = run(config).and_then(|outcome| {
        write_bundle(&outcome.bundle, config.out.as_deref(), config.format)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            if !outcome.converged {
                eprintln!("koopman: warning: some averages did not converge; results were written");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("koopman: error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (program name first) and runs. Usage errors exit with
/// the input-error code; `--help` and `--version` exit cleanly.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match RunConfig::new(cli.command, cli.system, cli.input, cli.params, cli.out, cli.format) {
        Ok(cfg) => execute(&cfg),
        Err(e) => {
            eprintln!("koopman: error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_rules() {
        let cfg = |c, s: Option<&str>, i: Option<&str>| {
            RunConfig::new(c, s.map(String::from), i.map(PathBuf::from), "", None, Format::Json)
        };
        assert!(cfg(Command::Dmd, Some("standard_map"), Some("a.csv")).is_err());
        assert!(cfg(Command::Dmd, None, None).is_err());
        assert!(cfg(Command::Search, Some("standard_map"), None).is_err());
        assert_eq!(cfg(Command::Search, None, None).unwrap().source, Source::Neither);
        assert!(cfg(Command::Dmd, None, Some("a.csv")).is_ok());
    }

    #[test]
    fn unknown_params_fail_before_running() {
        let cfg = RunConfig::new(Command::Dmd, Some("diagonal_linear".into()), None, "rr=3", None, Format::Json).unwrap();
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_INPUT);
        assert!(err.message.contains("rr"));
    }

    #[test]
    fn dmd_on_diagonal_map_finds_both_multipliers() {
        let cfg = RunConfig::new(Command::Dmd, Some("diagonal_linear".into()), None, "", None, Format::Json).unwrap();
        let out = run(&cfg).unwrap();
        let ritz = out.bundle.table("ritz").unwrap();
        let col = ritz.column("lambda").unwrap();
        let mut found: Vec<f64> = ritz
            .rows
            .iter()
            .map(|r| match r[col] {
                bundle::Cell::Complex(z) => z.re,
                _ => unreachable!(),
            })
            .collect();
        found.sort_by(f64::total_cmp);
        assert!((found[0] - 0.5).abs() < 1e-10 && (found[1] - 0.9).abs() < 1e-10, "{found:?}");
        assert_eq!(out.bundle.metadata.params["r"], "2");
        assert_eq!(out.exit_code(), EXIT_OK);
    }

    #[test]
    fn usage_errors_map_to_input_code() {
        assert_eq!(main_with_args(["koopman", "dmd", "--bogus"]), EXIT_INPUT);
        assert_eq!(main_with_args(["koopman", "frobnicate"]), EXIT_INPUT);
        assert_eq!(main_with_args(["koopman", "--help"]), EXIT_OK);
    }
}
