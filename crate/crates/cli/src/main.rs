//! `slacksvm` command-line tool.
//!
//! Exit status is 0 on success, 2 on a usage error (bad flag, unknown
//! name, out-of-range value) and 1 when a run fails (unreadable file,
//! malformed data, incompatible checkpoint). `RUST_LOG` sets the log level.

mod bench;
mod points;
mod train;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slacksvm::data::Format;
use slacksvm::search::{SearchConfig, SearchStrategy};

#[derive(Parser, Debug)]
#[command(
    name = "slacksvm",
    version,
    about = "Slack-rescaled structural SVM training and violation search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    Train(train::TrainArgs),
    SearchBench(bench::BenchArgs),
    AdversarialDemo(points::DemoArgs),
    EmitPoints(points::PointsArgs),
}

/// Flags shared by every command that runs a search.
#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    /// Stop a search once best / upper bound exceeds this, in (0, 1].
    #[arg(long, default_value_t = 0.999)]
    pub stop_ratio: f64,
    /// Oracle calls allowed per search, probes included.
    #[arg(long, default_value_t = 10_000)]
    pub max_queries: usize,
    /// Violations at or below this are not worth finding.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon_viol: f64,
    /// Bisecting search probes where the end labels tie instead of at the midpoint.
    #[arg(long)]
    pub bisect_secant: bool,
}

impl SearchArgs {
    pub fn config(&self) -> Result<SearchConfig, CliError> {
        let cfg = SearchConfig {
            stop_ratio: self.stop_ratio,
            max_queries: self.max_queries,
            epsilon_viol: self.epsilon_viol,
            bisect_secant: self.bisect_secant,
            ..SearchConfig::default()
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if !(self.epsilon_viol >= 0.0) {
            return Err(CliError::Usage(format!(
                "--epsilon-viol must be >= 0, got {}",
                self.epsilon_viol
            )));
        }
        Ok(cfg)
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn parse_strategy(s: &str) -> Result<SearchStrategy, String> {
    s.parse()
}

/// Dataset format from the flag, else from the extension.
pub fn resolve_format(path: &Path, flag: Option<Format>) -> Format {
    match flag {
        Some(f) => f,
        None if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv")) =>
        {
            Format::Csv
        }
        None => Format::SvmlightMultilabel,
    }
}

/// Buffered writer to `path`, or stdout for `None` or `-`.
pub fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            let f = File::create(p)
                .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => train::run(&a),
        Command::SearchBench(a) => bench::run(&a),
        Command::AdversarialDemo(a) => points::demo(&a),
        Command::EmitPoints(a) => points::emit(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
