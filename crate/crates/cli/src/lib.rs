//! `doclair` command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.

mod commands;
mod records;

use std::ffi::OsString;
use std::num::NonZeroUsize;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use doclair_core::format::PromptSpec;
use doclair_core::layout_metrics::validate_thresholds;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "doclair", version, about = "Parse, clean, score and join document OCR output")]
pub struct Cli {
    /// Worker threads. Defaults to the number of available cores.
    #[arg(long, global = true, env = "DOCLAIR_THREADS")]
    pub threads: Option<NonZeroUsize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse raw page streams into block records.
    Parse(ParseArgs),
    /// Drop invalid boxes and truncate repetition loops.
    Sanitize(SanitizeArgs),
    /// Score predicted page text against ground truth.
    EvalText(EvalTextArgs),
    /// Confusion matrices, mP/mR and optional AP for predicted boxes.
    EvalLayout(EvalLayoutArgs),
    /// Join pages into per-document plain text.
    Join(JoinArgs),
}

fn parse_prompt(s: &str) -> Result<PromptSpec, String> {
    s.parse::<PromptSpec>().map_err(|e| e.to_string())
}

/// `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_thresholds(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, step, stop] = parts.as_slice() else {
            return Err("expected start:step:stop".into());
        };
        let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err("range needs step > 0 and stop >= start".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Rounded so that 0.5 + 9 * 0.05 prints as 0.95.
        (0..n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    validate_thresholds(&values).map_err(|e| e.to_string())?;
    Ok(values)
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Prompt for every record, overriding the record's own.
    #[arg(long, value_parser = parse_prompt)]
    pub prompt: Option<PromptSpec>,
    /// Page width for every record, overriding the record's own.
    #[arg(long, requires = "height", value_parser = clap::value_parser!(u32).range(1..))]
    pub width: Option<u32>,
    #[arg(long, requires = "width", value_parser = clap::value_parser!(u32).range(1..))]
    pub height: Option<u32>,
    /// Exit with status 2 if any record fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct SanitizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Audit trail (JSON lines). Defaults to OUTPUT with `.audit.jsonl` appended.
    #[arg(long)]
    pub audit: Option<PathBuf>,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
    pub min_unit: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(2..))]
    pub min_repeats: u64,
    #[arg(long)]
    pub no_repetition_filter: bool,
}

#[derive(Debug, Args)]
pub struct EvalTextArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Score the concatenated corpus once instead of averaging pages.
    #[arg(long)]
    pub micro: bool,
    #[arg(long)]
    pub keep_case: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalLayoutArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// `start:step:stop` or a comma list.
    #[arg(long, value_parser = parse_thresholds, default_value = "0.5:0.05:0.95")]
    pub thresholds: ::std::vec::Vec<f64>,
    /// Also compute per-class COCO-style AP (predictions need scores).
    #[arg(long)]
    pub ap: bool,
    #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u64).range(2..))]
    pub recall_bins: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_dets: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct JoinArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving one `.txt` file per document.
    #[arg(long)]
    pub out_text: PathBuf,
    /// Structured item listing (JSON lines, one document per line).
    #[arg(long)]
    pub out_blocks: Option<PathBuf>,
    /// Headings (one per line) that start a skipped section; replaces the defaults.
    #[arg(long)]
    pub skip_headings_file: Option<PathBuf>,
    /// Keep page headers and footers in the output.
    #[arg(long)]
    pub keep_headers: bool,
}

fn thread_count(cli: &Cli) -> usize {
    cli.threads
        .or_else(|| std::thread::available_parallelism().ok())
        .map_or(1, NonZeroUsize::get)
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(&cli))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Parse(a) => commands::parse::run(a),
        Command::Sanitize(a) => commands::sanitize::run(a),
        Command::EvalText(a) => commands::eval_text::run(a),
        Command::EvalLayout(a) => commands::eval_layout::run(a),
        Command::Join(a) => commands::join::run(a),
    })
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}
