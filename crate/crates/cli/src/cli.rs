use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{self, EvaluateOptions};
use crate::config::Config;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "lowvis", version, about = "Low-visibility spinning UAV design pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample feasible designs and write design files plus manifest.csv
    Sample {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine one design file for lower visibility
    Optimize {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the visibility score of a design or bare assembly as JSON
    Evaluate {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "procedural")]
        backgrounds: Option<PathBuf>,
        #[arg(long)]
        procedural: Option<u64>,
        /// pyramid or learned
        #[arg(long)]
        metric: Option<String>,
        /// feature network for the learned metric
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Render a projection or motion-blurred view to PNG
    Render {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// degrees
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        pitch: f64,
        #[arg(long)]
        blur: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Histogram and summary of sampled vs refined visibility
    Report {
        #[arg(long = "designs", required = true)]
        designs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        bins: usize,
    },
    /// Copy the K lowest-visibility designs into another directory
    Select {
        #[arg(long)]
        designs: PathBuf,
        #[arg(long)]
        top: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_json<T: serde::Serialize>(value: &T, out: &mut impl Write) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialize: {e}")))?;
    writeln!(out, "{text}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}

pub fn execute(cli: Cli, out: &mut impl Write) -> CliResult<()> {
    match cli.command {
        Command::Sample {
            config,
            count,
            seed,
            out: dir,
        } => {
            let cfg = Config::resolve(config.as_deref())?;
            let paths = commands::sample(&cfg, count, seed, &dir)?;
            writeln!(out, "wrote {} designs to {}", paths.len(), dir.display())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
        }
        Command::Optimize {
            design,
            config,
            out: path,
        } => {
            let f = commands::optimize(&design, config.as_deref(), &path)?;
            let rec = f.provenance.refinements.last().expect("refinement just appended");
            writeln!(
                out,
                "{} -> {} ({:+.2}%), {} iterations, {:?}",
                rec.initial_visibility,
                rec.final_visibility,
                -100.0 * rec.reduction,
                rec.iterations,
                rec.reason
            )
            .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
        }
        Command::Evaluate {
            design,
            config,
            backgrounds,
            procedural,
            metric,
            model,
        } => {
            let opts = EvaluateOptions {
                config,
                backgrounds,
                procedural,
                metric,
                model,
            };
            print_json(&commands::evaluate(&design, &opts)?, out)?;
        }
        Command::Render {
            design,
            config,
            pitch,
            blur,
            out: path,
        } => commands::render(&design, config.as_deref(), pitch, blur, &path)?,
        Command::Report {
            designs,
            out: dir,
            bins,
        } => print_json(&commands::report(&designs, &dir, bins)?, out)?,
        Command::Select {
            designs,
            top,
            out: dir,
        } => {
            for p in commands::select(&designs, top, &dir)? {
                writeln!(out, "{}", p.display()).map_err(|e| CliError::Io(format!("stdout: {e}")))?;
            }
        }
    }
    Ok(())
}

/// Parses and runs; returns the process exit code. Help and version print
/// to stdout and exit 0.
pub fn run<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
