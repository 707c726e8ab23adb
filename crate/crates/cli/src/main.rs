use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context as _};
use clap::{Parser, Subcommand};
use spdtn_cli::report::{compare, convergence_report, render_comparison, render_report, series};
use spdtn_cli::sweep::{resolve_output, sweep, Table};
use spdtn_cli::RunConfig;

/// Kicked Ising expectation values by sparse Pauli dynamics and
/// belief-propagation tensor networks.
#[derive(Parser)]
#[command(name = "sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every point of a JSON config and write a results table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Results CSV (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Convergence diagnostics per method and theta.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Observable the table must have been produced for.
        #[arg(long)]
        observable: String,
    },
    /// Spread and errors across methods at their best parameters.
    Compare {
        #[arg(required = true)]
        tables: Vec<PathBuf>,
        #[arg(long)]
        reference: String,
    },
}

const EXIT_FLAGGED: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn run(cli: Cli) -> anyhow::Result<usize> {
    match cli.command {
        Command::Sweep { config, out, workers } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            let base = config.parent().map(|p| p.to_path_buf());
            let out = resolve_output(&cfg, out, base.as_deref());
            let summary = sweep(&cfg, out.as_deref(), workers, base.as_deref())?;
            if out.is_none() {
                let table = std::io::stdout();
                let mut w = csv::Writer::from_writer(table.lock());
                w.write_record(spdtn_cli::sweep::COLUMNS)?;
                for r in &summary.rows {
                    w.write_record(r.record())?;
                }
                w.flush()?;
            }
            eprintln!(
                "{} rows ({} resumed), {} flagged",
                summary.rows.len(),
                summary.resumed,
                summary.flagged()
            );
            Ok(summary.flagged())
        }
        Command::Report { input, observable } => {
            let table = Table::read(&input)?;
            if table.header.observable != observable {
                bail!(
                    "{} holds observable `{}`, not `{observable}`",
                    input.display(),
                    table.header.observable
                );
            }
            let diags = series(&table.rows)
                .iter()
                .map(|s| convergence_report(s))
                .collect::<Result<Vec<_>, _>>()?;
            print!("{}", render_report(&diags));
            Ok(table.flagged())
        }
        Command::Compare { tables, reference } => {
            let mut rows = Vec::new();
            let mut observable: Option<String> = None;
            for path in &tables {
                let t = Table::read(path)?;
                match &observable {
                    Some(o) if *o != t.header.observable => {
                        bail!("{} holds observable `{}`, others `{o}`", path.display(), t.header.observable)
                    }
                    _ => observable = Some(t.header.observable.clone()),
                }
                rows.extend(t.rows);
            }
            let c = compare(&rows, &reference)?;
            print!("{}", render_comparison(&c));
            Ok(rows.iter().filter(|r| r.is_flagged()).count())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(flagged) => {
            eprintln!("{flagged} flagged rows");
            ExitCode::from(EXIT_FLAGGED)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
