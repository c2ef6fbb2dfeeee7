use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use crcnet::analysis::BoundReport;
use crcnet::experiment::{
    codec_cost, codec_rank, codec_table, fmt_g, run, sweep, verify_dir, write_sweep, RunConfig,
    SweepAxis,
};

/// Online distributed conformal risk control experiments.
#[derive(Parser)]
#[command(name = "crcnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write trajectories, averages and bounds.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        /// Override the output directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Extra `key=value` overrides applied after the config file.
        #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run all three schemes across values of alpha or capacity.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Re-check every bound on the trajectories of a run directory.
    Verify { dir: PathBuf },
    /// Inspect the block codec.
    Codec {
        #[command(subcommand)]
        op: CodecOp,
    },
}

#[derive(Subcommand)]
enum CodecOp {
    /// Rank and codeword length of one block, e.g. `1101`.
    Rank { block: String },
    /// Normalized bit cost of a 0/1 decision vector stored in a file.
    Cost {
        file: PathBuf,
        #[arg(short, long, default_value_t = 10)]
        block_size: usize,
    },
    /// Full rank table for block size m (at most 12).
    Table { m: usize },
}

fn load_config(path: &PathBuf, output: Option<PathBuf>, set: &[String]) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(path).with_context(|| format!("config {}", path.display()))?;
    for kv in set {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("override {kv:?} is not KEY=VALUE");
        };
        cfg.set(k.trim(), v)?;
    }
    if let Some(dir) = output {
        cfg.output = dir;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_reports(reports: &[(u64, BoundReport)]) -> bool {
    let mut ok = true;
    for (seed, report) in reports {
        for e in report.failures() {
            ok = false;
            eprintln!(
                "seed {seed}: {} violated: lhs {} > rhs {}{}{}",
                e.id,
                fmt_g(e.lhs),
                fmt_g(e.rhs),
                e.step.map(|s| format!(" at step {s}")).unwrap_or_default(),
                e.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default(),
            );
        }
    }
    let checks: usize = reports.iter().map(|(_, r)| r.entries.len()).sum();
    println!(
        "{} seeds, {checks} checks: {}",
        reports.len(),
        if ok { "all bounds hold" } else { "VIOLATIONS" }
    );
    ok
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, output, set } => {
            let cfg = load_config(&config, output, &set)?;
            let summary = run(&cfg)?;
            if let Some(last) = summary.average.last() {
                println!(
                    "{} T={} seeds={}: fnr {} load {} fpr {}",
                    cfg.scheme,
                    last.t,
                    summary.reports.len(),
                    fmt_g(last.avg_fnr),
                    fmt_g(last.avg_load),
                    fmt_g(last.avg_fpr)
                );
            }
            println!("wrote {}", cfg.output.display());
            Ok(print_reports(&summary.reports))
        }
        Command::Sweep { config, axis, values, output, set } => {
            let axis: SweepAxis = axis.parse()?;
            let cfg = load_config(&config, output, &set)?;
            let rows = sweep(&cfg, axis, &values)?;
            fs::create_dir_all(&cfg.output)?;
            let path = cfg.output.join(format!("sweep_{axis}.csv"));
            let mut buf = Vec::new();
            write_sweep(&mut buf, axis, &rows)?;
            fs::write(&path, &buf)?;
            io::stdout().write_all(&buf)?;
            println!("wrote {}", path.display());
            let ok = rows.iter().all(|r| r.bounds_ok);
            if !ok {
                eprintln!("some runs violated a bound");
            }
            Ok(ok)
        }
        Command::Verify { dir } => {
            let reports = verify_dir(&dir).with_context(|| format!("verifying {}", dir.display()))?;
            Ok(print_reports(&reports))
        }
        Command::Codec { op } => {
            match op {
                CodecOp::Rank { block } => {
                    let (rank, len) = codec_rank(&block)?;
                    println!("rank {rank} length {len}");
                }
                CodecOp::Cost { file, block_size } => {
                    let text = fs::read_to_string(&file)
                        .with_context(|| format!("reading {}", file.display()))?;
                    println!("{}", fmt_g(codec_cost(&text, block_size)?));
                }
                CodecOp::Table { m } => {
                    let mut out = io::stdout().lock();
                    writeln!(out, "block,rank,length")?;
                    for (block, rank, len) in codec_table(m)? {
                        writeln!(out, "{block},{rank},{len}")?;
                    }
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
