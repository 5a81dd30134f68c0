use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use databelt_core::export::{result_rows, write_csv, ResultsDocument};
use databelt_core::scale::{loglog_slope, scale_report, MAX_SCALE_NODES};
use databelt_core::scenario::{OutputFormat, Scenario};
use databelt_core::{load_scenario, run_batch, Policy};

#[derive(Parser)]
#[command(
    name = "databelt",
    version,
    about = "Simulate SLO-aware state propagation for serverless workflows on satellite constellations"
)]
struct Cli {
    /// Log debug output (DATABELT_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded repetitions of a scenario under one or more policies.
    Run {
        /// Scenario file; the bundled flood-detection scenario when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Comma-separated policies: databelt, random, stateless.
        #[arg(long, value_delimiter = ',', default_value = "databelt,random,stateless")]
        policy: Vec<Policy>,
        /// Repetitions per policy (scenario default when omitted).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        reps: Option<u64>,
        /// Base seed; run i uses seed + i (scenario default when omitted).
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Maximum fusion group size for the databelt policy.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        fusion_depth: Option<u64>,
        /// Override the workflow input size.
        #[arg(long)]
        input_size_mb: Option<f64>,
        /// Worker threads; output is identical for any value.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        jobs: u64,
    },
    /// Time placement decisions on synthetic constellations.
    Scale {
        /// Comma-separated node counts.
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000",
              value_parser = clap::value_parser!(u64).range(2..=MAX_SCALE_NODES as u64))]
        nodes: Vec<u64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        invocations: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file and print its canonical form.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        /// Print the canonical JSON.
        #[arg(long)]
        print: bool,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[allow(clippy::too_many_arguments)]
fn run(
    scenario: Option<PathBuf>,
    policies: Vec<Policy>,
    reps: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<Format>,
    fusion_depth: Option<u64>,
    input_size_mb: Option<f64>,
    jobs: u64,
) -> Result<()> {
    let mut s = match &scenario {
        Some(p) => load_scenario(p).with_context(|| format!("loading {}", p.display()))?,
        None => Scenario::flood_detection(),
    };
    if let Some(d) = fusion_depth {
        s = s.with_fusion_depth(d as usize)?;
    }
    if let Some(mb) = input_size_mb {
        s = s.with_input_size_mb(mb)?;
    }
    let file_output =
        s.file().output.clone().unwrap_or(databelt_core::scenario::OutputFile { format: None, path: None });
    let format = match format {
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
        None => file_output.format.unwrap_or(OutputFormat::Csv),
    };
    let out = out.or(file_output.path.map(PathBuf::from));
    let reps = reps.map_or(s.repetitions, |r| r as usize);
    let seed = seed.unwrap_or(s.seed);

    let mut batches = Vec::new();
    for policy in policies {
        log::info!("running {policy}: {reps} reps from seed {seed}");
        let batch = run_batch(&s, policy, reps, seed, jobs as usize).with_context(|| format!("policy {policy}"))?;
        log::debug!("{policy}: mean total {:.6} s", batch.summary.mean.total_s);
        batches.push(batch);
    }

    let mut w = output(out.as_deref())?;
    match format {
        OutputFormat::Csv => write_csv(&result_rows(&s.name, &batches), &mut w)?,
        OutputFormat::Json => writeln!(w, "{}", ResultsDocument::new(&s.name, &batches).to_json())?,
    }
    w.flush()?;
    Ok(())
}

fn scale(nodes: Vec<u64>, seed: u64, invocations: usize, out: Option<PathBuf>) -> Result<()> {
    let counts: Vec<usize> = nodes.iter().map(|&n| n as usize).collect();
    let rows = scale_report(&counts, seed, invocations)?;
    let mut w = csv::Writer::from_writer(output(out.as_deref())?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    eprintln!("log-log slope: {:.3}", loglog_slope(&rows));
    Ok(())
}

fn validate(path: &Path, print: bool) -> Result<()> {
    let s = load_scenario(path).with_context(|| format!("loading {}", path.display()))?;
    if print {
        println!("{}", s.to_json());
    } else {
        println!(
            "{}: ok ({} nodes, {} links, {} functions)",
            s.name,
            s.topology.node_count(),
            s.topology.links().len(),
            s.workflow.functions.len()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DATABELT_LOG", level)).init();

    let result = match cli.command {
        Command::Run { scenario, policy, reps, seed, out, format, fusion_depth, input_size_mb, jobs } => {
            run(scenario, policy, reps, seed, out, format, fusion_depth, input_size_mb, jobs)
        }
        Command::Scale { nodes, seed, invocations, out } => scale(nodes, seed, invocations, out),
        Command::Validate { scenario, print } => validate(&scenario, print),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
