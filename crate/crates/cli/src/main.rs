//! fiblab: scans, lifts and flows for real polynomial map germs.

mod artifacts;
mod config;
mod pipeline;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use fiblab_core::catalog;

use config::{Overrides, Resolved, RunConfig};
use pipeline::Run;

#[derive(Parser)]
#[command(
    name = "fiblab",
    version,
    about = "Milnor fibration evidence for real polynomial map germs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args, Clone, Default)]
struct GlobalArgs {
    /// Directory for summary.json, samples.jsonl, traces.csv and discriminant.csv
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Exit with status 1 when any verdict is fail or inconclusive
    #[arg(long, global = true)]
    strict: bool,

    /// Global seed of every sampler
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (falls back to FIBLAB_THREADS)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Sphere radius ε
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Tube radius δ
    #[arg(long, global = true)]
    delta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check: discriminant, nod, Milnor field, d-regularity, flow
    Analyze {
        /// JSON config file or catalog map name
        config: String,
    },
    /// Sampled and adversarial d-regularity scan
    Dreg { config: String },
    /// Lifts and the Milnor vector at one point
    Lift {
        config: String,
        /// Comma-separated coordinates v1,…,vn
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Tube-to-sphere flow from seeded tube points
    Flow {
        config: String,
        /// Number of tube seeds
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Critical points, discriminant rays and the linearity check
    Discriminant { config: String },
    /// Built-in example maps
    Examples {
        #[command(subcommand)]
        action: ExamplesAction,
    },
}

#[derive(Subcommand)]
enum ExamplesAction {
    /// List the catalog with default radii
    List,
    /// Run the full analysis on a catalog map
    Run { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = cli.global;
    let (label, source, point, seeds) = match cli.command {
        Command::Examples {
            action: ExamplesAction::List,
        } => {
            emit(&list_examples());
            return Ok(ExitCode::SUCCESS);
        }
        Command::Examples {
            action: ExamplesAction::Run { name },
        } => {
            catalog::entry(&name)?;
            ("examples run", name, None, None)
        }
        Command::Analyze { config } => ("analyze", config, None, None),
        Command::Dreg { config } => ("dreg", config, None, None),
        Command::Lift { config, point } => ("lift", config, Some(point), None),
        Command::Flow { config, seeds } => ("flow", config, None, seeds),
        Command::Discriminant { config } => ("discriminant", config, None, None),
    };
    let overrides = Overrides {
        epsilon: g.epsilon,
        delta: g.delta,
        seed: g.seed,
        seeds,
        out: g.out,
        strict: g.strict,
        threads: g.threads,
    };
    let resolved = config::resolve(RunConfig::load(&source)?, &overrides)?;
    if let Some(n) = resolved.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }

    let mut run = Run::default();
    match label {
        "analyze" | "examples run" => {
            let ex = pipeline::discriminant(&resolved, &mut run)?;
            pipeline::nod(&resolved, &mut run)?;
            pipeline::field(&resolved, &mut run, &ex, true)?;
            pipeline::dreg(&resolved, &mut run, &ex, false)?;
            pipeline::transversality(&resolved, &mut run, &ex)?;
            pipeline::flow(&resolved, &mut run, &ex, false)?;
        }
        "dreg" => {
            let ex = pipeline::discriminant(&resolved, &mut run)?;
            pipeline::dreg(&resolved, &mut run, &ex, true)?;
        }
        "lift" => {
            let x = pipeline::parse_point(point.as_deref().unwrap_or(""), resolved.map.n())?;
            pipeline::lift(&resolved, &mut run, &x)?;
        }
        "flow" => {
            let ex = pipeline::discriminant(&resolved, &mut run)?;
            pipeline::flow(&resolved, &mut run, &ex, true)?;
        }
        "discriminant" => {
            pipeline::discriminant(&resolved, &mut run)?;
            run.samples = run
                .reports
                .get("discriminant")
                .and_then(|d| d.get("critical"))
                .and_then(|c| c.as_array())
                .cloned()
                .unwrap_or_default();
        }
        _ => unreachable!("every command is dispatched above"),
    }

    let summary = artifacts::summary(label, &resolved, &run);
    let written = artifacts::write_all(&resolved.out, &summary, &run)?;
    emit(&render_summary(label, &resolved, &run, &written));
    let failed = run.stages.iter().any(|s| s.failed());
    Ok(if resolved.strict && failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

/// Writes to stdout; a closed pipe (`fiblab ... | head`) is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn list_examples() -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>2} {:>2} {:>6} {:>7}  description",
        "name", "n", "p", "ε", "δ"
    );
    for name in catalog::NAMES {
        let e = catalog::entry(name).expect("catalog names resolve");
        let _ = writeln!(
            out,
            "{:<16} {:>2} {:>2} {:>6} {:>7}  {}",
            e.name, e.document.n, e.document.p, e.epsilon, e.delta, e.description
        );
    }
    out
}

fn render_summary(label: &str, r: &Resolved, run: &Run, written: &[PathBuf]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "fiblab {label}: {} (n={}, p={}), ε = {}, δ = {}, seed {}",
        r.map_name,
        r.map.n(),
        r.map.p(),
        pipeline::fmt_num(r.epsilon),
        pipeline::fmt_num(r.delta),
        r.config.sampler.seed
    );
    for note in &run.notes {
        let _ = writeln!(out, "  {note}");
    }
    for s in &run.stages {
        let _ = writeln!(out, "  {:<15} {:<11} {}", s.name, s.verdict, s.detail);
        let _ = writeln!(out, "  {:<15} {:<11} property: {}", "", "", s.property);
    }
    let names: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    let _ = writeln!(
        out,
        "artifacts in {}: {}",
        r.out.display(),
        names.join(", ")
    );
    out
}
