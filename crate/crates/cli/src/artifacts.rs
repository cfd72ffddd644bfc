//! Artifact files under the output directory.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::pipeline::Run;

pub const SUMMARY: &str = "summary.json";
pub const SAMPLES: &str = "samples.jsonl";
pub const TRACES: &str = "traces.csv";
pub const DISCRIMINANT: &str = "discriminant.csv";

/// Deterministic run summary: no timings, paths or thread counts.
pub fn summary(command: &str, r: &Resolved, run: &Run) -> Value {
    let mut config = r.config.clone();
    config.output = None;
    config.threads = None;
    config.strict = false;
    let verdicts: serde_json::Map<String, Value> = run
        .stages
        .iter()
        .map(|s| (s.name.to_string(), Value::String(s.verdict.clone())))
        .collect();
    json!({
        "tool": "fiblab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "map": {
            "name": r.map_name,
            "n": r.map.n(),
            "p": r.map.p(),
            "document": r.map.to_document(),
        },
        "epsilon": r.epsilon,
        "delta": r.delta,
        "eta": r.eta,
        "config": config,
        "verdicts": verdicts,
        "stages": run.stages,
        "reports": run.reports,
    })
}

/// Writes the artifacts of `run` and removes stale ones from earlier runs.
pub fn write_all(dir: &Path, summary: &Value, run: &Run) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    for name in [SUMMARY, SAMPLES, TRACES, DISCRIMINANT] {
        let path = dir.join(name);
        if path.exists() {
            fs::remove_file(&path)
                .with_context(|| format!("cannot remove stale {}", path.display()))?;
        }
    }
    let mut written = Vec::new();

    let path = dir.join(SUMMARY);
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    written.push(path);

    if !run.samples.is_empty() {
        let path = dir.join(SAMPLES);
        let mut w = BufWriter::new(
            fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?,
        );
        for s in &run.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        written.push(path);
    }

    if !run.traces.is_empty() {
        let path = dir.join(TRACES);
        write_traces(&path, run)?;
        written.push(path);
    }

    if run.reports.contains_key("discriminant") {
        let path = dir.join(DISCRIMINANT);
        write_discriminant(&path, run)?;
        written.push(path);
    }
    Ok(written)
}

fn write_traces(path: &Path, run: &Run) -> Result<()> {
    let first = &run.traces[0].1.steps[0];
    let (n, p) = (first.x.len(), first.phi.len());
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut header: Vec<String> = ["seed_index", "step", "t", "r", "f_norm"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..p).map(|i| format!("phi{i}")));
    w.write_record(&header)?;
    for (seed, trace) in &run.traces {
        for (k, step) in trace.steps.iter().enumerate() {
            let mut row = vec![
                seed.to_string(),
                k.to_string(),
                step.t.to_string(),
                step.r.to_string(),
                step.f_norm.to_string(),
            ];
            row.extend(step.x.iter().map(|v| v.to_string()));
            row.extend(step.phi.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_discriminant(path: &Path, run: &Run) -> Result<()> {
    let p = run
        .reports
        .get("discriminant")
        .and_then(|d| d.get("images"))
        .and_then(|i| i.get(0))
        .and_then(|u| u.as_array())
        .map(|u| u.len())
        .unwrap_or(0);
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut header = vec!["radius".to_string()];
    header.extend((0..p).map(|i| format!("u{i}")));
    header.extend(["shell".to_string(), "cluster".to_string()]);
    w.write_record(&header)?;
    let opt = |v: Option<usize>| v.map(|k| k.to_string()).unwrap_or_default();
    for row in &run.delta_rows {
        let mut rec = vec![row.radius.to_string()];
        rec.extend(row.direction.iter().map(|v| v.to_string()));
        rec.push(opt(row.shell));
        rec.push(opt(row.cluster));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
