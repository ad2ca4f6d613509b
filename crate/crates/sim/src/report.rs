//! Report files: sojourn CSVs, ECDF series, allocation timelines, the run
//! summary JSON and optional newline-delimited event logs. All writes go
//! through a temp-file rename so partially written reports never appear.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use hfsp_core::engine::SimulationResult;
use hfsp_core::metrics::{
    allocation_timeline, compute_sojourns, ecdf, locality_fraction, summarize_values,
    DistributionSummary, EcdfSeries, SojournRecord, SojournScope,
};
use hfsp_core::TaskKind;
use serde::{Deserialize, Serialize};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_sojourns_csv(path: &Path, sojourns: &[SojournRecord]) -> io::Result<()> {
    let mut out = String::from("job_id,phase,arrival,completion,sojourn\n");
    for s in sojourns {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.job_id, s.scope, s.arrival, s.completion, s.sojourn
        ));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_sojourns_csv(path: &Path) -> anyhow::Result<Vec<SojournRecord>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            anyhow::bail!("{}: line {}: expected 5 fields", path.display(), lineno + 1);
        }
        let scope = match fields[1] {
            "map" => SojournScope::Map,
            "reduce" => SojournScope::Reduce,
            "aggregate" => SojournScope::Aggregate,
            other => anyhow::bail!("{}: unknown phase {other:?}", path.display()),
        };
        out.push(SojournRecord {
            job_id: fields[0].to_string(),
            scope,
            arrival: fields[2].parse()?,
            completion: fields[3].parse()?,
            sojourn: fields[4].parse()?,
        });
    }
    Ok(out)
}

pub fn write_ecdf_csv(path: &Path, series: &EcdfSeries) -> io::Result<()> {
    let mut out = String::from("value,fraction\n");
    for (v, f) in &series.points {
        out.push_str(&format!("{v},{f}\n"));
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_timeline_csv(path: &Path, result: &SimulationResult) -> io::Result<()> {
    let mut out = String::from("time,job_id,kind,slots\n");
    for kind in [TaskKind::Map, TaskKind::Reduce] {
        for (t, job_index, slots) in allocation_timeline(result, kind) {
            let job_id = &result.jobs[job_index as usize].job_id;
            out.push_str(&format!("{t},{job_id},{kind},{slots}\n"));
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_event_log_ndjson(path: &Path, result: &SimulationResult) -> io::Result<()> {
    let mut out = String::new();
    for record in &result.event_log {
        out.push_str(&serde_json::to_string(record).expect("event record"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_decisions_ndjson(path: &Path, result: &SimulationResult) -> io::Result<()> {
    let mut out = String::new();
    for record in &result.decisions {
        out.push_str(&serde_json::to_string(record).expect("decision record"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Headline numbers for one completed run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scheduler: String,
    pub seed: u64,
    pub end_time: f64,
    pub aggregate_sojourn: DistributionSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_sojourn: Option<DistributionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduce_sojourn: Option<DistributionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_locality: Option<f64>,
}

pub fn run_report(result: &SimulationResult) -> anyhow::Result<RunReport> {
    let sojourns = compute_sojourns(result).map_err(|e| anyhow::anyhow!("{e}"))?;
    let by_scope = |scope: SojournScope| -> Vec<f64> {
        sojourns
            .iter()
            .filter(|s| s.scope == scope)
            .map(|s| s.sojourn)
            .collect()
    };
    let aggregate = summarize_values(&by_scope(SojournScope::Aggregate))
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let map = summarize_values(&by_scope(SojournScope::Map)).ok();
    let reduce = summarize_values(&by_scope(SojournScope::Reduce)).ok();
    Ok(RunReport {
        scheduler: result.scheduler.clone(),
        seed: result.seed,
        end_time: result.end_time,
        aggregate_sojourn: aggregate,
        map_sojourn: map,
        reduce_sojourn: reduce,
        map_locality: locality_fraction(result).ok(),
    })
}

/// Write the per-run report files under `dir`.
pub fn write_run_files(
    dir: &Path,
    result: &SimulationResult,
    with_event_log: bool,
) -> anyhow::Result<RunReport> {
    let sojourns = compute_sojourns(result).map_err(|e| anyhow::anyhow!("{e}"))?;
    write_sojourns_csv(&dir.join("sojourns.csv"), &sojourns)?;
    for (scope, name) in [
        (SojournScope::Aggregate, "ecdf_aggregate.csv"),
        (SojournScope::Map, "ecdf_map.csv"),
        (SojournScope::Reduce, "ecdf_reduce.csv"),
    ] {
        let values: Vec<f64> = sojourns
            .iter()
            .filter(|s| s.scope == scope)
            .map(|s| s.sojourn)
            .collect();
        if let Ok(series) = ecdf(&values) {
            write_ecdf_csv(&dir.join(name), &series)?;
        }
    }
    write_timeline_csv(&dir.join("timeline.csv"), result)?;
    if with_event_log {
        write_event_log_ndjson(&dir.join("events.ndjson"), result)?;
    }
    if !result.decisions.is_empty() {
        write_decisions_ndjson(&dir.join("decisions.ndjson"), result)?;
    }
    run_report(result)
}

/// Directory layout helper: `<out>/<scheduler>/seed<k>`.
pub fn run_dir(out: &Path, scheduler: &str, seed: u64) -> PathBuf {
    out.join(scheduler).join(format!("seed{seed}"))
}
