//! Runs simulations from a resolved configuration: scheduler construction
//! by name, parallel seed sweeps and the side-by-side comparison summary.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Context};
use hfsp_core::baselines::{FairScheduler, FifoScheduler};
use hfsp_core::engine::{run_simulation_with, EngineOptions, Scheduler, SimulationResult};
use hfsp_core::hfsp::HfspScheduler;
use hfsp_core::metrics::{summarize_across_seeds, SeedSummary};
use hfsp_core::workload::{generate_workload, preset_spec, WorkloadTrace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{JobSource, RunConfig};
use crate::report::{run_dir, run_report, write_run_files, RunReport};
use crate::trace_io::parse_trace;

pub fn build_scheduler(name: &str, cfg: &RunConfig) -> anyhow::Result<Box<dyn Scheduler>> {
    match name {
        "fifo" => Ok(Box::new(FifoScheduler)),
        "fair" => Ok(Box::new(FairScheduler::new((&cfg.fair).into()))),
        "hfsp" => Ok(Box::new(HfspScheduler::new(cfg.hfsp.clone()))),
        other => Err(anyhow!("unknown scheduler {other:?}")),
    }
}

/// Materialize the trace for one seed. Traces from files are shared across
/// seeds; generated workloads draw fresh arrivals per seed.
pub fn load_trace(cfg: &RunConfig, seed: u64) -> anyhow::Result<WorkloadTrace> {
    match cfg.source()? {
        JobSource::TracePath(path) => {
            parse_trace(&path).map_err(|e| anyhow!("{e}"))
        }
        JobSource::Preset(name) => {
            let spec = preset_spec(&name).expect("validated preset");
            generate_workload(&spec, seed, &name).map_err(|e| anyhow!("{e}"))
        }
        JobSource::Spec(spec) => {
            generate_workload(&spec, seed, "custom").map_err(|e| anyhow!("{e}"))
        }
    }
}

pub fn engine_options(cfg: &RunConfig) -> EngineOptions {
    EngineOptions {
        time_cap: cfg.time_cap,
        cost_model: None,
        record_events: true,
    }
}

pub fn run_one(cfg: &RunConfig, scheduler: &str, seed: u64) -> anyhow::Result<SimulationResult> {
    let trace = load_trace(cfg, seed)?;
    let mut sched = build_scheduler(scheduler, cfg)?;
    run_simulation_with(&trace, &cfg.cluster, sched.as_mut(), seed, &engine_options(cfg))
        .map_err(|e| anyhow!("{e}"))
}

/// Per-scheduler roll-up across seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchedulerSummary {
    pub runs: Vec<RunReport>,
    pub mean_aggregate_sojourn: SeedSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_map_sojourn: Option<SeedSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_reduce_sojourn: Option<SeedSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_locality: Option<SeedSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareSummary {
    pub seeds: Vec<u64>,
    pub schedulers: BTreeMap<String, SchedulerSummary>,
}

fn summarize_runs(runs: Vec<RunReport>) -> anyhow::Result<SchedulerSummary> {
    let agg: Vec<f64> = runs.iter().map(|r| r.aggregate_sojourn.mean).collect();
    let maps: Vec<f64> = runs.iter().filter_map(|r| r.map_sojourn.map(|s| s.mean)).collect();
    let reduces: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.reduce_sojourn.map(|s| s.mean))
        .collect();
    let locality: Vec<f64> = runs.iter().filter_map(|r| r.map_locality).collect();
    Ok(SchedulerSummary {
        mean_aggregate_sojourn: summarize_across_seeds(&agg).map_err(|e| anyhow!("{e}"))?,
        mean_map_sojourn: summarize_across_seeds(&maps).ok(),
        mean_reduce_sojourn: summarize_across_seeds(&reduces).ok(),
        map_locality: summarize_across_seeds(&locality).ok(),
        runs,
    })
}

/// Run the full scheduler-by-seed matrix, write per-run files and the
/// side-by-side summary. The same trace and seeds are used for every
/// scheduler. Simulations run in parallel; outputs are written from this
/// thread in a deterministic order.
pub fn run_matrix(cfg: &RunConfig, out: &Path) -> anyhow::Result<CompareSummary> {
    cfg.validate()?;
    let tasks: Vec<(String, u64)> = cfg
        .schedulers
        .iter()
        .flat_map(|s| cfg.seeds.iter().map(move |&k| (s.clone(), k)))
        .collect();
    let mut results: Vec<((String, u64), SimulationResult)> = tasks
        .par_iter()
        .map(|(scheduler, seed)| {
            run_one(cfg, scheduler, *seed).map(|r| ((scheduler.clone(), *seed), r))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    results.sort_by(|a, b| a.0.cmp(&b.0));

    let mut by_scheduler: BTreeMap<String, Vec<RunReport>> = BTreeMap::new();
    for ((scheduler, seed), result) in &results {
        let dir = run_dir(out, scheduler, *seed);
        let report = write_run_files(&dir, result, cfg.event_log)
            .with_context(|| format!("writing reports for {scheduler} seed {seed}"))?;
        by_scheduler.entry(scheduler.clone()).or_default().push(report);
    }
    let mut schedulers = BTreeMap::new();
    for (name, runs) in by_scheduler {
        schedulers.insert(name, summarize_runs(runs)?);
    }
    let summary = CompareSummary {
        seeds: cfg.seeds.clone(),
        schedulers,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary");
    crate::report::write_atomic(&out.join("summary.json"), text.as_bytes())?;
    cfg.write_echo(out)?;
    Ok(summary)
}

/// In-memory variant for tests and scenarios: no files, single scheduler.
pub fn sweep_in_memory(
    cfg: &RunConfig,
    scheduler: &str,
) -> anyhow::Result<Vec<SimulationResult>> {
    cfg.seeds
        .par_iter()
        .map(|&seed| run_one(cfg, scheduler, seed))
        .collect()
}

/// Rebuild summary.json from sojourn CSVs already on disk.
pub fn reaggregate(out: &Path) -> anyhow::Result<CompareSummary> {
    use hfsp_core::metrics::{summarize_values, SojournScope};
    let mut schedulers: BTreeMap<String, Vec<RunReport>> = BTreeMap::new();
    let mut seeds: Vec<u64> = Vec::new();
    for sched_entry in std::fs::read_dir(out)? {
        let sched_entry = sched_entry?;
        if !sched_entry.file_type()?.is_dir() {
            continue;
        }
        let scheduler = sched_entry.file_name().to_string_lossy().to_string();
        for run_entry in std::fs::read_dir(sched_entry.path())? {
            let run_entry = run_entry?;
            let name = run_entry.file_name().to_string_lossy().to_string();
            let Some(seed) = name.strip_prefix("seed").and_then(|s| s.parse::<u64>().ok()) else {
                continue;
            };
            let csv = run_entry.path().join("sojourns.csv");
            if !csv.exists() {
                continue;
            }
            let sojourns = crate::report::read_sojourns_csv(&csv)?;
            let values = |scope: SojournScope| -> Vec<f64> {
                sojourns
                    .iter()
                    .filter(|s| s.scope == scope)
                    .map(|s| s.sojourn)
                    .collect()
            };
            let aggregate = summarize_values(&values(SojournScope::Aggregate))
                .map_err(|e| anyhow!("{}: {e}", csv.display()))?;
            schedulers.entry(scheduler.clone()).or_default().push(RunReport {
                scheduler: scheduler.clone(),
                seed,
                end_time: f64::NAN,
                aggregate_sojourn: aggregate,
                map_sojourn: summarize_values(&values(SojournScope::Map)).ok(),
                reduce_sojourn: summarize_values(&values(SojournScope::Reduce)).ok(),
                map_locality: None,
            });
            if !seeds.contains(&seed) {
                seeds.push(seed);
            }
        }
    }
    seeds.sort_unstable();
    let mut summary = BTreeMap::new();
    for (name, mut runs) in schedulers {
        runs.sort_by_key(|r| r.seed);
        summary.insert(name, summarize_runs(runs)?);
    }
    let summary = CompareSummary {
        seeds,
        schedulers: summary,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary");
    crate::report::write_atomic(&out.join("summary.json"), text.as_bytes())?;
    Ok(summary)
}

pub fn mean_aggregate_sojourn(result: &SimulationResult) -> anyhow::Result<f64> {
    Ok(run_report(result)?.aggregate_sojourn.mean)
}
