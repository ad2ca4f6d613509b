//! Post-processing of simulation results: sojourn times, ECDFs, locality
//! fractions, slot-allocation timelines and cross-seed summaries.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::SimulationResult;
use crate::model::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SojournScope {
    Map,
    Reduce,
    /// Submit time to last phase completion.
    Aggregate,
}

impl fmt::Display for SojournScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SojournScope::Map => write!(f, "map"),
            SojournScope::Reduce => write!(f, "reduce"),
            SojournScope::Aggregate => write!(f, "aggregate"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SojournRecord {
    pub job_id: String,
    pub scope: SojournScope,
    pub arrival: f64,
    pub completion: f64,
    pub sojourn: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    /// Sojourns over an unfinished run are undefined.
    Incomplete { unfinished: Vec<String> },
    EmptyInput,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::Incomplete { unfinished } => {
                write!(f, "simulation incomplete; unfinished jobs: {unfinished:?}")
            }
            MetricsError::EmptyInput => write!(f, "empty input"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MetricsError {}

/// One record per phase per job plus an aggregate record per job. Reduce
/// sojourns run from the slowstart arrival; aggregates from submission.
pub fn compute_sojourns(result: &SimulationResult) -> Result<Vec<SojournRecord>, MetricsError> {
    if !result.completed {
        return Err(MetricsError::Incomplete {
            unfinished: result.unfinished_jobs.clone(),
        });
    }
    let mut out = Vec::new();
    for job in &result.jobs {
        let map_done = job.map.completion.expect("completed run");
        out.push(SojournRecord {
            job_id: job.job_id.clone(),
            scope: SojournScope::Map,
            arrival: job.map.arrival,
            completion: map_done,
            sojourn: map_done - job.map.arrival,
        });
        let mut last = map_done;
        if let Some(red) = &job.reduce {
            let red_done = red.completion.expect("completed run");
            out.push(SojournRecord {
                job_id: job.job_id.clone(),
                scope: SojournScope::Reduce,
                arrival: red.arrival,
                completion: red_done,
                sojourn: red_done - red.arrival,
            });
            last = last.max(red_done);
        }
        out.push(SojournRecord {
            job_id: job.job_id.clone(),
            scope: SojournScope::Aggregate,
            arrival: job.submit_time,
            completion: last,
            sojourn: last - job.submit_time,
        });
    }
    Ok(out)
}

/// Step points of an empirical CDF: (value, cumulative fraction), values
/// sorted, fractions strictly increasing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfSeries {
    pub points: Vec<(f64, f64)>,
}

pub fn ecdf(values: &[f64]) -> Result<EcdfSeries, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => points.push((v, frac)),
        }
    }
    Ok(EcdfSeries { points })
}

/// Fraction of launched map task attempts that read their block locally.
pub fn locality_fraction(result: &SimulationResult) -> Result<f64, MetricsError> {
    if result.total_map_launches == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(result.local_map_launches as f64 / result.total_map_launches as f64)
}

/// Per-job slot-count step series of one kind, built from slot-holding
/// intervals. Returns (time, job_index, slots_after) change points.
pub fn allocation_timeline(
    result: &SimulationResult,
    kind: TaskKind,
) -> Vec<(f64, u32, i64)> {
    let mut edges: Vec<(f64, i64, u32)> = Vec::new();
    for si in &result.slot_intervals {
        if si.kind != kind {
            continue;
        }
        edges.push((si.start, 1, si.job_index));
        edges.push((si.end, -1, si.job_index));
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut counts: alloc::collections::BTreeMap<u32, i64> = alloc::collections::BTreeMap::new();
    let mut out = Vec::with_capacity(edges.len());
    for (t, delta, job) in edges {
        let c = counts.entry(job).or_insert(0);
        *c += delta;
        out.push((t, job, *c));
    }
    out
}

/// Peak concurrent slots a job held, per the timeline.
pub fn peak_slots(result: &SimulationResult, kind: TaskKind, job_index: u32) -> i64 {
    allocation_timeline(result, kind)
        .into_iter()
        .filter(|(_, j, _)| *j == job_index)
        .map(|(_, _, c)| c)
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize_values(values: &[f64]) -> Result<DistributionSummary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    Ok(DistributionSummary {
        count: n,
        mean,
        median: percentile(&sorted, 0.50),
        p95: percentile(&sorted, 0.95),
        min: sorted[0],
        max: sorted[n - 1],
    })
}

/// Nearest-rank percentile over a pre-sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = libm::ceil(q * sorted.len() as f64) as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Across-seed roll-up of one scalar metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seeds: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize_across_seeds(per_seed: &[f64]) -> Result<SeedSummary, MetricsError> {
    if per_seed.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = per_seed.len() as f64;
    let mean = per_seed.iter().sum::<f64>() / n;
    let var = per_seed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in per_seed {
        min = min.min(v);
        max = max.max(v);
    }
    Ok(SeedSummary {
        seeds: per_seed.len(),
        mean,
        std: libm::sqrt(var),
        min,
        max,
    })
}

/// Mean sojourn of the given scope across all jobs of a completed run.
pub fn mean_sojourn(result: &SimulationResult, scope: SojournScope) -> Result<f64, MetricsError> {
    let sojourns = compute_sojourns(result)?;
    let values: Vec<f64> = sojourns
        .iter()
        .filter(|s| s.scope == scope)
        .map(|s| s.sojourn)
        .collect();
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{JobOutcome, PhaseOutcome};
    use alloc::string::ToString;
    use alloc::vec;

    fn result_with(jobs: Vec<JobOutcome>) -> SimulationResult {
        SimulationResult {
            scheduler: "test".to_string(),
            seed: 0,
            completed: true,
            end_time: 100.0,
            jobs,
            attempts: vec![],
            slot_intervals: vec![],
            local_map_launches: 0,
            total_map_launches: 0,
            event_log: vec![],
            decisions: vec![],
            unfinished_jobs: vec![],
        }
    }

    fn job(id: &str, submit: f64, map_done: f64, reduce: Option<(f64, f64)>) -> JobOutcome {
        JobOutcome {
            job_id: id.to_string(),
            job_index: 0,
            label: String::new(),
            submit_time: submit,
            map: PhaseOutcome {
                phase: 0,
                kind: TaskKind::Map,
                num_tasks: 1,
                arrival: submit,
                first_launch: Some(submit),
                completion: Some(map_done),
            },
            reduce: reduce.map(|(arr, done)| PhaseOutcome {
                phase: 1,
                kind: TaskKind::Reduce,
                num_tasks: 1,
                arrival: arr,
                first_launch: Some(arr),
                completion: Some(done),
            }),
        }
    }

    #[test]
    fn sojourns_per_phase_and_aggregate() {
        let r = result_with(vec![job("a", 0.0, 10.0, Some((8.0, 25.0)))]);
        let s = compute_sojourns(&r).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].scope, SojournScope::Map);
        assert_eq!(s[0].sojourn, 10.0);
        assert_eq!(s[1].scope, SojournScope::Reduce);
        assert_eq!(s[1].sojourn, 17.0);
        assert_eq!(s[2].scope, SojournScope::Aggregate);
        assert_eq!(s[2].sojourn, 25.0);
    }

    #[test]
    fn map_only_job_aggregate_equals_map() {
        let r = result_with(vec![job("a", 5.0, 30.0, None)]);
        let s = compute_sojourns(&r).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].sojourn, 25.0);
        assert_eq!(s[1].sojourn, 25.0);
    }

    #[test]
    fn incomplete_run_is_an_error() {
        let mut r = result_with(vec![]);
        r.completed = false;
        r.unfinished_jobs = vec!["a".to_string()];
        match compute_sojourns(&r) {
            Err(MetricsError::Incomplete { unfinished }) => {
                assert_eq!(unfinished, vec!["a".to_string()])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fig1_fsp_sojourns() {
        // hand-traced FSP schedule: completions 50/20/30 for arrivals
        // 0/10/15 give sojourns 50/10/15, mean 25
        let r = result_with(vec![
            job("j1", 0.0, 50.0, None),
            job("j2", 10.0, 20.0, None),
            job("j3", 15.0, 30.0, None),
        ]);
        let s = compute_sojourns(&r).unwrap();
        let sojourns: Vec<f64> = s
            .iter()
            .filter(|x| x.scope == SojournScope::Aggregate)
            .map(|x| x.sojourn)
            .collect();
        assert_eq!(sojourns, vec![50.0, 10.0, 15.0]);
        let mean = sojourns.iter().sum::<f64>() / 3.0;
        assert!((mean - 25.0).abs() < 1e-12);
    }

    #[test]
    fn ecdf_steps_merge_duplicates() {
        let e = ecdf(&[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert_eq!(e.points, vec![(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]);
    }

    #[test]
    fn ecdf_is_permutation_invariant() {
        let a = ecdf(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        let b = ecdf(&[2.0, 2.0, 3.0, 1.0]).unwrap();
        assert_eq!(a, b);
        assert!(ecdf(&[]).is_err());
    }

    #[test]
    fn summary_mean_matches_exactly() {
        let values = [3.0, 1.0, 2.0, 6.0];
        let s = summarize_values(&values).unwrap();
        let expect = values.iter().sum::<f64>() / 4.0;
        assert_eq!(s.mean, expect);
        assert_eq!(s.median, 2.0);
        assert_eq!(s.p95, 6.0);
    }

    #[test]
    fn seed_rollup() {
        let s = summarize_across_seeds(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-12);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 3.0);
    }
}
