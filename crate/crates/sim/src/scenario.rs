//! Built-in replay scenarios: the single-slot and multi-processor
//! idealized schedules, and the five-job preemption micro-benchmark.

use anyhow::anyhow;
use hfsp_core::engine::{run_simulation, SimulationResult};
use hfsp_core::hfsp::{HfspConfig, HfspScheduler, ReducePreemption};
use hfsp_core::metrics::{compute_sojourns, SojournScope};
use hfsp_core::model::{ClusterConfig, JobSpec, GB, MB};
use hfsp_core::workload::{TraceMetadata, WorkloadTrace};
use serde::Serialize;

fn job(
    id: &str,
    submit: f64,
    maps: u32,
    map_dur: f64,
    reduces: u32,
    reduce_dur: f64,
    shuffle: u64,
    memory: u64,
) -> JobSpec {
    JobSpec {
        job_id: id.to_string(),
        submit_time: submit,
        num_map_tasks: maps,
        num_reduce_tasks: reduces,
        map_task_duration: map_dur,
        reduce_task_duration: reduce_dur,
        shuffle_bytes_per_reduce: shuffle,
        reduce_task_memory: memory,
        weight: 1.0,
        job_class_label: String::new(),
        priority: 0,
    }
}

fn trace(name: &str, jobs: Vec<JobSpec>) -> WorkloadTrace {
    WorkloadTrace {
        metadata: TraceMetadata {
            name: name.to_string(),
            seed: None,
            generator_spec: None,
        },
        jobs,
    }
}

pub struct Scenario {
    pub name: &'static str,
    pub trace: WorkloadTrace,
    pub cluster: ClusterConfig,
    pub hfsp: HfspConfig,
}

/// Three jobs, each needing the whole machine, on a single slot: sizes
/// 30/10/10 arriving at 0/10/15. The work rides on instant-swap reduce
/// tasks so the one slot can actually be preempted, with a negligible map
/// in front of each phase.
pub fn fig1() -> Scenario {
    let tiny_map = 0.05;
    Scenario {
        name: "fig1",
        trace: trace(
            "fig1",
            vec![
                job("j1", 0.0, 1, tiny_map, 1, 30.0, 0, 0),
                job("j2", 10.0, 1, tiny_map, 1, 10.0, 0, 0),
                job("j3", 15.0, 1, tiny_map, 1, 10.0, 0, 0),
            ],
        ),
        cluster: ClusterConfig {
            num_machines: 1,
            map_slots_per_machine: 1,
            reduce_slots_per_machine: 1,
            replication_factor: 1,
            remote_read_penalty: 1.0,
            ..ClusterConfig::default()
        },
        hfsp: HfspConfig {
            perfect_estimates: true,
            ..HfspConfig::default()
        },
    }
}

/// The multi-processor variant: jobs demanding 100% / 55% / 35% of twenty
/// slots, with sizes worth 30/10/10 seconds at their full share. The big
/// job is cut into short tasks so wait-based preemption can release slots
/// at task granularity, as the idealized schedule assumes.
pub fn fig2() -> Scenario {
    Scenario {
        name: "fig2",
        trace: trace(
            "fig2",
            vec![
                job("j1", 0.0, 300, 2.0, 0, 0.0, 0, 0),
                job("j2", 10.0, 11, 10.0, 0, 0.0, 0, 0),
                job("j3", 13.0, 7, 10.0, 0, 0.0, 0, 0),
            ],
        ),
        cluster: ClusterConfig {
            num_machines: 20,
            map_slots_per_machine: 1,
            reduce_slots_per_machine: 1,
            replication_factor: 20,
            remote_read_penalty: 1.0,
            ..ClusterConfig::default()
        },
        hfsp: HfspConfig {
            perfect_estimates: true,
            ..HfspConfig::default()
        },
    }
}

/// The five-job preemption micro-benchmark: 4 machines with 2 reduce slots
/// each; j1 brings 11 reduce tasks of roughly 500 s at t = 140 s and the
/// four later jobs need 5 slots between them at t = 150 s. Their minute-long
/// maps give j1's tasks enough progress for the preemption modes to
/// separate.
pub fn micro44(preemption: ReducePreemption) -> Scenario {
    let shuffle = 200 * MB;
    Scenario {
        name: "micro44",
        trace: trace(
            "micro44",
            vec![
                job("j1", 140.0, 1, 1.0, 11, 500.0, shuffle, GB),
                job("j2", 150.0, 1, 60.0, 2, 450.0, shuffle, GB),
                job("j3", 150.0, 1, 60.0, 1, 450.0, shuffle, GB),
                job("j4", 150.0, 1, 60.0, 1, 450.0, shuffle, GB),
                job("j5", 150.0, 1, 60.0, 1, 450.0, shuffle, GB),
            ],
        ),
        cluster: ClusterConfig {
            num_machines: 4,
            map_slots_per_machine: 4,
            reduce_slots_per_machine: 2,
            replication_factor: 3,
            remote_read_penalty: 1.0,
            ..ClusterConfig::default()
        },
        hfsp: HfspConfig {
            reduce_preemption: preemption,
            ..HfspConfig::default()
        },
    }
}

pub fn by_name(name: &str, preemption: ReducePreemption) -> anyhow::Result<Scenario> {
    match name {
        "fig1" => Ok(fig1()),
        "fig2" => Ok(fig2()),
        "micro44" => Ok(micro44(preemption)),
        other => Err(anyhow!(
            "unknown scenario {other:?} (expected fig1, fig2 or micro44)"
        )),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub completions: Vec<(String, f64)>,
    pub sojourns: Vec<(String, f64)>,
    pub mean_sojourn: f64,
}

pub fn run_scenario(s: &Scenario, seed: u64) -> anyhow::Result<(SimulationResult, ScenarioOutcome)> {
    let mut sched = HfspScheduler::new(s.hfsp.clone());
    let result = run_simulation(&s.trace, &s.cluster, &mut sched, seed)
        .map_err(|e| anyhow!("{e}"))?;
    let outcome = outcome_of(s.name, &result)?;
    Ok((result, outcome))
}

pub fn outcome_of(name: &str, result: &SimulationResult) -> anyhow::Result<ScenarioOutcome> {
    let sojourns = compute_sojourns(result).map_err(|e| anyhow!("{e}"))?;
    let per_job: Vec<(String, f64, f64)> = sojourns
        .iter()
        .filter(|s| s.scope == SojournScope::Aggregate)
        .map(|s| (s.job_id.clone(), s.completion, s.sojourn))
        .collect();
    let mean = per_job.iter().map(|(_, _, s)| s).sum::<f64>() / per_job.len() as f64;
    Ok(ScenarioOutcome {
        name: name.to_string(),
        completions: per_job.iter().map(|(j, c, _)| (j.clone(), *c)).collect(),
        sojourns: per_job.iter().map(|(j, _, s)| (j.clone(), *s)).collect(),
        mean_sojourn: mean,
    })
}

/// Reference processor-sharing completion times for a batch of jobs with
/// given serialized sizes, parallelism caps and arrival times, computed by
/// progressive filling between events.
pub fn fluid_ps_completions(
    jobs: &[(f64, f64, f64)], // (arrival, size, max parallelism)
    capacity: f64,
) -> Vec<f64> {
    let n = jobs.len();
    let mut remaining: Vec<f64> = jobs.iter().map(|j| j.1).collect();
    let mut done = vec![f64::NAN; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| jobs[a].0.total_cmp(&jobs[b].0));
    let mut next = 0usize;
    let mut active: Vec<usize> = Vec::new();
    let mut t = 0.0;
    loop {
        while next < n && jobs[order[next]].0 <= t + 1e-12 {
            active.push(order[next]);
            next += 1;
        }
        if active.is_empty() {
            if next >= n {
                break;
            }
            t = jobs[order[next]].0;
            continue;
        }
        // progressive filling with demand caps
        let mut rates = vec![0.0f64; active.len()];
        let mut fixed = vec![false; active.len()];
        let mut cap_left = capacity;
        loop {
            let free = fixed.iter().filter(|f| !**f).count();
            if free == 0 || cap_left <= 1e-15 {
                break;
            }
            let share = cap_left / free as f64;
            let mut any = false;
            for (k, &i) in active.iter().enumerate() {
                if !fixed[k] && jobs[i].2 <= share {
                    rates[k] = jobs[i].2;
                    cap_left -= jobs[i].2;
                    fixed[k] = true;
                    any = true;
                }
            }
            if !any {
                for k in 0..active.len() {
                    if !fixed[k] {
                        rates[k] = share;
                        fixed[k] = true;
                    }
                }
                break;
            }
        }
        let mut step = f64::INFINITY;
        for (k, &i) in active.iter().enumerate() {
            if rates[k] > 0.0 {
                step = step.min(remaining[i] / rates[k]);
            }
        }
        if next < n {
            step = step.min(jobs[order[next]].0 - t);
        }
        assert!(step.is_finite());
        t += step;
        let mut still = Vec::new();
        for (k, &i) in active.iter().enumerate() {
            remaining[i] -= rates[k] * step;
            if remaining[i] <= 1e-9 * jobs[i].1.max(1.0) {
                done[i] = t;
            } else {
                still.push(i);
            }
        }
        active = still;
    }
    done
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ps_reference_for_the_single_slot_jobs() {
        let done = fluid_ps_completions(
            &[(0.0, 30.0, 1.0), (10.0, 10.0, 1.0), (15.0, 10.0, 1.0)],
            1.0,
        );
        assert!((done[0] - 50.0).abs() < 1e-9);
        assert!((done[1] - 37.5).abs() < 1e-9);
        assert!((done[2] - 42.5).abs() < 1e-9);
    }

    #[test]
    fn ps_reference_for_the_multi_processor_jobs() {
        // capacities as slot counts: j1 can use all 20, j2 11, j3 7
        let done = fluid_ps_completions(
            &[(0.0, 600.0, 20.0), (10.0, 110.0, 11.0), (13.0, 70.0, 7.0)],
            20.0,
        );
        assert!((done[1] - 24.5).abs() < 1e-9, "{done:?}");
        assert!((done[2] - 23.5).abs() < 1e-9, "{done:?}");
        assert!((done[0] - 39.0).abs() < 1e-9, "{done:?}");
        let mean = (done[0] + (done[1] - 10.0) + (done[2] - 13.0)) / 3.0;
        assert!((mean - 64.0 / 3.0).abs() < 1e-9);
    }
}
