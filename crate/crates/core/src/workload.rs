//! Workload traces and SWIM-style synthetic generation: exponential
//! inter-arrivals and per-class task-count / duration ranges.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::model::{JobSpec, GB, MB};

/// One job class: selection probability plus the ranges its jobs draw from.
/// Ranges are inclusive; a degenerate range pins the value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobClass {
    pub probability: f64,
    pub map_task_range: (u32, u32),
    pub reduce_task_range: (u32, u32),
    /// Seconds; default [40, 80] per the usual around-a-minute map times.
    pub map_duration_range: (f64, f64),
    /// Seconds; default [60, 600].
    pub reduce_duration_range: (f64, f64),
    #[serde(default = "default_shuffle_range")]
    pub shuffle_bytes_range: (u64, u64),
    pub label: String,
}

fn default_shuffle_range() -> (u64, u64) {
    (100 * MB, GB)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub num_jobs: u32,
    /// Mean of the exponential inter-arrival distribution, seconds.
    pub mean_interarrival: f64,
    pub job_classes: Vec<JobClass>,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.num_jobs == 0 {
            return Err(WorkloadError::InvalidSpec("num_jobs must be >= 1".to_string()));
        }
        if !(self.mean_interarrival > 0.0) {
            return Err(WorkloadError::InvalidSpec(
                "mean_interarrival must be > 0".to_string(),
            ));
        }
        if self.job_classes.is_empty() {
            return Err(WorkloadError::InvalidSpec("job_classes is empty".to_string()));
        }
        let total: f64 = self.job_classes.iter().map(|c| c.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(WorkloadError::InvalidSpec(format!(
                "class probabilities sum to {total}, expected 1"
            )));
        }
        for (i, c) in self.job_classes.iter().enumerate() {
            if c.probability < 0.0 {
                return Err(WorkloadError::InvalidSpec(format!(
                    "class {i}: negative probability"
                )));
            }
            if c.map_task_range.0 < 1 || c.map_task_range.0 > c.map_task_range.1 {
                return Err(WorkloadError::InvalidSpec(format!(
                    "class {i}: empty map_task_range"
                )));
            }
            if c.reduce_task_range.0 > c.reduce_task_range.1 {
                return Err(WorkloadError::InvalidSpec(format!(
                    "class {i}: empty reduce_task_range"
                )));
            }
            if !(c.map_duration_range.0 > 0.0) || c.map_duration_range.0 > c.map_duration_range.1 {
                return Err(WorkloadError::InvalidSpec(format!(
                    "class {i}: empty map_duration_range"
                )));
            }
            if c.reduce_task_range.1 > 0
                && (!(c.reduce_duration_range.0 > 0.0)
                    || c.reduce_duration_range.0 > c.reduce_duration_range.1)
            {
                return Err(WorkloadError::InvalidSpec(format!(
                    "class {i}: empty reduce_duration_range"
                )));
            }
            if c.shuffle_bytes_range.0 > c.shuffle_bytes_range.1 {
                return Err(WorkloadError::InvalidSpec(format!(
                    "class {i}: empty shuffle_bytes_range"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// The generator spec the trace came from, echoed for reproducibility.
    #[serde(default)]
    pub generator_spec: Option<WorkloadSpec>,
}

/// An ordered list of jobs plus provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadTrace {
    pub metadata: TraceMetadata,
    pub jobs: Vec<JobSpec>,
}

impl WorkloadTrace {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.jobs.is_empty() {
            return Err(WorkloadError::EmptyTrace);
        }
        let mut prev = 0.0f64;
        let mut seen: Vec<&str> = Vec::with_capacity(self.jobs.len());
        for (i, job) in self.jobs.iter().enumerate() {
            job.validate().map_err(|e| WorkloadError::InvalidJob {
                index: i,
                message: e.to_string(),
            })?;
            if job.submit_time < prev {
                return Err(WorkloadError::InvalidJob {
                    index: i,
                    message: "submit_time decreases along the trace".to_string(),
                });
            }
            prev = job.submit_time;
            if seen.contains(&job.job_id.as_str()) {
                return Err(WorkloadError::InvalidJob {
                    index: i,
                    message: format!("duplicate job_id {:?}", job.job_id),
                });
            }
            seen.push(&job.job_id);
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.jobs.last().map(|j| j.submit_time).unwrap_or(0.0)
    }
}

fn draw_u32(rng: &mut ChaCha8Rng, range: (u32, u32)) -> u32 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..=range.1)
    }
}

fn draw_f64(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..range.1)
    }
}

fn draw_u64(rng: &mut ChaCha8Rng, range: (u64, u64)) -> u64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..=range.1)
    }
}

/// Generate a trace: inter-arrivals i.i.d. exponential, each job's class
/// sampled by probability, counts and durations uniform within the class
/// ranges. Deterministic per seed.
pub fn generate_workload(
    spec: &WorkloadSpec,
    seed: u64,
    name: &str,
) -> Result<WorkloadTrace, WorkloadError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = Exp::new(1.0 / spec.mean_interarrival).expect("positive rate");
    let mut clock = 0.0f64;
    let mut jobs = Vec::with_capacity(spec.num_jobs as usize);
    for i in 0..spec.num_jobs {
        clock += exp.sample(&mut rng);
        let class = pick_class(&spec.job_classes, rng.gen::<f64>());
        let num_map = draw_u32(&mut rng, class.map_task_range);
        let num_reduce = draw_u32(&mut rng, class.reduce_task_range);
        let map_dur = draw_f64(&mut rng, class.map_duration_range);
        let red_dur = if num_reduce > 0 {
            draw_f64(&mut rng, class.reduce_duration_range)
        } else {
            0.0
        };
        let shuffle = if num_reduce > 0 {
            draw_u64(&mut rng, class.shuffle_bytes_range)
        } else {
            0
        };
        jobs.push(JobSpec {
            job_id: format!("job{i:04}"),
            submit_time: clock,
            num_map_tasks: num_map,
            num_reduce_tasks: num_reduce,
            map_task_duration: map_dur,
            reduce_task_duration: red_dur,
            shuffle_bytes_per_reduce: shuffle,
            reduce_task_memory: GB,
            weight: 1.0,
            job_class_label: class.label.clone(),
            priority: 0,
        });
    }
    let trace = WorkloadTrace {
        metadata: TraceMetadata {
            name: name.to_string(),
            seed: Some(seed),
            generator_spec: Some(spec.clone()),
        },
        jobs,
    };
    trace.validate()?;
    Ok(trace)
}

fn pick_class(classes: &[JobClass], mut u: f64) -> &JobClass {
    for c in classes {
        if u < c.probability {
            return c;
        }
        u -= c.probability;
    }
    classes.last().expect("non-empty classes")
}

/// Scale task counts by `machine_ratio`, rounding to the nearest count and
/// keeping at least one task of each kind a job already had. Durations are
/// untouched.
pub fn scale_trace(trace: &WorkloadTrace, machine_ratio: f64) -> Result<WorkloadTrace, WorkloadError> {
    if !(machine_ratio > 0.0) {
        return Err(WorkloadError::InvalidSpec(
            "machine_ratio must be > 0".to_string(),
        ));
    }
    let scale = |k: u32| -> u32 {
        if k == 0 {
            0
        } else {
            (libm::round(k as f64 * machine_ratio) as u32).max(1)
        }
    };
    let jobs = trace
        .jobs
        .iter()
        .map(|j| JobSpec {
            num_map_tasks: scale(j.num_map_tasks),
            num_reduce_tasks: scale(j.num_reduce_tasks),
            ..j.clone()
        })
        .collect();
    Ok(WorkloadTrace {
        metadata: trace.metadata.clone(),
        jobs,
    })
}

/// FB2009-like class mix: dominated by tiny map-only "select" jobs, with
/// medium "aggregate" and large "transform" jobs making up the rest.
pub fn fb2009_spec() -> WorkloadSpec {
    WorkloadSpec {
        num_jobs: 100,
        mean_interarrival: 13.0,
        job_classes: alloc::vec![
            JobClass {
                probability: 0.53,
                map_task_range: (1, 2),
                reduce_task_range: (0, 0),
                map_duration_range: (40.0, 80.0),
                reduce_duration_range: (60.0, 600.0),
                shuffle_bytes_range: (0, 0),
                label: "select".to_string(),
            },
            JobClass {
                probability: 0.41,
                map_task_range: (3, 500),
                reduce_task_range: (1, 500),
                map_duration_range: (40.0, 80.0),
                reduce_duration_range: (60.0, 600.0),
                shuffle_bytes_range: (100 * MB, GB),
                label: "aggregate".to_string(),
            },
            JobClass {
                probability: 0.06,
                map_task_range: (500, 1200),
                reduce_task_range: (500, 1200),
                map_duration_range: (40.0, 80.0),
                reduce_duration_range: (60.0, 600.0),
                shuffle_bytes_range: (100 * MB, GB),
                label: "transform".to_string(),
            },
        ],
    }
}

/// FB2009-like mix with every reduce phase stripped, for experiments that
/// perturb only the map-size estimator.
pub fn fb2009_map_only_spec() -> WorkloadSpec {
    let mut spec = fb2009_spec();
    for class in &mut spec.job_classes {
        class.reduce_task_range = (0, 0);
        class.shuffle_bytes_range = (0, 0);
    }
    spec
}

/// FB2010-like class mix: small jobs filtered out, map phases needing
/// multiple waves, reduces between 10 and the cluster's reduce slots.
pub fn fb2010_spec() -> WorkloadSpec {
    let map_dur = (40.0, 80.0);
    let red_dur = (60.0, 600.0);
    let shuffle = (100 * MB, GB);
    let class = |p: f64, maps: (u32, u32), reds: (u32, u32), label: &str| JobClass {
        probability: p,
        map_task_range: maps,
        reduce_task_range: reds,
        map_duration_range: map_dur,
        reduce_duration_range: red_dur,
        shuffle_bytes_range: shuffle,
        label: label.to_string(),
    };
    WorkloadSpec {
        num_jobs: 93,
        mean_interarrival: 38.0,
        job_classes: alloc::vec![
            class(0.39, (500, 1500), (1, 10), "expand"),
            class(0.16, (500, 1500), (11, 100), "expand and transform"),
            class(0.11, (500, 1500), (101, 200), "transform"),
            class(0.10, (1501, 2500), (10, 100), "aggregate"),
            class(0.07, (1501, 2500), (101, 200), "transform"),
            class(0.17, (2501, 3500), (101, 200), "transform"),
        ],
    }
}

/// Look up a built-in generator spec by name.
pub fn preset_spec(name: &str) -> Option<WorkloadSpec> {
    match name {
        "fb2009" => Some(fb2009_spec()),
        "fb2009-maponly" => Some(fb2009_map_only_spec()),
        "fb2010" => Some(fb2010_spec()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadError {
    InvalidSpec(String),
    EmptyTrace,
    InvalidJob { index: usize, message: String },
}

impl fmt::Display for WorkloadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkloadError::InvalidSpec(m) => write!(f, "invalid workload spec: {m}"),
            WorkloadError::EmptyTrace => write!(f, "empty trace"),
            WorkloadError::InvalidJob { index, message } => {
                write!(f, "job {index}: {message}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for WorkloadError {}
