//! Domain types shared by every scheduler and by the event engine: jobs,
//! phase-jobs, cluster configuration, task attempts and block placement.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Decimal megabyte, matching how disk vendors (and the swap-time
/// measurements this model is calibrated against) count bytes.
pub const MB: u64 = 1_000_000;
/// Decimal gigabyte.
pub const GB: u64 = 1_000_000_000;

/// Index of a machine in the cluster, dense in `0..num_machines`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MachineId(pub u32);

/// Dense identifier assigned to a phase-job in arrival order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhaseId(pub u32);

/// A task within a phase-job, identified by its index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskRef {
    pub phase: PhaseId,
    pub index: u32,
}

/// Which slot pool a task competes for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    Map,
    Reduce,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::Map => write!(f, "map"),
            TaskKind::Reduce => write!(f, "reduce"),
        }
    }
}

/// A submitted two-phase job as it appears in a workload trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub job_id: String,
    /// Submission time on the simulation clock, seconds.
    pub submit_time: f64,
    pub num_map_tasks: u32,
    /// May be zero for map-only jobs.
    pub num_reduce_tasks: u32,
    /// Nominal per-task seconds for map tasks.
    pub map_task_duration: f64,
    /// Nominal per-task seconds for reduce tasks (execution stage, shuffle excluded).
    #[serde(default)]
    pub reduce_task_duration: f64,
    /// Bytes moved to each reduce task during shuffle.
    #[serde(default)]
    pub shuffle_bytes_per_reduce: u64,
    /// Working-set bytes per reduce task, charged on suspend/resume.
    #[serde(default = "default_reduce_memory")]
    pub reduce_task_memory: u64,
    /// GPS weight; jobs with weight w receive w times the virtual share.
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default)]
    pub job_class_label: String,
    /// FIFO scans in order of (priority desc, submit asc); 0 unless a trace says otherwise.
    #[serde(default)]
    pub priority: i32,
}

fn default_weight() -> f64 {
    1.0
}

fn default_reduce_memory() -> u64 {
    GB
}

impl JobSpec {
    /// Check the structural invariants, returning the first violation.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.job_id.is_empty() {
            return Err(ModelError::InvalidJob {
                field: "job_id",
                reason: "must be non-empty",
            });
        }
        if !(self.submit_time >= 0.0) {
            return Err(ModelError::InvalidJob {
                field: "submit_time",
                reason: "must be >= 0",
            });
        }
        if self.num_map_tasks < 1 {
            return Err(ModelError::InvalidJob {
                field: "num_map_tasks",
                reason: "must be >= 1",
            });
        }
        if !(self.map_task_duration > 0.0) {
            return Err(ModelError::InvalidJob {
                field: "map_task_duration",
                reason: "must be > 0",
            });
        }
        if self.num_reduce_tasks > 0 && !(self.reduce_task_duration > 0.0) {
            return Err(ModelError::InvalidJob {
                field: "reduce_task_duration",
                reason: "must be > 0 when reduce tasks exist",
            });
        }
        if !(self.weight > 0.0) {
            return Err(ModelError::InvalidJob {
                field: "weight",
                reason: "must be > 0",
            });
        }
        Ok(())
    }

    /// Serialized size of the map phase: sum of nominal task runtimes.
    pub fn map_serialized_size(&self) -> f64 {
        self.num_map_tasks as f64 * self.map_task_duration
    }

    /// Serialized size of the reduce phase including the shuffle component
    /// under the given transfer bandwidth.
    pub fn reduce_serialized_size(&self, disk_bandwidth: f64) -> f64 {
        let shuffle = self.shuffle_seconds(disk_bandwidth);
        self.num_reduce_tasks as f64 * (self.reduce_task_duration + shuffle)
    }

    /// Modeled shuffle transfer seconds for one reduce task.
    pub fn shuffle_seconds(&self, disk_bandwidth: f64) -> f64 {
        if self.num_reduce_tasks == 0 {
            0.0
        } else {
            self.shuffle_bytes_per_reduce as f64 / disk_bandwidth
        }
    }
}

/// Lifecycle of a phase-job from the estimator's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseState {
    /// Arrived; size known only through the initial estimate.
    Training,
    /// Trained (or oracle) estimate in effect.
    Estimated,
    Completed,
}

/// One schedulable phase of a job. The map and reduce phases of a submitted
/// job are handled as two separate jobs competing for their kind's slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseJob {
    pub phase_id: PhaseId,
    /// Index of the parent job in the trace.
    pub parent_job: u32,
    pub kind: TaskKind,
    pub num_tasks: u32,
    /// Map phases arrive at submit time; reduce phases when slowstart fires.
    pub arrival_time: f64,
    pub state: PhaseState,
}

/// Static cluster description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub num_machines: u32,
    pub map_slots_per_machine: u32,
    pub reduce_slots_per_machine: u32,
    pub replication_factor: u32,
    /// Bytes per second for swap transfers and shuffle; 100 MB/s unless stated.
    pub disk_bandwidth: f64,
    pub heartbeat_interval: f64,
    /// Multiplier >= 1 applied to a map task's nominal duration when the
    /// input block is not on the machine running it.
    pub remote_read_penalty: f64,
    /// Fraction of a job's map tasks that must complete before its reduce
    /// phase becomes schedulable.
    pub slowstart_fraction: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            num_machines: 1,
            map_slots_per_machine: 4,
            reduce_slots_per_machine: 2,
            replication_factor: 1,
            disk_bandwidth: 100.0 * MB as f64,
            heartbeat_interval: 3.0,
            remote_read_penalty: 1.3,
            slowstart_fraction: 0.05,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_machines < 1
            || self.map_slots_per_machine < 1
            || self.reduce_slots_per_machine < 1
            || self.replication_factor < 1
        {
            return Err(ModelError::InvalidCluster {
                reason: "machine, slot and replication counts must all be >= 1",
            });
        }
        if self.replication_factor > self.num_machines {
            return Err(ModelError::InvalidCluster {
                reason: "replication_factor exceeds num_machines",
            });
        }
        if !(self.disk_bandwidth > 0.0) || !(self.heartbeat_interval > 0.0) {
            return Err(ModelError::InvalidCluster {
                reason: "disk_bandwidth and heartbeat_interval must be > 0",
            });
        }
        if !(self.remote_read_penalty >= 1.0) {
            return Err(ModelError::InvalidCluster {
                reason: "remote_read_penalty must be >= 1",
            });
        }
        if !(0.0..=1.0).contains(&self.slowstart_fraction) {
            return Err(ModelError::InvalidCluster {
                reason: "slowstart_fraction must lie in [0, 1]",
            });
        }
        Ok(())
    }

    pub fn total_slots(&self, kind: TaskKind) -> u32 {
        match kind {
            TaskKind::Map => self.num_machines * self.map_slots_per_machine,
            TaskKind::Reduce => self.num_machines * self.reduce_slots_per_machine,
        }
    }

    /// Map tasks that must finish before the reduce phase arrives.
    pub fn slowstart_threshold(&self, num_map_tasks: u32) -> u32 {
        let need = libm::ceil(self.slowstart_fraction * num_map_tasks as f64) as u32;
        need.clamp(1, num_map_tasks)
    }
}

/// Observable lifecycle states of a task attempt.
///
/// Admitted transitions: Pending -> Running, Running -> {Suspended,
/// Completed, Killed}, Suspended -> {Running, Killed}. A killed task
/// becomes Pending again and restarts from zero progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskState {
    Pending,
    Running,
    Suspended,
    Completed,
    Killed,
}

/// Whether `from -> to` is a legal task state transition.
pub fn transition_allowed(from: TaskState, to: TaskState) -> bool {
    use TaskState::*;
    matches!(
        (from, to),
        (Pending, Running)
            | (Running, Suspended)
            | (Running, Completed)
            | (Running, Killed)
            | (Suspended, Running)
            | (Suspended, Killed)
    )
}

/// Live bookkeeping for one task attempt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskAttempt {
    pub task: TaskRef,
    pub machine_id: MachineId,
    pub launch_time: f64,
    pub state: TaskState,
    /// Fraction of the attempt's effective duration already processed.
    pub progress: f64,
    pub is_sample: bool,
    pub is_local: bool,
    pub suspended_at: Option<f64>,
    pub memory_footprint: u64,
}

/// Replica machine sets for one job's map tasks, indexed by task index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPlacement {
    pub job_id: String,
    sets: Vec<Vec<MachineId>>,
}

impl BlockPlacement {
    pub fn num_tasks(&self) -> usize {
        self.sets.len()
    }

    pub fn replicas(&self, task_index: u32) -> Option<&[MachineId]> {
        self.sets.get(task_index as usize).map(|v| v.as_slice())
    }
}

/// Split a job into its map phase-job and, when reduce tasks exist, a
/// deferred reduce phase-job. Phase ids are assigned by the caller; the
/// reduce arrival time is filled in when slowstart fires.
pub fn split_job(
    spec: &JobSpec,
    parent_job: u32,
    map_id: PhaseId,
    reduce_id: PhaseId,
) -> Result<(PhaseJob, Option<PhaseJob>), ModelError> {
    spec.validate()?;
    let map = PhaseJob {
        phase_id: map_id,
        parent_job,
        kind: TaskKind::Map,
        num_tasks: spec.num_map_tasks,
        arrival_time: spec.submit_time,
        state: PhaseState::Training,
    };
    let reduce = (spec.num_reduce_tasks > 0).then(|| PhaseJob {
        phase_id: reduce_id,
        parent_job,
        kind: TaskKind::Reduce,
        num_tasks: spec.num_reduce_tasks,
        arrival_time: f64::NAN, // set at slowstart
        state: PhaseState::Training,
    });
    Ok((map, reduce))
}

/// Draw a replica set of `replication_factor` distinct machines, uniformly,
/// for every map task of the job. Pure in (spec, cfg, seed).
pub fn place_blocks<R: Rng>(
    spec: &JobSpec,
    cfg: &ClusterConfig,
    rng: &mut R,
) -> Result<BlockPlacement, ModelError> {
    if cfg.replication_factor > cfg.num_machines {
        return Err(ModelError::InvalidCluster {
            reason: "replication_factor exceeds num_machines",
        });
    }
    let machines: Vec<MachineId> = (0..cfg.num_machines).map(MachineId).collect();
    let sets = (0..spec.num_map_tasks)
        .map(|_| {
            let mut set: Vec<MachineId> = machines
                .choose_multiple(rng, cfg.replication_factor as usize)
                .copied()
                .collect();
            set.sort();
            set
        })
        .collect();
    Ok(BlockPlacement {
        job_id: spec.job_id.clone(),
        sets,
    })
}

/// True iff the machine holds a replica of the task's input block.
pub fn is_local(
    task_index: u32,
    machine: MachineId,
    placement: &BlockPlacement,
) -> Result<bool, ModelError> {
    placement
        .replicas(task_index)
        .map(|set| set.contains(&machine))
        .ok_or(ModelError::UnknownTask { task_index })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    InvalidJob {
        field: &'static str,
        reason: &'static str,
    },
    InvalidCluster {
        reason: &'static str,
    },
    UnknownTask {
        task_index: u32,
    },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::InvalidJob { field, reason } => {
                write!(f, "invalid job spec: {field} {reason}")
            }
            ModelError::InvalidCluster { reason } => write!(f, "invalid cluster config: {reason}"),
            ModelError::UnknownTask { task_index } => {
                write!(f, "task index {task_index} not present in placement")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ModelError {}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn job(maps: u32, reduces: u32, submit: f64) -> JobSpec {
        JobSpec {
            job_id: "j".to_string(),
            submit_time: submit,
            num_map_tasks: maps,
            num_reduce_tasks: reduces,
            map_task_duration: 60.0,
            reduce_task_duration: if reduces > 0 { 120.0 } else { 0.0 },
            shuffle_bytes_per_reduce: 0,
            reduce_task_memory: GB,
            weight: 1.0,
            job_class_label: String::new(),
            priority: 0,
        }
    }

    #[test]
    fn split_map_only_job_has_no_reduce_phase() {
        let (map, red) = split_job(&job(10, 0, 0.0), 0, PhaseId(0), PhaseId(1)).unwrap();
        assert_eq!(map.num_tasks, 10);
        assert_eq!(map.arrival_time, 0.0);
        assert!(red.is_none());
    }

    #[test]
    fn split_defers_reduce_phase() {
        let (map, red) = split_job(&job(2, 3, 5.0), 0, PhaseId(0), PhaseId(1)).unwrap();
        assert_eq!(map.arrival_time, 5.0);
        let red = red.unwrap();
        assert_eq!(red.num_tasks, 3);
        assert!(red.arrival_time.is_nan());
        // task counts conserved across the split
        assert_eq!(map.num_tasks + red.num_tasks, 5);
    }

    #[test]
    fn split_rejects_invalid_spec() {
        let mut bad = job(0, 0, 0.0);
        bad.num_map_tasks = 0;
        let err = split_job(&bad, 0, PhaseId(0), PhaseId(1)).unwrap_err();
        assert!(err.to_string().contains("num_map_tasks"));
    }

    #[test]
    fn fb2009_small_job_is_single_phase() {
        // small FB2009 class: <= 2 maps, 0 reduces, "select"
        let mut j = job(2, 0, 0.0);
        j.job_class_label = "select".to_string();
        let (_, red) = split_job(&j, 0, PhaseId(0), PhaseId(1)).unwrap();
        assert!(red.is_none());
    }

    #[test]
    fn placement_on_single_machine_is_forced() {
        let cfg = ClusterConfig {
            num_machines: 1,
            replication_factor: 1,
            ..ClusterConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = place_blocks(&job(4, 0, 0.0), &cfg, &mut rng).unwrap();
        for i in 0..4 {
            assert_eq!(p.replicas(i).unwrap(), &[MachineId(0)]);
        }
    }

    #[test]
    fn placement_sets_are_distinct_and_sized() {
        let cfg = ClusterConfig {
            num_machines: 100,
            replication_factor: 3,
            ..ClusterConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = place_blocks(&job(50, 0, 0.0), &cfg, &mut rng).unwrap();
        for i in 0..50 {
            let set = p.replicas(i).unwrap();
            assert_eq!(set.len(), 3);
            assert!(set.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn placement_is_deterministic_per_seed() {
        let cfg = ClusterConfig {
            num_machines: 20,
            replication_factor: 3,
            ..ClusterConfig::default()
        };
        let a = place_blocks(&job(30, 0, 0.0), &cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = place_blocks(&job(30, 0, 0.0), &cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn placement_rejects_impossible_replication() {
        let cfg = ClusterConfig {
            num_machines: 2,
            replication_factor: 3,
            ..ClusterConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(place_blocks(&job(1, 0, 0.0), &cfg, &mut rng).is_err());
    }

    #[test]
    fn is_local_checks_replica_membership() {
        let p = BlockPlacement {
            job_id: "j".to_string(),
            sets: alloc::vec![alloc::vec![MachineId(1), MachineId(2), MachineId(3)]],
        };
        assert!(is_local(0, MachineId(2), &p).unwrap());
        assert!(!is_local(0, MachineId(4), &p).unwrap());
        assert!(is_local(1, MachineId(1), &p).is_err());
    }

    #[test]
    fn full_replication_is_always_local() {
        let cfg = ClusterConfig {
            num_machines: 5,
            replication_factor: 5,
            ..ClusterConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = place_blocks(&job(8, 0, 0.0), &cfg, &mut rng).unwrap();
        for i in 0..8 {
            for m in 0..5 {
                assert!(is_local(i, MachineId(m), &p).unwrap());
            }
        }
    }

    #[test]
    fn slowstart_threshold_is_clamped() {
        let cfg = ClusterConfig::default();
        assert_eq!(cfg.slowstart_threshold(1), 1);
        assert_eq!(cfg.slowstart_threshold(100), 5);
        let eager = ClusterConfig {
            slowstart_fraction: 0.0,
            ..ClusterConfig::default()
        };
        assert_eq!(eager.slowstart_threshold(100), 1);
    }

    proptest! {
        #[test]
        fn task_state_machine_rejects_everything_else(
            from in prop::sample::select(alloc::vec![
                TaskState::Pending, TaskState::Running, TaskState::Suspended,
                TaskState::Completed, TaskState::Killed,
            ]),
            to in prop::sample::select(alloc::vec![
                TaskState::Pending, TaskState::Running, TaskState::Suspended,
                TaskState::Completed, TaskState::Killed,
            ]),
        ) {
            use TaskState::*;
            let legal = matches!(
                (from, to),
                (Pending, Running) | (Running, Suspended) | (Running, Completed)
                    | (Running, Killed) | (Suspended, Running) | (Suspended, Killed)
            );
            prop_assert_eq!(transition_allowed(from, to), legal);
        }

        #[test]
        fn placement_is_pure_in_seed(seed in 0u64..500, maps in 1u32..40) {
            let cfg = ClusterConfig {
                num_machines: 10,
                replication_factor: 3,
                ..ClusterConfig::default()
            };
            let spec = job(maps, 0, 0.0);
            let a = place_blocks(&spec, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = place_blocks(&spec, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
