//! Deterministic discrete-event loop: heartbeats, task lifecycle,
//! suspend/resume swap costs and scheduler callbacks.
//!
//! The clock only advances through the event queue; with equal inputs and
//! seed two runs produce identical event logs. All scheduling decisions
//! come from a [`Scheduler`] implementation; the engine validates and
//! applies them, charging swap transfers to the slot they occupy.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    is_local, place_blocks, split_job, BlockPlacement, ClusterConfig, JobSpec, MachineId,
    ModelError, PhaseId, PhaseState, TaskKind, TaskRef, TaskState, GB,
};
use crate::workload::{WorkloadError, WorkloadTrace};

/// Piecewise-linear swap cost: memory moves at disk speed up to the degrade
/// threshold, then slows by the degrade factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreemptionCostModel {
    /// Bytes per second.
    pub disk_bandwidth: f64,
    /// Bytes beyond which the transfer degrades.
    pub degrade_threshold: u64,
    pub degrade_factor: f64,
}

impl PreemptionCostModel {
    pub fn from_cluster(cfg: &ClusterConfig) -> Self {
        PreemptionCostModel {
            disk_bandwidth: cfg.disk_bandwidth,
            degrade_threshold: 5 * GB,
            degrade_factor: 1.2,
        }
    }
}

/// Seconds to write (or read back) a task's memory footprint. Suspend and
/// resume each pay this once.
pub fn suspend_cost(memory_footprint: u64, model: &PreemptionCostModel) -> f64 {
    let fast = memory_footprint.min(model.degrade_threshold) as f64;
    let slow = memory_footprint.saturating_sub(model.degrade_threshold) as f64;
    (fast + slow * model.degrade_factor) / model.disk_bandwidth
}

/// Wall-clock seconds a freshly launched task occupies its slot: the nominal
/// duration, stretched by the remote-read penalty for non-local maps.
pub fn effective_task_duration(
    nominal: f64,
    kind: TaskKind,
    task_is_local: bool,
    cfg: &ClusterConfig,
) -> f64 {
    match kind {
        TaskKind::Map if !task_is_local => nominal * cfg.remote_read_penalty,
        _ => nominal,
    }
}

/// Remaining wall-clock seconds of a task resumed at the given progress.
pub fn remaining_duration(effective_total: f64, progress: f64) -> f64 {
    effective_total * (1.0 - progress).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    JobArrival { phase: PhaseId },
    Heartbeat { machine: MachineId },
    TaskCompletion { task: TaskRef, gen: u64 },
    SuspendComplete { task: TaskRef },
    ResumeComplete { task: TaskRef },
    SimulationEnd,
}

impl EventKind {
    /// Same-time tie-break: arrivals before heartbeats before completions,
    /// swap transfers after, the end marker last.
    fn priority(&self) -> u8 {
        match self {
            EventKind::JobArrival { .. } => 0,
            EventKind::Heartbeat { .. } => 1,
            EventKind::TaskCompletion { .. } => 2,
            EventKind::SuspendComplete { .. } => 3,
            EventKind::ResumeComplete { .. } => 4,
            EventKind::SimulationEnd => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we want the earliest event
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.priority().cmp(&self.kind.priority()))
            .then(other.seq.cmp(&self.seq))
    }
}

/// What a scheduler may ask the engine to do.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchedulerAction {
    LaunchTask {
        task: TaskRef,
        machine: MachineId,
        sample: bool,
    },
    SuspendTask {
        task: TaskRef,
    },
    ResumeTask {
        task: TaskRef,
    },
    KillTask {
        task: TaskRef,
    },
    NoOp,
}

/// One scheduler decision worth keeping in the report stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DecisionRecord {
    Estimate {
        time: f64,
        phase: u32,
        serialized_size: f64,
        provenance: String,
        injected: bool,
    },
    Preemption {
        time: f64,
        phase: u32,
        task_index: u32,
        mode: String,
    },
}

/// The callback contract every scheduling discipline implements.
pub trait Scheduler {
    fn name(&self) -> &'static str;

    /// Called once before the first event; `seed` drives any internal
    /// randomness (error injection) so runs stay reproducible.
    fn on_start(&mut self, _state: &SimState, _seed: u64) {}

    fn on_job_arrival(&mut self, state: &SimState, phase: PhaseId) -> Vec<SchedulerAction>;

    fn on_heartbeat(&mut self, state: &SimState, machine: MachineId) -> Vec<SchedulerAction>;

    fn on_task_completion(&mut self, state: &SimState, task: TaskRef) -> Vec<SchedulerAction>;

    /// A suspend transfer finished and its slot is free again.
    fn on_slot_freed(
        &mut self,
        _state: &SimState,
        _machine: MachineId,
        _kind: TaskKind,
    ) -> Vec<SchedulerAction> {
        Vec::new()
    }

    /// Drained once at the end of the run.
    fn decision_log(&mut self) -> Vec<DecisionRecord> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunState {
    Pending,
    Running,
    Suspending,
    Suspended,
    Resuming,
    Completed,
}

/// Live bookkeeping for one task (across relaunches).
#[derive(Debug, Clone)]
pub struct TaskRuntime {
    pub task: TaskRef,
    state: RunState,
    /// Machine of the current or last attempt.
    machine: MachineId,
    /// Progress frozen at the last stop; while running, interpolate.
    progress: f64,
    running_since: Option<f64>,
    /// Total slot-holding seconds incl. swap transfers, current attempt.
    held_since: Option<f64>,
    effective_total: f64,
    shuffle_seconds: f64,
    launch_time: f64,
    launch_seq: u64,
    completion_gen: u64,
    is_local: bool,
    is_sample: bool,
    suspended_at: Option<f64>,
    attempts: u32,
    attempt_held: f64,
    attempt_processed: f64,
}

impl TaskRuntime {
    fn fresh(task: TaskRef) -> Self {
        TaskRuntime {
            task,
            state: RunState::Pending,
            machine: MachineId(0),
            progress: 0.0,
            running_since: None,
            held_since: None,
            effective_total: 0.0,
            shuffle_seconds: 0.0,
            launch_time: 0.0,
            launch_seq: 0,
            completion_gen: 0,
            is_local: false,
            is_sample: false,
            suspended_at: None,
            attempts: 0,
            attempt_held: 0.0,
            attempt_processed: 0.0,
        }
    }

    /// Public five-state view of the internal lifecycle.
    pub fn state(&self) -> TaskState {
        match self.state {
            RunState::Pending => TaskState::Pending,
            RunState::Running | RunState::Suspending => TaskState::Running,
            RunState::Suspended | RunState::Resuming => TaskState::Suspended,
            RunState::Completed => TaskState::Completed,
        }
    }

    pub fn is_pending(&self) -> bool {
        self.state == RunState::Pending
    }

    pub fn is_completed(&self) -> bool {
        self.state == RunState::Completed
    }

    /// Holds a slot right now (running, or mid swap transfer).
    pub fn holds_slot(&self) -> bool {
        matches!(
            self.state,
            RunState::Running | RunState::Suspending | RunState::Resuming
        )
    }

    pub fn is_running(&self) -> bool {
        self.state == RunState::Running
    }

    pub fn is_suspended(&self) -> bool {
        self.state == RunState::Suspended
    }

    /// Swap-out transfer in flight; the slot is being released.
    pub fn is_suspending(&self) -> bool {
        self.state == RunState::Suspending
    }

    /// Swap-in transfer in flight; the slot is already occupied.
    pub fn is_resuming(&self) -> bool {
        self.state == RunState::Resuming
    }

    pub fn machine(&self) -> MachineId {
        self.machine
    }

    pub fn launch_time(&self) -> f64 {
        self.launch_time
    }

    pub fn launch_seq(&self) -> u64 {
        self.launch_seq
    }

    pub fn is_sample(&self) -> bool {
        self.is_sample
    }

    pub fn is_local(&self) -> bool {
        self.is_local
    }

    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    pub fn effective_total(&self) -> f64 {
        self.effective_total
    }

    pub fn progress_at(&self, now: f64) -> f64 {
        match self.running_since {
            Some(t0) if self.effective_total > 0.0 => {
                (self.progress + (now - t0) / self.effective_total).min(1.0)
            }
            _ => self.progress,
        }
    }

    /// Seconds of actual processing done so far (swap time excluded).
    pub fn processed_seconds(&self, now: f64) -> f64 {
        self.progress_at(now) * self.effective_total
    }

    /// Seconds spent in the execution stage (shuffle excluded), reduce only.
    pub fn exec_processed_seconds(&self, now: f64) -> f64 {
        (self.processed_seconds(now) - self.shuffle_seconds).max(0.0)
    }

    /// Execution-stage progress fraction in [0, 1].
    pub fn exec_progress(&self, now: f64) -> f64 {
        let exec_total = self.effective_total - self.shuffle_seconds;
        if exec_total <= 0.0 {
            1.0
        } else {
            (self.exec_processed_seconds(now) / exec_total).min(1.0)
        }
    }

    pub fn exec_total_seconds(&self) -> f64 {
        self.effective_total - self.shuffle_seconds
    }

    pub fn shuffle_seconds(&self) -> f64 {
        self.shuffle_seconds
    }
}

/// Live bookkeeping for one phase-job.
#[derive(Debug, Clone)]
pub struct PhaseRuntime {
    pub phase_id: PhaseId,
    pub job_index: u32,
    pub kind: TaskKind,
    pub num_tasks: u32,
    /// NaN until a reduce phase activates.
    pub arrival_time: f64,
    pub state: PhaseState,
    pub first_launch: Option<f64>,
    pub completion: Option<f64>,
    /// Monotone counter of arrivals, used for deterministic tie-breaks.
    pub arrival_seq: u64,
    /// Set when the arrival event is processed; tasks are only
    /// schedulable afterwards.
    arrived: bool,
    tasks: Vec<TaskRuntime>,
    pending: BTreeSet<u32>,
    /// Pending map tasks with a replica on each machine.
    pending_local: BTreeMap<MachineId, BTreeSet<u32>>,
    completed: u32,
    holding_slots: u32,
}

impl PhaseRuntime {
    pub fn has_arrived(&self) -> bool {
        self.arrived
    }

    pub fn is_complete(&self) -> bool {
        self.completed == self.num_tasks
    }

    pub fn completed_tasks(&self) -> u32 {
        self.completed
    }

    pub fn pending_count(&self) -> u32 {
        self.pending.len() as u32
    }

    /// Tasks currently holding slots (running or swapping).
    pub fn holding_slots(&self) -> u32 {
        self.holding_slots
    }

    /// Residual task demand: everything not yet completed.
    pub fn demand(&self) -> u32 {
        self.num_tasks - self.completed
    }

    pub fn task(&self, index: u32) -> &TaskRuntime {
        &self.tasks[index as usize]
    }

    pub fn tasks(&self) -> &[TaskRuntime] {
        &self.tasks
    }

    pub fn first_pending(&self) -> Option<u32> {
        self.pending.iter().next().copied()
    }

    pub fn first_pending_local(&self, machine: MachineId) -> Option<u32> {
        self.pending_local
            .get(&machine)
            .and_then(|s| s.iter().next().copied())
    }

    pub fn pending_tasks(&self) -> impl Iterator<Item = u32> + '_ {
        self.pending.iter().copied()
    }

    /// Pending map tasks whose input block is replicated on the machine.
    pub fn pending_local_tasks(&self, machine: MachineId) -> impl Iterator<Item = u32> + '_ {
        self.pending_local
            .get(&machine)
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }
}

#[derive(Debug, Clone)]
pub struct JobRuntime {
    pub spec: JobSpec,
    pub map_phase: PhaseId,
    pub reduce_phase: Option<PhaseId>,
    pub placement: BlockPlacement,
    reduce_activated: bool,
}

#[derive(Debug, Clone)]
struct MachineState {
    free_map: u32,
    free_reduce: u32,
    /// Suspended residents ordered by original launch seq (oldest first).
    suspended: Vec<TaskRef>,
    /// Swap-out transfers in flight.
    suspending: u32,
}

/// Compact record of one processed event or applied action.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub machine: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttemptOutcome {
    Completed,
    Killed,
    Unfinished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub phase: u32,
    pub task_index: u32,
    pub job_index: u32,
    pub kind: TaskKind,
    pub machine: u32,
    pub launch: f64,
    pub end: f64,
    pub outcome: AttemptOutcome,
    pub is_local: bool,
    pub is_sample: bool,
    /// Slot-holding seconds including swap transfers.
    pub held_seconds: f64,
    /// Actual processing seconds (swap excluded).
    pub processing_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotInterval {
    pub phase: u32,
    pub job_index: u32,
    pub kind: TaskKind,
    pub machine: u32,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseOutcome {
    pub phase: u32,
    pub kind: TaskKind,
    pub num_tasks: u32,
    pub arrival: f64,
    pub first_launch: Option<f64>,
    pub completion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub job_id: String,
    pub job_index: u32,
    pub label: String,
    pub submit_time: f64,
    pub map: PhaseOutcome,
    pub reduce: Option<PhaseOutcome>,
}

/// Everything a run produces; input to the metrics module.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub scheduler: String,
    pub seed: u64,
    pub completed: bool,
    pub end_time: f64,
    pub jobs: Vec<JobOutcome>,
    pub attempts: Vec<AttemptRecord>,
    pub slot_intervals: Vec<SlotInterval>,
    pub local_map_launches: u64,
    pub total_map_launches: u64,
    pub event_log: Vec<EventRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub unfinished_jobs: Vec<String>,
}

/// Read view of the live simulation handed to scheduler callbacks.
pub struct SimState {
    now: f64,
    cfg: ClusterConfig,
    cost_model: PreemptionCostModel,
    jobs: Vec<JobRuntime>,
    phases: Vec<PhaseRuntime>,
    machines: Vec<MachineState>,
    next_launch_seq: u64,
    phases_completed: u32,
    local_map_launches: u64,
    total_map_launches: u64,
    attempts: Vec<AttemptRecord>,
    slot_intervals: Vec<SlotInterval>,
}

impl SimState {
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn cluster(&self) -> &ClusterConfig {
        &self.cfg
    }

    pub fn cost_model(&self) -> &PreemptionCostModel {
        &self.cost_model
    }

    pub fn jobs(&self) -> &[JobRuntime] {
        &self.jobs
    }

    pub fn job(&self, index: u32) -> &JobRuntime {
        &self.jobs[index as usize]
    }

    pub fn phases(&self) -> &[PhaseRuntime] {
        &self.phases
    }

    pub fn phase(&self, id: PhaseId) -> &PhaseRuntime {
        &self.phases[id.0 as usize]
    }

    pub fn task(&self, t: TaskRef) -> &TaskRuntime {
        self.phase(t.phase).task(t.index)
    }

    pub fn free_slots(&self, machine: MachineId, kind: TaskKind) -> u32 {
        let m = &self.machines[machine.0 as usize];
        match kind {
            TaskKind::Map => m.free_map,
            TaskKind::Reduce => m.free_reduce,
        }
    }

    /// Suspended tasks resident on a machine, oldest launch first.
    pub fn suspended_on(&self, machine: MachineId) -> &[TaskRef] {
        &self.machines[machine.0 as usize].suspended
    }

    /// Suspended residents plus swap-out transfers still in flight.
    pub fn suspended_count(&self, machine: MachineId) -> u32 {
        let m = &self.machines[machine.0 as usize];
        m.suspended.len() as u32 + m.suspending
    }

    pub fn total_suspended(&self) -> u32 {
        self.machines.iter().map(|m| m.suspended.len() as u32).sum()
    }

    /// Whether the task's input block is replicated on the machine.
    pub fn map_task_is_local(&self, phase: PhaseId, index: u32, machine: MachineId) -> bool {
        let p = self.phase(phase);
        if p.kind != TaskKind::Map {
            return true;
        }
        let job = &self.jobs[p.job_index as usize];
        is_local(index, machine, &job.placement).unwrap_or(false)
    }

    pub fn job_weight(&self, phase: PhaseId) -> f64 {
        self.jobs[self.phase(phase).job_index as usize].spec.weight
    }

    /// Nominal per-task duration of the phase.
    pub fn nominal_duration(&self, phase: PhaseId) -> f64 {
        let p = self.phase(phase);
        let spec = &self.jobs[p.job_index as usize].spec;
        match p.kind {
            TaskKind::Map => spec.map_task_duration,
            TaskKind::Reduce => spec.reduce_task_duration,
        }
    }

    /// Modeled shuffle seconds per reduce task of the phase.
    pub fn shuffle_seconds(&self, phase: PhaseId) -> f64 {
        let p = self.phase(phase);
        let spec = &self.jobs[p.job_index as usize].spec;
        match p.kind {
            TaskKind::Map => 0.0,
            TaskKind::Reduce => spec.shuffle_seconds(self.cfg.disk_bandwidth),
        }
    }

    /// Serialized size of the phase with true durations, for oracle modes.
    pub fn true_serialized_size(&self, phase: PhaseId) -> f64 {
        let p = self.phase(phase);
        let spec = &self.jobs[p.job_index as usize].spec;
        match p.kind {
            TaskKind::Map => spec.map_serialized_size(),
            TaskKind::Reduce => spec.reduce_serialized_size(self.cfg.disk_bandwidth),
        }
    }

    fn free_slots_mut(&mut self, machine: MachineId, kind: TaskKind) -> &mut u32 {
        let m = &mut self.machines[machine.0 as usize];
        match kind {
            TaskKind::Map => &mut m.free_map,
            TaskKind::Reduce => &mut m.free_reduce,
        }
    }

    fn task_mut(&mut self, t: TaskRef) -> &mut TaskRuntime {
        &mut self.phases[t.phase.0 as usize].tasks[t.index as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    /// Hard cap on simulated seconds, guarding against scheduler livelock.
    pub time_cap: f64,
    pub cost_model: Option<PreemptionCostModel>,
    /// Keep the full event log in the result.
    pub record_events: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            time_cap: 1e6,
            cost_model: None,
            record_events: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    Model(ModelError),
    Workload(WorkloadError),
    /// A scheduler emitted an action the current state cannot accept.
    InvalidAction { time: f64, detail: String },
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Model(e) => write!(f, "{e}"),
            EngineError::Workload(e) => write!(f, "{e}"),
            EngineError::InvalidAction { time, detail } => {
                write!(f, "invalid scheduler action at t={time}: {detail}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EngineError {}

impl From<ModelError> for EngineError {
    fn from(e: ModelError) -> Self {
        EngineError::Model(e)
    }
}

impl From<WorkloadError> for EngineError {
    fn from(e: WorkloadError) -> Self {
        EngineError::Workload(e)
    }
}

struct Engine<'a> {
    state: SimState,
    queue: BinaryHeap<Event>,
    next_event_seq: u64,
    scheduler: &'a mut dyn Scheduler,
    log: Vec<EventRecord>,
    record_events: bool,
    end_scheduled: bool,
}

/// Run one simulation to completion (or the time cap). The result is a pure
/// function of (trace, cfg, scheduler configuration, seed).
pub fn run_simulation(
    trace: &WorkloadTrace,
    cfg: &ClusterConfig,
    scheduler: &mut dyn Scheduler,
    seed: u64,
) -> Result<SimulationResult, EngineError> {
    run_simulation_with(trace, cfg, scheduler, seed, &EngineOptions::default())
}

pub fn run_simulation_with(
    trace: &WorkloadTrace,
    cfg: &ClusterConfig,
    scheduler: &mut dyn Scheduler,
    seed: u64,
    opts: &EngineOptions,
) -> Result<SimulationResult, EngineError> {
    cfg.validate()?;
    trace.validate()?;

    let mut placement_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::with_capacity(trace.jobs.len());
    let mut phases = Vec::new();
    for (ji, spec) in trace.jobs.iter().enumerate() {
        let map_id = PhaseId(phases.len() as u32);
        let reduce_id = PhaseId(phases.len() as u32 + 1);
        let (map, reduce) = split_job(spec, ji as u32, map_id, reduce_id)?;
        let placement = place_blocks(spec, cfg, &mut placement_rng)?;
        phases.push(new_phase_runtime(&map, ji as u32, spec, cfg, &placement));
        if let Some(red) = &reduce {
            phases.push(new_phase_runtime(red, ji as u32, spec, cfg, &placement));
        }
        jobs.push(JobRuntime {
            spec: spec.clone(),
            map_phase: map_id,
            reduce_phase: reduce.as_ref().map(|r| r.phase_id),
            placement,
            reduce_activated: false,
        });
    }

    let machines = (0..cfg.num_machines)
        .map(|_| MachineState {
            free_map: cfg.map_slots_per_machine,
            free_reduce: cfg.reduce_slots_per_machine,
            suspended: Vec::new(),
            suspending: 0,
        })
        .collect();

    let state = SimState {
        now: 0.0,
        cfg: cfg.clone(),
        cost_model: opts
            .cost_model
            .clone()
            .unwrap_or_else(|| PreemptionCostModel::from_cluster(cfg)),
        jobs,
        phases,
        machines,
        next_launch_seq: 0,
        phases_completed: 0,
        local_map_launches: 0,
        total_map_launches: 0,
        attempts: Vec::new(),
        slot_intervals: Vec::new(),
    };

    let mut engine = Engine {
        state,
        queue: BinaryHeap::new(),
        next_event_seq: 0,
        scheduler,
        log: Vec::new(),
        record_events: opts.record_events,
        end_scheduled: false,
    };

    // map-phase arrivals at submit time, one arrival seq per phase;
    // reduce phases take their seq at activation
    let mut arrival_seq = 0u64;
    for ji in 0..engine.state.jobs.len() {
        let phase = engine.state.jobs[ji].map_phase;
        engine.state.phases[phase.0 as usize].arrival_seq = arrival_seq;
        arrival_seq += 1;
        let t = engine.state.jobs[ji].spec.submit_time;
        engine.push(t, EventKind::JobArrival { phase });
    }
    let mut next_arrival_seq = arrival_seq;

    // heartbeats staggered by machine index across one interval
    for m in 0..cfg.num_machines {
        let offset = cfg.heartbeat_interval * m as f64 / cfg.num_machines as f64;
        engine.push(offset, EventKind::Heartbeat { machine: MachineId(m) });
    }

    engine.scheduler.on_start(&engine.state, seed);

    let mut completed = true;
    while let Some(ev) = engine.queue.pop() {
        if ev.time > opts.time_cap {
            completed = false;
            break;
        }
        debug_assert!(ev.time >= engine.state.now);
        engine.state.now = ev.time;
        match ev.kind {
            EventKind::SimulationEnd => {
                engine.log_event("end", None, None, None);
                break;
            }
            EventKind::JobArrival { phase } => {
                engine.state.phases[phase.0 as usize].arrived = true;
                engine.log_event("arrival", Some(phase.0), None, None);
                let actions = engine.scheduler.on_job_arrival(&engine.state, phase);
                engine.apply(actions)?;
            }
            EventKind::Heartbeat { machine } => {
                engine.log_event("heartbeat", None, None, Some(machine.0));
                let actions = engine.scheduler.on_heartbeat(&engine.state, machine);
                engine.apply(actions)?;
                if !engine.end_scheduled {
                    let t = ev.time + cfg.heartbeat_interval;
                    engine.push(t, EventKind::Heartbeat { machine });
                }
            }
            EventKind::TaskCompletion { task, gen } => {
                if !engine.completion_is_live(task, gen) {
                    continue;
                }
                engine.complete_task(task, &mut next_arrival_seq);
                engine.log_event("completion", Some(task.phase.0), Some(task.index), None);
                let actions = engine.scheduler.on_task_completion(&engine.state, task);
                engine.apply(actions)?;
            }
            EventKind::SuspendComplete { task } => {
                let machine = engine.finish_suspend(task);
                engine.log_event("suspended", Some(task.phase.0), Some(task.index), Some(machine.0));
                let kind = engine.state.phase(task.phase).kind;
                let actions = engine.scheduler.on_slot_freed(&engine.state, machine, kind);
                engine.apply(actions)?;
            }
            EventKind::ResumeComplete { task } => {
                engine.finish_resume(task);
                engine.log_event("resumed", Some(task.phase.0), Some(task.index), None);
            }
        }
        engine.maybe_schedule_end();
    }

    let mut state = engine.state;
    let decisions = engine.scheduler.decision_log();

    // close any open slot intervals and record unfinished attempts
    let now = state.now;
    let mut open_attempts = Vec::new();
    for p in &state.phases {
        for t in &p.tasks {
            if t.holds_slot() {
                open_attempts.push((p.phase_id, p.job_index, p.kind, t.clone()));
            }
        }
    }
    for (phase, job_index, kind, t) in open_attempts {
        state.attempts.push(AttemptRecord {
            phase: phase.0,
            task_index: t.task.index,
            job_index,
            kind,
            machine: t.machine.0,
            launch: t.launch_time,
            end: now,
            outcome: AttemptOutcome::Unfinished,
            is_local: t.is_local,
            is_sample: t.is_sample,
            held_seconds: t.attempt_held + t.held_since.map(|s| now - s).unwrap_or(0.0),
            processing_seconds: t.processed_seconds(now),
        });
        state.slot_intervals.push(SlotInterval {
            phase: phase.0,
            job_index,
            kind,
            machine: t.machine.0,
            start: t.held_since.unwrap_or(t.launch_time),
            end: now,
        });
    }

    let unfinished_jobs: Vec<String> = state
        .jobs
        .iter()
        .filter(|j| {
            !state.phase(j.map_phase).is_complete()
                || j.reduce_phase
                    .map(|r| !state.phase(r).is_complete())
                    .unwrap_or(false)
        })
        .map(|j| j.spec.job_id.clone())
        .collect();
    let completed = completed && unfinished_jobs.is_empty();

    let jobs = state
        .jobs
        .iter()
        .enumerate()
        .map(|(ji, j)| {
            let outcome = |p: &PhaseRuntime| PhaseOutcome {
                phase: p.phase_id.0,
                kind: p.kind,
                num_tasks: p.num_tasks,
                arrival: p.arrival_time,
                first_launch: p.first_launch,
                completion: p.completion,
            };
            JobOutcome {
                job_id: j.spec.job_id.clone(),
                job_index: ji as u32,
                label: j.spec.job_class_label.clone(),
                submit_time: j.spec.submit_time,
                map: outcome(state.phase(j.map_phase)),
                reduce: j.reduce_phase.map(|r| outcome(state.phase(r))),
            }
        })
        .collect();

    Ok(SimulationResult {
        scheduler: engine.scheduler.name().to_string(),
        seed,
        completed,
        end_time: now,
        jobs,
        attempts: state.attempts,
        slot_intervals: state.slot_intervals,
        local_map_launches: state.local_map_launches,
        total_map_launches: state.total_map_launches,
        event_log: engine.log,
        decisions,
        unfinished_jobs,
    })
}

fn new_phase_runtime(
    phase: &crate::model::PhaseJob,
    job_index: u32,
    spec: &JobSpec,
    _cfg: &ClusterConfig,
    placement: &BlockPlacement,
) -> PhaseRuntime {
    let tasks = (0..phase.num_tasks)
        .map(|i| {
            TaskRuntime::fresh(TaskRef {
                phase: phase.phase_id,
                index: i,
            })
        })
        .collect();
    let pending: BTreeSet<u32> = (0..phase.num_tasks).collect();
    let mut pending_local: BTreeMap<MachineId, BTreeSet<u32>> = BTreeMap::new();
    if phase.kind == TaskKind::Map {
        for i in 0..phase.num_tasks {
            if let Some(reps) = placement.replicas(i) {
                for &m in reps {
                    pending_local.entry(m).or_default().insert(i);
                }
            }
        }
    }
    let _ = spec;
    PhaseRuntime {
        phase_id: phase.phase_id,
        job_index,
        kind: phase.kind,
        num_tasks: phase.num_tasks,
        arrival_time: phase.arrival_time,
        state: phase.state,
        first_launch: None,
        completion: None,
        arrival_seq: 0,
        arrived: false,
        tasks,
        pending,
        pending_local,
        completed: 0,
        holding_slots: 0,
    }
}

impl<'a> Engine<'a> {
    fn push(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_event_seq;
        self.next_event_seq += 1;
        self.queue.push(Event { time, seq, kind });
    }

    fn log_event(&mut self, kind: &'static str, phase: Option<u32>, task: Option<u32>, machine: Option<u32>) {
        if self.record_events {
            self.log.push(EventRecord {
                time: self.state.now,
                kind,
                phase,
                task,
                machine,
            });
        }
    }

    fn completion_is_live(&self, task: TaskRef, gen: u64) -> bool {
        let t = self.state.task(task);
        t.state == RunState::Running && t.completion_gen == gen
    }

    fn maybe_schedule_end(&mut self) {
        if !self.end_scheduled && self.state.phases_completed as usize == self.state.phases.len() {
            self.end_scheduled = true;
            let now = self.state.now;
            self.push(now, EventKind::SimulationEnd);
        }
    }

    fn apply(&mut self, actions: Vec<SchedulerAction>) -> Result<(), EngineError> {
        for action in actions {
            match action {
                SchedulerAction::NoOp => {}
                SchedulerAction::LaunchTask { task, machine, sample } => {
                    self.launch(task, machine, sample)?
                }
                SchedulerAction::SuspendTask { task } => self.suspend(task)?,
                SchedulerAction::ResumeTask { task } => self.resume(task)?,
                SchedulerAction::KillTask { task } => self.kill(task)?,
            }
        }
        Ok(())
    }

    fn invalid(&self, detail: String) -> EngineError {
        EngineError::InvalidAction {
            time: self.state.now,
            detail,
        }
    }

    fn launch(&mut self, task: TaskRef, machine: MachineId, sample: bool) -> Result<(), EngineError> {
        let now = self.state.now;
        let phase_kind;
        let nominal;
        let shuffle;
        {
            let p = self.state.phase(task.phase);
            if !p.has_arrived() {
                return Err(self.invalid(alloc::format!(
                    "launch of task {}.{} before its phase arrived",
                    task.phase.0,
                    task.index
                )));
            }
            phase_kind = p.kind;
            nominal = self.state.nominal_duration(task.phase);
            shuffle = self.state.shuffle_seconds(task.phase);
            let t = p.task(task.index);
            if !t.is_pending() {
                return Err(self.invalid(alloc::format!(
                    "launch of non-pending task {}.{}",
                    task.phase.0,
                    task.index
                )));
            }
        }
        if self.state.free_slots(machine, phase_kind) == 0 {
            return Err(self.invalid(alloc::format!(
                "launch into busy machine {} ({} slots)",
                machine.0,
                phase_kind
            )));
        }
        let local = self.state.map_task_is_local(task.phase, task.index, machine);
        let eff = effective_task_duration(nominal, phase_kind, local, &self.state.cfg) + shuffle;
        *self.state.free_slots_mut(machine, phase_kind) -= 1;

        let launch_seq = self.state.next_launch_seq;
        self.state.next_launch_seq += 1;

        let gen;
        {
            let p = &mut self.state.phases[task.phase.0 as usize];
            p.pending.remove(&task.index);
            for set in p.pending_local.values_mut() {
                set.remove(&task.index);
            }
            p.holding_slots += 1;
            if p.first_launch.is_none() {
                p.first_launch = Some(now);
            }
            let t = &mut p.tasks[task.index as usize];
            t.state = RunState::Running;
            t.machine = machine;
            t.progress = 0.0;
            t.running_since = Some(now);
            t.held_since = Some(now);
            t.effective_total = eff;
            t.shuffle_seconds = shuffle;
            t.launch_time = now;
            t.launch_seq = launch_seq;
            t.completion_gen += 1;
            t.is_local = local;
            t.is_sample = sample;
            t.suspended_at = None;
            t.attempts += 1;
            t.attempt_held = 0.0;
            t.attempt_processed = 0.0;
            gen = t.completion_gen;
        }
        if phase_kind == TaskKind::Map {
            self.state.total_map_launches += 1;
            if local {
                self.state.local_map_launches += 1;
            }
        }
        self.log_event("launch", Some(task.phase.0), Some(task.index), Some(machine.0));
        self.push(now + eff, EventKind::TaskCompletion { task, gen });
        Ok(())
    }

    fn suspend(&mut self, task: TaskRef) -> Result<(), EngineError> {
        let now = self.state.now;
        {
            let t = self.state.task(task);
            if t.state != RunState::Running {
                return Err(self.invalid(alloc::format!(
                    "suspend of non-running task {}.{}",
                    task.phase.0,
                    task.index
                )));
            }
        }
        let footprint = {
            let p = self.state.phase(task.phase);
            let spec = &self.state.jobs[p.job_index as usize].spec;
            match p.kind {
                TaskKind::Reduce => spec.reduce_task_memory,
                TaskKind::Map => 0,
            }
        };
        let cost = suspend_cost(footprint, &self.state.cost_model);
        let machine = {
            let t = self.state.task_mut(task);
            t.progress = t.progress_at(now);
            t.running_since = None;
            t.state = RunState::Suspending;
            t.suspended_at = Some(now);
            t.completion_gen += 1; // cancels the scheduled completion
            t.machine
        };
        self.state.machines[machine.0 as usize].suspending += 1;
        self.log_event("suspend", Some(task.phase.0), Some(task.index), None);
        self.push(now + cost, EventKind::SuspendComplete { task });
        Ok(())
    }

    fn finish_suspend(&mut self, task: TaskRef) -> MachineId {
        let now = self.state.now;
        let (machine, kind, job_index, launch_seq) = {
            let p = self.state.phase(task.phase);
            let t = p.task(task.index);
            debug_assert_eq!(t.state, RunState::Suspending);
            (t.machine, p.kind, p.job_index, t.launch_seq)
        };
        {
            let p = &mut self.state.phases[task.phase.0 as usize];
            p.holding_slots -= 1;
            let t = &mut p.tasks[task.index as usize];
            t.state = RunState::Suspended;
            let held_start = t.held_since.take().expect("suspending task held a slot");
            t.attempt_held += now - held_start;
            self.state.slot_intervals.push(SlotInterval {
                phase: task.phase.0,
                job_index,
                kind,
                machine: machine.0,
                start: held_start,
                end: now,
            });
        }
        *self.state.free_slots_mut(machine, kind) += 1;
        self.state.machines[machine.0 as usize].suspending -= 1;
        let pos = {
            let residents = &self.state.machines[machine.0 as usize].suspended;
            residents
                .iter()
                .position(|r| self.state_task_launch_seq(*r) > launch_seq)
                .unwrap_or(residents.len())
        };
        self.state.machines[machine.0 as usize]
            .suspended
            .insert(pos, task);
        machine
    }

    fn state_task_launch_seq(&self, t: TaskRef) -> u64 {
        self.state.phases[t.phase.0 as usize].tasks[t.index as usize].launch_seq
    }

    fn resume(&mut self, task: TaskRef) -> Result<(), EngineError> {
        let now = self.state.now;
        let (machine, kind) = {
            let t = self.state.task(task);
            if t.state != RunState::Suspended {
                return Err(self.invalid(alloc::format!(
                    "resume of non-suspended task {}.{}",
                    task.phase.0,
                    task.index
                )));
            }
            (t.machine, self.state.phase(task.phase).kind)
        };
        if self.state.free_slots(machine, kind) == 0 {
            return Err(self.invalid(alloc::format!(
                "resume on busy machine {} ({} slots)",
                machine.0,
                kind
            )));
        }
        let footprint = {
            let p = self.state.phase(task.phase);
            let spec = &self.state.jobs[p.job_index as usize].spec;
            match p.kind {
                TaskKind::Reduce => spec.reduce_task_memory,
                TaskKind::Map => 0,
            }
        };
        let cost = suspend_cost(footprint, &self.state.cost_model);
        *self.state.free_slots_mut(machine, kind) -= 1;
        self.state.machines[machine.0 as usize]
            .suspended
            .retain(|r| *r != task);
        {
            let p = &mut self.state.phases[task.phase.0 as usize];
            p.holding_slots += 1;
            let t = &mut p.tasks[task.index as usize];
            t.state = RunState::Resuming;
            t.held_since = Some(now);
        }
        self.log_event("resume", Some(task.phase.0), Some(task.index), Some(machine.0));
        self.push(now + cost, EventKind::ResumeComplete { task });
        Ok(())
    }

    fn finish_resume(&mut self, task: TaskRef) {
        let now = self.state.now;
        let gen;
        let remaining;
        {
            let t = self.state.task_mut(task);
            debug_assert_eq!(t.state, RunState::Resuming);
            t.state = RunState::Running;
            t.running_since = Some(now);
            t.suspended_at = None;
            t.completion_gen += 1;
            gen = t.completion_gen;
            remaining = remaining_duration(t.effective_total, t.progress);
        }
        self.push(now + remaining, EventKind::TaskCompletion { task, gen });
    }

    fn kill(&mut self, task: TaskRef) -> Result<(), EngineError> {
        let now = self.state.now;
        let prior = self.state.task(task).state;
        let (kind, job_index) = {
            let p = self.state.phase(task.phase);
            (p.kind, p.job_index)
        };
        match prior {
            RunState::Running | RunState::Suspended => {}
            _ => {
                return Err(self.invalid(alloc::format!(
                    "kill of task {}.{} in a non-killable state",
                    task.phase.0,
                    task.index
                )))
            }
        }
        let (machine, launch_time, held, held_start, is_local, is_sample, processed) = {
            let t = self.state.task_mut(task);
            t.completion_gen += 1;
            let processed = t.processed_seconds(now);
            t.attempt_processed = processed;
            let held_start = t.held_since.take();
            let held = t.attempt_held + held_start.map(|s| now - s).unwrap_or(0.0);
            (
                t.machine,
                t.launch_time,
                held,
                held_start,
                t.is_local,
                t.is_sample,
                processed,
            )
        };
        if let Some(start) = held_start {
            self.state.slot_intervals.push(SlotInterval {
                phase: task.phase.0,
                job_index,
                kind,
                machine: machine.0,
                start,
                end: now,
            });
        }
        self.state.attempts.push(AttemptRecord {
            phase: task.phase.0,
            task_index: task.index,
            job_index,
            kind,
            machine: machine.0,
            launch: launch_time,
            end: now,
            outcome: AttemptOutcome::Killed,
            is_local,
            is_sample,
            held_seconds: held,
            processing_seconds: processed,
        });
        if prior == RunState::Running {
            *self.state.free_slots_mut(machine, kind) += 1;
            self.state.phases[task.phase.0 as usize].holding_slots -= 1;
        } else {
            self.state.machines[machine.0 as usize]
                .suspended
                .retain(|r| *r != task);
        }
        {
            let p = &mut self.state.phases[task.phase.0 as usize];
            p.pending.insert(task.index);
            if p.kind == TaskKind::Map {
                let job = &self.state.jobs[p.job_index as usize];
                if let Some(reps) = job.placement.replicas(task.index) {
                    for &m in reps {
                        p.pending_local.entry(m).or_default().insert(task.index);
                    }
                }
            }
            let t = &mut p.tasks[task.index as usize];
            t.state = RunState::Pending;
            t.progress = 0.0;
            t.running_since = None;
            t.suspended_at = None;
        }
        self.log_event("kill", Some(task.phase.0), Some(task.index), Some(machine.0));
        Ok(())
    }

    fn complete_task(&mut self, task: TaskRef, next_arrival_seq: &mut u64) {
        let now = self.state.now;
        let (kind, job_index) = {
            let p = self.state.phase(task.phase);
            (p.kind, p.job_index)
        };
        let (machine, launch_time, held_start, held_prior, is_local, is_sample, eff) = {
            let t = self.state.task_mut(task);
            t.progress = 1.0;
            t.running_since = None;
            t.state = RunState::Completed;
            let held_start = t.held_since.take().expect("running task held a slot");
            (
                t.machine,
                t.launch_time,
                held_start,
                t.attempt_held,
                t.is_local,
                t.is_sample,
                t.effective_total,
            )
        };
        let held = held_prior + (now - held_start);
        self.state.slot_intervals.push(SlotInterval {
            phase: task.phase.0,
            job_index,
            kind,
            machine: machine.0,
            start: held_start,
            end: now,
        });
        self.state.attempts.push(AttemptRecord {
            phase: task.phase.0,
            task_index: task.index,
            job_index,
            kind,
            machine: machine.0,
            launch: launch_time,
            end: now,
            outcome: AttemptOutcome::Completed,
            is_local,
            is_sample,
            held_seconds: held,
            processing_seconds: eff,
        });
        *self.state.free_slots_mut(machine, kind) += 1;

        let phase_done = {
            let p = &mut self.state.phases[task.phase.0 as usize];
            p.holding_slots -= 1;
            p.completed += 1;
            if p.is_complete() {
                p.completion = Some(now);
                p.state = PhaseState::Completed;
                true
            } else {
                false
            }
        };
        if phase_done {
            self.state.phases_completed += 1;
        }

        // slowstart: activate the reduce phase once enough maps finished
        if kind == TaskKind::Map {
            let job = &self.state.jobs[job_index as usize];
            if let Some(reduce_id) = job.reduce_phase {
                if !job.reduce_activated {
                    let threshold = self.state.cfg.slowstart_threshold(job.spec.num_map_tasks);
                    let done = self.state.phases[job.map_phase.0 as usize].completed;
                    if done >= threshold {
                        self.state.jobs[job_index as usize].reduce_activated = true;
                        let p = &mut self.state.phases[reduce_id.0 as usize];
                        p.arrival_time = now;
                        p.arrival_seq = *next_arrival_seq;
                        *next_arrival_seq += 1;
                        self.push(now, EventKind::JobArrival { phase: reduce_id });
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MB;
    use crate::workload::TraceMetadata;
    use alloc::vec;

    fn one_job_trace(maps: u32, dur: f64) -> WorkloadTrace {
        WorkloadTrace {
            metadata: TraceMetadata::default(),
            jobs: vec![JobSpec {
                job_id: "j0".to_string(),
                submit_time: 0.0,
                num_map_tasks: maps,
                num_reduce_tasks: 0,
                map_task_duration: dur,
                reduce_task_duration: 0.0,
                shuffle_bytes_per_reduce: 0,
                reduce_task_memory: GB,
                weight: 1.0,
                job_class_label: String::new(),
                priority: 0,
            }],
        }
    }

    /// Greedy test scheduler: launch any pending task into any free slot.
    struct Greedy;

    impl Scheduler for Greedy {
        fn name(&self) -> &'static str {
            "greedy"
        }

        fn on_job_arrival(&mut self, _state: &SimState, _phase: PhaseId) -> Vec<SchedulerAction> {
            Vec::new()
        }

        fn on_heartbeat(&mut self, state: &SimState, machine: MachineId) -> Vec<SchedulerAction> {
            let mut actions = Vec::new();
            for kind in [TaskKind::Map, TaskKind::Reduce] {
                let mut free = state.free_slots(machine, kind);
                for p in state.phases() {
                    if p.kind != kind || !p.has_arrived() {
                        continue;
                    }
                    let mut granted: Vec<u32> = Vec::new();
                    for idx in p.pending_tasks() {
                        if free == 0 {
                            break;
                        }
                        granted.push(idx);
                        free -= 1;
                    }
                    for idx in granted {
                        actions.push(SchedulerAction::LaunchTask {
                            task: TaskRef {
                                phase: p.phase_id,
                                index: idx,
                            },
                            machine,
                            sample: false,
                        });
                    }
                }
            }
            actions
        }

        fn on_task_completion(&mut self, _state: &SimState, _task: TaskRef) -> Vec<SchedulerAction> {
            Vec::new()
        }
    }

    #[test]
    fn no_contention_completes_at_arrival_plus_heartbeat_plus_duration() {
        let trace = one_job_trace(1, 60.0);
        let cfg = ClusterConfig {
            num_machines: 1,
            map_slots_per_machine: 1,
            replication_factor: 1,
            ..ClusterConfig::default()
        };
        let mut sched = Greedy;
        let r = run_simulation(&trace, &cfg, &mut sched, 1).unwrap();
        assert!(r.completed);
        // machine 0 heartbeats at t = 0; arrival (priority 0) precedes it
        let c = r.jobs[0].map.completion.unwrap();
        assert!((c - 60.0).abs() < 1e-9, "completion {c}");
    }

    #[test]
    fn identical_seeds_give_identical_event_logs() {
        let trace = one_job_trace(7, 10.0);
        let cfg = ClusterConfig {
            num_machines: 3,
            map_slots_per_machine: 2,
            replication_factor: 2,
            ..ClusterConfig::default()
        };
        let a = run_simulation(&trace, &cfg, &mut Greedy, 99).unwrap();
        let b = run_simulation(&trace, &cfg, &mut Greedy, 99).unwrap();
        assert_eq!(a.event_log, b.event_log);
        assert_eq!(a.end_time, b.end_time);
    }

    #[test]
    fn event_ordering_breaks_ties_by_kind_then_seq() {
        let mk = |time: f64, seq: u64, kind: EventKind| Event { time, seq, kind };
        let mut heap = BinaryHeap::new();
        heap.push(mk(5.0, 0, EventKind::TaskCompletion {
            task: TaskRef { phase: PhaseId(0), index: 0 },
            gen: 1,
        }));
        heap.push(mk(5.0, 1, EventKind::Heartbeat { machine: MachineId(0) }));
        heap.push(mk(5.0, 2, EventKind::JobArrival { phase: PhaseId(1) }));
        heap.push(mk(4.0, 3, EventKind::Heartbeat { machine: MachineId(1) }));
        let order: Vec<u8> = core::iter::from_fn(|| heap.pop())
            .map(|e| e.kind.priority())
            .collect();
        assert_eq!(order, vec![1, 0, 1, 2]);
    }

    #[test]
    fn swap_cost_matches_the_piecewise_model() {
        let model = PreemptionCostModel {
            disk_bandwidth: 100.0 * MB as f64,
            degrade_threshold: 5 * GB,
            degrade_factor: 1.2,
        };
        assert!((suspend_cost(2 * GB, &model) - 20.0).abs() < 1e-9);
        assert_eq!(suspend_cost(0, &model), 0.0);
        assert!((suspend_cost(6 * GB, &model) - 62.0).abs() < 1e-9);
    }

    #[test]
    fn effective_duration_applies_remote_penalty() {
        let cfg = ClusterConfig {
            remote_read_penalty: 1.3,
            ..ClusterConfig::default()
        };
        assert_eq!(effective_task_duration(60.0, TaskKind::Map, true, &cfg), 60.0);
        assert!((effective_task_duration(60.0, TaskKind::Map, false, &cfg) - 78.0).abs() < 1e-12);
        assert_eq!(effective_task_duration(500.0, TaskKind::Reduce, false, &cfg), 500.0);
        assert!((remaining_duration(500.0, 0.4) - 300.0).abs() < 1e-12);
    }

    /// Scripted scheduler for suspend/resume mechanics: suspends the running
    /// task at the first heartbeat after `suspend_after`, resumes it at the
    /// first offer after `resume_after`.
    struct SuspendOnce {
        suspend_after: f64,
        resume_after: f64,
        suspended: Option<TaskRef>,
        done: bool,
    }

    impl Scheduler for SuspendOnce {
        fn name(&self) -> &'static str {
            "scripted"
        }

        fn on_job_arrival(&mut self, _state: &SimState, phase: PhaseId) -> Vec<SchedulerAction> {
            vec![SchedulerAction::LaunchTask {
                task: TaskRef { phase, index: 0 },
                machine: MachineId(0),
                sample: false,
            }]
        }

        fn on_heartbeat(&mut self, state: &SimState, _machine: MachineId) -> Vec<SchedulerAction> {
            if !self.done && self.suspended.is_none() && state.now() >= self.suspend_after {
                for p in state.phases() {
                    if p.kind == TaskKind::Reduce {
                        let t = TaskRef { phase: p.phase_id, index: 0 };
                        if state.task(t).is_running() {
                            self.suspended = Some(t);
                            return vec![SchedulerAction::SuspendTask { task: t }];
                        }
                    }
                }
            }
            if let Some(t) = self.suspended {
                if state.now() >= self.resume_after && state.task(t).is_suspended() {
                    self.suspended = None;
                    self.done = true;
                    return vec![SchedulerAction::ResumeTask { task: t }];
                }
            }
            Vec::new()
        }

        fn on_task_completion(&mut self, _state: &SimState, _task: TaskRef) -> Vec<SchedulerAction> {
            Vec::new()
        }
    }

    fn reduce_job_trace(exec: f64, memory: u64) -> WorkloadTrace {
        WorkloadTrace {
            metadata: TraceMetadata::default(),
            jobs: vec![JobSpec {
                job_id: "j0".to_string(),
                submit_time: 0.0,
                num_map_tasks: 1,
                num_reduce_tasks: 1,
                map_task_duration: 1.0,
                reduce_task_duration: exec,
                shuffle_bytes_per_reduce: 0,
                reduce_task_memory: memory,
                weight: 1.0,
                job_class_label: String::new(),
                priority: 0,
            }],
        }
    }

    #[test]
    fn suspend_resume_preserves_work_and_charges_the_slot() {
        let cfg = ClusterConfig {
            num_machines: 1,
            map_slots_per_machine: 1,
            reduce_slots_per_machine: 1,
            replication_factor: 1,
            ..ClusterConfig::default()
        };
        let trace = reduce_job_trace(100.0, GB); // 10 s swap each way
        let mut sched = SuspendOnce {
            suspend_after: 30.0,
            resume_after: 50.0,
            suspended: None,
            done: false,
        };
        let r = run_simulation(&trace, &cfg, &mut sched, 1).unwrap();
        assert!(r.completed);
        let reduce = r.jobs[0].reduce.as_ref().unwrap();
        let attempt = r
            .attempts
            .iter()
            .find(|a| a.kind == TaskKind::Reduce && a.outcome == AttemptOutcome::Completed)
            .unwrap();
        // processing time equals the nominal duration: no work lost
        assert!((attempt.processing_seconds - 100.0).abs() < 1e-9);
        // slot was additionally held for two 10 s swap transfers
        assert!((attempt.held_seconds - 120.0).abs() < 1e-9);
        // completion = launch + run-before-suspend + swap-out idle window
        //   + swap-in + remainder; just pin the invariant pieces
        let done = reduce.completion.unwrap();
        assert!(done > 100.0 + 20.0);
        // progress reached exactly 1
        assert!(r
            .event_log
            .iter()
            .any(|e| e.kind == "suspended"));
    }

    #[test]
    fn killed_task_restarts_and_inflates_slot_time() {
        struct KillOnce {
            killed: bool,
        }
        impl Scheduler for KillOnce {
            fn name(&self) -> &'static str {
                "kill-once"
            }
            fn on_job_arrival(&mut self, _state: &SimState, phase: PhaseId) -> Vec<SchedulerAction> {
                vec![SchedulerAction::LaunchTask {
                    task: TaskRef { phase, index: 0 },
                    machine: MachineId(0),
                    sample: false,
                }]
            }
            fn on_heartbeat(&mut self, state: &SimState, machine: MachineId) -> Vec<SchedulerAction> {
                let mut out = Vec::new();
                for p in state.phases() {
                    if p.kind != TaskKind::Reduce {
                        continue;
                    }
                    let t = TaskRef { phase: p.phase_id, index: 0 };
                    if !self.killed && state.now() >= 30.0 && state.task(t).is_running() {
                        self.killed = true;
                        out.push(SchedulerAction::KillTask { task: t });
                        out.push(SchedulerAction::LaunchTask {
                            task: t,
                            machine,
                            sample: false,
                        });
                    } else if state.task(t).is_pending() && p.has_arrived() {
                        out.push(SchedulerAction::LaunchTask {
                            task: t,
                            machine,
                            sample: false,
                        });
                    }
                }
                out
            }
            fn on_task_completion(&mut self, _state: &SimState, _task: TaskRef) -> Vec<SchedulerAction> {
                Vec::new()
            }
        }

        let cfg = ClusterConfig {
            num_machines: 1,
            map_slots_per_machine: 1,
            reduce_slots_per_machine: 1,
            replication_factor: 1,
            ..ClusterConfig::default()
        };
        let trace = reduce_job_trace(100.0, GB);
        let r = run_simulation(&trace, &cfg, &mut KillOnce { killed: false }, 1).unwrap();
        assert!(r.completed);
        let held: f64 = r
            .attempts
            .iter()
            .filter(|a| a.kind == TaskKind::Reduce)
            .map(|a| a.held_seconds)
            .sum();
        // killed work is redone: total slot time strictly exceeds nominal
        assert!(held > 100.0 + 1.0, "held {held}");
        let kills = r
            .attempts
            .iter()
            .filter(|a| a.outcome == AttemptOutcome::Killed)
            .count();
        assert_eq!(kills, 1);
    }

    #[test]
    fn slot_conservation_holds_throughout() {
        let trace = one_job_trace(20, 5.0);
        let cfg = ClusterConfig {
            num_machines: 2,
            map_slots_per_machine: 3,
            replication_factor: 1,
            ..ClusterConfig::default()
        };
        let r = run_simulation(&trace, &cfg, &mut Greedy, 5).unwrap();
        // replay slot intervals: at no instant does a machine exceed capacity
        let mut edges: Vec<(f64, i32, u32)> = Vec::new();
        for si in &r.slot_intervals {
            if si.kind == TaskKind::Map {
                edges.push((si.start, 1, si.machine));
                edges.push((si.end, -1, si.machine));
            }
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut in_use = vec![0i32; 2];
        for (_, delta, m) in edges {
            in_use[m as usize] += delta;
            assert!(in_use[m as usize] <= 3);
            assert!(in_use[m as usize] >= 0);
        }
    }

    #[test]
    fn invalid_launch_is_a_protocol_error() {
        struct DoubleLaunch;
        impl Scheduler for DoubleLaunch {
            fn name(&self) -> &'static str {
                "bad"
            }
            fn on_job_arrival(&mut self, _state: &SimState, phase: PhaseId) -> Vec<SchedulerAction> {
                let t = TaskRef { phase, index: 0 };
                vec![
                    SchedulerAction::LaunchTask { task: t, machine: MachineId(0), sample: false },
                    SchedulerAction::LaunchTask { task: t, machine: MachineId(0), sample: false },
                ]
            }
            fn on_heartbeat(&mut self, _state: &SimState, _machine: MachineId) -> Vec<SchedulerAction> {
                Vec::new()
            }
            fn on_task_completion(&mut self, _state: &SimState, _task: TaskRef) -> Vec<SchedulerAction> {
                Vec::new()
            }
        }
        let trace = one_job_trace(1, 10.0);
        let cfg = ClusterConfig {
            num_machines: 1,
            replication_factor: 1,
            ..ClusterConfig::default()
        };
        let err = run_simulation(&trace, &cfg, &mut DoubleLaunch, 1).unwrap_err();
        assert!(matches!(err, EngineError::InvalidAction { .. }));
    }
}
