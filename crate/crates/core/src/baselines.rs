//! The FIFO and FAIR baseline schedulers, plus the delay-scheduling helper
//! both FAIR and HFSP use for map locality.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::engine::{PhaseRuntime, Scheduler, SchedulerAction, SimState};
use crate::model::{MachineId, PhaseId, TaskKind, TaskRef};

/// Per-(phase-job, machine) skip counters for delay scheduling.
#[derive(Debug, Clone, Default)]
pub struct DelayState {
    pub max_skips: u32,
    counters: BTreeMap<(PhaseId, MachineId), u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayDecision {
    LaunchLocal(u32),
    Skip,
    LaunchNonLocal(u32),
}

impl DelayState {
    pub fn new(max_skips: u32) -> Self {
        DelayState {
            max_skips,
            counters: BTreeMap::new(),
        }
    }

    pub fn skips(&self, phase: PhaseId, machine: MachineId) -> u32 {
        self.counters.get(&(phase, machine)).copied().unwrap_or(0)
    }

    pub fn forget_phase(&mut self, phase: PhaseId) {
        self.counters.retain(|(p, _), _| *p != phase);
    }
}

/// Decide what a map slot offer from `machine` means for a phase-job:
/// launch a data-local task when one is pending, otherwise skip the offer a
/// bounded number of times before settling for a non-local launch.
///
/// `local` / `any` are the first launchable pending task indices, local to
/// the offering machine and overall.
pub fn delay_decide(
    state: &mut DelayState,
    phase: PhaseId,
    machine: MachineId,
    local: Option<u32>,
    any: Option<u32>,
) -> DelayDecision {
    if let Some(idx) = local {
        state.counters.remove(&(phase, machine));
        return DelayDecision::LaunchLocal(idx);
    }
    let Some(idx) = any else {
        return DelayDecision::Skip;
    };
    let counter = state.counters.entry((phase, machine)).or_insert(0);
    if *counter < state.max_skips {
        *counter += 1;
        DelayDecision::Skip
    } else {
        *counter = 0;
        DelayDecision::LaunchNonLocal(idx)
    }
}

/// FIFO task selection: scan jobs by (priority desc, submit asc, arrival
/// order), and inside the chosen job greedily prefer a data-local map task.
/// No cross-job delay: the first job with any pending task wins.
pub fn fifo_select(state: &SimState, machine: MachineId, kind: TaskKind) -> Option<TaskRef> {
    let mut candidates: Vec<&PhaseRuntime> = state
        .phases()
        .iter()
        .filter(|p| {
            p.kind == kind && p.has_arrived() && !p.is_complete() && p.pending_count() > 0
        })
        .collect();
    candidates.sort_by(|a, b| {
        let ja = &state.job(a.job_index).spec;
        let jb = &state.job(b.job_index).spec;
        jb.priority
            .cmp(&ja.priority)
            .then(ja.submit_time.total_cmp(&jb.submit_time))
            .then(a.arrival_seq.cmp(&b.arrival_seq))
    });
    let phase = candidates.first()?;
    let index = phase
        .first_pending_local(machine)
        .or_else(|| phase.first_pending())?;
    Some(TaskRef {
        phase: phase.phase_id,
        index,
    })
}

pub struct FifoScheduler;

impl FifoScheduler {
    fn fill_machine(&self, state: &SimState, machine: MachineId) -> Vec<SchedulerAction> {
        let mut actions = Vec::new();
        for kind in [TaskKind::Map, TaskKind::Reduce] {
            let mut free = state.free_slots(machine, kind);
            let mut taken: Vec<TaskRef> = Vec::new();
            while free > 0 {
                let Some(task) = fifo_select_excluding(state, machine, kind, &taken) else {
                    break;
                };
                taken.push(task);
                actions.push(SchedulerAction::LaunchTask {
                    task,
                    machine,
                    sample: false,
                });
                free -= 1;
            }
        }
        actions
    }
}

fn fifo_select_excluding(
    state: &SimState,
    machine: MachineId,
    kind: TaskKind,
    taken: &[TaskRef],
) -> Option<TaskRef> {
    let mut candidates: Vec<&PhaseRuntime> = state
        .phases()
        .iter()
        .filter(|p| p.kind == kind && p.has_arrived() && !p.is_complete())
        .collect();
    candidates.sort_by(|a, b| {
        let ja = &state.job(a.job_index).spec;
        let jb = &state.job(b.job_index).spec;
        jb.priority
            .cmp(&ja.priority)
            .then(ja.submit_time.total_cmp(&jb.submit_time))
            .then(a.arrival_seq.cmp(&b.arrival_seq))
    });
    for phase in candidates {
        let not_taken = |idx: &u32| {
            !taken.contains(&TaskRef {
                phase: phase.phase_id,
                index: *idx,
            })
        };
        let local = phase
            .pending_local_tasks(machine)
            .find(|i| not_taken(i));
        let any = phase.pending_tasks().find(|i| not_taken(i));
        if let Some(index) = local.or(any) {
            return Some(TaskRef {
                phase: phase.phase_id,
                index,
            });
        }
    }
    None
}

impl Scheduler for FifoScheduler {
    fn name(&self) -> &'static str {
        "fifo"
    }

    fn on_job_arrival(&mut self, _state: &SimState, _phase: PhaseId) -> Vec<SchedulerAction> {
        // assignment happens on heartbeats, as in stock Hadoop
        Vec::new()
    }

    fn on_heartbeat(&mut self, state: &SimState, machine: MachineId) -> Vec<SchedulerAction> {
        self.fill_machine(state, machine)
    }

    fn on_task_completion(&mut self, state: &SimState, task: TaskRef) -> Vec<SchedulerAction> {
        // the completion report frees a slot on this machine's heartbeat
        let machine = state.task(task).machine();
        self.fill_machine(state, machine)
    }
}

/// Slot-second deficit bookkeeping for one task kind, single pool.
#[derive(Debug, Clone, Default)]
pub struct FairShareState {
    pub min_share: u32,
    deficits: BTreeMap<PhaseId, f64>,
}

impl FairShareState {
    pub fn new(min_share: u32) -> Self {
        FairShareState {
            min_share,
            deficits: BTreeMap::new(),
        }
    }

    pub fn deficit(&self, phase: PhaseId) -> f64 {
        self.deficits.get(&phase).copied().unwrap_or(0.0)
    }

    pub fn forget(&mut self, phase: PhaseId) {
        self.deficits.remove(&phase);
    }

    pub fn total_deficit(&self) -> f64 {
        self.deficits.values().sum()
    }
}

/// Accrue deficits over `dt`: each active job is owed its equal share of
/// capacity minus the slots it actually held.
pub fn update_deficits(
    state: &mut FairShareState,
    dt: f64,
    active: &[(PhaseId, u32)],
    capacity: u32,
) {
    debug_assert!(dt >= 0.0);
    if dt == 0.0 || active.is_empty() {
        return;
    }
    let fair_share = capacity as f64 / active.len() as f64;
    for &(phase, holding) in active {
        *state.deficits.entry(phase).or_insert(0.0) += (fair_share - holding as f64) * dt;
    }
}

/// FAIR task selection order: any job below its minimum share first (most
/// deprived wins), then the job with the biggest deficit; ties go to the
/// earlier submission.
pub fn fair_rank(state: &SimState, share: &FairShareState, kind: TaskKind) -> Vec<PhaseId> {
    let mut active: Vec<&PhaseRuntime> = state
        .phases()
        .iter()
        .filter(|p| p.kind == kind && p.has_arrived() && !p.is_complete())
        .collect();
    active.sort_by(|a, b| {
        let a_below = a.holding_slots() < share.min_share;
        let b_below = b.holding_slots() < share.min_share;
        b_below
            .cmp(&a_below) // below-min-share jobs first
            .then_with(|| {
                if a_below && b_below {
                    a.holding_slots().cmp(&b.holding_slots())
                } else {
                    core::cmp::Ordering::Equal
                }
            })
            .then_with(|| {
                share
                    .deficit(b.phase_id)
                    .total_cmp(&share.deficit(a.phase_id))
            })
            .then_with(|| {
                let ja = &state.job(a.job_index).spec;
                let jb = &state.job(b.job_index).spec;
                ja.submit_time.total_cmp(&jb.submit_time)
            })
            .then(a.arrival_seq.cmp(&b.arrival_seq))
    });
    active.iter().map(|p| p.phase_id).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairConfig {
    pub min_share: u32,
    pub delay_max_skips: u32,
}

impl Default for FairConfig {
    fn default() -> Self {
        FairConfig {
            min_share: 0,
            delay_max_skips: 2,
        }
    }
}

pub struct FairScheduler {
    map_share: FairShareState,
    reduce_share: FairShareState,
    delay: DelayState,
    last_update: f64,
}

impl FairScheduler {
    pub fn new(cfg: FairConfig) -> Self {
        FairScheduler {
            map_share: FairShareState::new(cfg.min_share),
            reduce_share: FairShareState::new(cfg.min_share),
            delay: DelayState::new(cfg.delay_max_skips),
            last_update: 0.0,
        }
    }

    pub fn share_state(&self, kind: TaskKind) -> &FairShareState {
        match kind {
            TaskKind::Map => &self.map_share,
            TaskKind::Reduce => &self.reduce_share,
        }
    }

    /// Deficits are updated between consecutive scheduler events.
    fn tick(&mut self, state: &SimState) {
        let dt = state.now() - self.last_update;
        self.last_update = state.now();
        if dt <= 0.0 {
            return;
        }
        for kind in [TaskKind::Map, TaskKind::Reduce] {
            let active: Vec<(PhaseId, u32)> = state
                .phases()
                .iter()
                .filter(|p| p.kind == kind && p.has_arrived() && !p.is_complete())
                .map(|p| (p.phase_id, p.holding_slots()))
                .collect();
            let capacity = state.cluster().total_slots(kind);
            let share = match kind {
                TaskKind::Map => &mut self.map_share,
                TaskKind::Reduce => &mut self.reduce_share,
            };
            update_deficits(share, dt, &active, capacity);
        }
    }

    fn fill_machine(&mut self, state: &SimState, machine: MachineId) -> Vec<SchedulerAction> {
        let mut actions = Vec::new();
        for kind in [TaskKind::Map, TaskKind::Reduce] {
            let mut free = state.free_slots(machine, kind);
            let mut taken: Vec<TaskRef> = Vec::new();
            'slots: while free > 0 {
                let ranked = fair_rank(state, self.share_state(kind), kind);
                let mut launched = None;
                for phase_id in ranked {
                    let phase = state.phase(phase_id);
                    let not_taken = |idx: &u32| {
                        !taken.contains(&TaskRef {
                            phase: phase_id,
                            index: *idx,
                        })
                    };
                    let any = phase.pending_tasks().find(|i| not_taken(i));
                    if any.is_none() {
                        continue;
                    }
                    let choice = if kind == TaskKind::Map {
                        let local = phase.pending_local_tasks(machine).find(|i| not_taken(i));
                        match delay_decide(&mut self.delay, phase_id, machine, local, any) {
                            DelayDecision::LaunchLocal(i) | DelayDecision::LaunchNonLocal(i) => {
                                Some(i)
                            }
                            DelayDecision::Skip => None, // offer passes down the ranking
                        }
                    } else {
                        any
                    };
                    if let Some(index) = choice {
                        launched = Some(TaskRef {
                            phase: phase_id,
                            index,
                        });
                        break;
                    }
                }
                match launched {
                    Some(task) => {
                        taken.push(task);
                        actions.push(SchedulerAction::LaunchTask {
                            task,
                            machine,
                            sample: false,
                        });
                        free -= 1;
                    }
                    None => break 'slots, // every eligible job skipped this offer
                }
            }
        }
        actions
    }

    fn forget_finished(&mut self, state: &SimState, task: TaskRef) {
        let phase = state.phase(task.phase);
        if phase.is_complete() {
            self.map_share.forget(task.phase);
            self.reduce_share.forget(task.phase);
            self.delay.forget_phase(task.phase);
        }
    }
}

impl Scheduler for FairScheduler {
    fn name(&self) -> &'static str {
        "fair"
    }

    fn on_start(&mut self, _state: &SimState, _seed: u64) {
        self.last_update = 0.0;
    }

    fn on_job_arrival(&mut self, state: &SimState, _phase: PhaseId) -> Vec<SchedulerAction> {
        self.tick(state);
        Vec::new()
    }

    fn on_heartbeat(&mut self, state: &SimState, machine: MachineId) -> Vec<SchedulerAction> {
        self.tick(state);
        self.fill_machine(state, machine)
    }

    fn on_task_completion(&mut self, state: &SimState, task: TaskRef) -> Vec<SchedulerAction> {
        self.tick(state);
        self.forget_finished(state, task);
        let machine = state.task(task).machine();
        self.fill_machine(state, machine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_simulation;
    use crate::model::{ClusterConfig, JobSpec, GB};
    use crate::workload::{TraceMetadata, WorkloadTrace};
    use alloc::string::{String, ToString};
    use alloc::vec;

    fn map_job(id: &str, submit: f64, maps: u32, dur: f64) -> JobSpec {
        JobSpec {
            job_id: id.to_string(),
            submit_time: submit,
            num_map_tasks: maps,
            num_reduce_tasks: 0,
            map_task_duration: dur,
            reduce_task_duration: 0.0,
            shuffle_bytes_per_reduce: 0,
            reduce_task_memory: GB,
            weight: 1.0,
            job_class_label: String::new(),
            priority: 0,
        }
    }

    fn trace(jobs: Vec<JobSpec>) -> WorkloadTrace {
        WorkloadTrace {
            metadata: TraceMetadata::default(),
            jobs,
        }
    }

    #[test]
    fn delay_decide_prefers_local_and_bounds_skips() {
        let mut st = DelayState::new(3);
        let p = PhaseId(0);
        let m = MachineId(1);
        assert_eq!(
            delay_decide(&mut st, p, m, Some(4), Some(2)),
            DelayDecision::LaunchLocal(4)
        );
        // counter 0, D = 3, no local: skip
        assert_eq!(delay_decide(&mut st, p, m, None, Some(2)), DelayDecision::Skip);
        assert_eq!(delay_decide(&mut st, p, m, None, Some(2)), DelayDecision::Skip);
        assert_eq!(delay_decide(&mut st, p, m, None, Some(2)), DelayDecision::Skip);
        // counter reached D: settle for non-local, counter resets
        assert_eq!(
            delay_decide(&mut st, p, m, None, Some(2)),
            DelayDecision::LaunchNonLocal(2)
        );
        assert_eq!(st.skips(p, m), 0);
    }

    #[test]
    fn deficit_update_matches_hand_calc() {
        let mut st = FairShareState::new(0);
        let a = PhaseId(0);
        let b = PhaseId(1);
        // capacity 10, A runs 10, B runs 0, dt = 1 -> A -5, B +5
        update_deficits(&mut st, 1.0, &[(a, 10), (b, 0)], 10);
        assert!((st.deficit(a) + 5.0).abs() < 1e-12);
        assert!((st.deficit(b) - 5.0).abs() < 1e-12);
        assert!(st.total_deficit().abs() < 1e-12);
        // dt = 0: no change
        update_deficits(&mut st, 0.0, &[(a, 10), (b, 0)], 10);
        assert!((st.deficit(a) + 5.0).abs() < 1e-12);
    }

    #[test]
    fn single_job_holding_capacity_accrues_nothing() {
        let mut st = FairShareState::new(0);
        update_deficits(&mut st, 7.0, &[(PhaseId(0), 10)], 10);
        assert_eq!(st.deficit(PhaseId(0)), 0.0);
    }

    #[test]
    fn fifo_serves_jobs_in_submission_order() {
        let t = trace(vec![
            map_job("a", 0.0, 4, 50.0),
            map_job("b", 5.0, 4, 50.0),
        ]);
        let cfg = ClusterConfig {
            num_machines: 1,
            map_slots_per_machine: 4,
            reduce_slots_per_machine: 1,
            replication_factor: 1,
            ..ClusterConfig::default()
        };
        let r = run_simulation(&t, &cfg, &mut FifoScheduler, 1).unwrap();
        assert!(r.completed);
        let a_done = r.jobs[0].map.completion.unwrap();
        let b_done = r.jobs[1].map.completion.unwrap();
        // a occupies the whole cluster first; b runs strictly after
        assert!(a_done < b_done);
        assert!(b_done >= a_done + 50.0);
    }

    #[test]
    fn fifo_single_job_is_work_conserving() {
        let t = trace(vec![map_job("a", 0.0, 12, 10.0)]);
        let cfg = ClusterConfig {
            num_machines: 2,
            map_slots_per_machine: 3,
            reduce_slots_per_machine: 1,
            replication_factor: 1,
            remote_read_penalty: 1.0,
            ..ClusterConfig::default()
        };
        let r = run_simulation(&t, &cfg, &mut FifoScheduler, 1).unwrap();
        assert!(r.completed);
        // 12 tasks on 6 slots at 10 s each: two full waves, no idling
        // beyond the initial heartbeat stagger
        let done = r.jobs[0].map.completion.unwrap();
        assert!(done < 20.0 + cfg.heartbeat_interval, "done {done}");
    }

    #[test]
    fn fair_splits_slots_between_jobs() {
        let t = trace(vec![
            map_job("a", 0.0, 40, 30.0),
            map_job("b", 0.5, 40, 30.0),
        ]);
        let cfg = ClusterConfig {
            num_machines: 2,
            map_slots_per_machine: 4,
            reduce_slots_per_machine: 1,
            replication_factor: 2,
            ..ClusterConfig::default()
        };
        let r = run_simulation(&t, &cfg, &mut FairScheduler::new(FairConfig::default()), 1).unwrap();
        assert!(r.completed);
        let a_done = r.jobs[0].map.completion.unwrap();
        let b_done = r.jobs[1].map.completion.unwrap();
        // equal-sized jobs sharing fairly finish close together, unlike FIFO
        assert!((a_done - b_done).abs() < 40.0, "a {a_done} b {b_done}");
    }

    #[test]
    fn deficits_sum_to_zero_while_saturated() {
        // whenever every slot is held, the equal-share integral telescopes
        // to zero regardless of how slots are spread across jobs
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::default();
        runner
            .run(
                &(2usize..6, proptest::collection::vec(0.1f64..5.0, 1..10)),
                |(jobs, dts)| {
                    let capacity = 12u32;
                    let mut st = FairShareState::new(0);
                    let mut split = alloc::vec![capacity / jobs as u32; jobs];
                    let rem = capacity - split.iter().sum::<u32>();
                    split[0] += rem;
                    for (step, dt) in dts.iter().enumerate() {
                        // rotate holdings between steps
                        split.rotate_right(step % jobs);
                        let active: Vec<(PhaseId, u32)> = split
                            .iter()
                            .enumerate()
                            .map(|(i, &h)| (PhaseId(i as u32), h))
                            .collect();
                        update_deficits(&mut st, *dt, &active, capacity);
                        prop_assert!(st.total_deficit().abs() < 1e-9);
                    }
                    Ok(())
                },
            )
            .unwrap();
    }
}
