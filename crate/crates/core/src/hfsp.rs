//! The HFSP scheduler: size-based ranking through the virtual cluster,
//! training-slot management for sample tasks, delay scheduling for map
//! locality, and preemption of reduce tasks (eager suspend / wait / kill)
//! with newest-first suspension and oldest-first, same-machine resume.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{delay_decide, DelayDecision, DelayState};
use crate::engine::{DecisionRecord, Scheduler, SchedulerAction, SimState};
use crate::estimator::{
    estimate_shuffle, fit_phase_size, initial_estimate, inject_error, progress_based_size,
    update_average_task_size, AverageTaskSizeState, EstimatorConfig, Provenance, SampleRecord,
    SizeEstimate,
};
use crate::model::{MachineId, PhaseId, TaskKind, TaskRef};
use crate::vcluster::VirtualCluster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReducePreemption {
    /// Suspend excess tasks, paying the swap cost, and resume them later.
    Eager,
    /// Reclaim slots only as tasks finish.
    Wait,
    /// Kill excess tasks; their work is redone from scratch.
    Kill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HfspConfig {
    pub estimator: EstimatorConfig,
    /// Map training slots; `None` means 10% of map slots, at least one.
    pub training_map_slots: Option<u32>,
    pub training_reduce_slots: Option<u32>,
    /// Per-machine cap on suspended tasks; eager preemption degrades to
    /// wait while a machine is at the cap.
    pub max_suspended_per_machine: u32,
    /// Map tasks are short and always use wait; this picks the reduce policy.
    pub reduce_preemption: ReducePreemption,
    /// Delay-scheduling skip bound D, per (job, machine).
    pub delay_max_skips: u32,
    /// Feed true serialized sizes instead of running the estimator; used by
    /// the idealized replay scenarios.
    pub perfect_estimates: bool,
}

impl Default for HfspConfig {
    fn default() -> Self {
        HfspConfig {
            estimator: EstimatorConfig::default(),
            training_map_slots: None,
            training_reduce_slots: None,
            max_suspended_per_machine: 4,
            reduce_preemption: ReducePreemption::Eager,
            delay_max_skips: 2,
            perfect_estimates: false,
        }
    }
}

#[derive(Debug, Clone)]
struct PhaseTracking {
    kind: TaskKind,
    /// Still waiting for sample results.
    training: bool,
    samples: Vec<u32>,
    records: BTreeMap<u32, SampleRecord>,
    /// Sample tasks currently occupying training slots.
    training_live: BTreeSet<u32>,
    estimate: SizeEstimate,
}

fn kind_ix(kind: TaskKind) -> usize {
    match kind {
        TaskKind::Map => 0,
        TaskKind::Reduce => 1,
    }
}

pub struct HfspScheduler {
    cfg: HfspConfig,
    vc: [VirtualCluster; 2],
    rank: [Vec<PhaseId>; 2],
    tracking: BTreeMap<PhaseId, PhaseTracking>,
    avg: AverageTaskSizeState,
    delay: DelayState,
    training_in_use: [u32; 2],
    rng: ChaCha8Rng,
    decisions: Vec<DecisionRecord>,
}

impl HfspScheduler {
    pub fn new(cfg: HfspConfig) -> Self {
        let bootstrap = cfg.estimator.bootstrap_avg_task;
        let delay = DelayState::new(cfg.delay_max_skips);
        HfspScheduler {
            cfg,
            vc: [VirtualCluster::new(0), VirtualCluster::new(0)],
            rank: [Vec::new(), Vec::new()],
            tracking: BTreeMap::new(),
            avg: AverageTaskSizeState::new(bootstrap),
            delay,
            training_in_use: [0, 0],
            rng: ChaCha8Rng::seed_from_u64(0),
            decisions: Vec::new(),
        }
    }

    pub fn config(&self) -> &HfspConfig {
        &self.cfg
    }

    /// Current rank order for one slot kind (projected finish ascending).
    pub fn ranking(&self, kind: TaskKind) -> &[PhaseId] {
        &self.rank[kind_ix(kind)]
    }

    fn training_budget(&self, state: &SimState, kind: TaskKind) -> u32 {
        let configured = match kind {
            TaskKind::Map => self.cfg.training_map_slots,
            TaskKind::Reduce => self.cfg.training_reduce_slots,
        };
        configured.unwrap_or_else(|| (state.cluster().total_slots(kind) / 10).max(1))
    }

    fn age_all(&mut self, state: &SimState) {
        let now = state.now();
        self.vc[0].age(now);
        self.vc[1].age(now);
    }

    fn rerank(&mut self, state: &SimState, kind: TaskKind) {
        let ix = kind_ix(kind);
        self.rank[ix] = self.vc[ix]
            .project_completions(state.now())
            .into_iter()
            .map(|p| p.phase)
            .collect();
    }

    fn produce_estimate(&mut self, state: &SimState, phase: PhaseId) -> SizeEstimate {
        let p = state.phase(phase);
        let estimate = if self.cfg.perfect_estimates {
            let size = state.true_serialized_size(phase);
            SizeEstimate {
                phase_id: phase,
                serialized_size: size,
                provenance: Provenance::Trained,
                per_task_expected: size / p.num_tasks as f64,
                infinite_propensity: false,
            }
        } else {
            initial_estimate(p.kind, p.num_tasks, phase, &self.avg, &self.cfg.estimator)
        };
        let injected = self.cfg.estimator.alpha > 0.0 && !estimate.infinite_propensity;
        let estimate = inject_error(&estimate, self.cfg.estimator.alpha, &mut self.rng);
        self.decisions.push(DecisionRecord::Estimate {
            time: state.now(),
            phase: phase.0,
            serialized_size: estimate.serialized_size,
            provenance: if self.cfg.perfect_estimates {
                "oracle".to_string()
            } else {
                "initial".to_string()
            },
            injected,
        });
        estimate
    }

    /// Record extrapolated sizes for sample reduce tasks whose execution
    /// stage has been processing for at least delta seconds, then finalize
    /// any phase whose sample set became complete. Returns the kinds whose
    /// ranking changed.
    fn delta_checks(&mut self, state: &SimState) -> bool {
        if self.cfg.perfect_estimates {
            return false;
        }
        let delta = self.cfg.estimator.delta;
        let mut finalized_any = false;
        let phases: Vec<PhaseId> = self
            .tracking
            .iter()
            .filter(|(_, tr)| tr.training && tr.kind == TaskKind::Reduce)
            .map(|(p, _)| *p)
            .collect();
        for phase in phases {
            let tr = self.tracking.get_mut(&phase).expect("tracked phase");
            let spec_bytes = {
                let p = state.phase(phase);
                state.job(p.job_index).spec.shuffle_bytes_per_reduce
            };
            for &idx in &tr.samples {
                if tr.records.contains_key(&idx) {
                    continue;
                }
                let t = state.task(TaskRef { phase, index: idx });
                if t.is_pending() || t.is_completed() {
                    continue;
                }
                if t.exec_processed_seconds(state.now()) + 1e-9 < delta {
                    continue;
                }
                // progress is linear in processing time, so the fraction at
                // the moment the timeout fired is delta over the stage total
                let exec_total = t.exec_total_seconds();
                let p_at_timeout = (delta / exec_total).min(1.0);
                let sigma = progress_based_size(delta, p_at_timeout).unwrap_or(exec_total);
                tr.records.insert(
                    idx,
                    SampleRecord {
                        task_index: idx,
                        execution_time: sigma,
                        shuffle_time: t.shuffle_seconds(),
                        input_bytes: spec_bytes,
                        extrapolated: true,
                    },
                );
            }
            if self.try_finalize(state, phase) {
                finalized_any = true;
            }
        }
        finalized_any
    }

    /// Swap the initial estimate for the trained one once every sample has
    /// a measured or extrapolated size.
    fn try_finalize(&mut self, state: &SimState, phase: PhaseId) -> bool {
        let tr = self.tracking.get_mut(&phase).expect("tracked phase");
        if !tr.training || tr.records.len() < tr.samples.len() {
            return false;
        }
        tr.training = false;
        let p = state.phase(phase);
        if p.is_complete() {
            return false;
        }
        let records: Vec<SampleRecord> = tr.records.values().cloned().collect();
        let mut est =
            fit_phase_size(&records, p.num_tasks, phase).expect("at least one sample record");
        let mut shuffle_fallback = false;
        if tr.kind == TaskKind::Reduce {
            let shuffle = estimate_shuffle(&records, p.num_tasks).expect("at least one sample record");
            est.serialized_size += shuffle.total_seconds;
            shuffle_fallback = shuffle.unweighted_fallback;
        }
        let injected = self.cfg.estimator.alpha > 0.0;
        let est = inject_error(&est, self.cfg.estimator.alpha, &mut self.rng);
        self.vc[kind_ix(tr.kind)].set_size(phase, est.serialized_size);
        self.decisions.push(DecisionRecord::Estimate {
            time: state.now(),
            phase: phase.0,
            serialized_size: est.serialized_size,
            // the fallback marker records that every sample lacked input
            // bytes and the shuffle used the plain mean
            provenance: if shuffle_fallback {
                "trained-shuffle-fallback".to_string()
            } else {
                "trained".to_string()
            },
            injected,
        });
        let tr = self.tracking.get_mut(&phase).expect("tracked phase");
        tr.estimate = est;
        true
    }

    /// Tasks counting against a phase's rank entitlement: slot holders that
    /// are not mid swap-out and not running on the training budget.
    fn quota_held(&self, state: &SimState, phase: PhaseId) -> u32 {
        let tr = &self.tracking[&phase];
        state
            .phase(phase)
            .tasks()
            .iter()
            .filter(|t| {
                t.holds_slot() && !t.is_suspending() && !tr.training_live.contains(&t.task.index)
            })
            .count() as u32
    }

    /// Greedy rank-order entitlements over the capacity left after training
    /// slots, each job taking up to its regular demand.
    fn entitlements(&self, state: &SimState, kind: TaskKind) -> BTreeMap<PhaseId, u32> {
        let ix = kind_ix(kind);
        let mut left = state
            .cluster()
            .total_slots(kind)
            .saturating_sub(self.training_in_use[ix]);
        let mut out = BTreeMap::new();
        for &phase in &self.rank[ix] {
            let p = state.phase(phase);
            let tr = &self.tracking[&phase];
            let regular_demand = p.demand().saturating_sub(tr.training_live.len() as u32);
            let grant = regular_demand.min(left);
            left -= grant;
            out.insert(phase, grant);
        }
        out
    }

    /// Release slots held beyond entitlement. Maps always wait for natural
    /// completion; reduces follow the configured policy, newest launches
    /// first. Returns the actions plus per-machine slot credits freed
    /// immediately (kills only).
    fn preempt(
        &mut self,
        state: &SimState,
    ) -> (Vec<SchedulerAction>, BTreeMap<(u32, usize), i64>) {
        let mut actions = Vec::new();
        let mut credits: BTreeMap<(u32, usize), i64> = BTreeMap::new();
        if self.cfg.reduce_preemption == ReducePreemption::Wait {
            return (actions, credits);
        }
        let ents = self.entitlements(state, TaskKind::Reduce);
        let ranked = self.rank[kind_ix(TaskKind::Reduce)].clone();
        // planned suspensions this round, per machine
        let mut planned: BTreeMap<u32, u32> = BTreeMap::new();
        for phase in ranked {
            let held = self.quota_held(state, phase);
            let ent = ents.get(&phase).copied().unwrap_or(0);
            if held <= ent {
                continue;
            }
            let mut excess = held - ent;
            let tr = &self.tracking[&phase];
            let mut victims: Vec<&crate::engine::TaskRuntime> = state
                .phase(phase)
                .tasks()
                .iter()
                .filter(|t| t.is_running() && !tr.training_live.contains(&t.task.index))
                .collect();
            // tasks launched last are the ones which get suspended
            victims.sort_by(|a, b| b.launch_seq().cmp(&a.launch_seq()));
            for victim in victims {
                if excess == 0 {
                    break;
                }
                let machine = victim.machine();
                match self.cfg.reduce_preemption {
                    ReducePreemption::Eager => {
                        let queued = planned.get(&machine.0).copied().unwrap_or(0);
                        if state.suspended_count(machine) + queued
                            >= self.cfg.max_suspended_per_machine
                        {
                            // at the cap: degrade to wait for this task
                            continue;
                        }
                        *planned.entry(machine.0).or_insert(0) += 1;
                        actions.push(SchedulerAction::SuspendTask { task: victim.task });
                        self.decisions.push(DecisionRecord::Preemption {
                            time: state.now(),
                            phase: phase.0,
                            task_index: victim.task.index,
                            mode: "suspend".to_string(),
                        });
                    }
                    ReducePreemption::Kill => {
                        actions.push(SchedulerAction::KillTask { task: victim.task });
                        *credits
                            .entry((machine.0, kind_ix(TaskKind::Reduce)))
                            .or_insert(0) += 1;
                        self.decisions.push(DecisionRecord::Preemption {
                            time: state.now(),
                            phase: phase.0,
                            task_index: victim.task.index,
                            mode: "kill".to_string(),
                        });
                    }
                    ReducePreemption::Wait => unreachable!(),
                }
                excess -= 1;
            }
        }
        (actions, credits)
    }

    fn assign_machine(&mut self, plan: &mut Plan, state: &SimState, machine: MachineId) {
        for kind in [TaskKind::Map, TaskKind::Reduce] {
            self.training_fill(plan, state, machine, kind);
            self.regular_fill(plan, state, machine, kind);
        }
    }

    /// Sample tasks of still-training jobs jump the rank order while the
    /// training budget has room.
    fn training_fill(&mut self, plan: &mut Plan, state: &SimState, machine: MachineId, kind: TaskKind) {
        let ix = kind_ix(kind);
        let budget = self.training_budget(state, kind);
        if self.training_in_use[ix] >= budget || plan.free(state, machine, kind) <= 0 {
            return;
        }
        let mut candidates: Vec<PhaseId> = self
            .tracking
            .iter()
            .filter(|(_, tr)| tr.training && tr.kind == kind && !tr.samples.is_empty())
            .map(|(p, _)| *p)
            .collect();
        candidates.sort_by(|a, b| {
            let pa = state.phase(*a);
            let pb = state.phase(*b);
            pa.arrival_time
                .total_cmp(&pb.arrival_time)
                .then(pa.arrival_seq.cmp(&pb.arrival_seq))
        });
        'fill: while plan.free(state, machine, kind) > 0 && self.training_in_use[ix] < budget {
            let mut launched = false;
            for &phase in &candidates {
                let tr = &self.tracking[&phase];
                let p = state.phase(phase);
                let pending_sample = |idx: &u32| {
                    p.task(*idx).is_pending()
                        && !plan.taken.contains(&TaskRef { phase, index: *idx })
                };
                let any = tr.samples.iter().copied().find(|i| pending_sample(i));
                if any.is_none() {
                    continue;
                }
                let choice = if kind == TaskKind::Map {
                    let local = tr
                        .samples
                        .iter()
                        .copied()
                        .find(|i| pending_sample(i) && state.map_task_is_local(phase, *i, machine));
                    match delay_decide(&mut self.delay, phase, machine, local, any) {
                        DelayDecision::LaunchLocal(i) | DelayDecision::LaunchNonLocal(i) => Some(i),
                        DelayDecision::Skip => None,
                    }
                } else {
                    any
                };
                if let Some(index) = choice {
                    let task = TaskRef { phase, index };
                    plan.launch(state, task, machine, true, true);
                    self.tracking
                        .get_mut(&phase)
                        .expect("tracked phase")
                        .training_live
                        .insert(index);
                    self.training_in_use[ix] += 1;
                    launched = true;
                    break;
                }
            }
            if !launched {
                break 'fill;
            }
        }
    }

    /// Grant remaining slots in rank order up to each job's entitlement;
    /// suspended residents resume oldest-first before fresh launches. Map
    /// offers skipped for locality cascade to lower-ranked jobs.
    fn regular_fill(&mut self, plan: &mut Plan, state: &SimState, machine: MachineId, kind: TaskKind) {
        if plan.free(state, machine, kind) <= 0 {
            return;
        }
        let ents = self.entitlements(state, kind);
        let ranked = self.rank[kind_ix(kind)].clone();
        let mut skipped: BTreeSet<PhaseId> = BTreeSet::new();
        for &phase in &ranked {
            if plan.free(state, machine, kind) <= 0 {
                return;
            }
            let ent = ents.get(&phase).copied().unwrap_or(0);
            let held = self.quota_held(state, phase) + plan.planned_for(phase);
            let mut want = ent.saturating_sub(held);
            while want > 0 && plan.free(state, machine, kind) > 0 {
                match self.pick_for(plan, state, phase, machine, kind) {
                    Pick::Resume(task) => plan.resume(state, task, machine),
                    Pick::Launch(index) => {
                        let sample = self.is_sample_task(phase, index);
                        plan.launch(state, TaskRef { phase, index }, machine, sample, false)
                    }
                    Pick::Skipped => {
                        skipped.insert(phase);
                        break;
                    }
                    Pick::Nothing => break,
                }
                want -= 1;
            }
        }
        // offers declined for locality flow to lower-priority jobs
        if kind == TaskKind::Map && plan.free(state, machine, kind) > 0 {
            for &phase in &ranked {
                if plan.free(state, machine, kind) <= 0 {
                    return;
                }
                if skipped.contains(&phase) {
                    continue;
                }
                loop {
                    if plan.free(state, machine, kind) <= 0 {
                        break;
                    }
                    match self.pick_for(plan, state, phase, machine, kind) {
                        Pick::Launch(index) => {
                            let sample = self.is_sample_task(phase, index);
                            plan.launch(state, TaskRef { phase, index }, machine, sample, false)
                        }
                        Pick::Resume(task) => plan.resume(state, task, machine),
                        _ => break,
                    }
                }
            }
        }
    }

    fn is_sample_task(&self, phase: PhaseId, index: u32) -> bool {
        self.tracking
            .get(&phase)
            .map(|tr| tr.samples.contains(&index))
            .unwrap_or(false)
    }

    fn pick_for(
        &mut self,
        plan: &Plan,
        state: &SimState,
        phase: PhaseId,
        machine: MachineId,
        kind: TaskKind,
    ) -> Pick {
        let p = state.phase(phase);
        let not_taken = |idx: &u32| {
            !plan.taken.contains(&TaskRef {
                phase,
                index: *idx,
            })
        };
        match kind {
            TaskKind::Reduce => {
                // never-launched tasks go first; once none remain, suspended
                // residents of this machine resume oldest-first (suspended
                // tasks are never migrated elsewhere)
                if let Some(index) = p.pending_tasks().find(|i| not_taken(i)) {
                    return Pick::Launch(index);
                }
                let resident = state
                    .suspended_on(machine)
                    .iter()
                    .find(|t| t.phase == phase && !plan.taken.contains(t))
                    .copied();
                match resident {
                    Some(task) => Pick::Resume(task),
                    // remaining work is suspended on other machines
                    None => Pick::Nothing,
                }
            }
            TaskKind::Map => {
                let any = p.pending_tasks().find(|i| not_taken(i));
                if any.is_none() {
                    return Pick::Nothing;
                }
                let local = p.pending_local_tasks(machine).find(|i| not_taken(i));
                match delay_decide(&mut self.delay, phase, machine, local, any) {
                    DelayDecision::LaunchLocal(i) | DelayDecision::LaunchNonLocal(i) => {
                        Pick::Launch(i)
                    }
                    DelayDecision::Skip => Pick::Skipped,
                }
            }
        }
    }

    fn assign_all(&mut self, plan: &mut Plan, state: &SimState) {
        for m in 0..state.cluster().num_machines {
            self.assign_machine(plan, state, MachineId(m));
        }
    }
}

enum Pick {
    Resume(TaskRef),
    Launch(u32),
    Skipped,
    Nothing,
}

/// Slot bookkeeping for the launches planned inside one callback, before
/// the engine has applied anything.
struct Plan {
    free: BTreeMap<(u32, usize), i64>,
    taken: BTreeSet<TaskRef>,
    planned_regular: BTreeMap<PhaseId, u32>,
    actions: Vec<SchedulerAction>,
}

impl Plan {
    fn new(credits: BTreeMap<(u32, usize), i64>) -> Self {
        Plan {
            free: credits,
            taken: BTreeSet::new(),
            planned_regular: BTreeMap::new(),
            actions: Vec::new(),
        }
    }

    fn free(&mut self, state: &SimState, machine: MachineId, kind: TaskKind) -> i64 {
        let key = (machine.0, kind_ix(kind));
        let credit = self.free.get(&key).copied().unwrap_or(0);
        // base free slots are read fresh; credits carry kill refunds and
        // planned launches as negative adjustments
        state.free_slots(machine, kind) as i64 + credit
    }

    fn consume(&mut self, machine: MachineId, kind: TaskKind) {
        *self.free.entry((machine.0, kind_ix(kind))).or_insert(0) -= 1;
    }

    fn planned_for(&self, phase: PhaseId) -> u32 {
        self.planned_regular.get(&phase).copied().unwrap_or(0)
    }

    fn launch(
        &mut self,
        state: &SimState,
        task: TaskRef,
        machine: MachineId,
        sample: bool,
        training: bool,
    ) {
        let kind = state.phase(task.phase).kind;
        self.consume(machine, kind);
        self.taken.insert(task);
        if !training {
            *self.planned_regular.entry(task.phase).or_insert(0) += 1;
        }
        self.actions.push(SchedulerAction::LaunchTask {
            task,
            machine,
            sample,
        });
    }

    fn resume(&mut self, state: &SimState, task: TaskRef, machine: MachineId) {
        let kind = state.phase(task.phase).kind;
        self.consume(machine, kind);
        self.taken.insert(task);
        *self.planned_regular.entry(task.phase).or_insert(0) += 1;
        self.actions.push(SchedulerAction::ResumeTask { task });
    }
}

impl Scheduler for HfspScheduler {
    fn name(&self) -> &'static str {
        "hfsp"
    }

    fn on_start(&mut self, state: &SimState, seed: u64) {
        let cluster = state.cluster();
        self.vc = [
            VirtualCluster::new(cluster.total_slots(TaskKind::Map)),
            VirtualCluster::new(cluster.total_slots(TaskKind::Reduce)),
        ];
        self.rank = [Vec::new(), Vec::new()];
        self.tracking.clear();
        self.avg = AverageTaskSizeState::new(self.cfg.estimator.bootstrap_avg_task);
        self.delay = DelayState::new(self.cfg.delay_max_skips);
        self.training_in_use = [0, 0];
        // decorrelated from the engine's placement stream
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4846_5350);
        self.decisions.clear();
    }

    fn on_job_arrival(&mut self, state: &SimState, phase: PhaseId) -> Vec<SchedulerAction> {
        debug_assert!(!self.tracking.contains_key(&phase), "duplicate arrival");
        self.age_all(state);
        let p = state.phase(phase);
        let kind = p.kind;
        let samples: Vec<u32> = if self.cfg.perfect_estimates {
            Vec::new()
        } else {
            // jobs with s or fewer tasks are entirely samples
            (0..p.num_tasks.min(self.cfg.estimator.sample_count)).collect()
        };
        let estimate = self.produce_estimate(state, phase);
        self.tracking.insert(
            phase,
            PhaseTracking {
                kind,
                training: !self.cfg.perfect_estimates,
                samples,
                records: BTreeMap::new(),
                training_live: BTreeSet::new(),
                estimate: estimate.clone(),
            },
        );
        self.vc[kind_ix(kind)].add_job(
            phase,
            estimate.serialized_size,
            p.num_tasks,
            state.job_weight(phase),
            state.now(),
        );
        self.rerank(state, kind);
        let (mut actions, credits) = self.preempt(state);
        let mut plan = Plan::new(credits);
        self.assign_all(&mut plan, state);
        actions.extend(plan.actions);
        actions
    }

    fn on_heartbeat(&mut self, state: &SimState, machine: MachineId) -> Vec<SchedulerAction> {
        self.age_all(state);
        let finalized = self.delta_checks(state);
        if finalized {
            self.rerank(state, TaskKind::Reduce);
            let (mut actions, credits) = self.preempt(state);
            let mut plan = Plan::new(credits);
            self.assign_all(&mut plan, state);
            actions.extend(plan.actions);
            actions
        } else {
            let mut plan = Plan::new(BTreeMap::new());
            self.assign_machine(&mut plan, state, machine);
            plan.actions
        }
    }

    fn on_task_completion(&mut self, state: &SimState, task: TaskRef) -> Vec<SchedulerAction> {
        self.age_all(state);
        let p = state.phase(task.phase);
        let kind = p.kind;
        let t = state.task(task);
        if !self.cfg.perfect_estimates {
            update_average_task_size(&mut self.avg, t.effective_total(), kind);
        }
        if let Some(tr) = self.tracking.get_mut(&task.phase) {
            if tr.training_live.remove(&task.index) {
                self.training_in_use[kind_ix(kind)] -= 1;
            }
            if tr.training && tr.samples.contains(&task.index) {
                let replace = tr
                    .records
                    .get(&task.index)
                    .map(|r| r.extrapolated)
                    .unwrap_or(true);
                if replace {
                    let record = SampleRecord {
                        task_index: task.index,
                        execution_time: t.exec_total_seconds(),
                        shuffle_time: t.shuffle_seconds(),
                        input_bytes: state.job(p.job_index).spec.shuffle_bytes_per_reduce,
                        extrapolated: false,
                    };
                    tr.records.insert(task.index, record);
                }
                self.try_finalize(state, task.phase);
            }
        }
        self.delta_checks(state);
        if p.is_complete() {
            self.vc[kind_ix(kind)].remove_job(task.phase);
            self.tracking.remove(&task.phase);
            self.delay.forget_phase(task.phase);
        } else {
            self.vc[kind_ix(kind)].set_demand(task.phase, p.demand());
        }
        self.rerank(state, TaskKind::Map);
        self.rerank(state, TaskKind::Reduce);
        let (mut actions, credits) = self.preempt(state);
        let mut plan = Plan::new(credits);
        self.assign_all(&mut plan, state);
        actions.extend(plan.actions);
        actions
    }

    fn on_slot_freed(
        &mut self,
        state: &SimState,
        machine: MachineId,
        _kind: TaskKind,
    ) -> Vec<SchedulerAction> {
        self.age_all(state);
        let mut plan = Plan::new(BTreeMap::new());
        self.assign_machine(&mut plan, state, machine);
        plan.actions
    }

    fn decision_log(&mut self) -> Vec<DecisionRecord> {
        core::mem::take(&mut self.decisions)
    }
}
