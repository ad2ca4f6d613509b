//! The virtual cluster: a simulated processor-sharing mirror of the real
//! cluster that turns serialized job sizes into projected completion times.
//!
//! Between real-cluster events each job drains work at its max-min fair
//! share of the virtual capacity (weighted water-filling with the job's
//! residual task demand as its parallelism cap). Projections forward-run
//! the same fluid system until every job completes. The integral
//! round-robin allocation mirrors the discrete slot layout and is what
//! snapshots report.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::model::PhaseId;

/// One contender for virtual capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxMinRequest {
    pub demand: u32,
    pub weight: f64,
    /// Used to break demand ties: earlier arrivals are served first.
    pub arrival: f64,
    pub seq: u64,
}

/// Integral max-min allocation: one virtual slot per turn, skipping
/// satisfied jobs, with turn frequency proportional to weight. Each turn
/// goes to the unsatisfied job whose weighted share would stay smallest,
/// ties broken toward smaller residual demand then earlier arrival; with
/// equal weights this degenerates to plain smallest-first round-robin.
pub fn allocate_max_min(requests: &[MaxMinRequest], capacity: u32) -> Vec<u32> {
    let n = requests.len();
    let mut alloc = alloc::vec![0u32; n];
    if n == 0 || capacity == 0 {
        return alloc;
    }
    let total_demand: u32 = requests.iter().map(|r| r.demand).sum();
    let mut left = capacity.min(total_demand);
    while left > 0 {
        let mut best: Option<(usize, f64)> = None;
        for (i, req) in requests.iter().enumerate() {
            if alloc[i] >= req.demand {
                continue;
            }
            let key = (alloc[i] + 1) as f64 / req.weight;
            let better = match best {
                None => true,
                Some((j, best_key)) => {
                    let rb = &requests[j];
                    match key.total_cmp(&best_key) {
                        core::cmp::Ordering::Less => true,
                        core::cmp::Ordering::Greater => false,
                        core::cmp::Ordering::Equal => (
                            req.demand,
                            req.arrival,
                            req.seq,
                        ) < (rb.demand, rb.arrival, rb.seq),
                    }
                }
            };
            if better {
                best = Some((i, key));
            }
        }
        match best {
            Some((i, _)) => {
                alloc[i] += 1;
                left -= 1;
            }
            None => break,
        }
    }
    alloc
}

/// Fluid weighted max-min shares: rates r_i = min(demand_i, level * w_i)
/// with the water level chosen so the rates sum to min(capacity, total
/// demand). Computed by progressive filling.
pub fn fluid_shares(demands: &[f64], weights: &[f64], capacity: f64) -> Vec<f64> {
    debug_assert_eq!(demands.len(), weights.len());
    let n = demands.len();
    let mut rates = alloc::vec![0.0f64; n];
    if n == 0 || capacity <= 0.0 {
        return rates;
    }
    let mut order: Vec<usize> = (0..n).collect();
    // jobs saturate in order of demand per unit weight
    order.sort_by(|&a, &b| (demands[a] / weights[a]).total_cmp(&(demands[b] / weights[b])));
    let mut remaining = capacity;
    let mut active_weight: f64 = weights.iter().sum();
    for (pos, &i) in order.iter().enumerate() {
        if remaining <= 0.0 || active_weight <= 0.0 {
            break;
        }
        let level = remaining / active_weight;
        if demands[i] <= level * weights[i] {
            rates[i] = demands[i];
            remaining -= demands[i];
            active_weight -= weights[i];
        } else {
            // everyone left shares at the level; demands no longer bind
            for &j in &order[pos..] {
                rates[j] = level * weights[j];
            }
            break;
        }
    }
    rates
}

/// Projected finish of one phase-job in the virtual cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub phase: PhaseId,
    /// Absolute simulation time; infinite for untrained jobs under xi = inf.
    pub finish: f64,
    pub arrival: f64,
    pub seq: u64,
}

#[derive(Debug, Clone)]
struct VirtualJob {
    phase: PhaseId,
    remaining: f64,
    drained: f64,
    demand: u32,
    weight: f64,
    arrival: f64,
    seq: u64,
}

/// Snapshot row for logging: integral slots granted to one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationEntry {
    pub phase: PhaseId,
    pub slots: u32,
}

#[derive(Debug, Clone)]
pub struct VirtualCluster {
    capacity: u32,
    jobs: Vec<VirtualJob>,
    rates: Vec<f64>,
    last_update: f64,
    next_seq: u64,
}

impl VirtualCluster {
    pub fn new(capacity: u32) -> Self {
        VirtualCluster {
            capacity,
            jobs: Vec::new(),
            rates: Vec::new(),
            last_update: 0.0,
            next_seq: 0,
        }
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn contains(&self, phase: PhaseId) -> bool {
        self.jobs.iter().any(|j| j.phase == phase)
    }

    pub fn remaining(&self, phase: PhaseId) -> Option<f64> {
        self.jobs.iter().find(|j| j.phase == phase).map(|j| j.remaining)
    }

    /// Admit a phase-job. The caller must have aged the cluster to `now`.
    pub fn add_job(&mut self, phase: PhaseId, size: f64, demand: u32, weight: f64, arrival: f64) {
        debug_assert!(!self.contains(phase));
        let seq = self.next_seq;
        self.next_seq += 1;
        self.jobs.push(VirtualJob {
            phase,
            remaining: size.max(0.0),
            drained: 0.0,
            demand,
            weight,
            arrival,
            seq,
        });
        self.reallocate();
    }

    pub fn remove_job(&mut self, phase: PhaseId) {
        self.jobs.retain(|j| j.phase != phase);
        self.reallocate();
    }

    /// Update a job's residual task demand (pending + running in the real
    /// cluster).
    pub fn set_demand(&mut self, phase: PhaseId, demand: u32) {
        if let Some(j) = self.jobs.iter_mut().find(|j| j.phase == phase) {
            j.demand = demand;
        }
        self.reallocate();
    }

    /// Replace a job's total serialized size, keeping already-drained work:
    /// the new remaining is max(size - drained, 0).
    pub fn set_size(&mut self, phase: PhaseId, size: f64) {
        if let Some(j) = self.jobs.iter_mut().find(|j| j.phase == phase) {
            j.remaining = (size - j.drained).max(0.0);
        }
        self.reallocate();
    }

    /// Advance the virtual clock, draining each job by its fluid share times
    /// the elapsed interval. Triggered by every job arrival and task
    /// completion in the real cluster.
    pub fn age(&mut self, now: f64) {
        debug_assert!(now >= self.last_update);
        let dt = now - self.last_update;
        self.last_update = now;
        if dt <= 0.0 {
            return;
        }
        for (j, &r) in self.jobs.iter_mut().zip(self.rates.iter()) {
            let drain = r * dt;
            let applied = drain.min(j.remaining);
            j.remaining -= applied;
            j.drained += applied;
        }
    }

    /// Recompute fluid shares from the current demands. Untrained infinite
    /// jobs still drain: their remaining stays infinite regardless.
    pub fn reallocate(&mut self) {
        let demands: Vec<f64> = self.jobs.iter().map(|j| j.demand as f64).collect();
        let weights: Vec<f64> = self.jobs.iter().map(|j| j.weight).collect();
        self.rates = fluid_shares(&demands, &weights, self.capacity as f64);
    }

    pub fn rate_of(&self, phase: PhaseId) -> Option<f64> {
        self.jobs
            .iter()
            .position(|j| j.phase == phase)
            .map(|i| self.rates[i])
    }

    /// Integral slot counts under the round-robin discipline, for snapshots.
    pub fn integral_allocation(&self) -> Vec<AllocationEntry> {
        let reqs: Vec<MaxMinRequest> = self
            .jobs
            .iter()
            .map(|j| MaxMinRequest {
                demand: j.demand,
                weight: j.weight,
                arrival: j.arrival,
                seq: j.seq,
            })
            .collect();
        let alloc = allocate_max_min(&reqs, self.capacity);
        self.jobs
            .iter()
            .zip(alloc)
            .map(|(j, slots)| AllocationEntry {
                phase: j.phase,
                slots,
            })
            .collect()
    }

    /// Forward-simulate the fluid processor-sharing system until every job
    /// finishes; pure in the current state. Returned projections are sorted
    /// by (finish, arrival, seq); infinite-propensity jobs come last.
    pub fn project_completions(&self, now: f64) -> Vec<Projection> {
        let mut out: Vec<Projection> = Vec::with_capacity(self.jobs.len());
        let mut live: Vec<(usize, f64)> = Vec::new(); // (job index, remaining)
        for (i, j) in self.jobs.iter().enumerate() {
            if j.remaining.is_infinite() {
                out.push(Projection {
                    phase: j.phase,
                    finish: f64::INFINITY,
                    arrival: j.arrival,
                    seq: j.seq,
                });
            } else if j.remaining <= 0.0 {
                // already done under PS: top priority until it really finishes
                out.push(Projection {
                    phase: j.phase,
                    finish: now,
                    arrival: j.arrival,
                    seq: j.seq,
                });
            } else {
                live.push((i, j.remaining));
            }
        }
        let mut t = now;
        while !live.is_empty() {
            let demands: Vec<f64> = live.iter().map(|&(i, _)| self.jobs[i].demand as f64).collect();
            let weights: Vec<f64> = live.iter().map(|&(i, _)| self.jobs[i].weight).collect();
            let rates = fluid_shares(&demands, &weights, self.capacity as f64);
            let mut step = f64::INFINITY;
            for (k, &(_, rem)) in live.iter().enumerate() {
                if rates[k] > 0.0 {
                    step = step.min(rem / rates[k]);
                }
            }
            if !step.is_finite() {
                // no job can progress (zero demand or zero capacity)
                for &(i, _) in &live {
                    let j = &self.jobs[i];
                    out.push(Projection {
                        phase: j.phase,
                        finish: f64::INFINITY,
                        arrival: j.arrival,
                        seq: j.seq,
                    });
                }
                break;
            }
            t += step;
            let mut next: Vec<(usize, f64)> = Vec::with_capacity(live.len());
            for (k, (i, rem)) in live.iter().copied().enumerate() {
                let left = rem - rates[k] * step;
                if left <= 1e-12 * rem.max(1.0) {
                    let j = &self.jobs[i];
                    out.push(Projection {
                        phase: j.phase,
                        finish: t,
                        arrival: j.arrival,
                        seq: j.seq,
                    });
                } else {
                    next.push((i, left));
                }
            }
            live = next;
        }
        out.sort_by(|a, b| {
            a.finish
                .total_cmp(&b.finish)
                .then(a.arrival.total_cmp(&b.arrival))
                .then(a.seq.cmp(&b.seq))
        });
        out
    }
}
