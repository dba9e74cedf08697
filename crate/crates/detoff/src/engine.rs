//! Slot-by-slot execution of one allocation decision.
//!
//! [`simulate`] takes a task set plus an [`Assignment`] (per-task target
//! unit and a global priority order) and plays the system forward on the
//! radio clock. Each slot it
//!
//! 1. activates tasks whose generation time has been reached,
//! 2. advances every computing unit's processor queue to the slot start,
//!    realizing service starts, completions, and deadline aborts at their
//!    exact (sub-slot) times,
//! 3. kills tasks whose deadline passed while queued or in flight, freeing
//!    whatever they held,
//! 4. grants pooled resources to active transmissions in priority order and
//!    moves bits across every hop (store-and-forward: a hop finished in this
//!    slot is retransmitted no earlier than the next),
//! 5. optionally snapshots pool and processor utilization.
//!
//! Computing follows a continuous clock embedded in the slot loop: local
//! tasks enter their origin's queue at the exact generation instant and a
//! task that is alone on an idle unit finishes after exactly
//! `workload / power` seconds, with no slot rounding. Transmissions are
//! inherently slotted: payloads arrive at slot boundaries.
//!
//! Queues are earliest-deadline-first and non-preemptive, with one task in
//! service per unit. A task whose service cannot finish by its deadline is
//! aborted at the deadline, releasing the unit; a task dead in a queue or
//! mid-flight is killed at the first slot boundary after its deadline.
//! Either way the resources it held return to the system.

use crate::channel::{self, Fading, McsTable};
use crate::config::ScenarioConfig;
use crate::taskgen::Task;
use crate::topology::{LinkId, LinkMedium, Topology, UnitId};
use crate::{Error, Result};

/// One allocation decision: where each task runs and in which priority
/// order tasks compete for pooled resources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Processing unit per task, indexed by task id.
    pub targets: Vec<UnitId>,
    /// Priority position per task (0 = served first). Must be a
    /// permutation of `0..tasks`.
    pub rank: Vec<usize>,
}

impl Assignment {
    /// Task ids in priority order: element 0 is the highest-priority task.
    pub fn priority_order(&self) -> Vec<usize> {
        let mut order = vec![0usize; self.rank.len()];
        for (task, &pos) in self.rank.iter().enumerate() {
            order[pos] = task;
        }
        order
    }

    /// Check shape, rank permutation, and per-task target reachability.
    pub fn validate(&self, topo: &Topology, tasks: &[Task]) -> Result<()> {
        if self.targets.len() != tasks.len() || self.rank.len() != tasks.len() {
            return Err(Error::Engine(format!(
                "assignment covers {} targets / {} ranks for {} tasks",
                self.targets.len(),
                self.rank.len(),
                tasks.len()
            )));
        }
        let mut seen = vec![false; tasks.len()];
        for &pos in &self.rank {
            if pos >= tasks.len() || seen[pos] {
                return Err(Error::Engine(
                    "assignment rank is not a permutation".to_string(),
                ));
            }
            seen[pos] = true;
        }
        for task in tasks {
            let target = self.targets[task.id];
            if !target_allowed(topo, task.origin, target) {
                return Err(Error::Engine(format!(
                    "task {} cannot run on {}: not a processing unit on its upward path",
                    task.id, target
                )));
            }
        }
        Ok(())
    }
}

/// A target is valid when it can process and sits on the task's upward
/// path (origin included).
fn target_allowed(topo: &Topology, origin: UnitId, target: UnitId) -> bool {
    if !topo.unit(target).can_process() {
        return false;
    }
    if origin == target {
        return true;
    }
    let mut u = origin;
    while let Some(p) = topo.parent_of(u) {
        if p == target {
            return true;
        }
        u = p;
    }
    false
}

/// Seconds to grind `workload_cycles` on a `power_hz` processor.
#[inline]
pub fn processing_time(workload_cycles: f64, power_hz: f64) -> f64 {
    workload_cycles / power_hz
}

/// Whole slots needed to move `bits` at a fixed `rate_bps`.
pub fn transmission_slots(bits: f64, rate_bps: f64, slot_s: f64) -> u64 {
    (bits / (rate_bps * slot_s)).ceil() as u64
}

/// Knobs of one simulation run.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub slot_s: f64,
    /// Per-slot cap on pool resources granted to one transmission.
    pub max_resources_per_task: usize,
    /// Generation window; failed tasks are charged `horizon_s` plus the
    /// task set's largest deadline as their total time.
    pub horizon_s: f64,
    pub fading: Fading,
    pub mcs: McsTable,
    /// Verify resource exclusivity, link budgets, and payload conservation
    /// every slot, counting violations.
    pub check_invariants: bool,
    /// Record per-slot pool and processor utilization. Disables the
    /// idle-slot fast-forward, so every slot is materialized.
    pub record_utilization: bool,
    /// Record a task-lifecycle event log.
    pub record_events: bool,
}

impl SimParams {
    pub fn from_config(cfg: &ScenarioConfig, fading: Fading) -> Result<SimParams> {
        Ok(SimParams {
            slot_s: cfg.engine.slot_s,
            max_resources_per_task: cfg.engine.max_resources_per_task,
            horizon_s: cfg.tasks.horizon_s,
            fading,
            mcs: McsTable::from_config(&cfg.mcs)?,
            check_invariants: false,
            record_utilization: false,
            record_events: false,
        })
    }
}

/// Timing breakdown of one task. Phase fields hold completed-phase
/// durations; a phase the task never finished reports 0. `total_s` is the
/// end-to-end time for completed tasks and the failure charge (horizon plus
/// the task set's largest deadline) otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionRecord {
    pub task: usize,
    pub uplink_s: f64,
    pub queue_s: f64,
    pub processing_s: f64,
    pub downlink_s: f64,
    pub total_s: f64,
    /// Instant the result reached the origin, when it did.
    pub completion_s: Option<f64>,
    pub completed: bool,
    /// Completed no later than the deadline.
    pub on_time: bool,
}

/// Per-slot utilization snapshots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UtilizationTrace {
    pub slot_s: f64,
    /// Busiest pool's granted share (granted resources over pool size,
    /// maximized over the two pools), per slot.
    pub comm: Vec<f64>,
    /// Outstanding committed cycles over total cycle budget, per slot.
    pub compute: Vec<f64>,
}

impl UtilizationTrace {
    fn value_at(series: &[f64], slot_s: f64, t_s: f64) -> f64 {
        if series.is_empty() {
            return 0.0;
        }
        let idx = (t_s / slot_s).floor().max(0.0) as usize;
        series[idx.min(series.len() - 1)]
    }

    /// Pool utilization of the slot containing `t_s`, clamped to the trace.
    pub fn comm_at(&self, t_s: f64) -> f64 {
        Self::value_at(&self.comm, self.slot_s, t_s)
    }

    /// Processor utilization of the slot containing `t_s`, clamped.
    pub fn compute_at(&self, t_s: f64) -> f64 {
        Self::value_at(&self.compute, self.slot_s, t_s)
    }
}

/// Tallies of the per-slot consistency checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InvariantCounters {
    /// Slots that ran with checking enabled.
    pub slots: u64,
    /// A pool resource granted twice in one slot.
    pub resource_double_bookings: u64,
    /// A link carrying more bits in a slot than its granted rate allows.
    pub link_rate_overruns: u64,
    /// A hop completing with delivered bits different from its payload.
    pub payload_mismatches: u64,
}

impl InvariantCounters {
    pub fn all_zero(&self) -> bool {
        self.resource_double_bookings == 0
            && self.link_rate_overruns == 0
            && self.payload_mismatches == 0
    }
}

/// Task lifecycle log entry; times are exact where the model is exact.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Activated { t_s: f64, task: usize },
    HopCompleted { t_s: f64, task: usize, link: LinkId },
    ArrivedAtTarget { t_s: f64, task: usize, unit: UnitId },
    ServiceStarted { t_s: f64, task: usize, unit: UnitId },
    ServiceCompleted { t_s: f64, task: usize, unit: UnitId },
    Completed { t_s: f64, task: usize, on_time: bool },
    Killed { t_s: f64, task: usize },
}

impl TraceEvent {
    pub fn time_s(&self) -> f64 {
        match *self {
            TraceEvent::Activated { t_s, .. }
            | TraceEvent::HopCompleted { t_s, .. }
            | TraceEvent::ArrivedAtTarget { t_s, .. }
            | TraceEvent::ServiceStarted { t_s, .. }
            | TraceEvent::ServiceCompleted { t_s, .. }
            | TraceEvent::Completed { t_s, .. }
            | TraceEvent::Killed { t_s, .. } => t_s,
        }
    }
}

/// Everything one simulation run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    /// One record per task, in task-id order.
    pub records: Vec<ExecutionRecord>,
    pub utilization: Option<UtilizationTrace>,
    pub invariants: InvariantCounters,
    pub events: Vec<TraceEvent>,
}

/// Play one assignment forward; see the module docs for the slot loop.
pub fn simulate(
    topo: &Topology,
    tasks: &[Task],
    assignment: &Assignment,
    params: &SimParams,
) -> Result<SimOutcome> {
    if !(params.slot_s > 0.0) || !params.slot_s.is_finite() {
        return Err(Error::Engine(format!("slot length must be positive, got {}", params.slot_s)));
    }
    if params.max_resources_per_task == 0 {
        return Err(Error::Engine("per-task resource cap must be at least 1".to_string()));
    }
    assignment.validate(topo, tasks)?;
    let mut sim = Sim::new(topo, tasks, assignment, params)?;
    sim.run();
    Ok(sim.into_outcome())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Waiting,
    Uplink,
    Queued,
    Serving,
    Downlink,
    Done,
    Killed,
}

impl Phase {
    fn terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Killed)
    }
}

/// Progress of the current hop of a payload in flight.
#[derive(Debug, Clone, Copy)]
struct Flight {
    down: bool,
    hop: usize,
    payload_bits: f64,
    remaining_bits: f64,
    delivered_bits: f64,
}

impl Flight {
    fn new(down: bool, payload_bits: f64) -> Flight {
        Flight { down, hop: 0, payload_bits, remaining_bits: payload_bits, delivered_bits: 0.0 }
    }
}

#[derive(Debug, Clone, Default)]
struct UnitState {
    pending: Vec<usize>,
    serving: Option<usize>,
    busy_until: f64,
    /// Whether the current service completes at `busy_until` (true) or
    /// aborts there on its deadline (false).
    service_ok: bool,
    /// Time up to which this unit's schedule is realized.
    cursor: f64,
    /// Cycles of tasks committed to this unit and not yet finished.
    outstanding_cycles: f64,
}

enum UnitStep {
    Wait,
    Finish { task: usize, at: f64, ok: bool },
    KillQueued { task: usize },
    Start { task: usize, at: f64 },
}

struct Sim<'a> {
    topo: &'a Topology,
    tasks: &'a [Task],
    params: &'a SimParams,

    // Static per-task data.
    due: Vec<f64>,
    target: Vec<UnitId>,
    routes_up: Vec<Vec<LinkId>>,
    routes_down: Vec<Vec<LinkId>>,
    /// Task ids, highest priority first.
    order: Vec<usize>,
    /// Mean SINR per link, linear; 0 for wires.
    mean_linear: Vec<f64>,

    // Dynamic state.
    phase: Vec<Phase>,
    flights: Vec<Option<Flight>>,
    units: Vec<UnitState>,
    /// Activation queues, latest generation time first (pop from the back).
    local_q: Vec<usize>,
    offload_q: Vec<usize>,
    alive: usize,

    // Per-task timestamps; NaN until the moment happens.
    arrival_s: Vec<f64>,
    start_s: Vec<f64>,
    completion_s: Vec<f64>,
    proc_end_s: Vec<f64>,
    uplink_s: Vec<f64>,
    queue_s: Vec<f64>,
    processing_s: Vec<f64>,
    downlink_s: Vec<f64>,
    on_time: Vec<bool>,

    // Per-slot scratch.
    pool_counter: [usize; 2],
    wire_used_bits: Vec<f64>,
    granted_log: Vec<(usize, usize)>,

    counters: InvariantCounters,
    comm_trace: Vec<f64>,
    compute_trace: Vec<f64>,
    events: Vec<TraceEvent>,
    total_cycle_budget: f64,
}

impl<'a> Sim<'a> {
    fn new(
        topo: &'a Topology,
        tasks: &'a [Task],
        assignment: &'a Assignment,
        params: &'a SimParams,
    ) -> Result<Sim<'a>> {
        let n = tasks.len();
        let mut routes_up = Vec::with_capacity(n);
        let mut routes_down = Vec::with_capacity(n);
        for t in tasks {
            let target = assignment.targets[t.id];
            if target == t.origin {
                routes_up.push(Vec::new());
                routes_down.push(Vec::new());
            } else {
                routes_up.push(topo.route(t.origin, target)?);
                routes_down.push(topo.route(target, t.origin)?);
            }
        }
        let mean_linear = topo
            .links
            .iter()
            .map(|l| match l.medium {
                LinkMedium::Pooled { mean_sinr_db, .. } => channel::db_to_linear(mean_sinr_db),
                LinkMedium::Wire { .. } => 0.0,
            })
            .collect();

        let by_gen_desc = |ids: &mut Vec<usize>, tasks: &[Task]| {
            ids.sort_by(|&a, &b| {
                tasks[b]
                    .gen_time_s
                    .partial_cmp(&tasks[a].gen_time_s)
                    .unwrap()
                    .then(b.cmp(&a))
            });
        };
        let mut local_q: Vec<usize> =
            (0..n).filter(|&t| assignment.targets[t] == tasks[t].origin).collect();
        let mut offload_q: Vec<usize> =
            (0..n).filter(|&t| assignment.targets[t] != tasks[t].origin).collect();
        by_gen_desc(&mut local_q, tasks);
        by_gen_desc(&mut offload_q, tasks);

        Ok(Sim {
            topo,
            tasks,
            params,
            due: tasks.iter().map(Task::due_s).collect(),
            target: assignment.targets.clone(),
            routes_up,
            routes_down,
            order: assignment.priority_order(),
            mean_linear,
            phase: vec![Phase::Waiting; n],
            flights: vec![None; n],
            units: vec![UnitState::default(); topo.units.len()],
            local_q,
            offload_q,
            alive: n,
            arrival_s: vec![f64::NAN; n],
            start_s: vec![f64::NAN; n],
            completion_s: vec![f64::NAN; n],
            proc_end_s: vec![f64::NAN; n],
            uplink_s: vec![0.0; n],
            queue_s: vec![0.0; n],
            processing_s: vec![0.0; n],
            downlink_s: vec![0.0; n],
            on_time: vec![false; n],
            pool_counter: [0, 0],
            wire_used_bits: vec![0.0; topo.links.len()],
            granted_log: Vec::new(),
            counters: InvariantCounters::default(),
            comm_trace: Vec::new(),
            compute_trace: Vec::new(),
            events: Vec::new(),
            total_cycle_budget: topo.total_cycle_budget(),
        })
    }

    fn push_event(&mut self, ev: TraceEvent) {
        if self.params.record_events {
            self.events.push(ev);
        }
    }

    fn route_of(&self, task: usize, down: bool) -> &[LinkId] {
        if down {
            &self.routes_down[task]
        } else {
            &self.routes_up[task]
        }
    }

    fn kill(&mut self, task: usize, at: f64) {
        self.phase[task] = Phase::Killed;
        self.flights[task] = None;
        self.alive -= 1;
        self.push_event(TraceEvent::Killed { t_s: at, task });
    }

    fn complete(&mut self, task: usize, at: f64) {
        self.phase[task] = Phase::Done;
        self.completion_s[task] = at;
        self.on_time[task] = at <= self.due[task];
        self.alive -= 1;
        self.push_event(TraceEvent::Completed { t_s: at, task, on_time: self.on_time[task] });
    }

    /// Enter the target's processor queue at time `at`.
    fn enqueue(&mut self, task: usize, at: f64) {
        let unit = self.target[task];
        self.arrival_s[task] = at;
        self.phase[task] = Phase::Queued;
        self.units[unit.0].pending.push(task);
        self.units[unit.0].outstanding_cycles += self.tasks[task].workload_cycles;
        self.push_event(TraceEvent::ArrivedAtTarget { t_s: at, task, unit });
    }

    fn finish_processing(&mut self, task: usize, unit: usize, at: f64) {
        self.units[unit].outstanding_cycles -= self.tasks[task].workload_cycles;
        self.proc_end_s[task] = at;
        self.processing_s[task] = at - self.start_s[task];
        self.push_event(TraceEvent::ServiceCompleted {
            t_s: at,
            task,
            unit: UnitId(unit),
        });
        if self.target[task] == self.tasks[task].origin {
            self.complete(task, at);
        } else {
            self.phase[task] = Phase::Downlink;
            self.flights[task] = Some(Flight::new(true, self.tasks[task].result_bits));
        }
    }

    fn next_unit_step(&self, unit: usize, to: f64) -> UnitStep {
        let st = &self.units[unit];
        if let Some(task) = st.serving {
            return if st.busy_until <= to {
                UnitStep::Finish { task, at: st.busy_until, ok: st.service_ok }
            } else {
                UnitStep::Wait
            };
        }
        if st.pending.is_empty() {
            return UnitStep::Wait;
        }
        let min_arrival = st
            .pending
            .iter()
            .map(|&t| self.arrival_s[t])
            .fold(f64::INFINITY, f64::min);
        let t_begin = st.cursor.max(min_arrival);
        if t_begin > to {
            return UnitStep::Wait;
        }
        let mut best: Option<usize> = None;
        for &t in &st.pending {
            if self.arrival_s[t] > t_begin {
                continue;
            }
            if self.due[t] <= t_begin {
                // Died waiting in this queue; realize the death first.
                return UnitStep::KillQueued { task: t };
            }
            best = match best {
                Some(b) if (self.due[b], b) <= (self.due[t], t) => Some(b),
                _ => Some(t),
            };
        }
        match best {
            Some(task) => UnitStep::Start { task, at: t_begin },
            None => UnitStep::Wait,
        }
    }

    /// Realize this unit's schedule up to time `to`.
    fn advance_unit(&mut self, unit: usize, to: f64) {
        loop {
            match self.next_unit_step(unit, to) {
                UnitStep::Wait => return,
                UnitStep::Finish { task, at, ok } => {
                    self.units[unit].serving = None;
                    self.units[unit].cursor = at;
                    if ok {
                        self.finish_processing(task, unit, at);
                    } else {
                        self.units[unit].outstanding_cycles -= self.tasks[task].workload_cycles;
                        self.kill(task, at);
                    }
                }
                UnitStep::KillQueued { task } => {
                    self.units[unit].pending.retain(|&t| t != task);
                    self.units[unit].outstanding_cycles -= self.tasks[task].workload_cycles;
                    self.kill(task, self.due[task]);
                }
                UnitStep::Start { task, at } => {
                    self.units[unit].pending.retain(|&t| t != task);
                    self.start_s[task] = at;
                    self.queue_s[task] = at - self.arrival_s[task];
                    self.phase[task] = Phase::Serving;
                    let proc =
                        processing_time(self.tasks[task].workload_cycles, self.topo.units[unit].power_hz);
                    let finish = at + proc;
                    let (busy_until, ok) = if finish <= self.due[task] {
                        (finish, true)
                    } else {
                        (self.due[task], false)
                    };
                    self.units[unit].serving = Some(task);
                    self.units[unit].busy_until = busy_until;
                    self.units[unit].service_ok = ok;
                    self.push_event(TraceEvent::ServiceStarted {
                        t_s: at,
                        task,
                        unit: UnitId(unit),
                    });
                }
            }
        }
    }

    /// Move one active flight for the slot `[t0, t1)`.
    fn drain_flight(&mut self, task: usize, mut flight: Flight, slot: u64, t1: f64) {
        let slot_s = self.params.slot_s;
        let link_id = self.route_of(task, flight.down)[flight.hop];
        let link = self.topo.link(link_id);
        let take;
        match link.medium {
            LinkMedium::Pooled { pool, .. } => {
                let pool_idx = pool.index();
                let mut granted = 0usize;
                let pool_size = self.topo.pools[pool_idx].size;
                let bandwidth = self.topo.pools[pool_idx].resource_bandwidth_hz;
                let mean = self.mean_linear[link_id.0];
                let cell = match self.params.fading {
                    Fading::Seeded(field) => Some(field.at(slot, link_id)),
                    Fading::Unit => None,
                };
                let mut rate_sum = 0.0;
                while granted < self.params.max_resources_per_task
                    && self.pool_counter[pool_idx] < pool_size
                    && rate_sum * slot_s < flight.remaining_bits
                {
                    let k = self.pool_counter[pool_idx];
                    self.pool_counter[pool_idx] += 1;
                    granted += 1;
                    let gain = cell.map_or(1.0, |c| c.gain(k));
                    rate_sum += self.params.mcs.adaptive_rate(bandwidth, mean * gain);
                    if self.params.check_invariants {
                        self.granted_log.push((pool_idx, k));
                    }
                }
                take = (rate_sum * slot_s).min(flight.remaining_bits);
                if self.params.check_invariants && take > rate_sum * slot_s * (1.0 + 1e-9) {
                    self.counters.link_rate_overruns += 1;
                }
            }
            LinkMedium::Wire { rate_bps } => {
                let budget = rate_bps * slot_s - self.wire_used_bits[link_id.0];
                take = budget.max(0.0).min(flight.remaining_bits);
                self.wire_used_bits[link_id.0] += take;
                if self.params.check_invariants
                    && self.wire_used_bits[link_id.0] > rate_bps * slot_s * (1.0 + 1e-9)
                {
                    self.counters.link_rate_overruns += 1;
                }
            }
        }
        flight.remaining_bits -= take;
        flight.delivered_bits += take;

        if flight.remaining_bits <= 0.0 {
            // Hop complete at the end of this slot.
            let err = (flight.delivered_bits - flight.payload_bits).abs();
            if self.params.check_invariants && err > 1e-9 * flight.payload_bits.max(1.0) {
                self.counters.payload_mismatches += 1;
            }
            self.push_event(TraceEvent::HopCompleted { t_s: t1, task, link: link_id });
            if flight.hop + 1 < self.route_of(task, flight.down).len() {
                flight.hop += 1;
                flight.remaining_bits = flight.payload_bits;
                flight.delivered_bits = 0.0;
                self.flights[task] = Some(flight);
            } else if !flight.down {
                self.flights[task] = None;
                self.uplink_s[task] = t1 - self.tasks[task].gen_time_s;
                self.enqueue(task, t1);
            } else {
                self.flights[task] = None;
                self.downlink_s[task] = t1 - self.proc_end_s[task];
                self.complete(task, t1);
            }
        } else {
            self.flights[task] = Some(flight);
        }
    }

    /// Earliest future instant at which anything can happen. Only valid
    /// when no transmissions are active.
    fn next_event_time(&self) -> f64 {
        let mut next = f64::INFINITY;
        if let Some(&t) = self.offload_q.last() {
            next = next.min(self.tasks[t].gen_time_s);
        }
        if let Some(&t) = self.local_q.last() {
            next = next.min(self.tasks[t].gen_time_s);
        }
        for st in &self.units {
            if st.serving.is_some() {
                next = next.min(st.busy_until);
            }
            for &t in &st.pending {
                next = next.min(self.arrival_s[t]);
            }
        }
        for t in 0..self.tasks.len() {
            if !self.phase[t].terminal() {
                next = next.min(self.due[t]);
            }
        }
        next
    }

    fn run(&mut self) {
        let slot_s = self.params.slot_s;
        let max_due = self.due.iter().cloned().fold(0.0, f64::max);
        let hard_max_slot = (max_due / slot_s).ceil() as u64 + 2;
        let skip_allowed = !self.params.record_utilization && !self.params.check_invariants;

        let mut slot: u64 = 0;
        while self.alive > 0 && slot <= hard_max_slot {
            let t0 = slot as f64 * slot_s;
            let t1 = (slot + 1) as f64 * slot_s;

            // Activations reaching this slot.
            while let Some(&t) = self.offload_q.last() {
                if self.tasks[t].gen_time_s > t0 {
                    break;
                }
                self.offload_q.pop();
                self.phase[t] = Phase::Uplink;
                self.flights[t] = Some(Flight::new(false, self.tasks[t].size_bits));
                self.push_event(TraceEvent::Activated { t_s: self.tasks[t].gen_time_s, task: t });
            }
            while let Some(&t) = self.local_q.last() {
                if self.tasks[t].gen_time_s >= t1 {
                    break;
                }
                self.local_q.pop();
                self.push_event(TraceEvent::Activated { t_s: self.tasks[t].gen_time_s, task: t });
                self.enqueue(t, self.tasks[t].gen_time_s);
            }

            // Realize processor schedules up to the slot start.
            for u in 0..self.units.len() {
                self.advance_unit(u, t0);
            }

            // Deadline sweep over queued and in-flight tasks.
            for t in 0..self.tasks.len() {
                if self.due[t] > t0 {
                    continue;
                }
                match self.phase[t] {
                    Phase::Uplink | Phase::Downlink => self.kill(t, self.due[t]),
                    Phase::Queued => {
                        let unit = self.target[t].0;
                        self.units[unit].pending.retain(|&x| x != t);
                        self.units[unit].outstanding_cycles -= self.tasks[t].workload_cycles;
                        self.kill(t, self.due[t]);
                    }
                    _ => {}
                }
            }

            // Grants and bit movement.
            self.pool_counter = [0, 0];
            for w in self.wire_used_bits.iter_mut() {
                *w = 0.0;
            }
            if self.params.check_invariants {
                self.granted_log.clear();
            }
            let mut any_active = false;
            for idx in 0..self.order.len() {
                let t = self.order[idx];
                if let Some(flight) = self.flights[t] {
                    any_active = true;
                    self.drain_flight(t, flight, slot, t1);
                }
            }

            if self.params.check_invariants {
                self.counters.slots += 1;
                self.granted_log.sort_unstable();
                for pair in self.granted_log.windows(2) {
                    if pair[0] == pair[1] {
                        self.counters.resource_double_bookings += 1;
                    }
                }
            }

            if self.params.record_utilization {
                let busiest = (0..2)
                    .map(|p| self.pool_counter[p] as f64 / self.topo.pools[p].size.max(1) as f64)
                    .fold(0.0, f64::max);
                self.comm_trace.push(busiest);
                let mut outstanding = 0.0;
                for (u, st) in self.units.iter().enumerate() {
                    let mut cycles = st.outstanding_cycles;
                    if let Some(t) = st.serving {
                        let progress = ((t1 - self.start_s[t])
                            * self.topo.units[u].power_hz)
                            .min(self.tasks[t].workload_cycles);
                        cycles -= progress.max(0.0);
                    }
                    outstanding += cycles.max(0.0);
                }
                self.compute_trace.push(outstanding / self.total_cycle_budget);
            }

            if skip_allowed && !any_active && self.alive > 0 {
                let next = self.next_event_time();
                if next.is_finite() {
                    slot = ((next / slot_s).ceil() as u64).max(slot + 1);
                } else {
                    slot += 1;
                }
            } else {
                slot += 1;
            }
        }

        // Anything still alive is out of schedule room; its deadline has
        // passed by construction of the slot bound.
        for t in 0..self.tasks.len() {
            if !self.phase[t].terminal() {
                self.kill(t, self.due[t]);
            }
        }
    }

    fn into_outcome(self) -> SimOutcome {
        let max_deadline = self
            .tasks
            .iter()
            .map(|t| t.deadline_s)
            .fold(0.0, f64::max);
        let failure_charge = self.params.horizon_s + max_deadline;
        let records = (0..self.tasks.len())
            .map(|t| {
                let completed = self.phase[t] == Phase::Done;
                ExecutionRecord {
                    task: t,
                    uplink_s: self.uplink_s[t],
                    queue_s: self.queue_s[t],
                    processing_s: self.processing_s[t],
                    downlink_s: self.downlink_s[t],
                    total_s: if completed {
                        self.completion_s[t] - self.tasks[t].gen_time_s
                    } else {
                        failure_charge
                    },
                    completion_s: completed.then(|| self.completion_s[t]),
                    completed,
                    on_time: self.on_time[t],
                }
            })
            .collect();
        SimOutcome {
            records,
            utilization: self.params.record_utilization.then(|| UtilizationTrace {
                slot_s: self.params.slot_s,
                comm: self.comm_trace,
                compute: self.compute_trace,
            }),
            invariants: self.counters,
            events: self.events,
        }
    }
}
