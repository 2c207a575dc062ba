//! Event-driven simulation of one episode.
//!
//! Tasks reach their origin UAV, whose policy picks a processing unit; remote
//! placements travel for the configured transfer delay and are queued FIFO
//! at the destination. The episode stops admitting work at the horizon, at
//! which point batteries are read. Queues are then drained without further
//! arrivals so every task gets a definite finish time and violation flag.

pub mod event;
pub mod task;

use crate::config::{ArrivalScope, Config};
use crate::energy::EnergyLedger;
use crate::error::{Result, SimError};
use crate::mdp::{counterfactual_violation, encode_state, reward_with_violation, RewardMode};
use crate::policy::{Decision, Policy, Transition};
use crate::queue::{check_violation, InService, PlacementRecord, QueuedTask, UnitClass, UnitQueue};
use crate::rng::{stream, SimRng};
use crate::sched::NetworkSnapshot;

use event::{Event, EventKind, EventQueue};
use task::{generate_arrivals, TaskInstance};

/// Seeds for one episode. Arrivals and agent exploration are independent,
/// so swapping policies does not change the workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSeeds {
    pub arrivals: u64,
    pub agents: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EpisodeOptions {
    /// Keep the full event log and per-decision records.
    pub record_log: bool,
    /// Keep every transition handed to the agents.
    pub record_transitions: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub time: f64,
    pub kind: EventKind,
    pub task: u64,
    pub unit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub time: f64,
    pub task: u64,
    pub uav: usize,
    pub unit: usize,
    /// Predicted delay at the chosen unit when the decision was made.
    pub predicted_delay: f64,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub horizon: f64,
    pub tasks_generated: usize,
    pub completed_by_horizon: usize,
    /// Waiting in a queue or travelling to one at the horizon.
    pub queued_at_horizon: usize,
    pub in_service_at_horizon: usize,
    /// One record per task, ordered by id.
    pub records: Vec<PlacementRecord>,
    /// Per-UAV ledgers read at the horizon.
    pub ledgers: Vec<EnergyLedger>,
    pub cumulative_reward: Vec<f64>,
    pub decisions_per_agent: Vec<usize>,
    pub transitions: Vec<(usize, Transition)>,
    pub log: Vec<LogEntry>,
    pub decisions: Vec<DecisionRecord>,
}

impl EpisodeResult {
    pub fn battery_wh(&self) -> Vec<f64> {
        self.ledgers.iter().map(EnergyLedger::remaining_battery).collect()
    }

    pub fn battery_fractions(&self) -> Vec<f64> {
        self.ledgers
            .iter()
            .map(EnergyLedger::remaining_battery_fraction)
            .collect()
    }

    pub fn violations_per_unit(&self, num_units: usize) -> Vec<usize> {
        let mut v = vec![0; num_units];
        for r in self.records.iter().filter(|r| r.violated) {
            v[r.unit] += 1;
        }
        v
    }

    pub fn total_violations(&self) -> usize {
        self.records.iter().filter(|r| r.violated).count()
    }
}

struct Pending {
    agent: usize,
    state: Vec<f64>,
    action: usize,
    snapshot: NetworkSnapshot,
    reward: Option<f64>,
    next_state: Option<Vec<f64>>,
    terminal: bool,
}

#[derive(Clone, Copy, Default)]
struct TaskProgress {
    unit: Option<usize>,
    unit_arrival: f64,
    start: f64,
}

struct Kernel<'a> {
    cfg: &'a Config,
    opts: EpisodeOptions,
    now: f64,
    tasks: Vec<TaskInstance>,
    progress: Vec<TaskProgress>,
    records: Vec<Option<PlacementRecord>>,
    queues: Vec<UnitQueue>,
    ledgers: Vec<EnergyLedger>,
    events: EventQueue,
    pending: Vec<Option<Pending>>,
    last_decision: Vec<Option<u64>>,
    cumulative_reward: Vec<f64>,
    decisions_per_agent: Vec<usize>,
    transitions: Vec<(usize, Transition)>,
    log: Vec<LogEntry>,
    decisions: Vec<DecisionRecord>,
}

/// Generates the episode workload: every (UAV, task type) pair has its own
/// stream; tasks are numbered in arrival order.
pub fn generate_workload(cfg: &Config, arrivals_seed: u64) -> Vec<TaskInstance> {
    let sim = &cfg.sim;
    let scale = match sim.arrival_scope {
        ArrivalScope::Network => sim.num_uavs as f64,
        ArrivalScope::PerUav => 1.0,
    };
    let mut all = Vec::new();
    for uav in 0..sim.num_uavs {
        for spec in &cfg.tasks {
            let mut rng = stream(arrivals_seed, &["arrivals", &uav.to_string(), spec.type_id.name()]);
            all.extend(generate_arrivals(
                spec,
                spec.mean_interarrival * scale,
                uav,
                sim.episode_duration,
                sim.iot_to_uav_delay,
                &mut rng,
            ));
        }
    }
    all.sort_by(|a, b| {
        a.arrival_time
            .total_cmp(&b.arrival_time)
            .then(a.origin_uav.cmp(&b.origin_uav))
            .then(a.type_id.cmp(&b.type_id))
    });
    for (i, t) in all.iter_mut().enumerate() {
        t.id = i as u64;
    }
    all
}

/// Runs one episode with one policy per UAV. Policies keep their learned
/// state across calls.
pub fn run_episode(
    cfg: &Config,
    policies: &mut [Box<dyn Policy>],
    seeds: EpisodeSeeds,
    opts: EpisodeOptions,
) -> Result<EpisodeResult> {
    cfg.validate()?;
    let sim = &cfg.sim;
    if policies.len() != sim.num_uavs {
        return Err(SimError::Config(format!(
            "{} policies supplied for {} UAVs",
            policies.len(),
            sim.num_uavs
        )));
    }
    let tasks = generate_workload(cfg, seeds.arrivals);
    let mut agent_rngs: Vec<SimRng> = (0..sim.num_uavs)
        .map(|u| stream(seeds.agents, &["agent", &u.to_string()]))
        .collect();

    let n = tasks.len();
    let mut k = Kernel {
        cfg,
        opts,
        now: 0.0,
        progress: vec![TaskProgress::default(); n],
        records: vec![None; n],
        queues: (0..sim.num_units())
            .map(|u| {
                let class = if u < sim.num_uavs { UnitClass::Uav } else { UnitClass::Mec };
                UnitQueue::new(u, class)
            })
            .collect(),
        ledgers: vec![EnergyLedger::new(cfg.energy); sim.num_uavs],
        events: EventQueue::new(),
        pending: (0..n).map(|_| None).collect(),
        last_decision: vec![None; sim.num_uavs],
        cumulative_reward: vec![0.0; sim.num_uavs],
        decisions_per_agent: vec![0; sim.num_uavs],
        transitions: Vec::new(),
        log: Vec::new(),
        decisions: Vec::new(),
        tasks,
    };
    for t in &k.tasks {
        k.events.push(Event {
            time: t.arrival_time,
            kind: EventKind::TaskArrival,
            task: t.id,
            unit: t.origin_uav,
        });
    }
    k.events.push(Event {
        time: sim.episode_duration,
        kind: EventKind::EpisodeEnd,
        task: 0,
        unit: 0,
    });

    // Admission phase.
    while let Some(ev) = k.events.pop() {
        debug_assert!(ev.time >= k.now, "clock went backwards");
        k.now = ev.time;
        if ev.kind == EventKind::EpisodeEnd {
            k.record(ev.time, EventKind::EpisodeEnd, 0, 0);
            break;
        }
        k.handle(ev, policies, &mut agent_rngs)?;
    }

    let horizon = sim.episode_duration;
    let mut ledgers = k.ledgers.clone();
    for l in &mut ledgers {
        l.set_elapsed(horizon);
    }
    let completed_by_horizon = k.records.iter().filter(|r| r.is_some()).count();
    let in_service_at_horizon = k.queues.iter().filter(|q| !q.is_idle()).count();
    let queued_at_horizon = n - completed_by_horizon - in_service_at_horizon;

    // Drain phase: no new arrivals reach decision points.
    while let Some(ev) = k.events.pop() {
        k.now = ev.time;
        k.handle(ev, policies, &mut agent_rngs)?;
    }
    k.finish_agents(policies);

    let records: Vec<PlacementRecord> = k
        .records
        .into_iter()
        .map(|r| r.expect("every task completes after draining"))
        .collect();
    Ok(EpisodeResult {
        horizon,
        tasks_generated: n,
        completed_by_horizon,
        queued_at_horizon,
        in_service_at_horizon,
        records,
        ledgers,
        cumulative_reward: k.cumulative_reward,
        decisions_per_agent: k.decisions_per_agent,
        transitions: k.transitions,
        log: k.log,
        decisions: k.decisions,
    })
}

impl Kernel<'_> {
    fn record(&mut self, time: f64, kind: EventKind, task: u64, unit: usize) {
        if self.opts.record_log {
            self.log.push(LogEntry { time, kind, task, unit });
        }
    }

    fn handle(
        &mut self,
        ev: Event,
        policies: &mut [Box<dyn Policy>],
        rngs: &mut [SimRng],
    ) -> Result<()> {
        match ev.kind {
            EventKind::TaskArrival => {
                self.record(ev.time, EventKind::TaskArrival, ev.task, ev.unit);
                let id = ev.task as usize;
                if self.progress[id].unit.is_none() {
                    self.decide(id, policies, rngs)
                } else {
                    self.admit(id, ev.unit)
                }
            }
            EventKind::TaskComplete => {
                self.complete(ev.unit, policies);
                Ok(())
            }
            EventKind::TaskStartService | EventKind::EpisodeEnd => Ok(()),
        }
    }

    fn snapshot(&mut self, task: &TaskInstance) -> NetworkSnapshot {
        let sim = &self.cfg.sim;
        let spec = self.cfg.task_spec(task.type_id);
        let now = self.now;
        let origin = task.origin_uav;
        let delays = self
            .queues
            .iter()
            .map(|q| q.predicted_unit_delay(spec, now))
            .collect();
        let mut batteries = Vec::with_capacity(sim.num_units());
        let mut battery_after = Vec::with_capacity(sim.num_units());
        for l in &mut self.ledgers {
            l.set_elapsed(now);
            let cap = l.params().battery_capacity_wh;
            batteries.push(l.remaining_battery_fraction());
            battery_after.push(l.hypothetical_battery_after(spec.proc_time_uav) / cap);
        }
        batteries.resize(sim.num_units(), f64::INFINITY);
        battery_after.resize(sim.num_units(), f64::INFINITY);
        NetworkSnapshot {
            deciding_uav: origin,
            task_type: task.type_id,
            num_uavs: sim.num_uavs,
            delays,
            batteries,
            battery_after,
            transfer: (0..sim.num_units()).map(|u| sim.transfer_delay(origin, u)).collect(),
            iot_delay: sim.iot_to_uav_delay,
            deadline: spec.deadline,
        }
    }

    fn decide(&mut self, id: usize, policies: &mut [Box<dyn Policy>], rngs: &mut [SimRng]) -> Result<()> {
        let task = self.tasks[id];
        let agent = task.origin_uav;
        let snapshot = self.snapshot(&task);
        let state = encode_state(&snapshot, self.cfg.mdp.state_layout);

        if let Some(prev) = self.last_decision[agent] {
            if let Some(p) = self.pending[prev as usize].as_mut() {
                p.next_state = Some(state.clone());
            }
            self.try_deliver(prev as usize, policies);
        }

        let unit = policies[agent].select(
            &Decision {
                snapshot: &snapshot,
                state: &state,
            },
            &mut rngs[agent],
        );
        let units = self.cfg.sim.num_units();
        if unit >= units {
            return Err(SimError::UnknownUnit { uav: agent, unit, units });
        }

        let reward = match self.cfg.mdp.reward_mode {
            RewardMode::Decision => {
                let v = counterfactual_violation(&snapshot, unit);
                let r = reward_with_violation(unit, &snapshot, v, &self.cfg.mdp.reward).total;
                self.cumulative_reward[agent] += r;
                Some(r)
            }
            RewardMode::Deferred => None,
        };
        self.decisions_per_agent[agent] += 1;
        if self.opts.record_log {
            self.decisions.push(DecisionRecord {
                time: self.now,
                task: task.id,
                uav: agent,
                unit,
                predicted_delay: snapshot.delays[unit],
                reward: reward.unwrap_or(f64::NAN),
            });
        }
        self.pending[id] = Some(Pending {
            agent,
            state,
            action: unit,
            snapshot,
            reward,
            next_state: None,
            terminal: false,
        });
        self.last_decision[agent] = Some(task.id);

        self.progress[id].unit = Some(unit);
        if unit == agent {
            self.admit(id, unit)
        } else {
            self.events.push(Event {
                time: self.now + self.cfg.sim.transfer_delay(agent, unit),
                kind: EventKind::TaskArrival,
                task: task.id,
                unit,
            });
            Ok(())
        }
    }

    fn admit(&mut self, id: usize, unit: usize) -> Result<()> {
        let task = self.tasks[id];
        let on_mec = unit >= self.cfg.sim.num_uavs;
        let service = self.cfg.task_spec(task.type_id).proc_time(on_mec);
        self.progress[id].unit_arrival = self.now;
        let started = self.queues[unit].enqueue(
            QueuedTask {
                task_id: task.id,
                type_id: task.type_id,
                service,
                enqueued_at: self.now,
            },
            self.now,
        )?;
        if let Some(s) = started {
            self.start_service(unit, s);
        }
        Ok(())
    }

    fn start_service(&mut self, unit: usize, s: InService) {
        self.record(s.start, EventKind::TaskStartService, s.task.task_id, unit);
        self.progress[s.task.task_id as usize].start = s.start;
        if unit < self.cfg.sim.num_uavs {
            self.ledgers[unit].add_busy(s.start, s.finish);
        }
        self.events.push(Event {
            time: s.finish,
            kind: EventKind::TaskComplete,
            task: s.task.task_id,
            unit,
        });
    }

    fn complete(&mut self, unit: usize, policies: &mut [Box<dyn Policy>]) {
        let (done, next) = self.queues[unit].complete(self.now);
        let id = done.task.task_id as usize;
        self.record(self.now, EventKind::TaskComplete, done.task.task_id, unit);
        let task = self.tasks[id];
        let p = self.progress[id];
        let sim = &self.cfg.sim;
        let spec = self.cfg.task_spec(task.type_id);
        let mut rec = PlacementRecord {
            task_id: task.id,
            type_id: task.type_id,
            origin: task.origin_uav,
            unit,
            emitted_at: task.emitted_at,
            arrival: task.arrival_time,
            unit_arrival: p.unit_arrival,
            start: p.start,
            finish: done.finish,
            deadline_abs: task.deadline_abs,
            iot_delay: sim.iot_to_uav_delay,
            transfer_delay: sim.transfer_delay(task.origin_uav, unit),
            queue_wait: p.start - p.unit_arrival,
            service_time: done.task.service,
            violated: false,
            after_horizon: self.now > sim.episode_duration,
        };
        rec.violated = check_violation(&rec, spec.deadline);
        self.records[id] = Some(rec);
        if let Some(s) = next {
            self.start_service(unit, s);
        }

        if self.cfg.mdp.reward_mode == RewardMode::Deferred {
            if let Some(pend) = self.pending[id].as_mut() {
                let r = reward_with_violation(pend.action, &pend.snapshot, rec.violated, &self.cfg.mdp.reward).total;
                pend.reward = Some(r);
                self.cumulative_reward[pend.agent] += r;
            }
            self.try_deliver(id, policies);
        }
    }

    fn try_deliver(&mut self, id: usize, policies: &mut [Box<dyn Policy>]) {
        let ready = self.pending[id]
            .as_ref()
            .is_some_and(|p| p.reward.is_some() && p.next_state.is_some());
        if !ready {
            return;
        }
        let p = self.pending[id].take().unwrap();
        let t = Transition {
            state: p.state,
            action: p.action,
            reward: p.reward.unwrap(),
            next_state: p.next_state.unwrap(),
            terminal: p.terminal,
        };
        if self.opts.record_transitions {
            self.transitions.push((p.agent, t.clone()));
        }
        policies[p.agent].observe(t);
    }

    /// Closes each agent's last transition. Its successor state is the
    /// agent's own last state.
    fn finish_agents(&mut self, policies: &mut [Box<dyn Policy>]) {
        let terminal = self.cfg.mdp.terminal_at_episode_end;
        for agent in 0..self.last_decision.len() {
            if let Some(last) = self.last_decision[agent] {
                if let Some(p) = self.pending[last as usize].as_mut() {
                    p.next_state = Some(p.state.clone());
                    p.terminal = terminal;
                }
            }
        }
        for id in 0..self.pending.len() {
            self.try_deliver(id, policies);
        }
        debug_assert!(self.pending.iter().all(Option::is_none));
    }
}
