//! Independent replay oracle: rebuilds every task's timeline and each UAV's
//! battery from the workload and the decision log alone, without touching the
//! simulator's queues or ledgers.
#![allow(dead_code)]

use rand::Rng;
use uavsim_core::policy::{Decision, Policy, PolicyKind};
use uavsim_core::rng::SimRng;
use uavsim_core::sim::task::TaskInstance;
use uavsim_core::sim::{DecisionRecord, EpisodeResult};
use uavsim_core::Config;

#[derive(Debug, Clone, Copy)]
pub struct Replayed {
    pub unit: usize,
    pub start: f64,
    pub finish: f64,
    pub violated: bool,
}

pub struct Replay {
    pub tasks: Vec<Replayed>,
    pub battery_wh: Vec<f64>,
}

pub fn replay(cfg: &Config, workload: &[TaskInstance], decisions: &[DecisionRecord]) -> Replay {
    let sim = &cfg.sim;
    let units = sim.num_uavs + sim.num_mecs;
    let mut unit_of = vec![usize::MAX; workload.len()];
    for d in decisions {
        unit_of[d.task as usize] = d.unit;
    }
    // (arrival at unit, task id) per unit, served first come first served.
    let mut per_unit: Vec<Vec<(f64, usize)>> = vec![Vec::new(); units];
    for t in workload {
        let u = unit_of[t.id as usize];
        assert!(u != usize::MAX, "task {} was never placed", t.id);
        let hop = if u == t.origin_uav {
            0.0
        } else if u >= sim.num_uavs {
            sim.uav_to_mec_delay
        } else {
            sim.uav_to_uav_delay
        };
        per_unit[u].push((t.arrival_time + hop, t.id as usize));
    }
    let mut out = vec![
        Replayed {
            unit: 0,
            start: f64::NAN,
            finish: f64::NAN,
            violated: false
        };
        workload.len()
    ];
    let mut busy: Vec<Vec<(f64, f64)>> = vec![Vec::new(); sim.num_uavs];
    for (u, arrivals) in per_unit.iter_mut().enumerate() {
        arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut free_at = 0.0f64;
        for &(at, id) in arrivals.iter() {
            let t = &workload[id];
            let spec = cfg.tasks.iter().find(|s| s.type_id == t.type_id).unwrap();
            let service = if u >= sim.num_uavs { spec.proc_time_mec } else { spec.proc_time_uav };
            let start = at.max(free_at);
            let finish = start + service;
            free_at = finish;
            out[id] = Replayed {
                unit: u,
                start,
                finish,
                violated: finish - t.emitted_at > spec.deadline,
            };
            if u < sim.num_uavs {
                busy[u].push((start, finish));
            }
        }
    }
    let e = &cfg.energy;
    let h = sim.episode_duration;
    let battery_wh = busy
        .iter()
        .map(|iv| {
            // Piecewise-constant power integrated over [0, h].
            let busy_s: f64 = iv.iter().map(|&(s, f)| (f.min(h) - s.min(h)).max(0.0)).sum();
            let idle_s = h - busy_s;
            let cpu = e.cpu_power_scale * (e.cpu_busy_power * busy_s + e.cpu_idle_power * idle_s);
            let joules = (e.hover_power + e.antenna_power) * h + cpu;
            e.battery_capacity_wh - joules / 3600.0
        })
        .collect();
    Replay { tasks: out, battery_wh }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Compares a simulated episode with the replay; returns the first mismatch.
pub fn check_against_replay(cfg: &Config, workload: &[TaskInstance], res: &EpisodeResult, tol: f64) -> Result<(), String> {
    let rep = replay(cfg, workload, &res.decisions);
    if res.records.len() != workload.len() {
        return Err(format!("{} records for {} tasks", res.records.len(), workload.len()));
    }
    for r in &res.records {
        let o = rep.tasks[r.task_id as usize];
        if r.unit != o.unit || !rel_close(r.start, o.start, tol) || !rel_close(r.finish, o.finish, tol) {
            return Err(format!("task {}: sim {:?} vs replay {:?}", r.task_id, (r.unit, r.start, r.finish), o));
        }
        if r.violated != o.violated {
            return Err(format!("task {}: violation sim {} replay {}", r.task_id, r.violated, o.violated));
        }
    }
    for (u, (s, o)) in res.battery_wh().iter().zip(&rep.battery_wh).enumerate() {
        if !rel_close(*s, *o, tol) {
            return Err(format!("uav {u}: battery sim {s} replay {o}"));
        }
    }
    Ok(())
}

/// Places every task on a uniformly random unit.
pub struct UniformPolicy;

impl Policy for UniformPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Rr
    }

    fn select(&mut self, d: &Decision<'_>, rng: &mut SimRng) -> usize {
        rng.random_range(0..d.snapshot.num_units())
    }
}

pub fn uniform_policies(n: usize) -> Vec<Box<dyn Policy>> {
    (0..n).map(|_| Box::new(UniformPolicy) as Box<dyn Policy>).collect()
}

/// A reduced network used by the slower tests.
pub fn desk_config() -> Config {
    let mut cfg = Config::default();
    cfg.sim.num_uavs = 2;
    cfg.sim.episode_duration = 5.0;
    cfg
}
