//! Browser bindings for the demo page in `www/`. Every export takes plain
//! numbers or strings and returns a JSON document; failures come back as
//! `{"error": "..."}`.

use serde::Serialize;
use serde_json::json;
use uavsim_core::energy::EnergyParams;
use uavsim_core::mdp::{counterfactual_violation, reward_with_violation, EnergyTier, RewardConfig, ViolationCase};
use uavsim_core::metrics::{violation_distribution, RunMetrics};
use uavsim_core::policy::heuristic_policies;
use uavsim_core::sched::NetworkSnapshot;
use uavsim_core::sim::task::TaskType;
use uavsim_core::sim::{run_episode, EpisodeOptions, EpisodeSeeds};
use uavsim_core::{Config, PolicyKind};
use wasm_bindgen::prelude::*;

const TRACE_POINTS: usize = 101;

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| json!({ "error": e.to_string() }).to_string()),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[derive(Serialize)]
pub struct Simulation {
    pub policy: String,
    pub tasks: usize,
    pub times: Vec<f64>,
    /// Battery percentage per UAV at each sample time.
    pub battery: Vec<Vec<f64>>,
    /// Violations per unit as a percentage of all tasks.
    pub violations: Vec<f64>,
    pub units: Vec<String>,
    pub objective: f64,
}

/// Runs one episode of a fixed heuristic (rr, hef or qhef).
pub fn simulate_episode(policy: &str, num_uavs: usize, duration: f64, seed: u64) -> Result<Simulation, String> {
    let kind: PolicyKind = policy.parse().map_err(|e: uavsim_core::SimError| e.to_string())?;
    if kind.is_learning() {
        return Err("the demo runs the fixed heuristics only (rr, hef, qhef)".into());
    }
    let mut cfg = Config::default();
    cfg.sim.num_uavs = num_uavs;
    cfg.sim.episode_duration = duration;
    cfg.validate().map_err(|e| e.to_string())?;
    let mut policies = heuristic_policies(kind, num_uavs, &cfg.heuristics).map_err(|e| e.to_string())?;
    let seeds = EpisodeSeeds {
        arrivals: seed,
        agents: seed.wrapping_add(1),
    };
    let res = run_episode(&cfg, &mut policies, seeds, EpisodeOptions::default()).map_err(|e| e.to_string())?;
    let times: Vec<f64> = (0..TRACE_POINTS)
        .map(|i| duration * i as f64 / (TRACE_POINTS - 1) as f64)
        .collect();
    let battery = res
        .ledgers
        .iter()
        .map(|l| {
            let mut l = l.clone();
            times
                .iter()
                .map(|&t| {
                    l.set_elapsed(t);
                    100.0 * l.remaining_battery_fraction()
                })
                .collect()
        })
        .collect();
    let units = cfg.sim.num_units();
    let metrics = RunMetrics::from_episode(&res, units);
    Ok(Simulation {
        policy: kind.to_string(),
        tasks: res.tasks_generated,
        times,
        battery,
        violations: violation_distribution(&res.records, units, res.tasks_generated),
        units: (0..units)
            .map(|u| if u < num_uavs { format!("UAV {u}") } else { format!("MEC {}", u - num_uavs) })
            .collect(),
        objective: metrics.objective(cfg.sim.objective_weight, None),
    })
}

#[derive(Serialize)]
pub struct BatteryCurve {
    pub minutes: Vec<f64>,
    pub percent: Vec<f64>,
    /// Minutes until the battery is empty at this duty cycle.
    pub endurance_min: f64,
    pub drain_w: f64,
}

/// Remaining battery over time for a UAV whose CPU is busy a fixed share of the time.
pub fn battery_curve(busy_share: f64, cpu_power_scale: f64) -> Result<BatteryCurve, String> {
    if !(0.0..=1.0).contains(&busy_share) {
        return Err("busy share must lie in [0, 1]".into());
    }
    let p = EnergyParams {
        cpu_power_scale,
        ..EnergyParams::default()
    };
    p.validate()?;
    let drain_w = p.baseline_power() + busy_share * p.busy_increment();
    let endurance_min = if drain_w > 0.0 {
        60.0 * p.battery_capacity_wh / drain_w
    } else {
        f64::INFINITY
    };
    let span = if endurance_min.is_finite() { endurance_min } else { 60.0 };
    let minutes: Vec<f64> = (0..TRACE_POINTS).map(|i| span * i as f64 / (TRACE_POINTS - 1) as f64).collect();
    let percent = minutes
        .iter()
        .map(|m| 100.0 * (1.0 - drain_w * m / 60.0 / p.battery_capacity_wh).max(0.0))
        .collect();
    Ok(BatteryCurve {
        minutes,
        percent,
        endurance_min,
        drain_w,
    })
}

#[derive(Serialize)]
pub struct ActionReward {
    pub unit: String,
    pub predicted_latency: f64,
    pub violates: bool,
    pub tier: &'static str,
    pub case: &'static str,
    pub reward: f64,
}

/// Reward of every possible placement for one decision. `delays` has one
/// entry per unit (UAVs then MECs); `battery_after` one per UAV, as fractions.
pub fn reward_table(task: &str, deciding_uav: usize, delays: &[f64], battery_after: &[f64]) -> Result<Vec<ActionReward>, String> {
    let ty = TaskType::ALL
        .into_iter()
        .find(|t| t.name() == task)
        .ok_or_else(|| format!("unknown task type `{task}`"))?;
    let cfg = Config::default();
    let j = battery_after.len();
    if j == 0 || delays.len() <= j || deciding_uav >= j {
        return Err("need at least one UAV, one MEC and a valid deciding UAV".into());
    }
    let units = delays.len();
    let mut sim = cfg.sim;
    sim.num_uavs = j;
    sim.num_mecs = units - j;
    let mut after = battery_after.to_vec();
    after.resize(units, f64::INFINITY);
    let snap = NetworkSnapshot {
        deciding_uav,
        task_type: ty,
        num_uavs: j,
        delays: delays.to_vec(),
        batteries: after.clone(),
        battery_after: after,
        transfer: (0..units).map(|u| sim.transfer_delay(deciding_uav, u)).collect(),
        iot_delay: sim.iot_to_uav_delay,
        deadline: cfg.task_spec(ty).deadline,
    };
    let rc = RewardConfig::default();
    Ok((0..units)
        .map(|a| {
            let v = counterfactual_violation(&snap, a);
            let b = reward_with_violation(a, &snap, v, &rc);
            ActionReward {
                unit: if a < j { format!("UAV {a}") } else { format!("MEC {}", a - j) },
                predicted_latency: snap.iot_delay + snap.transfer[a] + snap.delays[a],
                violates: v,
                tier: match b.tier {
                    EnergyTier::Best => "best",
                    EnergyTier::Middle => "middle",
                    EnergyTier::Worst => "worst",
                },
                case: match b.case {
                    ViolationCase::None => "met",
                    ViolationCase::MecAvoidable => "MEC could meet it",
                    ViolationCase::LocalAvoidable => "local UAV could meet it",
                    ViolationCase::OtherUavAvoidable => "another UAV could meet it",
                    ViolationCase::Unavoidable => "unavoidable",
                },
                reward: b.total,
            }
        })
        .collect())
}

#[wasm_bindgen]
pub fn simulate(policy: &str, num_uavs: usize, duration: f64, seed: u32) -> String {
    to_json(simulate_episode(policy, num_uavs, duration, seed as u64))
}

#[wasm_bindgen]
pub fn battery(busy_share: f64, cpu_power_scale: f64) -> String {
    to_json(battery_curve(busy_share, cpu_power_scale))
}

#[wasm_bindgen]
pub fn rewards(task: &str, deciding_uav: usize, delays: &[f64], battery_after: &[f64]) -> String {
    to_json(reward_table(task, deciding_uav, delays, battery_after))
}
