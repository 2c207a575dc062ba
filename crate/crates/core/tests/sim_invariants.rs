mod common;

use common::{check_against_replay, desk_config, uniform_policies};
use uavsim_core::config::ArrivalScope;
use uavsim_core::mdp::RewardMode;
use uavsim_core::policy::{heuristic_policies, Policy, PolicyKind};
use uavsim_core::sim::event::EventKind;
use uavsim_core::sim::{generate_workload, run_episode, EpisodeOptions, EpisodeResult, EpisodeSeeds};
use uavsim_core::Config;

fn logged() -> EpisodeOptions {
    EpisodeOptions {
        record_log: true,
        record_transitions: true,
    }
}

fn heuristics(cfg: &Config, kind: PolicyKind) -> Vec<Box<dyn Policy>> {
    heuristic_policies(kind, cfg.sim.num_uavs, &cfg.heuristics).unwrap()
}

fn run(cfg: &Config, mut p: Vec<Box<dyn Policy>>, seed: u64) -> EpisodeResult {
    let seeds = EpisodeSeeds {
        arrivals: seed,
        agents: seed + 1000,
    };
    run_episode(cfg, &mut p, seeds, logged()).unwrap()
}

#[test]
fn matches_replay_for_every_heuristic() {
    let cfg = Config::default();
    for kind in [PolicyKind::Rr, PolicyKind::Hef, PolicyKind::Qhef] {
        for seed in 0..3 {
            let res = run(&cfg, heuristics(&cfg, kind), seed);
            let wl = generate_workload(&cfg, seed);
            check_against_replay(&cfg, &wl, &res, 1e-9).unwrap_or_else(|e| panic!("{kind} seed {seed}: {e}"));
        }
    }
}

#[test]
fn matches_replay_under_overload() {
    let mut cfg = Config::default();
    cfg.sim.arrival_scope = ArrivalScope::PerUav;
    cfg.sim.episode_duration = 8.0;
    let res = run(&cfg, uniform_policies(4), 3);
    assert!(res.total_violations() > 0);
    check_against_replay(&cfg, &generate_workload(&cfg, 3), &res, 1e-9).unwrap();
}

#[test]
fn clock_never_goes_backwards() {
    let cfg = desk_config();
    let res = run(&cfg, uniform_policies(2), 11);
    assert!(res.log.windows(2).all(|w| w[0].time <= w[1].time));
    let ends = res.log.iter().filter(|e| e.kind == EventKind::EpisodeEnd).count();
    assert_eq!(ends, 1);
}

#[test]
fn tasks_are_conserved_and_placed_once() {
    let cfg = Config::default();
    let res = run(&cfg, heuristics(&cfg, PolicyKind::Qhef), 5);
    let n = res.tasks_generated;
    assert_eq!(res.completed_by_horizon + res.queued_at_horizon + res.in_service_at_horizon, n);
    assert_eq!(res.records.len(), n);
    assert_eq!(res.decisions.len(), n);
    assert_eq!(res.decisions_per_agent.iter().sum::<usize>(), n);
    let mut arrivals = vec![0; n];
    let mut completions = vec![0; n];
    for e in &res.log {
        match e.kind {
            EventKind::TaskArrival => arrivals[e.task as usize] += 1,
            EventKind::TaskComplete => completions[e.task as usize] += 1,
            _ => {}
        }
    }
    for r in &res.records {
        let id = r.task_id as usize;
        let expected = if r.unit == r.origin { 1 } else { 2 };
        assert_eq!(arrivals[id], expected, "task {id}");
        assert_eq!(completions[id], 1, "task {id}");
    }
}

#[test]
fn identical_inputs_give_identical_runs() {
    let cfg = Config::default();
    let a = run(&cfg, heuristics(&cfg, PolicyKind::Hef), 9);
    let b = run(&cfg, heuristics(&cfg, PolicyKind::Hef), 9);
    assert_eq!(a.records, b.records);
    assert_eq!(a.battery_wh(), b.battery_wh());
    assert_eq!(a.cumulative_reward, b.cumulative_reward);
}

#[test]
fn workload_does_not_depend_on_policy() {
    let cfg = Config::default();
    let a = run(&cfg, heuristics(&cfg, PolicyKind::Rr), 4);
    let b = run(&cfg, uniform_policies(4), 4);
    let key = |r: &EpisodeResult| -> Vec<(u64, f64, usize)> {
        r.records.iter().map(|x| (x.task_id, x.arrival, x.origin)).collect()
    };
    assert_eq!(key(&a), key(&b));
}

#[test]
fn round_robin_cycles_through_units() {
    let cfg = Config::default();
    let res = run(&cfg, heuristics(&cfg, PolicyKind::Rr), 2);
    let units = cfg.sim.num_units();
    for uav in 0..cfg.sim.num_uavs {
        let seq: Vec<usize> = res.decisions.iter().filter(|d| d.uav == uav).map(|d| d.unit).collect();
        assert!(!seq.is_empty());
        for (i, u) in seq.iter().enumerate() {
            assert_eq!(*u, i % units, "uav {uav} decision {i}");
        }
    }
}

#[test]
fn local_predictions_are_exact() {
    let cfg = Config::default();
    let res = run(&cfg, uniform_policies(4), 8);
    let mut checked = 0;
    for d in &res.decisions {
        let r = &res.records[d.task as usize];
        if d.unit == d.uav {
            let realized = r.queue_wait + r.service_time;
            assert!((realized - d.predicted_delay).abs() < 1e-9, "task {}", d.task);
            checked += 1;
        }
    }
    assert!(checked > 10);
}

#[test]
fn zero_length_episode() {
    let mut cfg = Config::default();
    cfg.sim.episode_duration = 0.0;
    let res = run(&cfg, heuristics(&cfg, PolicyKind::Rr), 1);
    assert_eq!(res.tasks_generated, 0);
    assert!(res.battery_fractions().iter().all(|&f| f == 1.0));
    assert!(res.cumulative_reward.iter().all(|&r| r == 0.0));
}

#[test]
fn one_transition_per_decision_with_terminal_end() {
    for mode in [RewardMode::Decision, RewardMode::Deferred] {
        let mut cfg = desk_config();
        cfg.mdp.reward_mode = mode;
        let res = run(&cfg, uniform_policies(2), 6);
        assert_eq!(res.transitions.len(), res.tasks_generated, "{mode:?}");
        for agent in 0..2 {
            let mine: Vec<_> = res.transitions.iter().filter(|(a, _)| *a == agent).map(|(_, t)| t).collect();
            let terminals = mine.iter().filter(|t| t.terminal).count();
            assert_eq!(terminals, 1, "{mode:?} agent {agent}");
            let total: f64 = mine.iter().map(|t| t.reward).sum();
            assert!((total - res.cumulative_reward[agent]).abs() < 1e-9);
        }
    }
}

#[test]
fn bad_unit_is_reported() {
    struct Off;
    impl Policy for Off {
        fn kind(&self) -> PolicyKind {
            PolicyKind::Rr
        }
        fn select(&mut self, _: &uavsim_core::policy::Decision<'_>, _: &mut uavsim_core::rng::SimRng) -> usize {
            99
        }
    }
    let cfg = desk_config();
    let mut p: Vec<Box<dyn Policy>> = vec![Box::new(Off), Box::new(Off)];
    let err = run_episode(&cfg, &mut p, EpisodeSeeds { arrivals: 0, agents: 0 }, logged()).unwrap_err();
    assert!(err.to_string().contains("unit 99"), "{err}");
}
