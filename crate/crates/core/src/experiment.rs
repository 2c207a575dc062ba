//! Training, evaluation and multi-policy comparison, plus the CSV files they
//! produce. Nothing here touches the filesystem except [`OutputSet::write_to`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::deep::{DqlAgent, MlpNetwork};
use crate::error::{Result, SimError};
use crate::metrics::{mean_std, moving_average, convergence_episode, plateau_episode, plateau_level, RunMetrics};
use crate::policy::{heuristic_policies, Policy, PolicyKind};
use crate::queue::{write_placements_csv, PlacementRecord};
use crate::rng::{derive_seed, stream};
use crate::sim::{run_episode, EpisodeOptions, EpisodeResult, EpisodeSeeds};
use crate::tabular::{QLearningAgent, QTable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fresh, untrained agents for a learning policy. Initial weights depend
/// only on the master seed, the policy and the agent index.
pub fn build_learners(cfg: &Config, kind: PolicyKind, master_seed: u64) -> Result<Vec<Box<dyn Policy>>> {
    let j = cfg.sim.num_uavs;
    let units = cfg.sim.num_units();
    match kind {
        PolicyKind::QLearning => {
            let spec = cfg.discretizer_spec();
            Ok((0..j)
                .map(|_| {
                    let table = QTable::new(units, cfg.rl.alpha, cfg.rl.gamma);
                    Box::new(QLearningAgent::new(table, spec.build(j, units))) as Box<dyn Policy>
                })
                .collect())
        }
        PolicyKind::Dql => {
            let sizes = cfg.network_sizes();
            Ok((0..j)
                .map(|a| {
                    let idx = a.to_string();
                    let mut rng = stream(master_seed, &["dql", "init", &idx]);
                    let net = MlpNetwork::glorot(&sizes, &mut rng);
                    let seed = derive_seed(master_seed, &["dql", "replay", &idx]);
                    Box::new(DqlAgent::new(net, cfg.dql_settings(), seed)) as Box<dyn Policy>
                })
                .collect())
        }
        other => Err(SimError::Usage(format!(
            "`{other}` is a fixed heuristic and cannot be trained (use qlearning or dql)"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub epsilon: f64,
    pub reward_per_agent: Vec<f64>,
    pub tasks: usize,
    pub violations: usize,
    pub min_battery: f64,
}

impl EpisodeStats {
    pub fn mean_reward(&self) -> f64 {
        self.reward_per_agent.iter().sum::<f64>() / self.reward_per_agent.len() as f64
    }
}

pub struct TrainOutcome {
    pub policy: PolicyKind,
    pub master_seed: u64,
    pub stats: Vec<EpisodeStats>,
    pub agents: Vec<Box<dyn Policy>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    /// First episode whose smoothed reward holds at the configured threshold.
    pub threshold_episode: Option<usize>,
    /// First episode covering most of the curve's own rise (see [`plateau_episode`]).
    pub plateau_episode: Option<usize>,
    pub plateau_level: f64,
}

/// Fraction of the total rise that counts as having reached the plateau.
pub const PLATEAU_FRACTION: f64 = 0.9;

impl TrainOutcome {
    pub fn mean_rewards(&self) -> Vec<f64> {
        self.stats.iter().map(EpisodeStats::mean_reward).collect()
    }

    pub fn checkpoint(&self, cfg: &Config) -> Result<Checkpoint> {
        Checkpoint::capture(cfg, &self.agents, self.stats.len())
    }

    pub fn convergence(&self, cfg: &Config) -> ConvergenceReport {
        let ex = &cfg.experiment;
        let smoothed = moving_average(&self.mean_rewards(), ex.smoothing_window).mean;
        if smoothed.is_empty() {
            return ConvergenceReport {
                threshold_episode: None,
                plateau_episode: None,
                plateau_level: f64::NAN,
            };
        }
        let tail = ex.smoothing_window.min(smoothed.len());
        ConvergenceReport {
            threshold_episode: convergence_episode(&smoothed, ex.convergence_threshold, ex.convergence_patience),
            plateau_episode: plateau_episode(&smoothed, tail, PLATEAU_FRACTION, ex.convergence_patience),
            plateau_level: plateau_level(&smoothed, tail),
        }
    }
}

fn train_seeds(kind: PolicyKind, master: u64, episode: usize) -> EpisodeSeeds {
    let ep = episode.to_string();
    EpisodeSeeds {
        arrivals: derive_seed(master, &["train", &ep]),
        agents: derive_seed(master, &[kind.name(), "train", &ep]),
    }
}

/// Trains a learning policy for `episodes` episodes. `hook` runs after each
/// episode with the 1-based episode count and the agents.
pub fn train<F>(cfg: &Config, kind: PolicyKind, episodes: usize, master_seed: u64, mut hook: F) -> Result<TrainOutcome>
where
    F: FnMut(usize, &[Box<dyn Policy>]) -> Result<()>,
{
    cfg.validate()?;
    let mut agents = build_learners(cfg, kind, master_seed)?;
    let schedule = cfg.rl.epsilon_schedule(episodes);
    let mut stats = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let epsilon = schedule.at(ep);
        for a in agents.iter_mut() {
            a.set_epsilon(epsilon);
            a.set_learning(true);
        }
        let res = run_episode(cfg, &mut agents, train_seeds(kind, master_seed, ep), EpisodeOptions::default())
            .map_err(|e| e.context(format!("{kind} training episode {ep}")))?;
        let fractions = res.battery_fractions();
        stats.push(EpisodeStats {
            episode: ep,
            epsilon,
            reward_per_agent: res.cumulative_reward.clone(),
            tasks: res.tasks_generated,
            violations: res.total_violations(),
            min_battery: fractions.iter().copied().fold(f64::INFINITY, f64::min),
        });
        hook(ep + 1, &agents)?;
    }
    Ok(TrainOutcome {
        policy: kind,
        master_seed,
        stats,
        agents,
    })
}

/// Where evaluation agents come from.
#[derive(Clone, Copy)]
pub enum PolicySource<'a> {
    Heuristic(PolicyKind),
    Trained(&'a Checkpoint),
}

impl PolicySource<'_> {
    pub fn kind(&self) -> PolicyKind {
        match self {
            PolicySource::Heuristic(k) => *k,
            PolicySource::Trained(c) => c.policy,
        }
    }

    fn build(&self, cfg: &Config) -> Result<Vec<Box<dyn Policy>>> {
        match self {
            PolicySource::Heuristic(k) => heuristic_policies(*k, cfg.sim.num_uavs, &cfg.heuristics),
            PolicySource::Trained(c) => c.policies(cfg),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub policy: PolicyKind,
    pub seed_index: u64,
    pub metrics: RunMetrics,
    pub objective: f64,
    /// Placement records per episode, kept only when requested.
    pub records: Vec<Vec<PlacementRecord>>,
}

fn eval_seeds(kind: PolicyKind, master: u64, seed_index: u64, episode: usize) -> EpisodeSeeds {
    let (s, e) = (seed_index.to_string(), episode.to_string());
    EpisodeSeeds {
        arrivals: derive_seed(master, &["eval", &s, &e]),
        agents: derive_seed(master, &[kind.name(), "eval", &s, &e]),
    }
}

/// Greedy rollout of one policy under one evaluation seed. Arrivals depend
/// only on the seed index, so every policy sees the same workload.
pub fn evaluate_seed(
    cfg: &Config,
    source: PolicySource<'_>,
    master_seed: u64,
    seed_index: u64,
    episodes: usize,
    keep_records: bool,
) -> Result<SeedRun> {
    let kind = source.kind();
    let mut agents = source.build(cfg)?;
    for a in agents.iter_mut() {
        a.set_epsilon(0.0);
        a.set_learning(false);
    }
    let mut runs = Vec::with_capacity(episodes);
    let mut records = Vec::new();
    for ep in 0..episodes.max(1) {
        let res: EpisodeResult = run_episode(cfg, &mut agents, eval_seeds(kind, master_seed, seed_index, ep), EpisodeOptions::default())?;
        runs.push(RunMetrics::from_episode(&res, cfg.sim.num_units()));
        if keep_records {
            records.push(res.records);
        }
    }
    let metrics = RunMetrics::combine(&runs);
    let objective = metrics.objective(cfg.sim.objective_weight, cfg.sim.violation_scale);
    Ok(SeedRun {
        policy: kind,
        seed_index,
        metrics,
        objective,
        records,
    })
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Evaluates one policy across seeds; results come back in seed order.
pub fn evaluate(
    cfg: &Config,
    source: PolicySource<'_>,
    master_seed: u64,
    seeds: &[u64],
    episodes: usize,
    keep_records: bool,
) -> Result<Vec<SeedRun>> {
    cfg.validate()?;
    par_map(seeds, |&s| evaluate_seed(cfg, source, master_seed, s, episodes, keep_records))
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.context(format!("evaluating {}", source.kind())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub rank: usize,
    pub policy: PolicyKind,
    pub seeds: usize,
    pub min_battery: (f64, f64),
    pub violation_pct: (f64, f64),
    pub objective: (f64, f64),
}

/// Per-policy mean and sample std, ranked by mean objective (best first).
pub fn summarize(runs: &[SeedRun]) -> Vec<SummaryRow> {
    let mut by_policy: BTreeMap<PolicyKind, Vec<&SeedRun>> = BTreeMap::new();
    for r in runs {
        by_policy.entry(r.policy).or_default().push(r);
    }
    let mut rows: Vec<SummaryRow> = by_policy
        .into_iter()
        .map(|(policy, rs)| {
            let col = |f: &dyn Fn(&SeedRun) -> f64| mean_std(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                rank: 0,
                policy,
                seeds: rs.len(),
                min_battery: col(&|r| r.metrics.min_battery()),
                violation_pct: col(&|r| r.metrics.total_violation_pct()),
                objective: col(&|r| r.objective),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.objective.0.total_cmp(&a.objective.0).then(a.policy.cmp(&b.policy)));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    pub train_episodes_qlearning: usize,
    pub train_episodes_dql: usize,
    pub eval_episodes: usize,
    pub master_seed: u64,
    /// Learners listed here are evaluated from the checkpoint instead of trained.
    pub checkpoints: BTreeMap<PolicyKind, Checkpoint>,
}

impl ExperimentPlan {
    pub fn from_config(cfg: &Config) -> Self {
        let ex = &cfg.experiment;
        Self {
            policies: ex.policies.clone(),
            seeds: (0..ex.seeds as u64).collect(),
            train_episodes_qlearning: ex.train_episodes_qlearning,
            train_episodes_dql: ex.train_episodes_dql,
            eval_episodes: ex.eval_episodes,
            master_seed: cfg.sim.seed,
            checkpoints: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() || self.seeds.is_empty() {
            return Err(SimError::Usage("a comparison needs at least one policy and one seed".into()));
        }
        Ok(())
    }

    fn train_episodes(&self, kind: PolicyKind) -> usize {
        if kind == PolicyKind::Dql {
            self.train_episodes_dql
        } else {
            self.train_episodes_qlearning
        }
    }
}

pub struct CompareOutcome {
    pub trained: Vec<TrainOutcome>,
    pub checkpoints: BTreeMap<PolicyKind, Checkpoint>,
    pub runs: Vec<SeedRun>,
    pub summary: Vec<SummaryRow>,
}

/// Trains any learner without a checkpoint, evaluates every (policy, seed)
/// pair and aggregates. Any failure aborts the whole comparison.
pub fn compare(cfg: &Config, plan: &ExperimentPlan) -> Result<CompareOutcome> {
    cfg.validate()?;
    plan.validate()?;
    let mut policies = plan.policies.clone();
    policies.dedup();

    let to_train: Vec<PolicyKind> = policies
        .iter()
        .copied()
        .filter(|k| k.is_learning() && !plan.checkpoints.contains_key(k))
        .collect();
    let trained = par_map(&to_train, |&k| {
        train(cfg, k, plan.train_episodes(k), plan.master_seed, |_, _| Ok(()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut checkpoints = plan.checkpoints.clone();
    for t in &trained {
        checkpoints.insert(t.policy, t.checkpoint(cfg)?);
    }

    let jobs: Vec<(PolicyKind, u64)> = policies
        .iter()
        .flat_map(|&k| plan.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let runs = par_map(&jobs, |&(k, s)| {
        let source = match checkpoints.get(&k) {
            Some(c) => PolicySource::Trained(c),
            None if k.is_learning() => {
                return Err(SimError::Usage(format!("no checkpoint for {k}")));
            }
            None => PolicySource::Heuristic(k),
        };
        evaluate_seed(cfg, source, plan.master_seed, s, plan.eval_episodes, false)
            .map_err(|e| e.context(format!("policy {k}, seed {s}")))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let summary = summarize(&runs);
    Ok(CompareOutcome {
        trained,
        checkpoints,
        runs,
        summary,
    })
}

/// Comment block at the top of every CSV.
#[derive(Debug, Clone)]
pub struct Metadata {
    lines: Vec<String>,
}

impl Metadata {
    pub fn new(cfg: &Config, master_seed: u64) -> Self {
        let d = cfg.discretizer_spec();
        Self {
            lines: vec![
                format!("uavsim {VERSION}"),
                format!("config_sha256 {}", cfg.hash()),
                format!("master_seed {master_seed}"),
                format!(
                    "uavs {} mecs {} episode_duration {} state_layout {} target_network {}",
                    cfg.sim.num_uavs,
                    cfg.sim.num_mecs,
                    cfg.sim.episode_duration,
                    cfg.mdp.state_layout.name(),
                    if cfg.rl.target_network { "on" } else { "off" }
                ),
                format!(
                    "discretizer delay_bins={} delay_bin_min={} delay_max={} battery_bins={}",
                    d.delay_bins, d.delay_bin_min, d.delay_max, d.battery_bins
                ),
            ],
        }
    }

    pub fn with(mut self, line: impl Into<String>) -> Self {
        self.lines.push(line.into());
        self
    }

    fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            let _ = writeln!(s, "# {l}");
        }
        s
    }
}

fn csv_doc(meta: &Metadata, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(meta.render().into_bytes());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| SimError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn unit_label(cfg: &Config, unit: usize) -> String {
    if unit < cfg.sim.num_uavs {
        format!("uav{unit}")
    } else {
        format!("mec{}", unit - cfg.sim.num_uavs)
    }
}

/// One row per episode: mean cumulative reward across agents, its trailing
/// average and the min/max band over the same window.
pub fn convergence_csv(cfg: &Config, outcome: &TrainOutcome) -> Result<String> {
    let raw = outcome.mean_rewards();
    let window = cfg.experiment.smoothing_window;
    let sm = moving_average(&raw, window);
    let meta = Metadata::new(cfg, outcome.master_seed)
        .with(format!("policy {} episodes {}", outcome.policy, raw.len()))
        .with(format!(
            "raw_reward = mean over agents of cumulative episode reward; smoothed = trailing mean over {window} episodes; band = trailing min/max"
        ));
    csv_doc(
        &meta,
        &["episode", "raw_reward", "smoothed", "band_lo", "band_hi", "agent"],
        (0..raw.len()).map(|i| {
            vec![
                i.to_string(),
                raw[i].to_string(),
                sm.mean[i].to_string(),
                sm.lo[i].to_string(),
                sm.hi[i].to_string(),
                "mean".to_string(),
            ]
        }),
    )
}

/// Per-agent cumulative reward, exploration rate and episode totals.
pub fn training_log_csv(cfg: &Config, outcome: &TrainOutcome) -> Result<String> {
    let meta = Metadata::new(cfg, outcome.master_seed).with(format!("policy {}", outcome.policy));
    let rows = outcome.stats.iter().flat_map(|s| {
        s.reward_per_agent.iter().enumerate().map(move |(a, r)| {
            vec![
                s.episode.to_string(),
                a.to_string(),
                r.to_string(),
                s.epsilon.to_string(),
                s.tasks.to_string(),
                s.violations.to_string(),
                s.min_battery.to_string(),
            ]
        })
    });
    csv_doc(
        &meta,
        &["episode", "agent", "reward", "epsilon", "tasks", "violations", "min_battery"],
        rows,
    )
}

pub fn battery_csv(cfg: &Config, master_seed: u64, runs: &[SeedRun]) -> Result<String> {
    let meta = Metadata::new(cfg, master_seed).with("fraction = remaining battery / capacity at the episode horizon");
    let rows = runs.iter().flat_map(|r| {
        r.metrics.battery_fraction.iter().enumerate().map(move |(u, f)| {
            vec![r.policy.to_string(), r.seed_index.to_string(), u.to_string(), f.to_string()]
        })
    });
    csv_doc(&meta, &["policy", "seed", "uav", "fraction"], rows)
}

pub fn violations_csv(cfg: &Config, master_seed: u64, runs: &[SeedRun]) -> Result<String> {
    let meta = Metadata::new(cfg, master_seed).with("pct = violations at the unit / all generated tasks * 100");
    let rows = runs.iter().flat_map(|r| {
        r.metrics.violation_pct().into_iter().enumerate().map(move |(u, p)| {
            vec![r.policy.to_string(), r.seed_index.to_string(), unit_label(cfg, u), p.to_string()]
        })
    });
    csv_doc(&meta, &["policy", "seed", "unit", "pct"], rows)
}

pub fn summary_csv(cfg: &Config, master_seed: u64, rows: &[SummaryRow]) -> Result<String> {
    let meta = Metadata::new(cfg, master_seed).with(format!(
        "objective weight {}; mean and sample std over seeds; ranked by objective",
        cfg.sim.objective_weight
    ));
    csv_doc(
        &meta,
        &[
            "rank",
            "policy",
            "seeds",
            "min_battery_mean",
            "min_battery_std",
            "violation_pct_mean",
            "violation_pct_std",
            "objective_mean",
            "objective_std",
        ],
        rows.iter().map(|r| {
            vec![
                r.rank.to_string(),
                r.policy.to_string(),
                r.seeds.to_string(),
                r.min_battery.0.to_string(),
                r.min_battery.1.to_string(),
                r.violation_pct.0.to_string(),
                r.violation_pct.1.to_string(),
                r.objective.0.to_string(),
                r.objective.1.to_string(),
            ]
        }),
    )
}

/// Per-task event log with the metadata block.
pub fn event_log_csv(cfg: &Config, master_seed: u64, policy: PolicyKind, seed_index: u64, records: &[PlacementRecord]) -> Result<String> {
    let meta = Metadata::new(cfg, master_seed).with(format!("policy {policy} seed {seed_index}"));
    let mut buf = meta.render().into_bytes();
    write_placements_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Files staged in memory and written together once everything succeeded.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct OutputSet {
    pub files: Vec<(String, String)>,
}

impl OutputSet {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Writes each file to a temporary name first, then renames them all.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut staged = Vec::new();
        for (name, contents) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            std::fs::write(&tmp, contents)?;
            staged.push((tmp, dir.join(name)));
        }
        for (tmp, dst) in staged {
            std::fs::rename(tmp, dst)?;
        }
        Ok(())
    }
}

/// All CSVs and checkpoints a comparison produces.
pub fn compare_outputs(cfg: &Config, plan: &ExperimentPlan, outcome: &CompareOutcome) -> Result<OutputSet> {
    let mut out = OutputSet::default();
    let seed = plan.master_seed;
    out.add("summary.csv", summary_csv(cfg, seed, &outcome.summary)?);
    out.add("battery.csv", battery_csv(cfg, seed, &outcome.runs)?);
    out.add("violations.csv", violations_csv(cfg, seed, &outcome.runs)?);
    for t in &outcome.trained {
        out.add(format!("convergence_{}.csv", t.policy), convergence_csv(cfg, t)?);
        out.add(format!("checkpoint_{}.txt", t.policy), t.checkpoint(cfg)?.to_text());
    }
    Ok(out)
}

/// Human-readable table of a summary.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<4} {:<10} {:>18} {:>18} {:>18}\n",
        "rank", "policy", "min battery %", "violations %", "objective"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<4} {:<10} {:>9.2} ± {:<6.2} {:>9.3} ± {:<6.3} {:>9.4} ± {:<6.4}",
            r.rank,
            r.policy.name(),
            100.0 * r.min_battery.0,
            100.0 * r.min_battery.1,
            r.violation_pct.0,
            r.violation_pct.1,
            r.objective.0,
            r.objective.1
        );
    }
    s
}
