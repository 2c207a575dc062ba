//! `uavsim`: train, evaluate and compare task-offloading policies.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use uavsim_core::checkpoint::Checkpoint;
use uavsim_core::config::env_overrides;
use uavsim_core::experiment::{
    battery_csv, compare, compare_outputs, convergence_csv, evaluate, event_log_csv, format_summary, summarize,
    summary_csv, train, training_log_csv, violations_csv, ExperimentPlan, OutputSet, PolicySource,
};
use uavsim_core::{Config, PolicyKind};

#[derive(Parser, Debug)]
#[command(name = "uavsim", version, about = "UAV/MEC task-offloading simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true, env = "UAVSIM_CONFIG")]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set sim.num_uavs=2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Master seed (defaults to `sim.seed`).
    #[arg(long, global = true, env = "UAVSIM_SEED")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, env = "UAVSIM_OUT", default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true, env = "UAVSIM_STATE_LAYOUT", value_enum)]
    state_layout: Option<Layout>,

    #[arg(long, global = true, env = "UAVSIM_TARGET_NETWORK", value_enum)]
    target_network: Option<OnOff>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Layout {
    Paper10,
    Extended,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a learning policy and save its checkpoint and reward curve.
    Train {
        /// qlearning or dql.
        #[arg(long, env = "UAVSIM_POLICY")]
        policy: PolicyKind,
        /// Training episodes (defaults to the experiment section).
        #[arg(long, env = "UAVSIM_EPISODES")]
        episodes: Option<usize>,
        /// Also save a checkpoint every N episodes.
        #[arg(long, env = "UAVSIM_CHECKPOINT_EVERY")]
        checkpoint_every: Option<usize>,
    },
    /// Roll out a heuristic or a trained checkpoint greedily over several seeds.
    Evaluate {
        /// Policy to run; taken from the checkpoint when omitted.
        #[arg(long, env = "UAVSIM_POLICY")]
        policy: Option<PolicyKind>,
        /// Checkpoint for qlearning or dql.
        #[arg(long, env = "UAVSIM_CHECKPOINT")]
        checkpoint: Option<PathBuf>,
        /// Number of evaluation seeds.
        #[arg(long, env = "UAVSIM_SEEDS")]
        seeds: Option<usize>,
        /// Episodes per seed.
        #[arg(long, env = "UAVSIM_EPISODES")]
        episodes: Option<usize>,
        /// Write the per-task event log of every evaluation episode.
        #[arg(long)]
        event_log: bool,
    },
    /// Train or load every learner, evaluate all policies and rank them.
    Compare {
        /// Comma-separated policies (defaults to the experiment section).
        #[arg(long, env = "UAVSIM_POLICIES", value_delimiter = ',')]
        policies: Option<Vec<PolicyKind>>,
        /// Number of evaluation seeds.
        #[arg(long, env = "UAVSIM_SEEDS")]
        seeds: Option<usize>,
        /// Training episodes for both learners.
        #[arg(long, env = "UAVSIM_EPISODES")]
        episodes: Option<usize>,
        /// Use a saved learner instead of training, as `policy=path`. Repeatable.
        #[arg(long, value_name = "POLICY=PATH")]
        checkpoint: Vec<String>,
    },
    /// Print what a checkpoint contains.
    InspectCheckpoint {
        path: PathBuf,
        /// Print the full checkpoint text after the summary.
        #[arg(long)]
        dump: bool,
    },
}

fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::InvalidValue, msg).exit()
}

fn load_config(c: &Common) -> Result<Config> {
    let text = match &c.config {
        Some(p) => Some(std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let mut overrides = env_overrides();
    for s in &c.set {
        let Some((k, v)) = s.split_once('=') else {
            usage_error(format!("--set expects KEY=VALUE, got `{s}`"));
        };
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(l) = c.state_layout {
        let v = match l {
            Layout::Paper10 => "paper10",
            Layout::Extended => "extended",
        };
        overrides.push(("mdp.state_layout".into(), v.into()));
    }
    if let Some(t) = c.target_network {
        overrides.push(("rl.target_network".into(), matches!(t, OnOff::On).to_string()));
    }
    let cfg = Config::from_sources(text.as_deref(), &overrides)?;
    Ok(cfg)
}

fn cmd_train(
    cfg: &Config,
    master: u64,
    out: &Path,
    policy: PolicyKind,
    episodes: Option<usize>,
    every: Option<usize>,
) -> Result<()> {
    if !policy.is_learning() {
        usage_error(format!("`train` needs a learning policy (qlearning or dql), not `{policy}`"));
    }
    let episodes = episodes.unwrap_or_else(|| cfg.experiment.train_episodes(policy));
    let every = every.unwrap_or(cfg.experiment.checkpoint_every);
    if every > 0 {
        std::fs::create_dir_all(out)?;
    }
    let outcome = train(cfg, policy, episodes, master, |done, agents| {
        if every > 0 && done % every == 0 && done < episodes {
            let ck = Checkpoint::capture(cfg, agents, done)?;
            ck.save(&out.join(format!("checkpoint_ep{done}.txt")))?;
        }
        Ok(())
    })?;
    let mut files = OutputSet::default();
    files.add("convergence.csv", convergence_csv(cfg, &outcome)?);
    files.add("training_log.csv", training_log_csv(cfg, &outcome)?);
    files.add("checkpoint.txt", outcome.checkpoint(cfg)?.to_text());
    files.write_to(out)?;

    let conv = outcome.convergence(cfg);
    let fmt = |e: Option<usize>| e.map_or("not reached".to_string(), |v| v.to_string());
    println!("trained {policy} for {episodes} episodes (seed {master})");
    println!("final smoothed reward      {:.3}", conv.plateau_level);
    println!("plateau episode            {}", fmt(conv.plateau_episode));
    println!(
        "threshold {} reached at    {}",
        cfg.experiment.convergence_threshold,
        fmt(conv.threshold_episode)
    );
    println!("outputs written to {}", out.display());
    Ok(())
}

fn cmd_evaluate(
    cfg: &Config,
    master: u64,
    out: &Path,
    policy: Option<PolicyKind>,
    checkpoint: Option<&Path>,
    seeds: Option<usize>,
    episodes: Option<usize>,
    event_log: bool,
) -> Result<()> {
    let ck = match checkpoint {
        Some(p) => Some(Checkpoint::load(p)?),
        None => None,
    };
    let source = match (policy, &ck) {
        (Some(p), Some(c)) if p != c.policy => {
            bail!("--policy {p} does not match the checkpoint, which holds {}", c.policy)
        }
        (_, Some(c)) => PolicySource::Trained(c),
        (Some(p), None) if p.is_learning() => {
            bail!("evaluating {p} needs a trained checkpoint: pass --checkpoint <path>")
        }
        (Some(p), None) => PolicySource::Heuristic(p),
        (None, None) => usage_error("`evaluate` needs --policy or --checkpoint"),
    };
    if let Some(c) = &ck {
        if c.config_hash != cfg.hash() {
            eprintln!("note: checkpoint was trained under a different configuration");
        }
    }
    let seeds: Vec<u64> = (0..seeds.unwrap_or(cfg.experiment.seeds) as u64).collect();
    let episodes = episodes.unwrap_or(cfg.experiment.eval_episodes);
    let runs = evaluate(cfg, source, master, &seeds, episodes, event_log)?;
    let summary = summarize(&runs);

    let mut files = OutputSet::default();
    files.add("battery.csv", battery_csv(cfg, master, &runs)?);
    files.add("violations.csv", violations_csv(cfg, master, &runs)?);
    files.add("summary.csv", summary_csv(cfg, master, &summary)?);
    if event_log {
        for r in &runs {
            for (ep, recs) in r.records.iter().enumerate() {
                let name = format!("events_{}_seed{}_ep{}.csv", r.policy, r.seed_index, ep);
                files.add(name, event_log_csv(cfg, master, r.policy, r.seed_index, recs)?);
            }
        }
    }
    files.write_to(out)?;
    print!("{}", format_summary(&summary));
    println!("outputs written to {}", out.display());
    Ok(())
}

fn cmd_compare(
    cfg: &Config,
    master: u64,
    out: &Path,
    policies: Option<Vec<PolicyKind>>,
    seeds: Option<usize>,
    episodes: Option<usize>,
    checkpoints: &[String],
) -> Result<()> {
    let mut plan = ExperimentPlan::from_config(cfg);
    plan.master_seed = master;
    if let Some(p) = policies {
        plan.policies = p;
    }
    if let Some(s) = seeds {
        plan.seeds = (0..s as u64).collect();
    }
    if let Some(e) = episodes {
        plan.train_episodes_qlearning = e;
        plan.train_episodes_dql = e;
    }
    let mut loaded = BTreeMap::new();
    for spec in checkpoints {
        let Some((p, path)) = spec.split_once('=') else {
            usage_error(format!("--checkpoint expects POLICY=PATH, got `{spec}`"));
        };
        let kind: PolicyKind = p.parse()?;
        let ck = Checkpoint::load(Path::new(path))?;
        if ck.policy != kind {
            bail!("{path} holds a {} checkpoint, not {kind}", ck.policy);
        }
        loaded.insert(kind, ck);
    }
    plan.checkpoints = loaded;
    let outcome = compare(cfg, &plan)?;
    compare_outputs(cfg, &plan, &outcome)?.write_to(out)?;
    print!("{}", format_summary(&outcome.summary));
    println!("outputs written to {}", out.display());
    Ok(())
}

fn cmd_inspect(path: &Path, dump: bool) -> Result<()> {
    let ck = Checkpoint::load(path)?;
    print!("{}", ck.describe());
    if dump {
        print!("{}", ck.to_text());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Command::InspectCheckpoint { path, dump } = &cli.command {
        return cmd_inspect(path, *dump);
    }
    let cfg = load_config(&cli.common)?;
    let master = cli.common.seed.unwrap_or(cfg.sim.seed);
    let out = cli.common.out.as_path();
    match cli.command {
        Command::Train {
            policy,
            episodes,
            checkpoint_every,
        } => cmd_train(&cfg, master, out, policy, episodes, checkpoint_every),
        Command::Evaluate {
            policy,
            checkpoint,
            seeds,
            episodes,
            event_log,
        } => cmd_evaluate(&cfg, master, out, policy, checkpoint.as_deref(), seeds, episodes, event_log),
        Command::Compare {
            policies,
            seeds,
            episodes,
            checkpoint,
        } => cmd_compare(&cfg, master, out, policies, seeds, episodes, &checkpoint),
        Command::InspectCheckpoint { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
