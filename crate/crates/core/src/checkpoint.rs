//! Plain-text checkpoints for trained agents.
//!
//! ```text
//! uavsim-checkpoint 1
//! policy qlearning
//! config_sha256 <hex>
//! num_uavs 4
//! num_units 5
//! state_layout paper10
//! episodes 1200
//! discretizer 8 0.125 10 10
//! agent 0
//! <q-table dump or network text>
//! ...
//! end
//! ```
//!
//! The `discretizer` line is only present for tabular agents.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::Config;
use crate::deep::{DqlAgent, MlpNetwork};
use crate::error::{Result, SimError};
use crate::mdp::StateLayout;
use crate::policy::{AgentModel, Policy, PolicyKind};
use crate::tabular::{DiscretizerSpec, QLearningAgent, QTable};

const MAGIC: &str = "uavsim-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: PolicyKind,
    pub config_hash: String,
    pub num_uavs: usize,
    pub num_units: usize,
    pub state_layout: StateLayout,
    pub episodes: usize,
    pub discretizer: Option<DiscretizerSpec>,
    pub models: Vec<AgentModel>,
}

fn bad(msg: impl Into<String>) -> SimError {
    SimError::Checkpoint(msg.into())
}

impl Checkpoint {
    /// Captures the learned state of a set of agents.
    pub fn capture(cfg: &Config, policies: &[Box<dyn Policy>], episodes: usize) -> Result<Self> {
        let policy = policies
            .first()
            .map(|p| p.kind())
            .ok_or_else(|| bad("no agents to capture"))?;
        if !policy.is_learning() {
            return Err(bad(format!("{policy} has no learned state")));
        }
        let models = policies
            .iter()
            .map(|p| p.model().ok_or_else(|| bad("agent without a model")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            policy,
            config_hash: cfg.hash(),
            num_uavs: cfg.sim.num_uavs,
            num_units: cfg.sim.num_units(),
            state_layout: cfg.mdp.state_layout,
            episodes,
            discretizer: (policy == PolicyKind::QLearning).then(|| cfg.discretizer_spec()),
            models,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "policy {}", self.policy);
        let _ = writeln!(out, "config_sha256 {}", self.config_hash);
        let _ = writeln!(out, "num_uavs {}", self.num_uavs);
        let _ = writeln!(out, "num_units {}", self.num_units);
        let _ = writeln!(out, "state_layout {}", self.state_layout.name());
        let _ = writeln!(out, "episodes {}", self.episodes);
        if let Some(d) = &self.discretizer {
            let _ = writeln!(
                out,
                "discretizer {} {} {} {}",
                d.delay_bins, d.delay_bin_min, d.delay_max, d.battery_bins
            );
        }
        for (i, m) in self.models.iter().enumerate() {
            let _ = writeln!(out, "agent {i}");
            match m {
                AgentModel::Table(t) => out.push_str(&t.dump()),
                AgentModel::Network(n) => out.push_str(&n.to_text()),
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let mut pos = 0;
        fn take<'a>(lines: &[&'a str], pos: &mut usize, what: &str) -> Result<&'a str> {
            let l = lines.get(*pos).ok_or_else(|| bad(format!("truncated before {what}")))?;
            *pos += 1;
            Ok(l)
        }
        if take(&lines, &mut pos, "header")? != MAGIC {
            return Err(bad("not a uavsim checkpoint"));
        }
        fn field<'a>(line: &'a str, name: &str) -> Result<&'a str> {
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| bad(format!("expected `{name}`, found `{line}`")))
        }
        let num = |s: &str, name: &str| s.parse::<usize>().map_err(|_| bad(format!("bad {name}")));

        let policy: PolicyKind = field(take(&lines, &mut pos, "policy")?, "policy")?
            .parse()
            .map_err(|_| bad("unknown policy"))?;
        if !policy.is_learning() {
            return Err(bad(format!("{policy} checkpoints are not supported")));
        }
        let config_hash = field(take(&lines, &mut pos, "config")?, "config_sha256")?.to_string();
        let num_uavs = num(field(take(&lines, &mut pos, "num_uavs")?, "num_uavs")?, "num_uavs")?;
        let num_units = num(field(take(&lines, &mut pos, "num_units")?, "num_units")?, "num_units")?;
        let state_layout: StateLayout = field(take(&lines, &mut pos, "layout")?, "state_layout")?
            .parse()
            .map_err(|_| bad("bad state_layout"))?;
        let episodes = num(field(take(&lines, &mut pos, "episodes")?, "episodes")?, "episodes")?;
        let discretizer = if policy == PolicyKind::QLearning {
            let f: Vec<&str> = field(take(&lines, &mut pos, "discretizer")?, "discretizer")?.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad("discretizer needs 4 values"));
            }
            let float = |s: &str| s.parse::<f64>().map_err(|_| bad("bad discretizer value"));
            Some(DiscretizerSpec {
                delay_bins: num(f[0], "delay_bins")?,
                delay_bin_min: float(f[1])?,
                delay_max: float(f[2])?,
                battery_bins: num(f[3], "battery_bins")?,
            })
        } else {
            None
        };

        let mut models = Vec::with_capacity(num_uavs);
        for i in 0..num_uavs {
            let l = take(&lines, &mut pos, "agent")?;
            if l != format!("agent {i}") {
                return Err(bad(format!("expected `agent {i}`, found `{l}`")));
            }
            let rest = lines[pos..].join("\n");
            let (model, used) = match policy {
                PolicyKind::QLearning => {
                    let (t, used) = QTable::load(&rest)?;
                    if t.num_actions() != num_units {
                        return Err(bad(format!("agent {i}: table has {} actions", t.num_actions())));
                    }
                    (AgentModel::Table(t), used)
                }
                _ => {
                    let (n, used) = MlpNetwork::from_text(&rest)?;
                    if n.output_width() != num_units
                        || n.input_width() != state_layout.width(num_uavs, num_units)
                    {
                        return Err(bad(format!("agent {i}: network dims {:?} do not fit", n.sizes())));
                    }
                    (AgentModel::Network(n), used)
                }
            };
            pos += used;
            models.push(model);
        }
        if lines.get(pos).copied() != Some("end") {
            return Err(bad("missing `end`"));
        }
        Ok(Self {
            policy,
            config_hash,
            num_uavs,
            num_units,
            state_layout,
            episodes,
            discretizer,
            models,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Rebuilds evaluation-ready agents (learning off, greedy). The network
    /// shape must match `cfg`; a different config hash is allowed.
    pub fn policies(&self, cfg: &Config) -> Result<Vec<Box<dyn Policy>>> {
        if self.num_uavs != cfg.sim.num_uavs || self.num_units != cfg.sim.num_units() {
            return Err(bad(format!(
                "checkpoint is for {} UAVs / {} units, config has {} / {}",
                self.num_uavs,
                self.num_units,
                cfg.sim.num_uavs,
                cfg.sim.num_units()
            )));
        }
        if self.policy == PolicyKind::Dql && self.state_layout != cfg.mdp.state_layout {
            return Err(bad(format!(
                "checkpoint uses state layout {}, config asks for {}",
                self.state_layout.name(),
                cfg.mdp.state_layout.name()
            )));
        }
        let mut out: Vec<Box<dyn Policy>> = Vec::with_capacity(self.models.len());
        for m in &self.models {
            let mut p: Box<dyn Policy> = match m {
                AgentModel::Table(t) => {
                    let spec = self.discretizer.ok_or_else(|| bad("missing discretizer"))?;
                    Box::new(QLearningAgent::new(t.clone(), spec.build(self.num_uavs, self.num_units)))
                }
                AgentModel::Network(n) => Box::new(DqlAgent::new(n.clone(), cfg.dql_settings(), 0)),
            };
            p.set_learning(false);
            p.set_epsilon(0.0);
            out.push(p);
        }
        Ok(out)
    }

    /// Human-readable summary.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "policy        {}", self.policy);
        let _ = writeln!(out, "config_sha256 {}", self.config_hash);
        let _ = writeln!(out, "uavs          {}", self.num_uavs);
        let _ = writeln!(out, "units         {}", self.num_units);
        let _ = writeln!(out, "state_layout  {}", self.state_layout.name());
        let _ = writeln!(out, "episodes      {}", self.episodes);
        if let Some(d) = &self.discretizer {
            let _ = writeln!(
                out,
                "discretizer   delay_bins={} delay_bin_min={} delay_max={} battery_bins={}",
                d.delay_bins, d.delay_bin_min, d.delay_max, d.battery_bins
            );
        }
        for (i, m) in self.models.iter().enumerate() {
            match m {
                AgentModel::Table(t) => {
                    let _ = writeln!(out, "agent {i}: q-table with {} visited states", t.len());
                }
                AgentModel::Network(n) => {
                    let _ = writeln!(
                        out,
                        "agent {i}: network dims {:?}, {} parameters",
                        n.sizes(),
                        n.params().len()
                    );
                }
            }
        }
        out
    }
}
