//! Run configuration, loadable from a sectioned TOML file. Every key is
//! optional; omitted keys take the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::deep::DqlSettings;
use crate::energy::EnergyParams;
use crate::error::{Result, SimError};
use crate::explore::EpsilonSchedule;
use crate::mdp::MdpConfig;
use crate::policy::PolicyKind;
use crate::sched::HeuristicConfig;
use crate::sim::task::{default_task_specs, TaskType, TaskTypeSpec};
use crate::tabular::DiscretizerSpec;

/// How the per-type mean interarrival times are attached to UAVs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalScope {
    /// The mean is for the whole network; each UAV receives an equal share
    /// (per-UAV mean scaled by the number of UAVs).
    #[default]
    Network,
    /// Every UAV receives its own stream at the full rate.
    PerUav,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub num_uavs: usize,
    pub num_mecs: usize,
    /// Simulated seconds per episode.
    pub episode_duration: f64,
    /// Camera to UAV. Not given by the workload table; a modeling default.
    pub iot_to_uav_delay: f64,
    /// UAV to another UAV. Modeling default.
    pub uav_to_uav_delay: f64,
    /// UAV to MEC server. Modeling default.
    pub uav_to_mec_delay: f64,
    pub seed: u64,
    /// Weight of the battery term in the objective, in `[0, 1]`.
    pub objective_weight: f64,
    /// Normalizer for the violation count in the objective. When absent,
    /// the number of tasks generated in the run is used.
    pub violation_scale: Option<f64>,
    pub arrival_scope: ArrivalScope,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_uavs: 4,
            num_mecs: 1,
            episode_duration: 20.0,
            iot_to_uav_delay: 0.010,
            uav_to_uav_delay: 0.015,
            uav_to_mec_delay: 0.020,
            seed: 0,
            objective_weight: 0.5,
            violation_scale: None,
            arrival_scope: ArrivalScope::Network,
        }
    }
}

impl SimConfig {
    pub fn num_units(&self) -> usize {
        self.num_uavs + self.num_mecs
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.num_uavs < 1 {
            return Err("sim.num_uavs must be at least 1".into());
        }
        if !(self.episode_duration >= 0.0 && self.episode_duration.is_finite()) {
            return Err("sim.episode_duration must be a non-negative number".into());
        }
        for (k, v) in [
            ("iot_to_uav_delay", self.iot_to_uav_delay),
            ("uav_to_uav_delay", self.uav_to_uav_delay),
            ("uav_to_mec_delay", self.uav_to_mec_delay),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("sim.{k} must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.objective_weight) {
            return Err("sim.objective_weight must lie in [0, 1]".into());
        }
        if let Some(theta) = self.violation_scale {
            if !(theta > 0.0) {
                return Err("sim.violation_scale must be positive".into());
            }
        }
        Ok(())
    }

    /// Transfer delay from `from_uav` to `unit`.
    pub fn transfer_delay(&self, from_uav: usize, unit: usize) -> f64 {
        if unit == from_uav {
            0.0
        } else if unit >= self.num_uavs {
            self.uav_to_mec_delay
        } else {
            self.uav_to_uav_delay
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlConfig {
    /// Tabular learning rate.
    pub alpha: f64,
    pub gamma: f64,
    pub delay_bins: usize,
    /// First geometric delay edge, seconds.
    pub delay_bin_min: f64,
    pub battery_bins: usize,
    pub adam_learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub hidden_layers: Vec<usize>,
    pub target_network: bool,
    pub target_sync_steps: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the training episodes over which epsilon decays.
    pub epsilon_decay_fraction: f64,
    /// Absolute decay length; overrides the fraction when set.
    pub epsilon_decay_episodes: Option<usize>,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            gamma: 0.85,
            delay_bins: 8,
            delay_bin_min: 0.125,
            battery_bins: 10,
            adam_learning_rate: 0.001,
            batch_size: 500,
            replay_capacity: 100_000,
            hidden_layers: vec![32, 32],
            target_network: false,
            target_sync_steps: 200,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.8,
            epsilon_decay_episodes: None,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.gamma) {
            return Err("rl.alpha and rl.gamma must lie in [0, 1]".into());
        }
        if self.delay_bins == 0 || self.battery_bins == 0 || !(self.delay_bin_min > 0.0) {
            return Err("rl: bins must be positive".into());
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err("rl: need 0 < batch_size <= replay_capacity".into());
        }
        if self.hidden_layers.contains(&0) {
            return Err("rl.hidden_layers entries must be positive".into());
        }
        for (k, v) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("rl.{k} must lie in [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return Err("rl.epsilon_decay_fraction must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn epsilon_schedule(&self, training_episodes: usize) -> EpsilonSchedule {
        let decay = self.epsilon_decay_episodes.unwrap_or_else(|| {
            (training_episodes as f64 * self.epsilon_decay_fraction).round() as usize
        });
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_episodes: decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub policies: Vec<PolicyKind>,
    /// Evaluation seeds per policy.
    pub seeds: usize,
    pub train_episodes_qlearning: usize,
    pub train_episodes_dql: usize,
    /// Episodes per evaluation seed.
    pub eval_episodes: usize,
    pub smoothing_window: usize,
    pub convergence_threshold: f64,
    pub convergence_patience: usize,
    /// Write an intermediate checkpoint every this many episodes (0 = never).
    pub checkpoint_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            policies: PolicyKind::ALL.to_vec(),
            seeds: 10,
            train_episodes_qlearning: 1200,
            train_episodes_dql: 100,
            eval_episodes: 1,
            smoothing_window: 100,
            convergence_threshold: 100.0,
            convergence_patience: 10,
            checkpoint_every: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.policies.is_empty() || self.seeds == 0 {
            return Err("experiment: need at least one policy and one seed".into());
        }
        if self.eval_episodes == 0 || self.smoothing_window == 0 || self.convergence_patience == 0 {
            return Err("experiment: eval_episodes, smoothing_window and convergence_patience must be positive".into());
        }
        Ok(())
    }

    pub fn train_episodes(&self, kind: PolicyKind) -> usize {
        match kind {
            PolicyKind::Dql => self.train_episodes_dql,
            _ => self.train_episodes_qlearning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub sim: SimConfig,
    pub energy: EnergyParams,
    pub tasks: Vec<TaskTypeSpec>,
    pub mdp: MdpConfig,
    pub rl: RlConfig,
    pub heuristics: HeuristicConfig,
    pub experiment: ExperimentConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            energy: EnergyParams::default(),
            tasks: default_task_specs(),
            mdp: MdpConfig::default(),
            rl: RlConfig::default(),
            heuristics: HeuristicConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

/// Environment variables named `UAVSIM__<SECTION>__<KEY>` override config
/// keys, e.g. `UAVSIM__SIM__NUM_UAVS=2`. Array entries use their index:
/// `UAVSIM__TASKS__1__DEADLINE=0.9`.
pub const ENV_OVERRIDE_PREFIX: &str = "UAVSIM__";

/// `(dotted.key, raw value)` pairs taken from the environment, sorted by key.
pub fn env_overrides() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::env::vars()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_OVERRIDE_PREFIX)?;
            Some((rest.split("__").collect::<Vec<_>>().join(".").to_lowercase(), v))
        })
        .collect();
    out.sort();
    out
}

fn override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(root: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let bad = |m: &str| SimError::Config(format!("override `{key}`: {m}"));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.len() < 2 || parts.iter().any(|p| p.is_empty()) {
        return Err(bad("expected section.key"));
    }
    if parts[0] == "tasks" && !root.contains_key("tasks") {
        let defaults = toml::Table::try_from(Config::default()).expect("config is serializable");
        root.insert("tasks".into(), defaults["tasks"].clone());
    }
    let mut cur = root
        .entry(parts[0])
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    for p in &parts[1..] {
        cur = match cur {
            toml::Value::Table(t) => t
                .entry(*p)
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
            toml::Value::Array(a) => {
                let i: usize = p.parse().map_err(|_| bad("array entries need a numeric index"))?;
                a.get_mut(i).ok_or_else(|| bad("index out of range"))?
            }
            _ => return Err(bad("path goes through a plain value")),
        };
    }
    *cur = override_value(raw);
    Ok(())
}

impl Config {
    /// Parses an optional TOML document and then applies `section.key=value`
    /// overrides in order.
    pub fn from_sources(text: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut root: toml::Table = match text {
            Some(t) => toml::from_str(t)?,
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            apply_override(&mut root, k, v)?;
        }
        let cfg: Config = root.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            self.sim.validate(),
            self.energy.validate(),
            self.mdp.validate(),
            self.rl.validate(),
            self.experiment.validate(),
        ];
        for c in checks {
            c.map_err(SimError::Config)?;
        }
        if self.tasks.is_empty() {
            return Err(SimError::Config("at least one task type is required".into()));
        }
        let mut seen = Vec::new();
        for t in &self.tasks {
            t.validate().map_err(SimError::Config)?;
            if seen.contains(&t.type_id) {
                return Err(SimError::Config(format!("task type `{}` listed twice", t.type_id)));
            }
            seen.push(t.type_id);
        }
        Ok(())
    }

    pub fn task_spec(&self, ty: TaskType) -> &TaskTypeSpec {
        self.tasks
            .iter()
            .find(|t| t.type_id == ty)
            .expect("task type configured")
    }

    pub fn max_deadline(&self) -> f64 {
        self.tasks.iter().map(|t| t.deadline).fold(0.0, f64::max)
    }

    /// Hex SHA-256 of the canonical serialization.
    /// Bin layout for tabular agents. Delays saturate at twice the longest deadline.
    pub fn discretizer_spec(&self) -> DiscretizerSpec {
        DiscretizerSpec {
            delay_bins: self.rl.delay_bins,
            delay_bin_min: self.rl.delay_bin_min,
            delay_max: (2.0 * self.max_deadline()).max(self.rl.delay_bin_min),
            battery_bins: self.rl.battery_bins,
        }
    }

    pub fn dql_settings(&self) -> DqlSettings {
        DqlSettings {
            gamma: self.rl.gamma,
            learning_rate: self.rl.adam_learning_rate,
            batch_size: self.rl.batch_size,
            replay_capacity: self.rl.replay_capacity,
            target_sync_steps: self.rl.target_network.then_some(self.rl.target_sync_steps),
        }
    }

    /// Layer widths: state, hidden layers, one output per unit.
    pub fn network_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.mdp.state_layout.width(self.sim.num_uavs, self.sim.num_units())];
        sizes.extend(&self.rl.hidden_layers);
        sizes.push(self.sim.num_units());
        sizes
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
