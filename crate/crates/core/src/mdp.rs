//! Per-UAV decision process: state encoding, action space and the shaped
//! reward built from decision-time predictions.

use serde::{Deserialize, Serialize};

use crate::sched::NetworkSnapshot;

/// Which observations go into the state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StateLayout {
    /// Task type, unit delays and UAV batteries: `1 + units + uavs` entries.
    #[default]
    Paper10,
    /// `Paper10` followed by the transfer delay to every unit.
    Extended,
}

impl StateLayout {
    pub fn width(self, num_uavs: usize, num_units: usize) -> usize {
        let base = 1 + num_units + num_uavs;
        match self {
            StateLayout::Paper10 => base,
            StateLayout::Extended => base + num_units,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StateLayout::Paper10 => "paper10",
            StateLayout::Extended => "extended",
        }
    }
}

impl std::str::FromStr for StateLayout {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper10" => Ok(StateLayout::Paper10),
            "extended" => Ok(StateLayout::Extended),
            other => Err(format!("unknown state layout `{other}` (expected paper10 or extended)")),
        }
    }
}

/// When the violation term of the reward is settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// Predicted at decision time from the snapshot.
    #[default]
    Decision,
    /// Taken from the realized outcome once the task finishes.
    Deferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// Battery-fraction margin separating the energy tiers.
    pub energy_threshold: f64,
    /// Tier values for: within `e` of the best UAV, `2e` or more behind, in between.
    pub tier_values: [f64; 3],
    /// Violation penalties: MEC would have met the deadline, local UAV would
    /// have, another UAV would have, unavoidable.
    pub penalties: [f64; 4],
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            energy_threshold: 0.001,
            tier_values: [2.0, 0.0, 1.0],
            penalties: [-40.0, -20.0, -10.0, -1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdpConfig {
    pub state_layout: StateLayout,
    pub reward_mode: RewardMode,
    /// Zero the bootstrap term on the last transition of an episode.
    pub terminal_at_episode_end: bool,
    pub reward: RewardConfig,
}

impl Default for MdpConfig {
    fn default() -> Self {
        Self {
            state_layout: StateLayout::Paper10,
            reward_mode: RewardMode::Decision,
            terminal_at_episode_end: true,
            reward: RewardConfig::default(),
        }
    }
}

impl MdpConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.reward.energy_threshold > 0.0) {
            return Err("mdp.reward.energy_threshold must be positive".into());
        }
        Ok(())
    }
}

pub fn encode_state(snapshot: &NetworkSnapshot, layout: StateLayout) -> Vec<f64> {
    let units = snapshot.num_units();
    let mut state = Vec::with_capacity(layout.width(snapshot.num_uavs, units));
    state.push(snapshot.task_type.state_code());
    state.extend_from_slice(&snapshot.delays);
    state.extend(
        snapshot.batteries[..snapshot.num_uavs]
            .iter()
            .map(|b| b.clamp(0.0, 1.0)),
    );
    if layout == StateLayout::Extended {
        state.extend_from_slice(&snapshot.transfer);
    }
    state
}

/// Would this task miss its deadline if placed on `unit`, judging from the
/// snapshot alone.
pub fn counterfactual_violation(snapshot: &NetworkSnapshot, unit: usize) -> bool {
    snapshot.iot_delay + snapshot.transfer[unit] + snapshot.delays[unit] > snapshot.deadline
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyTier {
    /// Within `e` of the best achievable UAV battery.
    Best,
    /// `2e` or more below it.
    Worst,
    Middle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationCase {
    None,
    MecAvoidable,
    LocalAvoidable,
    OtherUavAvoidable,
    Unavoidable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub tier: EnergyTier,
    pub case: ViolationCase,
    pub total: f64,
}

pub fn energy_tier(snapshot: &NetworkSnapshot, action: usize, e: f64) -> EnergyTier {
    let best = snapshot.battery_after[..snapshot.num_uavs]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = snapshot.battery_after[action] - best;
    if gap >= -e {
        EnergyTier::Best
    } else if gap <= -2.0 * e {
        EnergyTier::Worst
    } else {
        EnergyTier::Middle
    }
}

/// Grades a violation at `action` by whether some other placement would
/// have met the deadline.
pub fn violation_case(snapshot: &NetworkSnapshot, action: usize, violated: bool) -> ViolationCase {
    if !violated {
        return ViolationCase::None;
    }
    let local = snapshot.deciding_uav;
    let clean = |u: usize| !counterfactual_violation(snapshot, u);
    if (snapshot.num_uavs..snapshot.num_units()).any(clean) {
        ViolationCase::MecAvoidable
    } else if clean(local) {
        ViolationCase::LocalAvoidable
    } else if (0..snapshot.num_uavs).any(|u| u != local && u != action && clean(u)) {
        ViolationCase::OtherUavAvoidable
    } else {
        ViolationCase::Unavoidable
    }
}

/// Reward for placing the task on `action`, with the violation indicator
/// supplied by the caller (predicted or realized).
pub fn reward_with_violation(
    action: usize,
    snapshot: &NetworkSnapshot,
    violated: bool,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let tier = energy_tier(snapshot, action, cfg.energy_threshold);
    let tier_value = match tier {
        EnergyTier::Best => cfg.tier_values[0],
        EnergyTier::Worst => cfg.tier_values[1],
        EnergyTier::Middle => cfg.tier_values[2],
    };
    let case = violation_case(snapshot, action, violated);
    let penalty = match case {
        ViolationCase::None => 0.0,
        ViolationCase::MecAvoidable => cfg.penalties[0],
        ViolationCase::LocalAvoidable => cfg.penalties[1],
        ViolationCase::OtherUavAvoidable => cfg.penalties[2],
        ViolationCase::Unavoidable => cfg.penalties[3],
    };
    let v = if violated { 1.0 } else { 0.0 };
    RewardBreakdown {
        tier,
        case,
        total: (tier_value - 1.0) + (1.0 - v) + penalty * v,
    }
}

/// Decision-time reward: the violation indicator is the snapshot prediction.
pub fn compute_reward(action: usize, snapshot: &NetworkSnapshot, cfg: &RewardConfig) -> f64 {
    let violated = counterfactual_violation(snapshot, action);
    reward_with_violation(action, snapshot, violated, cfg).total
}
