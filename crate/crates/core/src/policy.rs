//! The interface the simulator uses to ask a UAV where a task should run.

use serde::{Deserialize, Serialize};

use crate::deep::MlpNetwork;
use crate::error::SimError;
use crate::rng::SimRng;
use crate::sched::{hef_select, qhef_select, HeuristicConfig, NetworkSnapshot, RoundRobin};
use crate::tabular::QTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Rr,
    Hef,
    Qhef,
    #[serde(rename = "qlearning")]
    QLearning,
    Dql,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Rr,
        PolicyKind::Hef,
        PolicyKind::Qhef,
        PolicyKind::QLearning,
        PolicyKind::Dql,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Rr => "rr",
            PolicyKind::Hef => "hef",
            PolicyKind::Qhef => "qhef",
            PolicyKind::QLearning => "qlearning",
            PolicyKind::Dql => "dql",
        }
    }

    pub fn is_learning(self) -> bool {
        matches!(self, PolicyKind::QLearning | PolicyKind::Dql)
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                SimError::Usage(format!(
                    "unknown policy `{s}` (expected rr, hef, qhef, qlearning or dql)"
                ))
            })
    }
}

/// One experience tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Everything a policy sees for one decision.
#[derive(Debug, Clone, Copy)]
pub struct Decision<'a> {
    pub snapshot: &'a NetworkSnapshot,
    pub state: &'a [f64],
}

pub trait Policy: Send {
    fn kind(&self) -> PolicyKind;

    /// Returns a processing-unit index.
    fn select(&mut self, decision: &Decision<'_>, rng: &mut SimRng) -> usize;

    /// Completed experience for this agent's previous decision.
    fn observe(&mut self, _transition: Transition) {}

    fn set_epsilon(&mut self, _epsilon: f64) {}

    /// Learners stop updating when switched off.
    fn set_learning(&mut self, _learning: bool) {}

    /// Learned parameters, for checkpointing. Heuristics have none.
    fn model(&self) -> Option<AgentModel> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentModel {
    Table(QTable),
    Network(MlpNetwork),
}

#[derive(Debug, Clone, Default)]
pub struct RoundRobinPolicy(RoundRobin);

impl Policy for RoundRobinPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Rr
    }

    fn select(&mut self, d: &Decision<'_>, _rng: &mut SimRng) -> usize {
        self.0.select(d.snapshot)
    }
}

#[derive(Debug, Clone)]
pub struct HefPolicy {
    pub threshold: f64,
}

impl Policy for HefPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Hef
    }

    fn select(&mut self, d: &Decision<'_>, rng: &mut SimRng) -> usize {
        hef_select(d.snapshot, rng, self.threshold)
    }
}

#[derive(Debug, Clone)]
pub struct QhefPolicy {
    pub threshold: f64,
}

impl Policy for QhefPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Qhef
    }

    fn select(&mut self, d: &Decision<'_>, _rng: &mut SimRng) -> usize {
        qhef_select(d.snapshot, self.threshold)
    }
}

/// Builds one fresh heuristic policy per UAV.
pub fn heuristic_policies(
    kind: PolicyKind,
    num_uavs: usize,
    cfg: &HeuristicConfig,
) -> Result<Vec<Box<dyn Policy>>, SimError> {
    (0..num_uavs)
        .map(|_| -> Result<Box<dyn Policy>, SimError> {
            Ok(match kind {
                PolicyKind::Rr => Box::new(RoundRobinPolicy::default()),
                PolicyKind::Hef => Box::new(HefPolicy {
                    threshold: cfg.hef_threshold,
                }),
                PolicyKind::Qhef => Box::new(QhefPolicy {
                    threshold: cfg.qhef_threshold,
                }),
                other => {
                    return Err(SimError::Usage(format!("`{other}` is not a heuristic policy")))
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("greedy".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn learners_are_not_heuristics() {
        assert!(heuristic_policies(PolicyKind::Dql, 2, &HeuristicConfig::default()).is_err());
        assert_eq!(
            heuristic_policies(PolicyKind::Hef, 3, &HeuristicConfig::default())
                .unwrap()
                .len(),
            3
        );
    }
}
