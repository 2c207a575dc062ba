//! Tabular Q-Learning over a discretized state.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Result, SimError};
use crate::explore::{argmax, epsilon_greedy};
use crate::policy::{AgentModel, Decision, Policy, PolicyKind, Transition};
use crate::rng::SimRng;

pub type StateKey = Vec<u16>;

/// Maps the continuous base-layout state onto table cells.
///
/// Delays fall into geometric bins whose edges run from `delay_bin_min` to
/// `delay_max`; anything below the first edge shares bin 0 and anything past
/// the last edge the top bin. Battery fractions use uniform bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    delay_edges: Vec<f64>,
    battery_bins: usize,
    num_uavs: usize,
    num_units: usize,
}

impl Discretizer {
    pub fn new(
        delay_bins: usize,
        delay_bin_min: f64,
        delay_max: f64,
        battery_bins: usize,
        num_uavs: usize,
        num_units: usize,
    ) -> Self {
        assert!(delay_bins >= 1 && battery_bins >= 1);
        assert!(delay_bin_min > 0.0 && delay_max >= delay_bin_min);
        let n_edges = delay_bins - 1;
        let delay_edges = (0..n_edges)
            .map(|k| {
                if n_edges == 1 {
                    delay_bin_min
                } else {
                    let f = k as f64 / (n_edges - 1) as f64;
                    delay_bin_min * (delay_max / delay_bin_min).powf(f)
                }
            })
            .collect();
        Self {
            delay_edges,
            battery_bins,
            num_uavs,
            num_units,
        }
    }

    pub fn delay_edges(&self) -> &[f64] {
        &self.delay_edges
    }

    pub fn battery_bins(&self) -> usize {
        self.battery_bins
    }

    pub fn delay_bin(&self, delay: f64) -> u16 {
        self.delay_edges.iter().take_while(|&&e| delay >= e).count() as u16
    }

    pub fn battery_bin(&self, fraction: f64) -> u16 {
        let b = (fraction.clamp(0.0, 1.0) * self.battery_bins as f64) as usize;
        b.min(self.battery_bins - 1) as u16
    }

    /// Key for a state vector; entries past the base layout are ignored.
    pub fn key(&self, state: &[f64]) -> StateKey {
        let mut key = Vec::with_capacity(1 + self.num_units + self.num_uavs);
        key.push((state[0] * 2.0).round() as u16);
        for &d in &state[1..1 + self.num_units] {
            key.push(self.delay_bin(d));
        }
        let b0 = 1 + self.num_units;
        for &b in &state[b0..b0 + self.num_uavs] {
            key.push(self.battery_bin(b));
        }
        key
    }
}

/// Binning parameters, kept separately so they can be stored in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizerSpec {
    pub delay_bins: usize,
    pub delay_bin_min: f64,
    pub delay_max: f64,
    pub battery_bins: usize,
}

impl DiscretizerSpec {
    pub fn build(&self, num_uavs: usize, num_units: usize) -> Discretizer {
        Discretizer::new(
            self.delay_bins,
            self.delay_bin_min,
            self.delay_max,
            self.battery_bins,
            num_uavs,
            num_units,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: HashMap<StateKey, Vec<f64>>,
    num_actions: usize,
    pub alpha: f64,
    pub gamma: f64,
}

impl QTable {
    pub fn new(num_actions: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            values: HashMap::new(),
            num_actions,
            alpha,
            gamma,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Q-values for a key; unseen keys read as zeros.
    pub fn row(&self, key: &StateKey) -> std::borrow::Cow<'_, [f64]> {
        match self.values.get(key) {
            Some(v) => std::borrow::Cow::Borrowed(v),
            None => std::borrow::Cow::Owned(vec![0.0; self.num_actions]),
        }
    }

    fn max_q(&self, key: &StateKey) -> f64 {
        self.values
            .get(key)
            .map_or(0.0, |v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// One-step Q-Learning update; `next` is `None` for a terminal transition.
    pub fn update(&mut self, key: &StateKey, action: usize, reward: f64, next: Option<&StateKey>) {
        assert!(action < self.num_actions, "action out of range");
        let future = next.map_or(0.0, |k| self.max_q(k));
        let target = reward + self.gamma * future;
        let (alpha, n) = (self.alpha, self.num_actions);
        let row = self.values.entry(key.clone()).or_insert_with(|| vec![0.0; n]);
        row[action] += alpha * (target - row[action]);
    }

    /// Sorted text dump: a header line, then `key : values` per state.
    pub fn dump(&self) -> String {
        let mut keys: Vec<&StateKey> = self.values.keys().collect();
        keys.sort();
        let mut out = format!(
            "qtable actions={} alpha={} gamma={} states={}\n",
            self.num_actions,
            self.alpha,
            self.gamma,
            keys.len()
        );
        for k in keys {
            let ks: Vec<String> = k.iter().map(|x| x.to_string()).collect();
            let vs: Vec<String> = self.values[k].iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "{} : {}", ks.join(" "), vs.join(" "));
        }
        out
    }

    /// Parses the output of [`QTable::dump`]. Returns the table and the
    /// number of lines consumed.
    pub fn load(text: &str) -> Result<(Self, usize)> {
        let bad = |m: &str| SimError::Checkpoint(format!("qtable: {m}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("qtable") {
            return Err(bad("missing header"));
        }
        let mut get = |name: &str| -> Result<String> {
            let f = fields.next().ok_or_else(|| bad("short header"))?;
            f.strip_prefix(&format!("{name}="))
                .map(str::to_string)
                .ok_or_else(|| bad(&format!("expected {name}=")))
        };
        let num_actions: usize = get("actions")?.parse().map_err(|_| bad("actions"))?;
        let alpha: f64 = get("alpha")?.parse().map_err(|_| bad("alpha"))?;
        let gamma: f64 = get("gamma")?.parse().map_err(|_| bad("gamma"))?;
        let states: usize = get("states")?.parse().map_err(|_| bad("states"))?;
        let mut table = QTable::new(num_actions, alpha, gamma);
        for _ in 0..states {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let (k, v) = line.split_once(" : ").ok_or_else(|| bad("missing separator"))?;
            let key = k
                .split_whitespace()
                .map(|x| x.parse::<u16>())
                .collect::<std::result::Result<StateKey, _>>()
                .map_err(|_| bad("key"))?;
            let vals = v
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| bad("values"))?;
            if vals.len() != num_actions {
                return Err(bad("wrong number of values"));
            }
            table.values.insert(key, vals);
        }
        Ok((table, states + 1))
    }
}

/// Q-Learning agent for one UAV.
#[derive(Debug, Clone)]
pub struct QLearningAgent {
    pub table: QTable,
    pub discretizer: Discretizer,
    epsilon: f64,
    learning: bool,
}

impl QLearningAgent {
    pub fn new(table: QTable, discretizer: Discretizer) -> Self {
        Self {
            table,
            discretizer,
            epsilon: 0.0,
            learning: true,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Policy for QLearningAgent {
    fn kind(&self) -> PolicyKind {
        PolicyKind::QLearning
    }

    fn select(&mut self, d: &Decision<'_>, rng: &mut SimRng) -> usize {
        let key = self.discretizer.key(d.state);
        epsilon_greedy(&self.table.row(&key), self.epsilon, rng)
    }

    fn observe(&mut self, t: Transition) {
        if !self.learning {
            return;
        }
        let key = self.discretizer.key(&t.state);
        let next = (!t.terminal).then(|| self.discretizer.key(&t.next_state));
        self.table.update(&key, t.action, t.reward, next.as_ref());
    }

    fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
    }

    fn set_learning(&mut self, learning: bool) {
        self.learning = learning;
    }

    fn model(&self) -> Option<AgentModel> {
        Some(AgentModel::Table(self.table.clone()))
    }
}

/// Greedy action of a table for a state (exploration off).
pub fn greedy_action(table: &QTable, key: &StateKey) -> usize {
    argmax(&table.row(key))
}
