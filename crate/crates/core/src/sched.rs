//! Non-learning placement baselines and the network view they decide on.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sim::task::TaskType;

/// What a UAV knows about the network when a task reaches it. Indexed by
/// processing unit: UAVs first, then MEC servers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub deciding_uav: usize,
    pub task_type: TaskType,
    pub num_uavs: usize,
    /// Predicted queueing plus processing delay of this task at each unit.
    pub delays: Vec<f64>,
    /// Battery fraction per unit (unclamped); `+inf` for MEC servers.
    pub batteries: Vec<f64>,
    /// Battery fraction per unit if it processed this task; `+inf` for MEC.
    pub battery_after: Vec<f64>,
    /// Transfer delay from the deciding UAV; zero for itself.
    pub transfer: Vec<f64>,
    pub iot_delay: f64,
    /// Relative deadline of this task type.
    pub deadline: f64,
}

impl NetworkSnapshot {
    pub fn num_units(&self) -> usize {
        self.delays.len()
    }

    pub fn num_mecs(&self) -> usize {
        self.num_units() - self.num_uavs
    }

    pub fn is_mec(&self, unit: usize) -> bool {
        unit >= self.num_uavs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeuristicConfig {
    /// Battery-fraction margin a remote UAV must exceed before HEF offloads to it.
    pub hef_threshold: f64,
    /// Same margin for QHEF.
    pub qhef_threshold: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            hef_threshold: 0.01,
            qhef_threshold: 0.01,
        }
    }
}

/// Cycles through all processing units in index order.
#[derive(Debug, Clone, Default)]
pub struct RoundRobin {
    counter: usize,
}

impl RoundRobin {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn counter(&self) -> usize {
        self.counter
    }

    pub fn select(&mut self, snapshot: &NetworkSnapshot) -> usize {
        let units = snapshot.num_units();
        let unit = self.counter % units;
        self.counter = (unit + 1) % units;
        unit
    }
}

fn best_uav(snapshot: &NetworkSnapshot) -> usize {
    let mut best = 0;
    for j in 1..snapshot.num_uavs {
        if snapshot.batteries[j] > snapshot.batteries[best] {
            best = j;
        }
    }
    best
}

/// Highest Energy First with an explicit uniform draw `roll` in `[0, 1)`.
/// Each MEC server takes the task with probability `1 / units`; otherwise the
/// task goes to the fullest UAV if it leads the local battery by more than
/// `threshold`, else stays local.
pub fn hef_select_with_roll(snapshot: &NetworkSnapshot, roll: f64, threshold: f64) -> usize {
    let units = snapshot.num_units();
    let mec_share = snapshot.num_mecs() as f64 / units as f64;
    if roll < mec_share {
        let k = ((roll * units as f64) as usize).min(snapshot.num_mecs() - 1);
        return snapshot.num_uavs + k;
    }
    let local = snapshot.deciding_uav;
    let best = best_uav(snapshot);
    if snapshot.batteries[best] - snapshot.batteries[local] > threshold {
        best
    } else {
        local
    }
}

pub fn hef_select<R: Rng + ?Sized>(snapshot: &NetworkSnapshot, rng: &mut R, threshold: f64) -> usize {
    let roll: f64 = rng.random();
    hef_select_with_roll(snapshot, roll, threshold)
}

/// Tolerance for "attains the minimum queue time".
pub const QUEUE_TIE_TOLERANCE: f64 = 1e-12;

/// Lowest Queue time and Highest Energy First.
pub fn qhef_select(snapshot: &NetworkSnapshot, threshold: f64) -> usize {
    let local = snapshot.deciding_uav;
    let min_delay = snapshot
        .delays
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut pick: Option<usize> = None;
    for (u, &d) in snapshot.delays.iter().enumerate() {
        if d <= min_delay + QUEUE_TIE_TOLERANCE
            && pick.is_none_or(|p| snapshot.batteries[u] > snapshot.batteries[p])
        {
            pick = Some(u);
        }
    }
    let pick = pick.unwrap_or(local);
    if pick != local && snapshot.batteries[pick] - snapshot.batteries[local] > threshold {
        pick
    } else {
        local
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn snapshot(deciding: usize, delays: &[f64], uav_batt: &[f64]) -> NetworkSnapshot {
        let num_uavs = uav_batt.len();
        let mut batteries = uav_batt.to_vec();
        batteries.resize(delays.len(), f64::INFINITY);
        NetworkSnapshot {
            deciding_uav: deciding,
            task_type: TaskType::FireDetection,
            num_uavs,
            delays: delays.to_vec(),
            battery_after: batteries.clone(),
            batteries,
            transfer: vec![0.0; delays.len()],
            iot_delay: 0.01,
            deadline: 0.3,
        }
    }

    #[test]
    fn rr_cycles_units() {
        let s = snapshot(2, &[0.1; 5], &[1.0; 4]);
        let mut rr = RoundRobin::new();
        assert_eq!(rr.select(&s), 0);
        assert_eq!(rr.counter(), 1);
        let mut seen: Vec<usize> = (0..4).map(|_| rr.select(&s)).collect();
        seen.push(0);
        assert_eq!(seen, vec![1, 2, 3, 4, 0]);
        assert_eq!(rr.select(&s), 0, "sixth call repeats the first");
    }

    #[test]
    fn hef_equal_batteries_stays_local() {
        let s = snapshot(1, &[0.1; 5], &[0.9; 4]);
        assert_eq!(hef_select_with_roll(&s, 0.5, 0.01), 1);
    }

    #[test]
    fn hef_moves_to_fuller_uav() {
        let s = snapshot(0, &[0.1; 5], &[0.80, 0.82, 0.79, 0.81]);
        assert_eq!(hef_select_with_roll(&s, 0.9, 0.01), 1);
        let close = snapshot(0, &[0.1; 5], &[0.80, 0.805, 0.79, 0.808]);
        assert_eq!(hef_select_with_roll(&close, 0.9, 0.01), 0);
    }

    #[test]
    fn hef_mec_branch() {
        let s = snapshot(0, &[0.1; 5], &[0.8, 0.9, 0.9, 0.9]);
        assert_eq!(hef_select_with_roll(&s, 0.0, 0.01), 4);
        assert_eq!(hef_select_with_roll(&s, 0.1999, 0.01), 4);
        assert_eq!(hef_select_with_roll(&s, 0.2, 0.01), 1);
    }

    #[test]
    fn hef_mec_frequency() {
        let s = snapshot(0, &[0.1; 5], &[0.9; 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 50_000;
        let hits = (0..n).filter(|_| hef_select(&s, &mut rng, 0.01) == 4).count();
        assert!((hits as f64 / n as f64 - 0.2).abs() < 0.01);
    }

    #[test]
    fn qhef_prefers_idle_mec() {
        let s = snapshot(0, &[0.3, 0.3, 0.3, 0.3, 0.05], &[0.9; 4]);
        assert_eq!(qhef_select(&s, 0.01), 4);
    }

    #[test]
    fn qhef_all_equal_is_local() {
        let s = snapshot(3, &[0.1; 4], &[0.9; 4]);
        assert_eq!(qhef_select(&s, 0.01), 3);
    }

    #[test]
    fn qhef_local_minimum_is_local() {
        let s = snapshot(2, &[0.5, 0.5, 0.1, 0.5, 0.4], &[1.0, 1.0, 0.1, 1.0]);
        assert_eq!(qhef_select(&s, 0.01), 2);
    }

    fn arb_snapshot() -> impl Strategy<Value = NetworkSnapshot> {
        (1usize..6, 0usize..3).prop_flat_map(|(uavs, mecs)| {
            let units = uavs + mecs;
            (
                0..uavs,
                proptest::collection::vec(0.0f64..3.0, units),
                proptest::collection::vec(0.0f64..1.0, uavs),
            )
                .prop_map(move |(d, delays, batt)| snapshot(d, &delays, &batt))
        })
    }

    proptest! {
        #[test]
        fn selectors_total_and_energy_safe(s in arb_snapshot(), roll in 0.0f64..1.0) {
            let h = hef_select_with_roll(&s, roll, 0.01);
            let q = qhef_select(&s, 0.01);
            prop_assert!(h < s.num_units() && q < s.num_units());
            let own = s.batteries[s.deciding_uav];
            for u in [h, q] {
                if !s.is_mec(u) {
                    prop_assert!(s.batteries[u] >= own);
                }
            }
        }

        #[test]
        fn rr_visits_evenly(s in arb_snapshot(), rounds in 1usize..5) {
            let mut rr = RoundRobin::new();
            let mut counts = vec![0; s.num_units()];
            for _ in 0..rounds * s.num_units() {
                counts[rr.select(&s)] += 1;
            }
            prop_assert!(counts.iter().all(|&c| c == rounds));
        }
    }
}
