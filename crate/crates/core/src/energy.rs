//! Battery accounting for UAV processing units.
//!
//! Remaining energy is capacity minus a constant hover/antenna/idle-CPU drain
//! over elapsed time, minus the busy-over-idle CPU increment over the time the
//! unit spent processing tasks. Powers are in watts, capacity in watt-hours.

use serde::{Deserialize, Serialize};

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    pub battery_capacity_wh: f64,
    pub hover_power: f64,
    pub antenna_power: f64,
    pub cpu_idle_power: f64,
    pub cpu_busy_power: f64,
    /// Multiplies both CPU powers. The default CPU rates are deliberately
    /// inflated so short simulations show visible drain; set below 1 to undo.
    pub cpu_power_scale: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            battery_capacity_wh: 570.0,
            hover_power: 211.0,
            antenna_power: 17.0,
            cpu_idle_power: 4320.0,
            cpu_busy_power: 12960.0,
            cpu_power_scale: 1.0,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.battery_capacity_wh > 0.0) {
            return Err("energy.battery_capacity_wh must be positive".into());
        }
        if !(self.cpu_idle_power >= 0.0 && self.cpu_busy_power >= self.cpu_idle_power) {
            return Err("energy: require cpu_busy_power >= cpu_idle_power >= 0".into());
        }
        if !(self.hover_power >= 0.0 && self.antenna_power >= 0.0 && self.cpu_power_scale >= 0.0) {
            return Err("energy: powers and cpu_power_scale must be non-negative".into());
        }
        Ok(())
    }

    /// Drain that applies whether or not the CPU is working, in watts.
    pub fn baseline_power(&self) -> f64 {
        self.hover_power + self.antenna_power + self.cpu_idle_power * self.cpu_power_scale
    }

    /// Extra drain while the CPU is processing, in watts.
    pub fn busy_increment(&self) -> f64 {
        (self.cpu_busy_power - self.cpu_idle_power) * self.cpu_power_scale
    }

    /// Energy, as a fraction of capacity, consumed by `busy` extra seconds of processing.
    pub fn busy_cost_fraction(&self, busy: f64) -> f64 {
        self.busy_increment() * busy / SECONDS_PER_HOUR / self.battery_capacity_wh
    }
}

/// Busy-interval log and clock for one UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    params: EnergyParams,
    busy: Vec<(f64, f64)>,
    // Sum of all intervals except the last one.
    closed_busy: f64,
    elapsed: f64,
}

impl EnergyLedger {
    pub fn new(params: EnergyParams) -> Self {
        Self {
            params,
            busy: Vec::new(),
            closed_busy: 0.0,
            elapsed: 0.0,
        }
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn busy_intervals(&self) -> &[(f64, f64)] {
        &self.busy
    }

    pub fn set_elapsed(&mut self, t: f64) {
        debug_assert!(t >= 0.0);
        self.elapsed = t;
    }

    /// Records a processing interval. Intervals must be appended in time order
    /// and may not overlap; the end may lie past the current clock.
    pub fn add_busy(&mut self, start: f64, end: f64) {
        assert!(start >= 0.0 && end >= start, "invalid busy interval");
        if let Some(&(s, e)) = self.busy.last() {
            assert!(start >= e, "busy intervals overlap");
            self.closed_busy += e - s;
        }
        self.busy.push((start, end));
    }

    /// Busy seconds inside `[0, elapsed]`.
    pub fn busy_seconds(&self) -> f64 {
        let t = self.elapsed;
        let Some(&(s, e)) = self.busy.last() else {
            return 0.0;
        };
        let n = self.busy.len();
        let prev_end = if n >= 2 { self.busy[n - 2].1 } else { 0.0 };
        if t >= prev_end {
            self.closed_busy + (e.min(t) - s).max(0.0)
        } else {
            self.busy
                .iter()
                .map(|&(s, e)| (e.min(t) - s).max(0.0))
                .sum()
        }
    }

    fn remaining_with_busy(&self, busy_seconds: f64) -> f64 {
        let p = &self.params;
        p.battery_capacity_wh
            - p.baseline_power() * self.elapsed / SECONDS_PER_HOUR
            - p.busy_increment() * busy_seconds / SECONDS_PER_HOUR
    }

    /// Remaining energy in watt-hours. Negative once the battery is exhausted.
    pub fn remaining_battery(&self) -> f64 {
        self.remaining_with_busy(self.busy_seconds())
    }

    /// Remaining energy as a fraction of capacity, unclamped.
    pub fn remaining_battery_fraction(&self) -> f64 {
        self.remaining_battery() / self.params.battery_capacity_wh
    }

    /// Fraction clamped to `[0, 1]`, as fed to agents.
    pub fn encoded_fraction(&self) -> f64 {
        self.remaining_battery_fraction().clamp(0.0, 1.0)
    }

    pub fn is_depleted(&self) -> bool {
        self.remaining_battery() < 0.0
    }

    /// Remaining energy if the unit additionally processed for `extra_busy`
    /// seconds. The ledger itself is not modified.
    pub fn hypothetical_battery_after(&self, extra_busy: f64) -> f64 {
        debug_assert!(extra_busy >= 0.0);
        self.remaining_with_busy(self.busy_seconds() + extra_busy)
    }
}

/// Battery estimate for any processing unit; MEC servers (no ledger) are
/// grid-powered and report `+inf`.
pub fn unit_battery_after(ledger: Option<&EnergyLedger>, extra_busy: f64) -> f64 {
    ledger.map_or(f64::INFINITY, |l| l.hypothetical_battery_after(extra_busy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ledger() -> EnergyLedger {
        EnergyLedger::new(EnergyParams::default())
    }

    #[test]
    fn fresh_battery_is_full() {
        let l = ledger();
        assert_eq!(l.remaining_battery(), 570.0);
        assert_eq!(l.remaining_battery_fraction(), 1.0);
    }

    #[test]
    fn idle_drain_over_six_minutes() {
        let mut l = ledger();
        l.set_elapsed(360.0);
        assert!((l.remaining_battery() - 115.2).abs() < 1e-9);
    }

    #[test]
    fn busy_drain_over_six_minutes() {
        let mut l = ledger();
        l.add_busy(100.0, 136.0);
        l.set_elapsed(360.0);
        assert!((l.remaining_battery() - 28.8).abs() < 1e-9);
    }

    #[test]
    fn hypothetical_matches_realized() {
        let mut l = ledger();
        l.set_elapsed(360.0);
        assert_eq!(l.hypothetical_battery_after(0.0), l.remaining_battery());
        assert!((l.hypothetical_battery_after(36.0) - 28.8).abs() < 1e-9);
        // unchanged
        assert!((l.remaining_battery() - 115.2).abs() < 1e-9);
        assert_eq!(unit_battery_after(None, 1.0), f64::INFINITY);
    }

    #[test]
    fn half_and_depleted_fractions() {
        let mut l = ledger();
        // 285 Wh drained by baseline power alone.
        l.set_elapsed(285.0 * 3600.0 / l.params().baseline_power());
        assert!((l.remaining_battery_fraction() - 0.5).abs() < 1e-12);
        l.set_elapsed(1000.0);
        assert!(l.remaining_battery_fraction() < 0.0);
        assert_eq!(l.encoded_fraction(), 0.0);
        assert!(l.is_depleted());
    }

    #[test]
    fn in_flight_interval_counts_only_elapsed_part() {
        let mut l = ledger();
        l.add_busy(0.0, 1.0);
        l.add_busy(2.0, 10.0);
        l.set_elapsed(4.0);
        assert!((l.busy_seconds() - 3.0).abs() < 1e-12);
        l.set_elapsed(1.5);
        assert!((l.busy_seconds() - 1.0).abs() < 1e-12);
        l.set_elapsed(0.5);
        assert!((l.busy_seconds() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_ms_integration_matches() {
        // Intervals on the millisecond grid make the Riemann sum exact.
        let p = EnergyParams::default();
        let mut l = EnergyLedger::new(p);
        let iv = [(0.013, 0.113), (0.5, 1.0), (1.2, 1.25), (2.0, 2.999)];
        for &(s, e) in &iv {
            l.add_busy(s, e);
        }
        l.set_elapsed(3.0);
        let mut used = 0.0;
        for k in 0..3000 {
            let mid = (k as f64 + 0.5) * 1e-3;
            let busy = iv.iter().any(|&(s, e)| mid > s && mid < e);
            let w = p.baseline_power() + if busy { p.busy_increment() } else { 0.0 };
            used += w * 1e-3 / 3600.0;
        }
        let oracle = p.battery_capacity_wh - used;
        assert!((oracle - l.remaining_battery()).abs() / oracle.abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn nonincreasing_in_time_and_busy(
            gaps in proptest::collection::vec((0.0f64..2.0, 0.0f64..2.0), 0..20),
            extra in 0.0f64..5.0,
        ) {
            let mut l = ledger();
            let mut t = 0.0;
            for (idle, busy) in gaps {
                t += idle;
                l.add_busy(t, t + busy);
                t += busy;
            }
            let mut prev = f64::INFINITY;
            for k in 0..=20 {
                l.set_elapsed(t * k as f64 / 20.0 + extra);
                let r = l.remaining_battery();
                prop_assert!(r <= prev + 1e-9);
                prop_assert!(l.hypothetical_battery_after(extra) <= r);
                prev = r;
            }
        }

        #[test]
        fn layout_does_not_matter(total in 0.0f64..50.0, split in 0.0f64..1.0, shift in 0.0f64..10.0) {
            let mut a = ledger();
            a.add_busy(0.0, total);
            let mut b = ledger();
            let first = total * split;
            b.add_busy(shift, shift + first);
            b.add_busy(shift + first + 3.0, shift + total + 3.0);
            a.set_elapsed(100.0);
            b.set_elapsed(100.0);
            prop_assert!((a.remaining_battery() - b.remaining_battery()).abs() < 1e-9);
        }
    }
}
