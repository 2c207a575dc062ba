//! Evaluation quantities: the battery/violation objective, per-unit violation
//! shares, and smoothing and convergence detection for reward curves.

use crate::queue::PlacementRecord;
use crate::sim::EpisodeResult;

/// Outcome of one evaluation run (one or more episodes under one seed).
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// Remaining battery fraction per UAV, unclamped.
    pub battery_fraction: Vec<f64>,
    pub violations_per_unit: Vec<usize>,
    pub tasks_generated: usize,
    pub cumulative_reward: Vec<f64>,
}

impl RunMetrics {
    pub fn from_episode(ep: &EpisodeResult, num_units: usize) -> Self {
        Self {
            battery_fraction: ep.battery_fractions(),
            violations_per_unit: ep.violations_per_unit(num_units),
            tasks_generated: ep.tasks_generated,
            cumulative_reward: ep.cumulative_reward.clone(),
        }
    }

    /// Combines episodes: batteries and rewards are averaged, counts summed.
    pub fn combine(runs: &[RunMetrics]) -> Self {
        assert!(!runs.is_empty());
        let n = runs.len() as f64;
        let avg = |f: &dyn Fn(&RunMetrics) -> &Vec<f64>| -> Vec<f64> {
            let len = f(&runs[0]).len();
            (0..len)
                .map(|i| runs.iter().map(|r| f(r)[i]).sum::<f64>() / n)
                .collect()
        };
        let units = runs[0].violations_per_unit.len();
        Self {
            battery_fraction: avg(&|r| &r.battery_fraction),
            violations_per_unit: (0..units)
                .map(|u| runs.iter().map(|r| r.violations_per_unit[u]).sum())
                .collect(),
            tasks_generated: runs.iter().map(|r| r.tasks_generated).sum(),
            cumulative_reward: avg(&|r| &r.cumulative_reward),
        }
    }

    pub fn min_battery(&self) -> f64 {
        self.battery_fraction
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_violations(&self) -> usize {
        self.violations_per_unit.iter().sum()
    }

    /// Per-unit violations as a percentage of all generated tasks.
    pub fn violation_pct(&self) -> Vec<f64> {
        pct_of(&self.violations_per_unit, self.tasks_generated)
    }

    pub fn total_violation_pct(&self) -> f64 {
        if self.tasks_generated == 0 {
            0.0
        } else {
            100.0 * self.total_violations() as f64 / self.tasks_generated as f64
        }
    }

    /// Objective with the violation normalizer `theta` (defaults to the
    /// number of generated tasks).
    pub fn objective(&self, weight: f64, theta: Option<f64>) -> f64 {
        let theta = theta.unwrap_or(self.tasks_generated as f64);
        objective_value(self.min_battery(), self.total_violations() as f64, theta, weight)
    }
}

/// `W * min_battery - (1 - W) / theta * violations`. With no tasks
/// (`theta == 0`) only the battery term remains.
pub fn objective_value(min_battery: f64, violations: f64, theta: f64, weight: f64) -> f64 {
    let battery = weight * min_battery;
    if theta == 0.0 {
        battery
    } else {
        battery - (1.0 - weight) / theta * violations
    }
}

fn pct_of(counts: &[usize], total: usize) -> Vec<f64> {
    counts
        .iter()
        .map(|&c| {
            if total == 0 {
                0.0
            } else {
                100.0 * c as f64 / total as f64
            }
        })
        .collect()
}

/// Share of all generated tasks that violated their deadline at each unit, in percent.
pub fn violation_distribution(records: &[PlacementRecord], num_units: usize, total_tasks: usize) -> Vec<f64> {
    let mut counts = vec![0; num_units];
    for r in records.iter().filter(|r| r.violated) {
        counts[r.unit] += 1;
    }
    pct_of(&counts, total_tasks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub mean: Vec<f64>,
    /// Minimum raw value in the trailing window.
    pub lo: Vec<f64>,
    /// Maximum raw value in the trailing window.
    pub hi: Vec<f64>,
}

/// Trailing-window mean with a min/max band. The first `window - 1` points
/// use whatever prefix is available.
pub fn moving_average(series: &[f64], window: usize) -> Smoothed {
    assert!(window >= 1);
    let mut out = Smoothed {
        mean: Vec::with_capacity(series.len()),
        lo: Vec::with_capacity(series.len()),
        hi: Vec::with_capacity(series.len()),
    };
    for i in 0..series.len() {
        let w = &series[i.saturating_sub(window - 1)..=i];
        out.mean.push(w.iter().sum::<f64>() / w.len() as f64);
        out.lo.push(w.iter().copied().fold(f64::INFINITY, f64::min));
        out.hi.push(w.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    out
}

/// First index from which the series stays at or above `threshold` for
/// `patience` consecutive points.
pub fn convergence_episode(smoothed: &[f64], threshold: f64, patience: usize) -> Option<usize> {
    assert!(patience >= 1);
    let mut run = 0;
    for (i, &v) in smoothed.iter().enumerate() {
        if v >= threshold {
            run += 1;
            if run == patience {
                return Some(i + 1 - patience);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Mean of the last `tail` points: the level a curve settles at.
pub fn plateau_level(smoothed: &[f64], tail: usize) -> f64 {
    let tail = tail.clamp(1, smoothed.len());
    let t = &smoothed[smoothed.len() - tail..];
    t.iter().sum::<f64>() / t.len() as f64
}

/// Episode at which a curve first covers `fraction` of its total rise from
/// its first point to its plateau and holds there for `patience` points.
pub fn plateau_episode(smoothed: &[f64], tail: usize, fraction: f64, patience: usize) -> Option<usize> {
    if smoothed.is_empty() {
        return None;
    }
    let level = plateau_level(smoothed, tail);
    let start = smoothed[0];
    let threshold = start + fraction * (level - start);
    convergence_episode(smoothed, threshold, patience)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
