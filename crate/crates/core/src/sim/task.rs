use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

/// The image-classification workloads generated by the farm's IoT cameras.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    FireDetection,
    PestDetection,
    GrowthMonitoring,
}

impl TaskType {
    pub const ALL: [TaskType; 3] = [
        TaskType::FireDetection,
        TaskType::PestDetection,
        TaskType::GrowthMonitoring,
    ];

    pub fn index(self) -> usize {
        match self {
            TaskType::FireDetection => 0,
            TaskType::PestDetection => 1,
            TaskType::GrowthMonitoring => 2,
        }
    }

    /// Code used in the first slot of the agent state vector.
    pub fn state_code(self) -> f64 {
        match self {
            TaskType::FireDetection => 0.0,
            TaskType::PestDetection => 0.5,
            TaskType::GrowthMonitoring => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskType::FireDetection => "fire_detection",
            TaskType::PestDetection => "pest_detection",
            TaskType::GrowthMonitoring => "growth_monitoring",
        }
    }
}

impl std::fmt::Display for TaskType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Workload parameters for one task type. All times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskTypeSpec {
    #[serde(rename = "type")]
    pub type_id: TaskType,
    pub mean_interarrival: f64,
    pub deadline: f64,
    pub proc_time_uav: f64,
    pub proc_time_mec: f64,
}

impl TaskTypeSpec {
    pub fn validate(&self) -> Result<(), String> {
        let name = self.type_id.name();
        for (key, v) in [
            ("mean_interarrival", self.mean_interarrival),
            ("deadline", self.deadline),
            ("proc_time_uav", self.proc_time_uav),
            ("proc_time_mec", self.proc_time_mec),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("tasks.{name}.{key} must be positive, got {v}"));
            }
        }
        if self.proc_time_mec > self.proc_time_uav {
            return Err(format!(
                "tasks.{name}: proc_time_mec ({}) exceeds proc_time_uav ({})",
                self.proc_time_mec, self.proc_time_uav
            ));
        }
        if self.deadline <= self.proc_time_mec {
            return Err(format!(
                "tasks.{name}: deadline ({}) must exceed proc_time_mec ({})",
                self.deadline, self.proc_time_mec
            ));
        }
        Ok(())
    }

    pub fn proc_time(&self, on_mec: bool) -> f64 {
        if on_mec {
            self.proc_time_mec
        } else {
            self.proc_time_uav
        }
    }
}

/// Default workload table.
pub fn default_task_specs() -> Vec<TaskTypeSpec> {
    vec![
        TaskTypeSpec {
            type_id: TaskType::FireDetection,
            mean_interarrival: 0.25,
            deadline: 0.3,
            proc_time_uav: 0.1,
            proc_time_mec: 0.05,
        },
        TaskTypeSpec {
            type_id: TaskType::PestDetection,
            mean_interarrival: 0.25,
            deadline: 0.8,
            proc_time_uav: 0.5,
            proc_time_mec: 0.25,
        },
        TaskTypeSpec {
            type_id: TaskType::GrowthMonitoring,
            mean_interarrival: 0.5,
            deadline: 5.0,
            proc_time_uav: 0.1,
            proc_time_mec: 0.05,
        },
    ]
}

/// One generated job.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskInstance {
    pub id: u64,
    pub type_id: TaskType,
    pub origin_uav: usize,
    /// When the camera emitted the task.
    pub emitted_at: f64,
    /// When the task reached its origin UAV.
    pub arrival_time: f64,
    pub deadline_abs: f64,
}

/// Samples one Poisson stream of tasks for `uav`.
///
/// Gaps between emissions are exponential with mean `mean_interarrival`; a task
/// is kept while it reaches the UAV (emission + `iot_delay`) before `horizon`.
/// Ids are numbered from zero in emission order.
pub fn generate_arrivals<R: Rng + ?Sized>(
    spec: &TaskTypeSpec,
    mean_interarrival: f64,
    uav: usize,
    horizon: f64,
    iot_delay: f64,
    rng: &mut R,
) -> Vec<TaskInstance> {
    let mut out = Vec::new();
    if !(horizon > 0.0) {
        return out;
    }
    let gaps = Exp::new(1.0 / mean_interarrival).expect("positive rate");
    let mut emitted = 0.0;
    loop {
        emitted += gaps.sample(rng);
        let arrival = emitted + iot_delay;
        if arrival >= horizon {
            break;
        }
        out.push(TaskInstance {
            id: out.len() as u64,
            type_id: spec.type_id,
            origin_uav: uav,
            emitted_at: emitted,
            arrival_time: arrival,
            deadline_abs: emitted + spec.deadline,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fire() -> TaskTypeSpec {
        default_task_specs()[0]
    }

    #[test]
    fn zero_horizon_yields_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(generate_arrivals(&fire(), 0.25, 0, 0.0, 0.01, &mut rng).is_empty());
    }

    #[test]
    fn fire_gaps_match_table_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tasks = generate_arrivals(&fire(), 0.25, 0, 10_000.0, 0.0, &mut rng);
        let mean = tasks.last().unwrap().emitted_at / tasks.len() as f64;
        assert!((mean - 0.25).abs() / 0.25 < 0.03, "mean gap {mean}");
    }

    #[test]
    fn identical_seed_identical_stream() {
        let a = generate_arrivals(&fire(), 0.25, 2, 50.0, 0.01, &mut ChaCha8Rng::seed_from_u64(3));
        let b = generate_arrivals(&fire(), 0.25, 2, 50.0, 0.01, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn arrivals_respect_horizon_and_deadline() {
        let spec = default_task_specs()[1];
        let tasks = generate_arrivals(&spec, 0.25, 1, 30.0, 0.01, &mut ChaCha8Rng::seed_from_u64(9));
        for (i, t) in tasks.iter().enumerate() {
            assert_eq!(t.id, i as u64);
            assert!(t.arrival_time < 30.0);
            assert!((t.arrival_time - t.emitted_at - 0.01).abs() < 1e-12);
            assert!(t.deadline_abs > t.arrival_time - 0.01);
        }
    }

    #[test]
    fn default_specs_validate() {
        for s in default_task_specs() {
            s.validate().unwrap();
        }
        let mut bad = fire();
        bad.deadline = 0.01;
        assert!(bad.validate().is_err());
    }
}
