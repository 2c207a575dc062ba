//! FIFO processing-unit queues, per-task delay bookkeeping and the deadline
//! violation test.

use std::collections::{HashSet, VecDeque};
use std::io::Write;

use crate::error::{Result, SimError};
use crate::sim::task::{TaskType, TaskTypeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitClass {
    Uav,
    Mec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueuedTask {
    pub task_id: u64,
    pub type_id: TaskType,
    /// Processing time on this unit.
    pub service: f64,
    pub enqueued_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InService {
    pub task: QueuedTask,
    pub start: f64,
    pub finish: f64,
}

/// Non-preemptive FIFO server.
#[derive(Debug, Clone)]
pub struct UnitQueue {
    unit: usize,
    class: UnitClass,
    pending: VecDeque<QueuedTask>,
    in_service: Option<InService>,
    members: HashSet<u64>,
    pending_work: f64,
}

impl UnitQueue {
    pub fn new(unit: usize, class: UnitClass) -> Self {
        Self {
            unit,
            class,
            pending: VecDeque::new(),
            in_service: None,
            members: HashSet::new(),
            pending_work: 0.0,
        }
    }

    pub fn unit(&self) -> usize {
        self.unit
    }

    pub fn class(&self) -> UnitClass {
        self.class
    }

    pub fn is_idle(&self) -> bool {
        self.in_service.is_none()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn in_service(&self) -> Option<&InService> {
        self.in_service.as_ref()
    }

    pub fn pending(&self) -> impl Iterator<Item = &QueuedTask> {
        self.pending.iter()
    }

    /// Admits a task. If the unit is idle service starts at `now` and the
    /// started record is returned.
    pub fn enqueue(&mut self, task: QueuedTask, now: f64) -> Result<Option<InService>> {
        debug_assert!(now >= task.enqueued_at);
        if !self.members.insert(task.task_id) {
            return Err(SimError::DuplicateTask(task.task_id));
        }
        if self.in_service.is_none() {
            debug_assert!(self.pending.is_empty());
            let started = InService {
                task,
                start: now,
                finish: now + task.service,
            };
            self.in_service = Some(started);
            Ok(Some(started))
        } else {
            self.pending_work += task.service;
            self.pending.push_back(task);
            Ok(None)
        }
    }

    /// Finishes the task in service and starts the next pending one at `now`.
    pub fn complete(&mut self, now: f64) -> (InService, Option<InService>) {
        let done = self.in_service.take().expect("complete() on an idle unit");
        self.members.remove(&done.task.task_id);
        let next = self.pending.pop_front().map(|task| {
            self.pending_work -= task.service;
            if self.pending.is_empty() {
                self.pending_work = 0.0;
            }
            InService {
                task,
                start: now,
                finish: now + task.service,
            }
        });
        self.in_service = next;
        (done, next)
    }

    /// Work already committed to this unit at `now`, in seconds.
    pub fn backlog(&self, now: f64) -> f64 {
        let remaining = self
            .in_service
            .map_or(0.0, |s| (s.finish - now).max(0.0));
        remaining + self.pending_work
    }

    /// Delay a new task of this type would see if it joined the queue now:
    /// the committed backlog plus its own processing time.
    pub fn predicted_unit_delay(&self, spec: &TaskTypeSpec, now: f64) -> f64 {
        self.backlog(now) + spec.proc_time(self.class == UnitClass::Mec)
    }
}

/// Where and how one task was processed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementRecord {
    pub task_id: u64,
    pub type_id: TaskType,
    pub origin: usize,
    pub unit: usize,
    pub emitted_at: f64,
    /// Arrival at the origin UAV (decision time).
    pub arrival: f64,
    /// Arrival at the chosen unit.
    pub unit_arrival: f64,
    pub start: f64,
    pub finish: f64,
    pub deadline_abs: f64,
    pub iot_delay: f64,
    pub transfer_delay: f64,
    pub queue_wait: f64,
    pub service_time: f64,
    pub violated: bool,
    /// Completed only while draining queues after the episode horizon.
    pub after_horizon: bool,
}

impl PlacementRecord {
    pub fn end_to_end(&self) -> f64 {
        self.iot_delay + self.transfer_delay + self.queue_wait + self.service_time
    }
}

/// True iff the end-to-end latency strictly exceeds the relative deadline.
pub fn check_violation(record: &PlacementRecord, deadline: f64) -> bool {
    record.end_to_end() > deadline
}

/// Writes the per-task event log as CSV.
pub fn write_placements_csv<W: Write>(records: &[PlacementRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "task_id", "type", "origin", "unit", "arrival", "start", "finish", "deadline_abs", "violated",
    ])?;
    for r in records {
        w.write_record([
            r.task_id.to_string(),
            r.type_id.name().to_string(),
            r.origin.to_string(),
            r.unit.to_string(),
            r.arrival.to_string(),
            r.start.to_string(),
            r.finish.to_string(),
            r.deadline_abs.to_string(),
            u8::from(r.violated).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
