use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Event kinds in tie-break priority order: at equal timestamps a server is
/// freed before queued work starts, and both happen before new arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    TaskComplete,
    TaskStartService,
    TaskArrival,
    EpisodeEnd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub task: u64,
    pub unit: usize,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    event: Event,
    seq: u64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .event
            .time
            .total_cmp(&self.event.time)
            .then_with(|| other.event.kind.cmp(&self.event.kind))
            .then_with(|| other.event.task.cmp(&self.event.task))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Future-event list ordered by `(time, kind, task id, insertion order)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Entry>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        debug_assert!(event.time.is_finite());
        self.heap.push(Entry {
            event,
            seq: self.seq,
        });
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|e| e.event)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.event.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(time: f64, kind: EventKind, task: u64) -> Event {
        Event { time, kind, task, unit: 0 }
    }

    #[test]
    fn orders_by_time_kind_then_task() {
        let mut q = EventQueue::new();
        q.push(ev(1.0, EventKind::TaskArrival, 1));
        q.push(ev(1.0, EventKind::TaskComplete, 7));
        q.push(ev(0.5, EventKind::EpisodeEnd, 0));
        q.push(ev(1.0, EventKind::TaskArrival, 0));
        q.push(ev(1.0, EventKind::TaskStartService, 3));
        let order: Vec<(f64, EventKind, u64)> =
            std::iter::from_fn(|| q.pop()).map(|e| (e.time, e.kind, e.task)).collect();
        assert_eq!(
            order,
            vec![
                (0.5, EventKind::EpisodeEnd, 0),
                (1.0, EventKind::TaskComplete, 7),
                (1.0, EventKind::TaskStartService, 3),
                (1.0, EventKind::TaskArrival, 0),
                (1.0, EventKind::TaskArrival, 1),
            ]
        );
    }
}
