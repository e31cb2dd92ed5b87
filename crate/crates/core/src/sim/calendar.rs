//! Future-event list: a binary min-heap keyed on `(time, insertion seq)`.
//!
//! Events are never removed in place. A service completion carries the
//! version of its station at scheduling time; the engine drops it on pop if
//! the station has been rescheduled since.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival { class: usize },
    Completion { station: usize, version: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    time: f64,
    seq: u64,
    kind: EventKind,
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
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Default)]
pub struct Calendar {
    heap: BinaryHeap<Entry>,
    next_seq: u64,
}

impl Calendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind) {
        debug_assert!(time.is_finite(), "event time must be finite");
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<(f64, EventKind)> {
        self.heap.pop().map(|e| (e.time, e.kind))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_time_order() {
        let mut cal = Calendar::new();
        for (t, c) in [(3.0, 0), (1.0, 1), (2.0, 2)] {
            cal.schedule(t, EventKind::Arrival { class: c });
        }
        let order: Vec<f64> = std::iter::from_fn(|| cal.pop().map(|e| e.0)).collect();
        assert_eq!(order, vec![1.0, 2.0, 3.0]);
        assert!(cal.pop().is_none());
    }

    #[test]
    fn ties_break_by_insertion() {
        let mut cal = Calendar::new();
        for c in 0..5 {
            cal.schedule(1.0, EventKind::Arrival { class: c });
        }
        let order: Vec<usize> = std::iter::from_fn(|| {
            cal.pop().map(|(_, k)| match k {
                EventKind::Arrival { class } => class,
                EventKind::Completion { .. } => unreachable!(),
            })
        })
        .collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }
}
