use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use super::{SimError, SimTime};

/// Opaque reference to a scheduled event, used for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn sequence(self) -> u64 {
        self.0
    }
}

/// A dequeued event.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent<P> {
    pub fire_at: SimTime,
    pub sequence: u64,
    pub payload: P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub events_processed: u64,
    pub final_clock: SimTime,
}

struct Entry<P> {
    fire_at: SimTime,
    sequence: u64,
    payload: P,
}

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.sequence == other.sequence
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// BinaryHeap is a max-heap; invert so the earliest (time, sequence) is on top.
impl<P> Ord for Entry<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.sequence.cmp(&self.sequence))
    }
}

/// Single-threaded event engine with a monotone clock.
pub struct Simulation<P> {
    now: SimTime,
    next_sequence: u64,
    heap: BinaryHeap<Entry<P>>,
    pending: HashSet<u64>,
    scheduled: u64,
    cancelled: u64,
    processed: u64,
}

impl<P> Default for Simulation<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Simulation<P> {
    pub fn new() -> Self {
        Simulation {
            now: SimTime::ZERO,
            next_sequence: 0,
            heap: BinaryHeap::new(),
            pending: HashSet::new(),
            scheduled: 0,
            cancelled: 0,
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule(&mut self, fire_at: SimTime, payload: P) -> Result<EventHandle, SimError> {
        if fire_at < self.now {
            return Err(SimError::Causality {
                requested: fire_at,
                now: self.now,
            });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Entry {
            fire_at,
            sequence,
            payload,
        });
        self.pending.insert(sequence);
        self.scheduled += 1;
        Ok(EventHandle(sequence))
    }

    /// Schedules `delay` seconds after the current clock.
    pub fn schedule_in(&mut self, delay: f64, payload: P) -> Result<EventHandle, SimError> {
        let fire_at = SimTime::try_from_secs(self.now.secs() + delay)?;
        self.schedule(fire_at, payload)
    }

    /// Returns true iff the event was still pending. A cancelled event never fires.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        let removed = self.pending.remove(&handle.0);
        if removed {
            self.cancelled += 1;
        }
        removed
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.pending.contains(&handle.0)
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn events_scheduled(&self) -> u64 {
        self.scheduled
    }

    pub fn events_cancelled(&self) -> u64 {
        self.cancelled
    }

    pub fn events_processed(&self) -> u64 {
        self.processed
    }

    fn discard_cancelled_head(&mut self) {
        while let Some(top) = self.heap.peek() {
            if self.pending.contains(&top.sequence) {
                break;
            }
            self.heap.pop();
        }
    }

    pub fn next_fire_time(&mut self) -> Option<SimTime> {
        self.discard_cancelled_head();
        self.heap.peek().map(|e| e.fire_at)
    }

    /// Dequeues the next live event firing at or before `t_end`, advancing the clock to it.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<SimEvent<P>> {
        self.discard_cancelled_head();
        if self.heap.peek()?.fire_at > t_end {
            return None;
        }
        let entry = self.heap.pop()?;
        self.pending.remove(&entry.sequence);
        self.now = entry.fire_at;
        self.processed += 1;
        Some(SimEvent {
            fire_at: entry.fire_at,
            sequence: entry.sequence,
            payload: entry.payload,
        })
    }

    /// Processes every event with `fire_at <= t_end`, including events scheduled by the
    /// handler inside the window, then advances the clock to `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<RunSummary, SimError>
    where
        F: FnMut(&mut Simulation<P>, SimEvent<P>),
    {
        if t_end < self.now {
            return Err(SimError::Causality {
                requested: t_end,
                now: self.now,
            });
        }
        let mut events_processed = 0;
        while let Some(event) = self.pop_until(t_end) {
            events_processed += 1;
            handler(self, event);
        }
        self.now = t_end;
        Ok(RunSummary {
            events_processed,
            final_clock: self.now,
        })
    }
}
