use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::time::SimTime;

use super::EngineError;

struct Entry<A> {
    due: SimTime,
    seq: u64,
    action: A,
}

impl<A> PartialEq for Entry<A> {
    fn eq(&self, other: &Self) -> bool {
        (self.due, self.seq) == (other.due, other.seq)
    }
}

impl<A> Eq for Entry<A> {}

impl<A> PartialOrd for Entry<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<A> Ord for Entry<A> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.due, self.seq).cmp(&(other.due, other.seq))
    }
}

/// Discrete-event queue ordered by `(due, seq)`.
///
/// `seq` is assigned at scheduling time, so events due at the same instant
/// fire in the order they were scheduled.
pub struct Scheduler<A> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Entry<A>>>,
    processed: u64,
}

impl<A> Default for Scheduler<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A> Scheduler<A> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Enqueues `action` at `due` and returns its sequence number.
    pub fn schedule(&mut self, due: SimTime, action: A) -> Result<u64, EngineError> {
        if due < self.now {
            return Err(EngineError::SchedulingInPast { due, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Entry { due, seq, action }));
        Ok(seq)
    }

    /// Pops the next event due at or before `t_end`, advancing `now` to it.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, A)> {
        match self.queue.peek() {
            Some(Reverse(e)) if e.due <= t_end => {}
            _ => return None,
        }
        let Reverse(entry) = self.queue.pop()?;
        debug_assert!(entry.due >= self.now);
        self.now = entry.due;
        self.processed += 1;
        Some((entry.due, entry.action))
    }

    /// Processes every event due at or before `t_end` (inclusive) in
    /// `(due, seq)` order, then sets the clock to `t_end`. The handler may
    /// schedule further events; those due by `t_end` run in the same call.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<(), EngineError>
    where
        F: FnMut(&mut Self, SimTime, A) -> Result<(), EngineError>,
    {
        if t_end < self.now {
            return Err(EngineError::SchedulingInPast {
                due: t_end,
                now: self.now,
            });
        }
        while let Some((due, action)) = self.pop_until(t_end) {
            handler(self, due, action)?;
        }
        self.now = t_end;
        Ok(())
    }
}
