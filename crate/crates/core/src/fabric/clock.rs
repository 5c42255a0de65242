use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::time::SimTime;

/// Event queue ordered by `(time, sequence)`; ties break by insertion order.
#[derive(Debug)]
pub struct SimClock<E> {
    now: SimTime,
    seq: u64,
    queue: BinaryHeap<Reverse<Entry<E>>>,
}

#[derive(Debug)]
struct Entry<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

impl<E> Default for SimClock<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> SimClock<E> {
    pub fn new() -> Self {
        SimClock {
            now: SimTime::ZERO,
            seq: 0,
            queue: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Schedules `event`; times in the past are clamped to `now`.
    pub fn schedule(&mut self, at: SimTime, event: E) {
        let at = at.max(self.now);
        self.seq += 1;
        self.queue.push(Reverse(Entry {
            at,
            seq: self.seq,
            event,
        }));
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|Reverse(e)| e.at)
    }

    /// Pops the next event and advances `now` to its timestamp.
    pub fn pop(&mut self) -> Option<(SimTime, E)> {
        let Reverse(e) = self.queue.pop()?;
        self.now = self.now.max(e.at);
        Some((e.at, e.event))
    }

    /// Pops the next event only if it is due at or before `limit`.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<(SimTime, E)> {
        match self.peek_time() {
            Some(t) if t <= limit => self.pop(),
            _ => None,
        }
    }

    /// Moves `now` forward without popping anything.
    pub fn advance(&mut self, to: SimTime) {
        self.now = self.now.max(to);
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_by_time_then_insertion() {
        let mut c = SimClock::new();
        c.schedule(SimTime(5), "b");
        c.schedule(SimTime(1), "a");
        c.schedule(SimTime(5), "c");
        assert_eq!(c.pop(), Some((SimTime(1), "a")));
        assert_eq!(c.pop(), Some((SimTime(5), "b")));
        assert_eq!(c.pop(), Some((SimTime(5), "c")));
        assert_eq!(c.now(), SimTime(5));
        assert!(c.pop().is_none());
    }

    #[test]
    fn never_goes_backwards() {
        let mut c = SimClock::new();
        c.advance(SimTime(10));
        c.schedule(SimTime(3), 1);
        assert_eq!(c.pop(), Some((SimTime(10), 1)));
        assert_eq!(c.now(), SimTime(10));
    }
}
