use std::collections::BTreeMap;

/// Pending events keyed by `(t, seq)`; `seq` is assigned at insertion, so
/// events scheduled for the same instant pop in the order they were pushed.
#[derive(Debug, Clone)]
pub struct EventQueue<E> {
    now: u64,
    next_seq: u64,
    pending: BTreeMap<(u64, u64), E>,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self { now: 0, next_seq: 0, pending: BTreeMap::new() }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Schedules `event` at `t`; times in the past are clamped to now.
    pub fn push(&mut self, t: u64, event: E) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert((t.max(self.now), seq), event);
        seq
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.pending.keys().next().map(|(t, _)| *t)
    }

    /// Pops the earliest event at or before `until` and moves the clock to it.
    pub fn pop_until(&mut self, until: u64) -> Option<(u64, E)> {
        let (&(t, seq), _) = self.pending.iter().next()?;
        if t > until {
            return None;
        }
        let e = self.pending.remove(&(t, seq)).expect("key just seen");
        self.now = t;
        Some((t, e))
    }

    /// Moves the clock forward without processing anything.
    pub fn set_now(&mut self, t: u64) {
        self.now = self.now.max(t);
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&E) -> bool) {
        self.pending.retain(|_, e| keep(e));
    }
}
