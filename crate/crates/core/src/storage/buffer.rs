//! RAM-side buffering: the append/flush double buffer and the ring used
//! while the medium is unavailable.

use std::collections::VecDeque;
use std::mem;

use crate::model::Record;

/// Active buffer receives appends; the flushing buffer holds the batch
/// currently being written. A batch that failed to write stays in the
/// flushing slot until it is retried or moved elsewhere.
#[derive(Debug, Clone)]
pub struct LogBufferPair {
    active: Vec<Record>,
    flushing: Vec<Record>,
    capacity: usize,
    flush_interval_s: f64,
    last_flush_s: f64,
    overflow: u64,
}

impl LogBufferPair {
    pub fn new(capacity: usize, flush_interval_s: f64) -> Self {
        assert!(capacity > 0);
        Self {
            active: Vec::with_capacity(capacity),
            flushing: Vec::with_capacity(capacity),
            capacity,
            flush_interval_s,
            last_flush_s: 0.0,
            overflow: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn active_len(&self) -> usize {
        self.active.len()
    }

    pub fn flushing(&self) -> &[Record] {
        &self.flushing
    }

    pub fn len(&self) -> usize {
        self.active.len() + self.flushing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    /// Appends to the active buffer. Returns true at the high-water mark.
    /// If the active buffer is already full while a failed batch still
    /// occupies the flushing slot, the oldest active record is dropped.
    pub fn append(&mut self, record: Record) -> bool {
        if self.active.len() >= self.capacity && !self.flushing.is_empty() {
            self.active.remove(0);
            self.overflow += 1;
        }
        self.active.push(record);
        self.active.len() >= self.capacity
    }

    pub fn set_epoch(&mut self, now_s: f64) {
        self.last_flush_s = now_s;
    }

    /// High-water mark reached, or the flush interval elapsed with data
    /// pending, or a failed batch awaits retry.
    pub fn flush_due(&self, now_s: f64) -> bool {
        !self.flushing.is_empty()
            || self.active.len() >= self.capacity
            || (!self.active.is_empty() && now_s - self.last_flush_s >= self.flush_interval_s)
    }

    /// Exchanges the buffers if the flushing slot is free. Returns the batch
    /// to write.
    pub fn swap(&mut self) -> &[Record] {
        if self.flushing.is_empty() {
            mem::swap(&mut self.active, &mut self.flushing);
        }
        &self.flushing
    }

    /// The batch reached the medium.
    pub fn flush_done(&mut self, now_s: f64) {
        self.flushing.clear();
        self.last_flush_s = now_s;
    }

    /// The first `n` records of the pending batch reached the medium.
    pub fn flush_partial(&mut self, n: usize) {
        self.flushing.drain(..n.min(self.flushing.len()));
    }

    /// Empties both buffers, oldest first.
    pub fn drain_all(&mut self) -> Vec<Record> {
        let mut out = mem::take(&mut self.flushing);
        out.append(&mut self.active);
        out
    }

    /// Volatile contents are lost.
    pub fn clear(&mut self) {
        self.active.clear();
        self.flushing.clear();
    }
}

/// Bounded FIFO that drops its oldest entry when full.
#[derive(Debug, Clone)]
pub struct RamRing<T> {
    items: VecDeque<T>,
    capacity: usize,
    dropped: u64,
}

impl<T> RamRing<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
            dropped: 0,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
            self.dropped += 1;
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn front(&self) -> Option<&T> {
        self.items.front()
    }

    pub fn pop_front(&mut self) -> Option<T> {
        self.items.pop_front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    pub fn drain(&mut self) -> impl Iterator<Item = T> + '_ {
        self.items.drain(..)
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::csv::tests::sample;
    use std::sync::{Arc, Mutex};

    #[test]
    fn append_to_empty() {
        let mut b = LogBufferPair::new(60, 60.0);
        assert!(!b.append(sample(0, 0)));
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn high_water_at_capacity() {
        let mut b = LogBufferPair::new(60, 60.0);
        let signals: Vec<bool> = (0..60).map(|i| b.append(sample(i, 0))).collect();
        assert!(signals[..59].iter().all(|s| !s));
        assert!(signals[59]);
        assert!(b.flush_due(1.0));
    }

    #[test]
    fn interval_triggers_flush() {
        let mut b = LogBufferPair::new(60, 60.0);
        b.append(sample(0, 0));
        assert!(!b.flush_due(59.0));
        assert!(b.flush_due(60.0));
    }

    #[test]
    fn swap_separates_batch_from_appends() {
        let mut b = LogBufferPair::new(4, 60.0);
        for i in 0..4 {
            b.append(sample(i, 0));
        }
        assert_eq!(b.swap().len(), 4);
        b.append(sample(4, 0));
        assert_eq!(b.flushing().len(), 4);
        assert_eq!(b.active_len(), 1);
        // A pending batch is not replaced by a second swap.
        assert_eq!(b.swap()[0].timestamp.secs, 0);
        b.flush_done(4.0);
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn failed_batch_blocks_overflow_into_drops() {
        let mut b = LogBufferPair::new(2, 60.0);
        b.append(sample(0, 0));
        b.append(sample(1, 0));
        b.swap();
        b.append(sample(2, 0));
        b.append(sample(3, 0));
        b.append(sample(4, 0));
        assert_eq!(b.overflow(), 1);
        let all: Vec<i64> = b.drain_all().iter().map(|r| r.timestamp.secs).collect();
        assert_eq!(all, vec![0, 1, 3, 4]);
    }

    #[test]
    fn ring_drops_oldest() {
        let mut r = RamRing::new(3);
        for i in 0..5 {
            r.push(i);
        }
        assert_eq!(r.dropped(), 2);
        assert_eq!(r.iter().copied().collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn appends_proceed_while_other_buffer_is_written() {
        // The flusher holds the lock only for the swap; the write itself
        // happens on a detached copy while the appender keeps going.
        let pair = Arc::new(Mutex::new(LogBufferPair::new(1 << 20, 1e9)));
        let written = Arc::new(Mutex::new(Vec::new()));
        let n = 20_000i64;
        let appender = {
            let pair = pair.clone();
            std::thread::spawn(move || {
                for i in 0..n {
                    pair.lock().unwrap().append(sample(i, 0));
                }
            })
        };
        let flusher = {
            let pair = pair.clone();
            let written = written.clone();
            std::thread::spawn(move || loop {
                let batch: Vec<Record> = pair.lock().unwrap().swap().to_vec();
                let done = appender_finished(&pair, n, &written, batch.len());
                written.lock().unwrap().extend(batch.iter().map(|r| r.timestamp.secs));
                pair.lock().unwrap().flush_done(0.0);
                if done {
                    break;
                }
            })
        };
        appender.join().unwrap();
        flusher.join().unwrap();
        let w = written.lock().unwrap();
        assert_eq!(w.len() as i64, n);
        assert!(w.iter().enumerate().all(|(i, s)| *s == i as i64));
    }

    fn appender_finished(
        pair: &Mutex<LogBufferPair>,
        n: i64,
        written: &Mutex<Vec<i64>>,
        batch: usize,
    ) -> bool {
        let pending = pair.lock().unwrap().active_len();
        written.lock().unwrap().len() + batch == n as usize && pending == 0
    }
}
