//! Best-effort uplink: bounded queue, per-attempt rate limit and
//! exponential backoff. Nothing here is visible to the storage path.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;

use crate::config::TelemetryConfig;
use crate::model::Record;
use crate::storage::serialize_record;

pub fn topic(site_id: &str) -> String {
    format!("winddaq/{site_id}/records")
}

/// `min(base·2^(attempt−1), cap)` scaled by a uniform factor in
/// `[1−jitter, 1+jitter]` when an RNG is supplied.
pub fn backoff_delay<R: Rng>(
    attempt: u32,
    base_s: f64,
    cap_s: f64,
    jitter: f64,
    rng: Option<&mut R>,
) -> f64 {
    assert!(attempt >= 1, "attempt counts from 1");
    let exp = (attempt - 1).min(62) as i32;
    let nominal = (base_s * 2f64.powi(exp)).min(cap_s);
    match rng {
        Some(rng) if jitter > 0.0 => nominal * (1.0 + rng.gen_range(-jitter..=jitter)),
        _ => nominal,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub topic: String,
    pub payload: String,
}

/// Delivery endpoint stand-in. Counts deliveries and optionally writes a
/// transcript line per message.
pub struct Broker {
    delivered: u64,
    transcript: Option<Box<dyn Write + Send>>,
}

impl std::fmt::Debug for Broker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Broker")
            .field("delivered", &self.delivered)
            .field("transcript", &self.transcript.is_some())
            .finish()
    }
}

impl Broker {
    pub fn new() -> Self {
        Self {
            delivered: 0,
            transcript: None,
        }
    }

    pub fn with_transcript(sink: Box<dyn Write + Send>) -> Self {
        Self {
            delivered: 0,
            transcript: Some(sink),
        }
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    fn deliver(&mut self, now_s: f64, topic: &str, payload: &str) {
        self.delivered += 1;
        if let Some(t) = self.transcript.as_mut() {
            let _ = writeln!(t, "{now_s:.2} {topic} {payload}");
        }
    }

    pub fn finish(&mut self) {
        if let Some(t) = self.transcript.as_mut() {
            let _ = t.flush();
        }
    }
}

impl Default for Broker {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone)]
pub struct TelemetryQueue {
    pending: VecDeque<String>,
    capacity: usize,
    dropped: u64,
    attempt: u32,
    next_attempt_at: f64,
    rate_limit: u32,
    base_s: f64,
    cap_s: f64,
    jitter: f64,
    topic: String,
}

impl TelemetryQueue {
    pub fn new(config: &TelemetryConfig) -> Self {
        Self {
            pending: VecDeque::with_capacity(config.queue_capacity.min(1 << 16)),
            capacity: config.queue_capacity,
            dropped: 0,
            attempt: 0,
            next_attempt_at: f64::NEG_INFINITY,
            rate_limit: config.rate_limit,
            base_s: config.backoff_base_s,
            cap_s: config.backoff_cap_s,
            jitter: config.backoff_jitter,
            topic: topic(&config.site_id),
        }
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn attempt(&self) -> u32 {
        self.attempt
    }

    pub fn next_attempt_at(&self) -> f64 {
        self.next_attempt_at
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn front(&self) -> Option<&str> {
        self.pending.front().map(String::as_str)
    }

    pub fn enqueue_payload(&mut self, payload: String) {
        if self.pending.len() >= self.capacity {
            self.pending.pop_front();
            self.dropped += 1;
        }
        self.pending.push_back(payload);
    }

    pub fn enqueue(&mut self, record: &Record) {
        self.enqueue_payload(serialize_record(record));
    }

    /// One transmit attempt. Sends up to `rate_limit` messages when the
    /// link is up; on a down link schedules the next attempt.
    pub fn try_transmit<R: Rng>(
        &mut self,
        link_up: bool,
        now_s: f64,
        broker: &mut Broker,
        rng: &mut R,
    ) -> usize {
        if now_s < self.next_attempt_at || self.pending.is_empty() {
            return 0;
        }
        if !link_up {
            self.attempt += 1;
            let delay = backoff_delay(self.attempt, self.base_s, self.cap_s, self.jitter, Some(rng));
            self.next_attempt_at = now_s + delay;
            return 0;
        }
        self.attempt = 0;
        let n = (self.rate_limit as usize).min(self.pending.len());
        for payload in self.pending.drain(..n) {
            broker.deliver(now_s, &self.topic, &payload);
        }
        n
    }

    /// Volatile contents are lost.
    pub fn clear(&mut self) {
        self.pending.clear();
        self.attempt = 0;
        self.next_attempt_at = f64::NEG_INFINITY;
    }
}
