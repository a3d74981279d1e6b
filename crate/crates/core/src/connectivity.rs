//! V2V broadcast channel with sampled latency and packet-loss delay.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// State broadcast by one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct V2vMessage {
    pub sender: usize,
    pub t_sent: f64,
    pub x: f64,
    pub v: f64,
    pub a: f64,
    /// Sender length (m), so receivers can measure bumper gaps.
    pub len: f64,
}

/// What happens to a message whose loss draw fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// Deliver late by `loss_penalty`.
    #[default]
    Delay,
    /// Never deliver.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub latency_mean: f64,
    pub latency_min: f64,
    pub latency_max: f64,
    pub latency_std: f64,
    pub packet_loss_prob: f64,
    pub loss_penalty: f64,
    pub msg_period: f64,
    pub loss_mode: LossMode,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            latency_mean: 0.020,
            latency_min: 0.005,
            latency_max: 0.050,
            latency_std: 0.010,
            packet_loss_prob: 0.01,
            loss_penalty: 0.01,
            msg_period: 0.01,
            loss_mode: LossMode::Delay,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let values = [
            ("latency_mean", self.latency_mean),
            ("latency_min", self.latency_min),
            ("latency_max", self.latency_max),
            ("latency_std", self.latency_std),
            ("packet_loss_prob", self.packet_loss_prob),
            ("loss_penalty", self.loss_penalty),
            ("msg_period", self.msg_period),
        ];
        for (key, value) in values {
            if !value.is_finite() {
                return Err(SimError::config(key, "must be finite"));
            }
        }
        if !(0.0 <= self.latency_min && self.latency_min <= self.latency_mean && self.latency_mean <= self.latency_max)
        {
            return Err(SimError::config(
                "latency_mean",
                "latencies must satisfy 0 <= latency_min <= latency_mean <= latency_max",
            ));
        }
        if self.latency_std < 0.0 {
            return Err(SimError::config("latency_std", "latency_std must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.packet_loss_prob) {
            return Err(SimError::config("packet_loss_prob", "packet_loss_prob must lie in [0, 1]"));
        }
        if self.loss_penalty < 0.0 {
            return Err(SimError::config("loss_penalty", "loss_penalty must be non-negative"));
        }
        if self.msg_period <= 0.0 {
            return Err(SimError::config("msg_period", "msg_period must be positive"));
        }
        Ok(())
    }
}

/// Gaussian latency clamped to `[latency_min, latency_max]`.
pub fn sample_latency<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> f64 {
    if cfg.latency_std == 0.0 {
        return cfg.latency_mean;
    }
    // validate() guarantees a finite, non-negative std
    let normal = Normal::new(cfg.latency_mean, cfg.latency_std).expect("valid latency distribution");
    normal.sample(rng).clamp(cfg.latency_min, cfg.latency_max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    /// `None` when the message was dropped.
    pub deliver_at: Option<f64>,
    pub penalized: bool,
}

/// Schedule one message. The loss draw happens first, then the latency draw.
pub fn transmit<R: Rng + ?Sized>(msg: &V2vMessage, cfg: &ChannelConfig, rng: &mut R) -> Transmission {
    let n: f64 = rng.gen();
    let penalized = n > 1.0 - cfg.packet_loss_prob;
    let latency = sample_latency(cfg, rng);
    let deliver_at = match (penalized, cfg.loss_mode) {
        (false, _) => Some(msg.t_sent + latency),
        (true, LossMode::Delay) => Some(msg.t_sent + latency + cfg.loss_penalty),
        (true, LossMode::Drop) => None,
    };
    Transmission { deliver_at, penalized }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    deliver_at: f64,
    seq: u64,
    msg: V2vMessage,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // min-heap on (deliver_at, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .deliver_at
            .total_cmp(&self.deliver_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Snapshot of a sender's state and how old it is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub msg: V2vMessage,
    pub age: f64,
}

/// Receiver-side queue: in-flight messages plus the freshest delivered
/// message per sender.
#[derive(Debug, Clone, Default)]
pub struct DelayedInbox {
    pending: BinaryHeap<Pending>,
    latest: BTreeMap<usize, V2vMessage>,
    seq: u64,
}

impl DelayedInbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn enqueue(&mut self, msg: V2vMessage, deliver_at: f64) {
        self.pending.push(Pending { deliver_at, seq: self.seq, msg });
        self.seq += 1;
    }

    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }

    /// Move every message due by `now` into the delivered set. Older
    /// messages never replace newer ones.
    pub fn deliver(&mut self, now: f64) {
        while let Some(top) = self.pending.peek() {
            if top.deliver_at > now {
                break;
            }
            let Pending { msg, .. } = self.pending.pop().expect("peeked");
            match self.latest.get(&msg.sender) {
                Some(held) if held.t_sent > msg.t_sent => {}
                _ => {
                    self.latest.insert(msg.sender, msg);
                }
            }
        }
    }

    /// Freshest delivered message from `sender` as of `now`.
    pub fn latest_snapshot(&mut self, sender: usize, now: f64) -> Option<Snapshot> {
        self.deliver(now);
        self.latest.get(&sender).map(|msg| Snapshot { msg: *msg, age: now - msg.t_sent })
    }
}

/// A seeded channel shared by all links of one run.
#[derive(Debug, Clone)]
pub struct Channel {
    pub cfg: ChannelConfig,
    rng: ChaCha8Rng,
    sent: u64,
    penalized: u64,
}

impl Channel {
    pub fn new(cfg: ChannelConfig, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        cfg.validate()?;
        Ok(Channel { cfg, rng: ChaCha8Rng::seed_from_u64(seed), sent: 0, penalized: 0 })
    }

    /// Transmit `msg` towards `inbox`.
    pub fn send(&mut self, msg: V2vMessage, inbox: &mut DelayedInbox) -> Transmission {
        let tx = transmit(&msg, &self.cfg, &mut self.rng);
        self.sent += 1;
        if tx.penalized {
            self.penalized += 1;
        }
        if let Some(at) = tx.deliver_at {
            inbox.enqueue(msg, at);
        }
        tx
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn penalized(&self) -> u64 {
        self.penalized
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn msg(sender: usize, t_sent: f64) -> V2vMessage {
        V2vMessage { sender, t_sent, x: t_sent * 10.0, v: 10.0, a: 0.0, len: 4.3 }
    }

    #[test]
    fn degenerate_latency() {
        let cfg = ChannelConfig { latency_std: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(sample_latency(&cfg, &mut rng), cfg.latency_mean);
        }
    }

    #[test]
    fn latency_within_bounds() {
        let cfg = ChannelConfig { latency_std: 0.05, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let d = sample_latency(&cfg, &mut rng);
            assert!(d >= cfg.latency_min && d <= cfg.latency_max);
        }
    }

    #[test]
    fn lossless_and_always_lossy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = ChannelConfig { packet_loss_prob: 0.0, latency_std: 0.0, ..Default::default() };
        for k in 0..1000 {
            let tx = transmit(&msg(0, k as f64), &cfg, &mut rng);
            assert!(!tx.penalized);
            assert_eq!(tx.deliver_at, Some(k as f64 + cfg.latency_mean));
        }
        let cfg = ChannelConfig { packet_loss_prob: 1.0, latency_std: 0.0, ..Default::default() };
        for k in 0..1000 {
            let tx = transmit(&msg(0, k as f64), &cfg, &mut rng);
            assert!(tx.penalized);
            assert_eq!(tx.deliver_at, Some(k as f64 + cfg.latency_mean + cfg.loss_penalty));
        }
        let cfg = ChannelConfig { packet_loss_prob: 1.0, loss_mode: LossMode::Drop, ..Default::default() };
        assert_eq!(transmit(&msg(0, 0.0), &cfg, &mut rng).deliver_at, None);
    }

    #[test]
    fn empty_inbox() {
        let mut inbox = DelayedInbox::new();
        assert!(inbox.latest_snapshot(0, 100.0).is_none());
        inbox.enqueue(msg(0, 1.0), 1.5);
        assert!(inbox.latest_snapshot(0, 1.4).is_none());
        assert!(inbox.latest_snapshot(1, 2.0).is_none());
    }

    #[test]
    fn freshest_wins() {
        let mut inbox = DelayedInbox::new();
        inbox.enqueue(msg(2, 10.00), 10.02);
        inbox.enqueue(msg(2, 10.01), 10.03);
        let snap = inbox.latest_snapshot(2, 10.05).unwrap();
        assert_eq!(snap.msg.t_sent, 10.01);
        assert!((snap.age - 0.04).abs() < 1e-12);
    }

    #[test]
    fn out_of_order_arrival_keeps_newer() {
        // Enumerate both arrival orders: the result must be the same.
        let older = msg(1, 5.00);
        let newer = msg(1, 5.01);
        for (first, second) in [((older, 5.03), (newer, 5.04)), ((newer, 5.03), (older, 5.04))] {
            let mut inbox = DelayedInbox::new();
            inbox.enqueue(first.0, first.1);
            inbox.enqueue(second.0, second.1);
            let snap = inbox.latest_snapshot(1, 5.10).unwrap();
            assert_eq!(snap.msg.t_sent, 5.01);
        }
        // Also when the older message lands in a later drain.
        let mut inbox = DelayedInbox::new();
        inbox.enqueue(newer, 5.02);
        inbox.enqueue(older, 5.08);
        assert_eq!(inbox.latest_snapshot(1, 5.05).unwrap().msg.t_sent, 5.01);
        assert_eq!(inbox.latest_snapshot(1, 5.10).unwrap().msg.t_sent, 5.01);
        assert_eq!(inbox.in_flight(), 0);
    }

    #[test]
    fn same_seed_same_schedule() {
        let schedule = |seed| {
            let mut ch = Channel::new(ChannelConfig::default(), seed).unwrap();
            let mut inbox = DelayedInbox::new();
            (0..500).map(|k| ch.send(msg(0, k as f64 * 0.01), &mut inbox).deliver_at).collect::<Vec<_>>()
        };
        assert_eq!(schedule(42), schedule(42));
        assert_ne!(schedule(42), schedule(43));
    }

    #[test]
    fn rejects_bad_config() {
        let bad = ChannelConfig { latency_min: 0.03, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ChannelConfig { packet_loss_prob: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ChannelConfig { msg_period: 0.0, ..Default::default() };
        assert!(Channel::new(bad, 0).is_err());
    }
}
