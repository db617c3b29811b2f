use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    AgentToHq,
    ReporterToHq,
    HqToAgent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BusConfig {
    /// Drop probability of agent to HQ messages.
    pub p_cf: f64,
    /// Drop probability of reporter to HQ messages.
    pub p_ef: f64,
    /// Drop probability of HQ to agent messages.
    pub p_hq: f64,
    /// Delivery delay in ticks.
    pub latency_ticks: u64,
}

impl Default for BusConfig {
    fn default() -> Self {
        Self { p_cf: 0.0, p_ef: 0.0, p_hq: 0.0, latency_ticks: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<M> {
    pub channel: Channel,
    pub from: u32,
    pub sent_tick: u64,
    pub deliver_tick: u64,
    pub msg: M,
}

/// FIFO message queue that drops each message with its channel's failure
/// probability.
#[derive(Debug, Clone)]
pub struct MessageBus<M> {
    pub config: BusConfig,
    queue: VecDeque<Envelope<M>>,
    pub sent: u64,
    pub dropped: u64,
}

impl<M> MessageBus<M> {
    pub fn new(config: BusConfig) -> Self {
        Self { config, queue: VecDeque::new(), sent: 0, dropped: 0 }
    }

    pub fn failure_prob(&self, channel: Channel) -> f64 {
        match channel {
            Channel::AgentToHq => self.config.p_cf,
            Channel::ReporterToHq => self.config.p_ef,
            Channel::HqToAgent => self.config.p_hq,
        }
    }

    /// Sends `msg`. Consumes one uniform draw; returns whether the message
    /// will be delivered.
    pub fn deliver(&mut self, channel: Channel, from: u32, tick: u64, msg: M, rng: &mut impl Rng) -> bool {
        self.sent += 1;
        let u: f64 = rng.random();
        if u < self.failure_prob(channel) {
            self.dropped += 1;
            return false;
        }
        let deliver_tick = tick + self.config.latency_ticks;
        self.queue.push_back(Envelope { channel, from, sent_tick: tick, deliver_tick, msg });
        true
    }

    /// Removes and returns, in send order, every message due by `tick`.
    pub fn take_ready(&mut self, tick: u64) -> Vec<Envelope<M>> {
        let mut out = Vec::new();
        let mut keep = VecDeque::with_capacity(self.queue.len());
        while let Some(e) = self.queue.pop_front() {
            if e.deliver_tick <= tick {
                out.push(e);
            } else {
                keep.push_back(e);
            }
        }
        self.queue = keep;
        out
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamKind};

    #[test]
    fn extremes() {
        let mut rng = stream(0, StreamKind::Bus, 0);
        let mut bus = MessageBus::new(BusConfig { p_cf: 1.0, ..Default::default() });
        for i in 0..100 {
            assert!(!bus.deliver(Channel::AgentToHq, 0, i, (), &mut rng));
            assert!(bus.deliver(Channel::HqToAgent, 0, i, (), &mut rng));
        }
        assert_eq!(bus.take_ready(100).len(), 100);
    }

    #[test]
    fn latency_and_order() {
        let mut rng = stream(0, StreamKind::Bus, 0);
        let mut bus = MessageBus::new(BusConfig { latency_ticks: 2, ..Default::default() });
        bus.deliver(Channel::AgentToHq, 0, 0, 1, &mut rng);
        bus.deliver(Channel::AgentToHq, 1, 1, 2, &mut rng);
        assert!(bus.take_ready(1).is_empty());
        assert_eq!(bus.take_ready(2).iter().map(|e| e.msg).collect::<Vec<_>>(), vec![1]);
        assert_eq!(bus.take_ready(3).iter().map(|e| e.msg).collect::<Vec<_>>(), vec![2]);
    }
}
