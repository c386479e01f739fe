//! Deterministic discrete-event message network over the ring.
//!
//! Only phases travel on the network. Each send draws a delay (base plus
//! uniform jitter) and a drop decision from a seeded generator; deliveries are
//! processed in `(deliver_at, sender, seq)` order and each receiver keeps the
//! highest-sequence message per neighbour.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coordination::RingTopology;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub sender: usize,
    pub theta: f64,
    pub sent_at: f64,
    pub deliver_at: f64,
    pub seq: u64,
}

/// Per-link parameter overrides. Unset fields fall back to the global values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkOverride {
    pub edge: (usize, usize),
    #[serde(default)]
    pub base_delay: Option<f64>,
    #[serde(default)]
    pub jitter: Option<f64>,
    #[serde(default)]
    pub drop_prob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default)]
    pub base_delay: f64,
    /// Half-width of the uniform jitter.
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub drop_prob: f64,
    #[serde(default)]
    pub per_link_overrides: Vec<LinkOverride>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            base_delay: 0.0,
            jitter: 0.0,
            drop_prob: 0.0,
            per_link_overrides: Vec::new(),
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        let check_one = |out: &mut Vec<String>, what: &str, base: f64, jitter: f64, drop: f64| {
            if !(base >= 0.0 && base.is_finite()) {
                out.push(format!("{what}: base_delay must be >= 0"));
            }
            if !(jitter >= 0.0 && jitter.is_finite()) {
                out.push(format!("{what}: jitter must be >= 0"));
            }
            if !(0.0..=1.0).contains(&drop) {
                out.push(format!("{what}: drop_prob must lie in [0, 1]"));
            }
        };
        check_one(
            &mut out,
            "network",
            self.base_delay,
            self.jitter,
            self.drop_prob,
        );
        for o in &self.per_link_overrides {
            check_one(
                &mut out,
                &format!("link {:?}", o.edge),
                o.base_delay.unwrap_or(self.base_delay),
                o.jitter.unwrap_or(self.jitter),
                o.drop_prob.unwrap_or(self.drop_prob),
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum LinkCommand {
    Up,
    Down,
    /// Fixed delay replacing base delay and jitter until cleared.
    DelayOverride {
        delay: f64,
    },
    ClearOverride,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LinkState {
    up: bool,
    delay_override: Option<f64>,
}

/// One processed delivery, in processing order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delivery {
    pub to: usize,
    pub message: Message,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    to: usize,
    msg: Message,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (deliver_at, sender, seq, to)
        other
            .msg
            .deliver_at
            .total_cmp(&self.msg.deliver_at)
            .then(other.msg.sender.cmp(&self.msg.sender))
            .then(other.msg.seq.cmp(&self.msg.seq))
            .then(other.to.cmp(&self.to))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

#[derive(Debug, Clone)]
pub struct Network {
    topology: RingTopology,
    config: NetworkConfig,
    overrides: BTreeMap<(usize, usize), LinkOverride>,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Pending>,
    next_seq: Vec<u64>,
    latest: BTreeMap<(usize, usize), Message>,
    links: BTreeMap<(usize, usize), LinkState>,
    schedule: Vec<(f64, (usize, usize), LinkCommand)>,
    log: Vec<Delivery>,
    keep_log: bool,
    processed_until: f64,
}

impl Network {
    pub fn new(topology: RingTopology, config: NetworkConfig) -> Result<Self> {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::with_rng(topology, config, rng)
    }

    /// Uses an externally seeded generator (e.g. one stream of a scenario seed).
    pub fn with_rng(
        topology: RingTopology,
        config: NetworkConfig,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let problems = config.check();
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let mut overrides = BTreeMap::new();
        for o in &config.per_link_overrides {
            if !topology.is_edge(o.edge.0, o.edge.1) {
                return Err(Error::Topology(format!(
                    "override on non-edge {:?}",
                    o.edge
                )));
            }
            overrides.insert(edge_key(o.edge.0, o.edge.1), *o);
        }
        let links = topology
            .edges()
            .iter()
            .map(|&(a, b)| {
                (
                    edge_key(a, b),
                    LinkState {
                        up: true,
                        delay_override: None,
                    },
                )
            })
            .collect();
        let n = topology.len();
        Ok(Self {
            topology,
            config,
            overrides,
            rng,
            queue: BinaryHeap::new(),
            next_seq: vec![0; n],
            latest: BTreeMap::new(),
            links,
            schedule: Vec::new(),
            log: Vec::new(),
            keep_log: true,
            processed_until: f64::NEG_INFINITY,
        })
    }

    /// Disables the delivery log (long runs that do not need replay traces).
    pub fn set_logging(&mut self, keep: bool) {
        self.keep_log = keep;
        if !keep {
            self.log.clear();
        }
    }

    pub fn topology(&self) -> &RingTopology {
        &self.topology
    }

    fn apply_schedule(&mut self, now: f64) {
        while let Some(&(at, edge, cmd)) = self.schedule.first() {
            if at > now {
                break;
            }
            self.schedule.remove(0);
            let link = self
                .links
                .get_mut(&edge)
                .expect("scheduled edges are validated");
            match cmd {
                LinkCommand::Up => link.up = true,
                LinkCommand::Down => link.up = false,
                LinkCommand::DelayOverride { delay } => link.delay_override = Some(delay),
                LinkCommand::ClearOverride => link.delay_override = None,
            }
        }
    }

    /// Schedules a link state change at logical time `at`.
    pub fn set_link(&mut self, edge: (usize, usize), command: LinkCommand, at: f64) -> Result<()> {
        if !self.topology.is_edge(edge.0, edge.1) {
            return Err(Error::Topology(format!("unknown edge {edge:?}")));
        }
        if let LinkCommand::DelayOverride { delay } = command {
            if !(delay >= 0.0 && delay.is_finite()) {
                return Err(Error::Topology(format!(
                    "delay override must be >= 0 (got {delay})"
                )));
            }
        }
        let key = edge_key(edge.0, edge.1);
        // stable insertion keeps same-time commands in submission order
        let pos = self.schedule.partition_point(|(t, _, _)| *t <= at);
        self.schedule.insert(pos, (at, key, command));
        Ok(())
    }

    pub fn send(&mut self, from: usize, to: usize, theta: f64, now: f64) -> Result<()> {
        if !self.topology.is_edge(from, to) {
            return Err(Error::Topology(format!(
                "{from} -> {to} is not a ring edge"
            )));
        }
        self.apply_schedule(now);
        let seq = self.next_seq[from];
        self.next_seq[from] += 1;
        let key = edge_key(from, to);
        let link = self.links[&key];
        let o = self.overrides.get(&key);
        let base = o
            .and_then(|o| o.base_delay)
            .unwrap_or(self.config.base_delay);
        let jitter = o.and_then(|o| o.jitter).unwrap_or(self.config.jitter);
        let drop_prob = o.and_then(|o| o.drop_prob).unwrap_or(self.config.drop_prob);
        // draws happen unconditionally so link state never shifts the random stream
        let drop_draw: f64 = self.rng.random();
        let jitter_draw: f64 = self.rng.random_range(-1.0..=1.0);
        if !link.up || drop_draw < drop_prob {
            return Ok(());
        }
        let delay = match link.delay_override {
            Some(d) => d,
            None => (base + jitter * jitter_draw).max(0.0),
        };
        self.queue.push(Pending {
            to,
            msg: Message {
                sender: from,
                theta,
                sent_at: now,
                deliver_at: now + delay,
                seq,
            },
        });
        Ok(())
    }

    fn deliver_until(&mut self, now: f64) {
        self.apply_schedule(now);
        while let Some(top) = self.queue.peek() {
            if top.msg.deliver_at > now {
                break;
            }
            let p = self.queue.pop().expect("peeked");
            let slot = self.latest.entry((p.to, p.msg.sender)).or_insert(p.msg);
            if p.msg.seq > slot.seq {
                *slot = p.msg;
            }
            if self.keep_log {
                self.log.push(Delivery {
                    to: p.to,
                    message: p.msg,
                });
            }
        }
        self.processed_until = self.processed_until.max(now);
    }

    /// Latest delivered message from each neighbour of `to` (by sequence number).
    pub fn poll(&mut self, to: usize, now: f64) -> Vec<Message> {
        self.deliver_until(now);
        let mut nb = self.topology.neighbors(to).to_vec();
        nb.dedup();
        nb.iter()
            .filter_map(|&j| self.latest.get(&(to, j)).copied())
            .collect()
    }

    /// Latest delivered message from `neighbor` at `to`.
    pub fn latest(&mut self, to: usize, neighbor: usize, now: f64) -> Option<Message> {
        self.deliver_until(now);
        self.latest.get(&(to, neighbor)).copied()
    }

    /// Age of the latest delivered message from `neighbor`; infinite if none.
    pub fn staleness(&mut self, to: usize, neighbor: usize, now: f64) -> f64 {
        match self.latest(to, neighbor, now) {
            Some(m) => now - m.sent_at,
            None => f64::INFINITY,
        }
    }

    pub fn delivery_log(&self) -> &[Delivery] {
        &self.log
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }
}
