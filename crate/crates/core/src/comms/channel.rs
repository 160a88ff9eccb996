use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Fixed one-way latency (s).
    pub latency: f64,
    /// Extra delay drawn uniformly from `[0, jitter]` (s).
    pub jitter: f64,
    /// Independent per-message loss probability in `[0, 1)`.
    pub loss: f64,
    pub seed: u64,
}

impl ChannelParams {
    pub fn ideal() -> Self {
        ChannelParams { latency: 0.0, jitter: 0.0, loss: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.latency >= 0.0 && self.latency.is_finite()) {
            return Err("latency must be >= 0".into());
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err("jitter must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.loss) {
            return Err("loss must lie in [0, 1)".into());
        }
        Ok(())
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::ideal()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<T> {
    pub sender: u64,
    pub sent_at: f64,
    pub payload: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChannelStats {
    pub submitted: u64,
    pub dropped: u64,
    pub delivered: u64,
}

#[derive(Debug, Clone)]
struct InFlight<T> {
    due: f64,
    seq: u64,
    env: Envelope<T>,
}

/// Seeded lossy, delayed link. Each submission consumes exactly two draws
/// (loss, jitter) so the schedule depends only on the seed and the
/// submission order.
#[derive(Debug, Clone)]
pub struct Channel<T> {
    params: ChannelParams,
    rng: ChaCha8Rng,
    in_flight: Vec<InFlight<T>>,
    last_due: BTreeMap<u64, f64>,
    seq: u64,
    stats: ChannelStats,
}

impl<T> Channel<T> {
    pub fn new(params: ChannelParams) -> Self {
        Channel {
            params,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            in_flight: Vec::new(),
            last_due: BTreeMap::new(),
            seq: 0,
            stats: ChannelStats::default(),
        }
    }

    pub fn stats(&self) -> ChannelStats {
        self.stats
    }

    pub fn submit(&mut self, env: Envelope<T>) {
        self.stats.submitted += 1;
        let loss_draw: f64 = self.rng.gen();
        let jitter_draw: f64 = self.rng.gen();
        if loss_draw < self.params.loss {
            self.stats.dropped += 1;
            return;
        }
        let mut due = env.sent_at + self.params.latency + self.params.jitter * jitter_draw;
        // per-sender FIFO: never overtake an earlier message from the same sender
        let last = self.last_due.entry(env.sender).or_insert(f64::NEG_INFINITY);
        if due < *last {
            due = *last;
        }
        *last = due;
        self.in_flight.push(InFlight { due, seq: self.seq, env });
        self.seq += 1;
    }

    /// Submits `inbox`, then returns every message due by `now` ordered by
    /// delivery time and submission order.
    pub fn channel_step(&mut self, now: f64, inbox: impl IntoIterator<Item = Envelope<T>>) -> Vec<Envelope<T>> {
        for env in inbox {
            self.submit(env);
        }
        let (mut ready, waiting): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.in_flight).into_iter().partition(|m| m.due <= now);
        self.in_flight = waiting;
        ready.sort_by(|a, b| a.due.total_cmp(&b.due).then(a.seq.cmp(&b.seq)));
        self.stats.delivered += ready.len() as u64;
        ready.into_iter().map(|m| m.env).collect()
    }
}
