//! Emulated teleoperation channel: Gaussian delay with jitter, Bernoulli
//! loss, timestamped latest-sample-hold delivery and a watchdog.
//!
//! All operations take explicit simulated time; nothing reads the wall
//! clock. Each channel owns a seeded RNG stream, so a given seed and send
//! schedule reproduce the delivery schedule bit for bit.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::Vec6;

/// Delay/jitter/loss triple describing one direction of the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkCondition {
    /// Mean one-way delay (s).
    pub mean_delay: f64,
    /// Delay standard deviation (s).
    pub std_delay: f64,
    /// Probability in `[0, 1]` that a message is dropped.
    pub loss_prob: f64,
}

impl NetworkCondition {
    pub const fn local() -> Self {
        Self { mean_delay: 0.0, std_delay: 0.0, loss_prob: 0.0 }
    }

    pub const fn good() -> Self {
        Self { mean_delay: 0.040, std_delay: 0.010, loss_prob: 0.0 }
    }

    pub const fn fair() -> Self {
        Self { mean_delay: 0.080, std_delay: 0.020, loss_prob: 0.005 }
    }

    pub const fn poor() -> Self {
        Self { mean_delay: 0.120, std_delay: 0.040, loss_prob: 0.010 }
    }

    /// Look a named condition up (`local|good|fair|poor`).
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "local" => Ok(Self::local()),
            "good" => Ok(Self::good()),
            "fair" => Ok(Self::fair()),
            "poor" => Ok(Self::poor()),
            other => Err(Error::Config(format!(
                "unknown network condition '{other}' (expected local|good|fair|poor)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean_delay < 0.0 || self.std_delay < 0.0 {
            return Err(Error::Config("network delays must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(Error::Config("loss probability must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Mean and standard deviation of `max(0, N(mean, std))`.
    ///
    /// Closed-form moments of the zero-truncated Gaussian; reference for the
    /// skew report when `std` is large relative to `mean`.
    pub fn truncated_moments(&self) -> (f64, f64) {
        if self.std_delay == 0.0 {
            return (self.mean_delay.max(0.0), 0.0);
        }
        let mu = self.mean_delay;
        let sigma = self.std_delay;
        let z = mu / sigma;
        let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cdf = 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
        let mean = mu * cdf + sigma * phi;
        let second = (mu * mu + sigma * sigma) * cdf + mu * sigma * phi;
        let var = (second - mean * mean).max(0.0);
        (mean, var.sqrt())
    }
}

fn erf(x: f64) -> f64 {
    // Abramowitz & Stegun 7.1.26, |error| < 1.5e-7.
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Timestamped, sequenced payload crossing the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedMsg {
    /// Sender clock at emission (s).
    pub stamp: f64,
    /// Strictly increasing per sender.
    pub seq: u64,
    pub payload: Vec6,
}

/// Result of polling the receive side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Poll {
    /// A newer message arrived since the last poll.
    Fresh(Vec6),
    /// No new arrival; previously delivered payload held.
    Held(Vec6),
    /// Nothing has ever been delivered.
    Nothing,
}

impl Poll {
    pub fn payload(&self) -> Option<Vec6> {
        match self {
            Poll::Fresh(p) | Poll::Held(p) => Some(*p),
            Poll::Nothing => None,
        }
    }

    pub fn is_fresh(&self) -> bool {
        matches!(self, Poll::Fresh(_))
    }
}

/// Watchdog verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Watchdog {
    Ok,
    Fallback,
}

/// One direction of the emulated link, sender and receiver ends together.
#[derive(Debug, Clone)]
pub struct Channel {
    cond: NetworkCondition,
    rng: ChaCha8Rng,
    delay: Normal<f64>,
    in_flight: Vec<(f64, TimedMsg)>,
    next_seq: u64,
    held: Option<Vec6>,
    last_seq: Option<u64>,
    last_delivery_time: f64,
    /// Sends are suppressed inside this window (scripted outage).
    outage: Option<(f64, f64)>,
}

impl Channel {
    pub fn new(cond: NetworkCondition, seed: u64) -> Result<Self> {
        cond.validate()?;
        let delay = Normal::new(cond.mean_delay, cond.std_delay)
            .map_err(|e| Error::Config(format!("delay distribution: {e}")))?;
        Ok(Self {
            cond,
            rng: ChaCha8Rng::seed_from_u64(seed),
            delay,
            in_flight: Vec::new(),
            next_seq: 0,
            held: None,
            last_seq: None,
            last_delivery_time: 0.0,
            outage: None,
        })
    }

    pub fn condition(&self) -> &NetworkCondition {
        &self.cond
    }

    /// Suppress all sends for `now` in `[start, end)`.
    pub fn set_outage(&mut self, start: f64, end: f64) {
        self.outage = Some((start, end));
    }

    /// Enqueue a pre-built message; drops it with the configured loss
    /// probability, otherwise samples `max(0, N(mean, std))` transit delay.
    pub fn send_msg(&mut self, msg: TimedMsg, now: f64) {
        if let Some((t0, t1)) = self.outage {
            if now >= t0 && now < t1 {
                return;
            }
        }
        if self.cond.loss_prob > 0.0 && self.rng.gen::<f64>() < self.cond.loss_prob {
            return;
        }
        let transit = if self.cond.std_delay == 0.0 {
            self.cond.mean_delay
        } else {
            self.delay.sample(&mut self.rng).max(0.0)
        };
        self.in_flight.push((now + transit, msg));
    }

    /// Stamp, sequence and enqueue a payload.
    pub fn send(&mut self, payload: Vec6, now: f64) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.send_msg(TimedMsg { stamp: now, seq, payload }, now);
        seq
    }

    /// Surface the highest-sequence message with `deliver_at <= now`; stale
    /// (lower-sequence) arrivals are discarded, and in a gap the previously
    /// delivered payload is held.
    pub fn poll(&mut self, now: f64) -> Poll {
        let mut best: Option<TimedMsg> = None;
        self.in_flight.retain(|(deliver_at, msg)| {
            if *deliver_at <= now {
                let newer_than_held = self.last_seq.map_or(true, |s| msg.seq > s);
                let newer_than_best = best.map_or(true, |b| msg.seq > b.seq);
                if newer_than_held && newer_than_best {
                    best = Some(*msg);
                }
                false
            } else {
                true
            }
        });
        match best {
            Some(msg) => {
                self.held = Some(msg.payload);
                self.last_seq = Some(msg.seq);
                self.last_delivery_time = now;
                Poll::Fresh(msg.payload)
            }
            None => match self.held {
                Some(p) => Poll::Held(p),
                None => Poll::Nothing,
            },
        }
    }

    /// Seconds since the last fresh delivery (session start counts as one).
    pub fn silence(&self, now: f64) -> f64 {
        now - self.last_delivery_time
    }

    /// Last delivered sequence number, if any.
    pub fn last_seq(&self) -> Option<u64> {
        self.last_seq
    }

    /// Fallback when no fresh delivery arrived within `timeout`.
    pub fn watchdog(&self, now: f64, timeout: f64) -> Watchdog {
        if self.silence(now) > timeout {
            Watchdog::Fallback
        } else {
            Watchdog::Ok
        }
    }
}

/// Empirical-vs-configured channel statistics over seeded samples.
#[derive(Debug, Clone, Serialize)]
pub struct NetemReport {
    pub samples: usize,
    pub configured_mean: f64,
    pub configured_std: f64,
    pub configured_loss: f64,
    /// Analytic moments of the zero-truncated delay distribution.
    pub truncated_mean: f64,
    pub truncated_std: f64,
    pub empirical_mean: f64,
    pub empirical_std: f64,
    pub empirical_loss: f64,
    pub mean_rel_err: f64,
    pub std_rel_err: f64,
    pub loss_abs_err: f64,
    /// Relative shift of the mean caused by truncation at zero.
    pub truncation_skew: f64,
    pub pass: bool,
}

/// Tolerances: mean within 2% rel, std within 3% rel, loss within 0.1 pp abs.
pub const STATS_MEAN_REL_TOL: f64 = 0.02;
pub const STATS_STD_REL_TOL: f64 = 0.03;
pub const STATS_LOSS_ABS_TOL: f64 = 0.001;

/// Draw `n` sends through a fresh channel and compare delay/loss statistics
/// against the configured condition.
pub fn sample_statistics(cond: &NetworkCondition, n: usize, seed: u64) -> Result<NetemReport> {
    cond.validate()?;
    let mut ch = Channel::new(*cond, seed)?;
    let mut delays = Vec::with_capacity(n);
    let mut lost = 0usize;
    for i in 0..n {
        let now = i as f64;
        ch.in_flight.clear();
        ch.send(Vec6::zeros(), now);
        match ch.in_flight.first() {
            Some((deliver_at, _)) => delays.push(deliver_at - now),
            None => lost += 1,
        }
    }
    let kept = delays.len().max(1) as f64;
    let mean = delays.iter().sum::<f64>() / kept;
    let var = delays.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / kept;
    let std = var.sqrt();
    let loss = lost as f64 / n as f64;

    let (tmean, tstd) = cond.truncated_moments();
    let rel = |emp: f64, cfg: f64| {
        if cfg == 0.0 {
            emp.abs()
        } else {
            (emp - cfg).abs() / cfg
        }
    };
    let mean_rel_err = rel(mean, cond.mean_delay);
    let std_rel_err = rel(std, cond.std_delay);
    let loss_abs_err = (loss - cond.loss_prob).abs();
    let truncation_skew = rel(tmean, cond.mean_delay.max(0.0));
    let pass = mean_rel_err <= STATS_MEAN_REL_TOL
        && std_rel_err <= STATS_STD_REL_TOL
        && loss_abs_err <= STATS_LOSS_ABS_TOL;
    Ok(NetemReport {
        samples: n,
        configured_mean: cond.mean_delay,
        configured_std: cond.std_delay,
        configured_loss: cond.loss_prob,
        truncated_mean: tmean,
        truncated_std: tstd,
        empirical_mean: mean,
        empirical_std: std,
        empirical_loss: loss,
        mean_rel_err,
        std_rel_err,
        loss_abs_err,
        truncation_skew,
        pass,
    })
}
