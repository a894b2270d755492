//! Playback buffer with adaptive pre-buffering.
//!
//! Video slot i covers transmission slots [(i-1)n, in). Chunk k (0-based) is
//! requested at the start of video slot k+1, so its delay W_k = A_k - k is at
//! least 1. The buffer follows
//!
//! ```text
//! psi(i) = max(psi(i-1) - 1{playing}, 0) + a_i
//! ```
//!
//! so a chunk is never played in the slot it arrives. Playback (re)starts in
//! the first slot where `psi >= rho * E_i`, E_i being the largest delay seen
//! over the last `window` video slots.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Prebuffering,
    Playing,
    Rebuffering,
    Finished,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Prebuffering => "prebuffering",
            Phase::Playing => "playing",
            Phase::Rebuffering => "rebuffering",
            Phase::Finished => "finished",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlaybackEvent {
    Started { slot: u64 },
    Stalled { slot: u64 },
    Resumed { slot: u64 },
    Finished { slot: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybackState {
    pub psi: u64,
    pub phase: Phase,
    pub window: u64,
    pub rho: f64,
    session_length: usize,
    arrivals: HashMap<usize, u64>,
    delays: Vec<(usize, u64)>,
    /// (A_k, W_k) inside the current window, oldest first.
    recent: VecDeque<(u64, u64)>,
    estimate: u64,
    last_arrivals: u64,
    last_slot: u64,
    pub start_slot: Option<u64>,
    pub stall_count: u64,
    pub stall_slots: u64,
    pub prebuffer_slots: u64,
    pub played: u64,
    next_to_play: usize,
}

impl PlaybackState {
    pub fn new(window: u64, rho: f64, session_length: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::config("playback.window", "must be >= 1"));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::config("playback.rho", format!("must be > 0, got {rho}")));
        }
        Ok(Self {
            psi: 0,
            phase: Phase::Prebuffering,
            window,
            rho,
            session_length,
            arrivals: HashMap::new(),
            delays: Vec::new(),
            recent: VecDeque::new(),
            estimate: 1,
            last_arrivals: 0,
            last_slot: 0,
            start_slot: None,
            stall_count: 0,
            stall_slots: 0,
            prebuffer_slots: 0,
            played: 0,
            next_to_play: 0,
        })
    }

    /// Registers the chunks completed during video slot `i`.
    pub fn record_arrivals(&mut self, completed: &[usize], i: u64) -> Result<()> {
        if i == 0 || i <= self.last_slot {
            return Err(Error::Accounting(format!(
                "video slot {i} after slot {}",
                self.last_slot
            )));
        }
        for &k in completed {
            if self.arrivals.contains_key(&k) {
                return Err(Error::Accounting(format!("chunk {k} delivered twice")));
            }
            let w = i.checked_sub(k as u64).filter(|&w| w >= 1).ok_or_else(|| {
                Error::Accounting(format!("chunk {k} arrived at video slot {i}, before it was requested"))
            })?;
            self.arrivals.insert(k, i);
            self.delays.push((k, w));
            self.recent.push_back((i, w));
        }
        self.last_arrivals = completed.len() as u64;
        self.last_slot = i;
        Ok(())
    }

    /// E_i with carry-forward on an empty window.
    pub fn window_max_delay(&mut self, i: u64) -> u64 {
        let lo = (i + 1).saturating_sub(self.window);
        while self.recent.front().is_some_and(|&(a, _)| a < lo) {
            self.recent.pop_front();
        }
        if let Some(max) = self.recent.iter().map(|&(_, w)| w).max() {
            self.estimate = max;
        }
        self.estimate
    }

    pub fn threshold(&self) -> f64 {
        self.rho * self.estimate as f64
    }

    fn all_arrived(&self) -> bool {
        self.arrivals.len() >= self.session_length
    }

    /// Advances one video slot. Must follow `record_arrivals` for slot `i`.
    pub fn playback_step(&mut self, i: u64) -> Result<Vec<PlaybackEvent>> {
        if i != self.last_slot {
            return Err(Error::Accounting(format!("step {i} without arrivals for that slot")));
        }
        let mut events = Vec::new();
        let a = self.last_arrivals;
        self.window_max_delay(i);
        match self.phase {
            Phase::Finished => return Ok(events),
            Phase::Playing => {
                if self.psi > 0 {
                    self.psi -= 1;
                    self.played += 1;
                    self.next_to_play += 1;
                    self.psi += a;
                    if self.played as usize >= self.session_length {
                        self.phase = Phase::Finished;
                        events.push(PlaybackEvent::Finished { slot: i });
                    }
                    return Ok(events);
                }
                self.stall_count += 1;
                self.stall_slots += 1;
                self.phase = Phase::Rebuffering;
                events.push(PlaybackEvent::Stalled { slot: i });
                self.psi += a;
            }
            Phase::Prebuffering => {
                self.prebuffer_slots += 1;
                self.psi += a;
            }
            Phase::Rebuffering => {
                self.stall_slots += 1;
                self.psi += a;
            }
        }
        // waiting: start once the buffer crosses the threshold, or when nothing
        // more can arrive
        let ready = self.psi > 0 && (self.psi as f64 >= self.threshold() || self.all_arrived());
        if ready {
            if self.phase == Phase::Prebuffering {
                self.start_slot = Some(i);
                events.push(PlaybackEvent::Started { slot: i });
            } else {
                events.push(PlaybackEvent::Resumed { slot: i });
            }
            self.phase = Phase::Playing;
        }
        Ok(events)
    }

    pub fn arrival_slot(&self, k: usize) -> Option<u64> {
        self.arrivals.get(&k).copied()
    }

    /// (k, W_k) in arrival order.
    pub fn delays(&self) -> &[(usize, u64)] {
        &self.delays
    }

    pub fn arrived(&self) -> u64 {
        self.arrivals.len() as u64
    }

    pub fn estimate(&self) -> u64 {
        self.estimate
    }

    pub fn last_arrivals(&self) -> u64 {
        self.last_arrivals
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    /// Index of the next chunk playback will consume.
    pub fn next_to_play(&self) -> usize {
        self.next_to_play
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeMetrics {
    pub delivered_chunks: usize,
    /// NaN when nothing was delivered.
    pub average_quality: f64,
    pub average_delay: f64,
    pub buffering_percent: f64,
    pub stall_count: u64,
    pub stall_slots: u64,
    pub prebuffer_slots: u64,
    pub start_slot: Option<u64>,
    pub defined: bool,
}

/// Per-user QoE summary; `qualities` holds D of every delivered chunk.
pub fn qoe_metrics(ps: &PlaybackState, qualities: &[f64]) -> QoeMetrics {
    let n = qualities.len();
    let defined = n > 0;
    let mean = |s: f64, c: usize| if c == 0 { f64::NAN } else { s / c as f64 };
    let delay_sum: u64 = ps.delays.iter().map(|&(_, w)| w).sum();
    let waited = ps.prebuffer_slots + ps.stall_slots;
    let total = waited + ps.played;
    QoeMetrics {
        delivered_chunks: n,
        average_quality: mean(qualities.iter().sum(), n),
        average_delay: mean(delay_sum as f64, ps.delays.len()),
        buffering_percent: if total == 0 { f64::NAN } else { 100.0 * waited as f64 / total as f64 },
        stall_count: ps.stall_count,
        stall_slots: ps.stall_slots,
        prebuffer_slots: ps.prebuffer_slots,
        start_slot: ps.start_slot,
        defined,
    }
}

pub const PLAYBACK_TRACE_HEADER: [&str; 6] = ["i", "userId", "psi", "phase", "E_i", "a_i"];
