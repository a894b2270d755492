//! Client-side pull congestion control.
//!
//! Each user keeps a request queue Q (bits requested but not yet received)
//! and a virtual queue theta (quality debt). At every chunk-request slot it
//! picks the mode minimizing `Q*B - theta*D`, and the auxiliary target gamma
//! maximizing `V*phi(gamma) - theta*gamma`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::{QualityRateProfile, VideoSession};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityConfig {
    pub alpha: f64,
    /// Penalty weight V.
    pub v: f64,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self { alpha: 1.0, v: 2e14 }
    }
}

impl UtilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("utility.alpha", format!("must be >= 0, got {}", self.alpha)));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(Error::config("utility.V", format!("must be > 0, got {}", self.v)));
        }
        Ok(())
    }
}

/// alpha-fair utility phi(x).
pub fn utility(alpha: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("utility needs x > 0, got {x}")));
    }
    Ok(if alpha == 1.0 {
        x.ln()
    } else {
        x.powf(1.0 - alpha) / (1.0 - alpha)
    })
}

const GOLDEN_TOL: f64 = 1e-9;

fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // the bracket never touches the bounds exactly; snap when they win
    [lo, hi]
        .into_iter()
        .fold(mid, |best, x| if f(x) > f(best) { x } else { best })
}

/// argmax over [d_min, d_max] of `V*phi(gamma) - theta*gamma`.
pub fn optimize_gamma(theta: f64, cfg: &UtilityConfig, d_min: f64, d_max: f64) -> Result<f64> {
    if !(d_min < d_max) || d_min <= 0.0 {
        return Err(Error::Domain(format!("need 0 < d_min < d_max, got [{d_min}, {d_max}]")));
    }
    if !(theta >= 0.0) {
        return Err(Error::Domain(format!("theta must be >= 0, got {theta}")));
    }
    if theta == 0.0 {
        return Ok(d_max);
    }
    if cfg.alpha == 1.0 {
        return Ok((cfg.v / theta).clamp(d_min, d_max));
    }
    let alpha = cfg.alpha;
    let objective = |g: f64| cfg.v * utility(alpha, g).expect("g > 0") - theta * g;
    Ok(golden_max(objective, d_min, d_max))
}

/// 1-based mode minimizing `q*B - theta*D` for chunk `i`; lowest mode on ties.
pub fn select_mode(q: f64, theta: f64, profile: &QualityRateProfile, i: usize) -> Result<usize> {
    let modes = profile.modes(i)?;
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (idx, m) in modes.iter().enumerate() {
        let val = q * m.size_bits as f64 - theta * m.quality;
        if val < best_val {
            best = idx;
            best_val = val;
        }
    }
    Ok(best + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// Session-relative chunk index.
    pub chunk: usize,
    pub catalog_chunk: usize,
    pub mode: usize,
    pub quality: f64,
    pub total_bits: u64,
    pub remaining_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkRequest {
    pub chunk: usize,
    pub catalog_chunk: usize,
    pub mode: usize,
    pub bits: u64,
    pub quality: f64,
}

/// Q, theta and the HOL ledger of one user.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RequestQueueState {
    backlog: u64,
    pub theta: f64,
    ledger: VecDeque<LedgerEntry>,
    requested_bits: u64,
    drained_bits: u64,
    discarded_bits: u64,
}

impl RequestQueueState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Q in bits.
    pub fn q(&self) -> f64 {
        self.backlog as f64
    }

    pub fn backlog_bits(&self) -> u64 {
        self.backlog
    }

    pub fn ledger(&self) -> &VecDeque<LedgerEntry> {
        &self.ledger
    }

    pub fn requested_bits(&self) -> u64 {
        self.requested_bits
    }

    /// Bits actually removed from the backlog.
    pub fn drained_bits(&self) -> u64 {
        self.drained_bits
    }

    /// Delivered bits lost to the max(., 0) clamp.
    pub fn discarded_bits(&self) -> u64 {
        self.discarded_bits
    }

    /// Issues the next chunk request of `session` at slot `t`.
    ///
    /// Returns `Ok(None)` once the session has been fully requested.
    pub fn request_chunk(
        &mut self,
        session: &mut VideoSession,
        profile: &QualityRateProfile,
        t: u64,
        n: u64,
    ) -> Result<Option<ChunkRequest>> {
        if n == 0 || !t.is_multiple_of(n) {
            return Err(Error::Contract(format!("request at t={t} is off the n={n} grid")));
        }
        if session.is_exhausted() {
            return Ok(None);
        }
        let k = session.next_request_index;
        let i = session.session_chunk(k, profile.num_chunks())?;
        let mode = select_mode(self.q(), self.theta, profile, i)?;
        let bits = profile.chunk_size_bits(i, mode)?;
        let quality = profile.chunk_quality(i, mode)?;
        session.next_request_index += 1;
        self.ledger.push_back(LedgerEntry {
            chunk: k,
            catalog_chunk: i,
            mode,
            quality,
            total_bits: bits,
            remaining_bits: bits,
        });
        self.backlog += bits;
        self.requested_bits += bits;
        Ok(Some(ChunkRequest { chunk: k, catalog_chunk: i, mode, bits, quality }))
    }

    /// Applies `delivered` bits in HOL order; returns chunks completed now.
    pub fn drain_bits(&mut self, delivered: u64) -> Vec<usize> {
        let mut left = delivered;
        let mut done = Vec::new();
        while left > 0 {
            let Some(head) = self.ledger.front_mut() else { break };
            let take = left.min(head.remaining_bits);
            head.remaining_bits -= take;
            left -= take;
            if head.remaining_bits == 0 {
                done.push(head.chunk);
                self.ledger.pop_front();
            }
        }
        let used = delivered - left;
        self.backlog -= used;
        self.drained_bits += used;
        self.discarded_bits += left;
        done
    }

    /// theta <- max(theta + gamma - d, 0).
    pub fn update_virtual_queue(&mut self, gamma: f64, delivered_quality: f64) -> f64 {
        self.theta = update_virtual_queue(self.theta, gamma, delivered_quality);
        self.theta
    }

    /// Ledger/backlog bookkeeping and bit conservation.
    pub fn check_consistency(&self) -> Result<()> {
        let sum: u64 = self.ledger.iter().map(|e| e.remaining_bits).sum();
        if sum != self.backlog {
            return Err(Error::Accounting(format!("ledger holds {sum} bits, Q = {}", self.backlog)));
        }
        if self.requested_bits != self.drained_bits + self.backlog {
            return Err(Error::Accounting(format!(
                "requested {} != drained {} + residual {}",
                self.requested_bits, self.drained_bits, self.backlog
            )));
        }
        let ordered = self.ledger.iter().zip(self.ledger.iter().skip(1)).all(|(a, b)| a.chunk < b.chunk);
        let bounded = self.ledger.iter().all(|e| e.remaining_bits > 0 && e.remaining_bits <= e.total_bits);
        if !ordered || !bounded {
            return Err(Error::Accounting("ledger out of order or holds a drained entry".into()));
        }
        Ok(())
    }
}

pub fn update_virtual_queue(theta: f64, gamma: f64, delivered_quality: f64) -> f64 {
    (theta + (gamma - delivered_quality)).max(0.0)
}

pub const CLIENT_TRACE_HEADER: [&str; 8] =
    ["t", "userId", "Q", "theta", "gamma", "requestedMode", "requestedBits", "deliveredBits"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::ModeEntry;
    use proptest::prelude::*;

    fn profile(modes: &[(f64, u64)], chunks: usize) -> QualityRateProfile {
        let row: Vec<ModeEntry> = modes.iter().map(|&(quality, size_bits)| ModeEntry { quality, size_bits }).collect();
        QualityRateProfile::new(0, vec![row; chunks], 0.3, 1.0).unwrap()
    }

    #[test]
    fn utility_examples() {
        assert_eq!(utility(0.0, 5.0).unwrap(), 5.0);
        assert!((utility(1.0, std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(utility(2.0, 2.0).unwrap(), -0.5);
        assert!(utility(1.0, 0.0).is_err());
        assert!(utility(0.5, -1.0).is_err());
    }

    #[test]
    fn gamma_examples() {
        let c = UtilityConfig { alpha: 1.0, v: 10.0 };
        assert_eq!(optimize_gamma(5.0, &c, 0.3, 1.0).unwrap(), 1.0);
        assert_eq!(optimize_gamma(0.0, &c, 0.3, 1.0).unwrap(), 1.0);
        assert_eq!(optimize_gamma(20.0, &c, 0.3, 1.0).unwrap(), 0.5);
        assert_eq!(optimize_gamma(100.0, &c, 0.3, 1.0).unwrap(), 0.3);
        let c2 = UtilityConfig { alpha: 2.0, v: 1.0 };
        assert!((optimize_gamma(4.0, &c2, 0.3, 1.0).unwrap() - 0.5).abs() < 1e-6);
        assert_eq!(optimize_gamma(0.0, &c2, 0.3, 1.0).unwrap(), 1.0);
        assert!(optimize_gamma(1.0, &c, 1.0, 1.0).is_err());
    }

    #[test]
    fn mode_selection_boundaries() {
        let p = profile(&[(0.4, 100), (0.7, 200), (0.9, 400)], 3);
        assert_eq!(select_mode(0.0, 1.0, &p, 0).unwrap(), 3);
        assert_eq!(select_mode(5.0, 0.0, &p, 0).unwrap(), 1);
        assert_eq!(select_mode(0.0, 0.0, &p, 0).unwrap(), 1);
        assert!(select_mode(1.0, 1.0, &p, 3).is_err());
    }

    #[test]
    fn request_rules() {
        let p = profile(&[(0.4, 100), (0.7, 200)], 4);
        let mut s = VideoSession::new(0, &p, 3, 2).unwrap();
        let mut q = RequestQueueState::new();
        assert!(matches!(q.request_chunk(&mut s, &p, 1, 50), Err(Error::Contract(_))));
        let r = q.request_chunk(&mut s, &p, 0, 50).unwrap().unwrap();
        assert_eq!((r.chunk, r.catalog_chunk, r.mode), (0, 3, 1));
        assert_eq!(q.q(), 100.0);
        let r = q.request_chunk(&mut s, &p, 50, 50).unwrap().unwrap();
        assert_eq!(r.catalog_chunk, 0);
        assert!(q.request_chunk(&mut s, &p, 100, 50).unwrap().is_none());

        let single = profile(&[(0.5, 10)], 1);
        let mut s = VideoSession::new(0, &single, 0, 1).unwrap();
        let mut q = RequestQueueState { theta: 1e9, ..Default::default() };
        assert_eq!(q.request_chunk(&mut s, &single, 0, 1).unwrap().unwrap().mode, 1);
    }

    fn queue_with(sizes: &[u64]) -> RequestQueueState {
        let mut q = RequestQueueState::new();
        for (k, &b) in sizes.iter().enumerate() {
            q.ledger.push_back(LedgerEntry {
                chunk: k,
                catalog_chunk: k,
                mode: 1,
                quality: 0.5,
                total_bits: b,
                remaining_bits: b,
            });
            q.backlog += b;
            q.requested_bits += b;
        }
        q
    }

    #[test]
    fn drain_examples() {
        let mut q = queue_with(&[100]);
        assert_eq!(q.drain_bits(150), vec![0]);
        assert_eq!((q.backlog_bits(), q.discarded_bits()), (0, 50));

        let mut q = queue_with(&[60, 40]);
        assert!(q.drain_bits(0).is_empty());
        assert_eq!(q.drain_bits(70), vec![0]);
        assert_eq!(q.backlog_bits(), 30);
        assert_eq!(q.ledger()[0].remaining_bits, 30);
        q.check_consistency().unwrap();
    }

    #[test]
    fn virtual_queue_examples() {
        assert_eq!(update_virtual_queue(0.0, 0.5, 0.9), 0.0);
        assert_eq!(update_virtual_queue(1.0, 0.5, 0.0), 1.5);
        assert_eq!(update_virtual_queue(2.0, 0.8, 0.8), 2.0);
    }

    proptest! {
        #[test]
        fn ledger_stays_consistent(sizes in prop::collection::vec(1u64..10_000, 0..20),
                                   drains in prop::collection::vec(0u64..15_000, 0..40)) {
            let mut q = queue_with(&sizes);
            let mut completed = Vec::new();
            for d in drains {
                completed.extend(q.drain_bits(d));
                q.check_consistency().unwrap();
            }
            prop_assert!(completed.iter().enumerate().all(|(i, &k)| i == k));
            prop_assert_eq!(q.requested_bits(), q.drained_bits() + q.backlog_bits());
        }

        #[test]
        fn mode_choice_scale_invariant(q in 0.0f64..1e6, th in 0.0f64..1e6, c in 0.01f64..100.0) {
            let p = profile(&[(0.3, 1000), (0.6, 2500), (0.8, 4000), (1.0, 9000)], 1);
            // c is applied to both weights, so the ordering of the scan is unchanged
            let c = 2f64.powi(c.log2().round() as i32);
            prop_assert_eq!(select_mode(q, th, &p, 0).unwrap(), select_mode(q * c, th * c, &p, 0).unwrap());
        }

        #[test]
        fn gamma_alpha2_matches_stationary_point(v in 1e-3f64..1e3, th in 1e-3f64..1e3) {
            let c = UtilityConfig { alpha: 2.0, v };
            let g = optimize_gamma(th, &c, 0.3, 1.0).unwrap();
            prop_assert!((g - (v / th).sqrt().clamp(0.3, 1.0)).abs() < 1e-6);
        }
    }
}
