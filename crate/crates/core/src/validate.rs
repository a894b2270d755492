//! Randomized oracle suites behind `dppstream validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::client::{optimize_gamma, select_mode, RequestQueueState, UtilityConfig};
use crate::phy::MimoConfig;
use crate::scheduler::{exhaustive_select_candidates, greedy_select_candidates, Candidate};
use crate::video::{ModeEntry, QualityRateProfile, VideoSession};

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
    /// First failing instance.
    pub counterexample: Option<serde_json::Value>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.passed == self.total
    }

    fn record(&mut self, pass: bool, witness: impl FnOnce() -> serde_json::Value) {
        self.total += 1;
        if pass {
            self.passed += 1;
        } else if self.counterexample.is_none() {
            self.counterexample = Some(witness());
        }
    }

    fn new(name: &'static str) -> Self {
        Self { name, passed: 0, total: 0, counterexample: None }
    }
}

/// A random MWSR instance at one helper: weights, and SINRs from random
/// gains under full-power interference from up to four other helpers.
pub fn random_instance(rng: &mut impl Rng) -> (Vec<Candidate>, MimoConfig) {
    let m = [10usize, 20, 40][rng.random_range(0..3)];
    let s = rng.random_range(1..=m.min(10));
    let size = rng.random_range(1..=12usize);
    let others = rng.random_range(0..=4usize);
    let cands = (0..size)
        .map(|user| {
            let p = 20.0;
            let g: f64 = rng.random();
            let interference: f64 = (0..others).map(|_| p * rng.random::<f64>()).sum();
            let weight = if rng.random_bool(0.15) { 0.0 } else { rng.random::<f64>() * 1e7 };
            Candidate { user, weight, sinr: p * g / (1.0 + interference) }
        })
        .collect();
    (cands, MimoConfig { antennas: m, max_streams: s, symbols_per_slot: 168_000 })
}

/// Greedy objective equals the exhaustive objective exactly.
pub fn greedy_vs_exhaustive(instances: usize, seed: u64, inject_failure: bool) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("greedy_vs_exhaustive");
    for k in 0..instances {
        let (cands, cfg) = random_instance(&mut rng);
        let g = greedy_select_candidates(&cands, &cfg).expect("valid instance");
        let mut e = exhaustive_select_candidates(&cands, &cfg).expect("valid instance");
        if inject_failure && k == instances / 2 {
            e.objective = e.objective * 2.0 + 1.0;
        }
        rep.record(g.objective == e.objective && g.size() <= cfg.max_streams, || {
            json!({ "candidates": cands, "mimo": cfg, "greedy": g, "exhaustive": e })
        });
    }
    rep
}

fn random_profile(rng: &mut impl Rng) -> QualityRateProfile {
    let modes = rng.random_range(1..=8usize);
    let mut bits = 0u64;
    let mut q = 0.3;
    let row: Vec<ModeEntry> = (0..modes)
        .map(|_| {
            bits += rng.random_range(1..500_000u64);
            q = (q + rng.random::<f64>() * 0.1).min(1.0);
            ModeEntry { quality: q, size_bits: bits }
        })
        .collect();
    QualityRateProfile::new(0, vec![row], 0.3, 1.0).expect("monotone by construction")
}

/// Reference scan: values first, then the first index of the minimum.
fn scan_mode(q: f64, theta: f64, profile: &QualityRateProfile) -> usize {
    let vals: Vec<f64> = profile
        .modes(0)
        .expect("chunk 0")
        .iter()
        .map(|m| q * m.size_bits as f64 - theta * m.quality)
        .collect();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    vals.iter().position(|&v| v == min).expect("nonempty") + 1
}

/// select_mode agrees with an independent scan.
pub fn mode_selection(instances: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("select_mode_vs_scan");
    for _ in 0..instances {
        let p = random_profile(&mut rng);
        let q = if rng.random_bool(0.1) { 0.0 } else { rng.random::<f64>() * 1e8 };
        let theta = if rng.random_bool(0.1) { 0.0 } else { rng.random::<f64>() * 1e14 };
        let got = select_mode(q, theta, &p, 0).expect("chunk 0");
        let want = scan_mode(q, theta, &p);
        rep.record(got == want, || json!({ "q": q, "theta": theta, "modes": p.modes(0).unwrap(), "got": got, "want": want }));
    }
    rep
}

/// optimize_gamma matches clamp(V/theta) for alpha = 1 and clamp(sqrt(V/theta))
/// for alpha = 2.
pub fn gamma_closed_form(instances: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("gamma_closed_form");
    let (d_min, d_max) = (0.3, 1.0);
    for k in 0..instances {
        let alpha = if k % 2 == 0 { 1.0 } else { 2.0 };
        let v = 10f64.powf(rng.random_range(-3.0..3.0));
        let theta = if rng.random_bool(0.05) { 0.0 } else { 10f64.powf(rng.random_range(-3.0..3.0)) };
        let cfg = UtilityConfig { alpha, v };
        let got = optimize_gamma(theta, &cfg, d_min, d_max).expect("valid bounds");
        let want = if theta == 0.0 {
            d_max
        } else if alpha == 1.0 {
            (v / theta).clamp(d_min, d_max)
        } else {
            (v / theta).sqrt().clamp(d_min, d_max)
        };
        rep.record((got - want).abs() <= 1e-6, || json!({ "alpha": alpha, "V": v, "theta": theta, "got": got, "want": want }));
    }
    rep
}

/// Random request/drain sequences keep Q equal to the ledger and complete
/// chunks in order.
pub fn ledger_fuzz(instances: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("ledger_consistency");
    for _ in 0..instances {
        let p = random_profile(&mut rng);
        let len = rng.random_range(1..30usize);
        let mut session = VideoSession::new(0, &p, 0, len).expect("valid session");
        let mut q = RequestQueueState::new();
        let n = rng.random_range(1..6u64);
        let mut completed = Vec::new();
        let mut error = None;
        for t in 0..(len as u64 * n * 3) {
            if t % n == 0 {
                q.theta = rng.random::<f64>() * 1e6;
                if let Err(e) = q.request_chunk(&mut session, &p, t, n) {
                    error = Some(e.to_string());
                }
            }
            completed.extend(q.drain_bits(rng.random_range(0..400_000u64)));
            if let Err(e) = q.check_consistency() {
                error.get_or_insert(e.to_string());
            }
        }
        let in_order = completed.iter().enumerate().all(|(i, &k)| i == k);
        rep.record(error.is_none() && in_order, || json!({ "error": error, "completed": completed }));
    }
    rep
}

/// All suites with `instances` cases each.
pub fn run_all(instances: usize, seed: u64, inject_failure: bool) -> Vec<SuiteReport> {
    vec![
        greedy_vs_exhaustive(instances, seed, inject_failure),
        mode_selection(instances, seed.wrapping_add(1)),
        gamma_closed_form(instances, seed.wrapping_add(2)),
        ledger_fuzz(instances.div_ceil(10), seed.wrapping_add(3)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_and_injection_fails() {
        for r in run_all(300, 5, false) {
            assert!(r.ok(), "{}: {:?}", r.name, r.counterexample);
        }
        let bad = greedy_vs_exhaustive(10, 5, true);
        assert!(!bad.ok());
        assert!(bad.counterexample.is_some());
    }
}
