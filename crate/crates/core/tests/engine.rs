use dppstream::playback::PlaybackState;
use dppstream::scheduler::ReceiverModel;
use dppstream::sim::{run_world, sweep, SimObserver, SlotView, World};
use dppstream::topology::{place_users, UserPlacement};
use dppstream::video::{ModeEntry, QualityRateProfile, VideoSession};
use dppstream::{Result, SimConfig};

fn config(pairs: &[(&str, &str)]) -> SimConfig {
    let mut cfg = SimConfig::default();
    for (k, v) in pairs {
        cfg.set(k, v).unwrap();
    }
    cfg.validate().unwrap();
    cfg
}

fn small() -> SimConfig {
    config(&[
        ("topology.users", "12"),
        ("mimo.symbols_per_slot", "4000"),
        ("sim.session_chunks", "40"),
        ("sim.n", "10"),
    ])
}

/// One helper, one user at 40 m (SNR 10), one-mode CBR video of `bits` per chunk.
fn lone_user(bits: u64, chunks: usize) -> (SimConfig, World) {
    let cfg = config(&[
        ("topology.helpers", "40,40"),
        ("topology.user_positions", "0,40"),
        ("mimo.M", "1"),
        ("mimo.S", "1"),
        ("mimo.symbols_per_slot", "100"),
        ("sim.n", "5"),
        ("sim.session_chunks", &chunks.to_string()),
        ("sim.drain_limit_chunks", "5"),
        ("playback.window", "1"),
    ]);
    let mut w = World::build(&cfg).unwrap();
    let p = QualityRateProfile::new(0, vec![vec![ModeEntry { quality: 0.8, size_bits: bits }]], 0.3, 1.0).unwrap();
    w.sessions = vec![VideoSession::new(0, &p, 0, chunks).unwrap()];
    w.profiles = vec![p];
    (cfg, w)
}

#[derive(Default)]
struct Backlogs {
    at_request: Vec<u64>,
    per_slot: Vec<f64>,
    dumb_excess: usize,
    multi_helper_slots: usize,
    stalls: u64,
}

impl SimObserver for Backlogs {
    fn on_slot(&mut self, v: &SlotView<'_>) -> Result<()> {
        if v.requests[0].is_some() {
            self.at_request.push(v.queues[0].backlog_bits());
        }
        self.per_slot.push(v.queues.iter().map(|q| q.q()).sum());
        let mut dumb = v.allocation.clone();
        dumb.aggregate(ReceiverModel::Dumb);
        let mut adv = v.allocation.clone();
        adv.aggregate(ReceiverModel::Advanced);
        for (u, (d, a)) in dumb.per_user_bits.iter().zip(&adv.per_user_bits).enumerate() {
            self.dumb_excess += (d > a) as usize;
            let streams = (0..v.allocation.num_helpers()).filter(|&h| v.allocation.edge_bits(h, u) > 0).count();
            self.multi_helper_slots += (streams > 1 && d < a) as usize;
        }
        Ok(())
    }

    fn on_video_slot(&mut self, _i: u64, p: &[PlaybackState]) -> Result<()> {
        self.stalls = p.iter().map(|s| s.stall_count).sum();
        Ok(())
    }
}

#[test]
fn capacity_dominates_load() {
    // SNR 10 alone: floor(100 * log2(11)) = 345 bits per slot
    let (cfg, w) = lone_user(1000, 30);
    let mut obs = Backlogs::default();
    let r = run_world(&cfg, w, &mut obs).unwrap();
    let u = &r.users[0];
    assert!(r.drain_complete);
    assert_eq!(u.delivered_chunks, 30);
    assert_eq!(u.average_delay, 1.0);
    assert_eq!(u.stall_count, 0);
    assert_eq!(obs.stalls, 0);
    // observed after the request slot's own drain
    assert!(obs.at_request.iter().all(|&q| q == 1000 - 345));
}

#[test]
fn overload_grows_backlog() {
    let (cfg, w) = lone_user(3000, 30);
    let mut obs = Backlogs::default();
    let r = run_world(&cfg, w, &mut obs).unwrap();
    assert!(!r.drain_complete);
    assert!(obs.at_request.windows(2).all(|p| p[1] > p[0]));
    assert_eq!(*obs.at_request.last().unwrap(), 30 * 3000 - (5 * 29 + 1) * 345);
    assert!(r.users[0].residual_bits > 0);
}

#[test]
fn same_seed_same_result() {
    let cfg = small();
    let a = dppstream::run(&cfg).unwrap();
    let b = dppstream::run(&cfg).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    let mut other = cfg.clone();
    other.seed = 2;
    assert_ne!(format!("{a:?}"), format!("{:?}", dppstream::run(&other).unwrap()));
}

#[test]
fn policies_share_the_world() {
    let dpp = small();
    let mut bl = dpp.clone();
    bl.set("sim.policy", "baseline").unwrap();
    let (a, b) = (World::build(&dpp).unwrap(), World::build(&bl).unwrap());
    assert_eq!(a.graph.users, b.graph.users);
    assert_eq!(a.profiles, b.profiles);
    let starts = |w: &World| w.sessions.iter().map(|s| s.start_chunk).collect::<Vec<_>>();
    assert_eq!(starts(&a), starts(&b));
}

#[test]
fn sweep_keeps_topology() {
    let vals: Vec<String> = ["1e12", "1e13", "1e14"].map(String::from).to_vec();
    let res = sweep(&small(), "V", &vals).unwrap();
    assert_eq!(res.len(), 3);
    let starts = |r: &dppstream::SimResult| r.users.iter().map(|u| u.start_chunk).collect::<Vec<_>>();
    assert!(res.iter().all(|(_, r)| starts(r) == starts(&res[0].1)));
}

#[test]
fn dumb_never_exceeds_advanced() {
    let cfg = config(&[
        ("topology.users", "30"),
        ("mimo.symbols_per_slot", "8000"),
        ("sim.session_chunks", "40"),
        ("sim.n", "10"),
    ]);
    let mut obs = Backlogs::default();
    dppstream::run_with_observer(&cfg, &mut obs).unwrap();
    assert_eq!(obs.dumb_excess, 0);
    assert!(obs.multi_helper_slots > 0, "scenario never schedules a user from two helpers");
}

#[test]
fn mean_backlog_matches_resummation() {
    let cfg = small();
    let mut obs = Backlogs::default();
    let r = dppstream::run_with_observer(&cfg, &mut obs).unwrap();
    let slots = cfg.session_chunks * cfg.n as usize;
    // Q is sampled at the start of each session slot: zero, then the state after each earlier slot
    let total: f64 = obs.per_slot[..slots - 1].iter().sum();
    let want = total / slots as f64 / r.users.len() as f64;
    assert!((r.mean_q - want).abs() <= 1e-9 * want.max(1.0), "{} vs {want}", r.mean_q);
}

#[test]
fn poisson_user_count() {
    let placement = UserPlacement::centered(80.0, 500.0, 4.0);
    let mean = placement.expected_users();
    assert!((mean - 500.0).abs() < 1e-9);
    let runs = 1000;
    let counts: Vec<f64> = (0..runs).map(|s| place_users(&placement, s).unwrap().len() as f64).collect();
    let sample = counts.iter().sum::<f64>() / runs as f64;
    assert!((sample - mean).abs() <= 3.0 * mean.sqrt(), "{sample}");
    // the sample mean itself concentrates at sqrt(mean / runs)
    assert!((sample - mean).abs() <= 4.0 * (mean / runs as f64).sqrt(), "{sample}");
    let var = counts.iter().map(|c| (c - sample).powi(2)).sum::<f64>() / (runs - 1) as f64;
    assert!((var / mean - 1.0).abs() < 0.15, "dispersion {}", var / mean);
}
