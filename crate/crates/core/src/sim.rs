//! Two-time-scale simulation loop.
//!
//! Per transmission slot t: users request a chunk when `t % n == 0`, the
//! scheduler allocates bits from the current request-queue backlogs, and the
//! delivered bits drain each ledger in HOL order. Every n slots the playback
//! buffers advance one video slot with the chunks completed in between.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::client::{optimize_gamma, utility, ChunkRequest, RequestQueueState};
use crate::config::{Policy, SimConfig, ThetaUpdate};
use crate::error::{Error, Result};
use crate::phy::SinrTable;
use crate::playback::{qoe_metrics, PlaybackState};
use crate::scheduler::{
    baseline_schedule, max_rssi_associate, schedule_network_cached, RateAllocation, RateCache, RoundRobin,
};
use crate::topology::{
    build_graph, default_helper_layout, place_users, topology_state, Helper, MobilityState, NetworkGraph,
    TopologyState, UserPlacement,
};
use crate::video::{import_catalog_csv, synth_catalog, FileId, QualityRateProfile, VideoSession};

/// Independent seeds of the random subsystems, drawn from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubSeeds {
    pub topology: u64,
    pub video: u64,
    pub sessions: u64,
    pub mobility: u64,
}

impl SubSeeds {
    pub fn derive(master: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        Self {
            topology: rng.random(),
            video: rng.random(),
            sessions: rng.random(),
            mobility: rng.random(),
        }
    }
}

/// Everything drawn before the first slot; shared by paired runs.
#[derive(Debug, Clone)]
pub struct World {
    pub graph: NetworkGraph,
    pub profiles: Vec<QualityRateProfile>,
    pub sessions: Vec<VideoSession>,
    mobility: MobilityState,
}

impl World {
    pub fn build(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let seeds = SubSeeds::derive(cfg.seed);
        let t = &cfg.topology;
        let helpers: Vec<Helper> = match &t.helper_positions {
            None => default_helper_layout(t.side, t.tx_power),
            Some(ps) => ps
                .iter()
                .map(|&position| Helper { position, tx_power: t.tx_power })
                .collect(),
        };
        let users = match &t.user_positions {
            Some(ps) => ps.clone(),
            None => place_users(
                &UserPlacement::centered(t.side, t.mean_users, t.hotspot_ratio),
                seeds.topology,
            )?,
        };
        if users.is_empty() {
            return Err(Error::config("topology.users", "the placement produced no users"));
        }
        let graph = build_graph(helpers, users, t.edge_rule, t.side)?;
        graph.check_availability()?;

        let profiles = match &cfg.video.catalog_path {
            Some(path) => {
                let file = std::fs::File::open(path).map_err(|e| {
                    Error::config("video.catalog", format!("{}: {e}", path.display()))
                })?;
                let c = &cfg.video.catalog;
                import_catalog_csv(std::io::BufReader::new(file), c.d_min, c.d_max)?
            }
            None => (0..cfg.video.files)
                .map(|f| synth_catalog(&cfg.video.catalog, f as FileId, seeds.video.wrapping_add(f as u64)))
                .collect::<Result<_>>()?,
        };
        if profiles.is_empty() {
            return Err(Error::config("video.catalog", "catalog holds no files"));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seeds.sessions);
        let sessions = (0..graph.num_users())
            .map(|u| {
                let p = &profiles[u % profiles.len()];
                let start = rng.random_range(0..p.num_chunks());
                VideoSession::new(u, p, start, cfg.session_chunks)
            })
            .collect::<Result<_>>()?;
        let mobility = MobilityState::new(&graph, t.mobility, seeds.mobility);
        Ok(Self { graph, profiles, sessions, mobility })
    }

    pub fn profile_of(&self, u: usize) -> &QualityRateProfile {
        &self.profiles[u % self.profiles.len()]
    }

    pub fn initial_state(&self) -> Result<TopologyState> {
        topology_state(&self.graph, 0, &self.mobility)
    }
}

/// What observers see after each transmission slot.
#[derive(Debug)]
pub struct SlotView<'a> {
    pub t: u64,
    /// After this slot's drain.
    pub queues: &'a [RequestQueueState],
    pub gammas: &'a [f64],
    pub requests: &'a [Option<ChunkRequest>],
    /// Scheduler weights used this slot.
    pub weights: &'a [f64],
    pub allocation: &'a RateAllocation,
    pub completions: &'a [Vec<usize>],
}

/// Hooks into the slot loop, for traces and independent checks.
pub trait SimObserver {
    fn on_slot(&mut self, _view: &SlotView<'_>) -> Result<()> {
        Ok(())
    }

    /// After every playback step of video slot `i`.
    fn on_video_slot(&mut self, _i: u64, _playback: &[PlaybackState]) -> Result<()> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl SimObserver for NoObserver {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserResult {
    pub user: usize,
    pub file_id: FileId,
    pub start_chunk: usize,
    pub requested_chunks: usize,
    pub delivered_chunks: usize,
    /// Mean D over delivered chunks.
    pub average_quality: f64,
    /// Mean D over requested chunks; the argument of the utility.
    pub requested_quality: f64,
    pub average_delay: f64,
    pub buffering_percent: f64,
    pub stall_count: u64,
    pub stall_slots: u64,
    pub prebuffer_slots: u64,
    pub start_slot: Option<u64>,
    pub mean_q: f64,
    pub mean_theta: f64,
    pub requested_bits: u64,
    pub delivered_bits: u64,
    pub drained_bits: u64,
    pub discarded_bits: u64,
    pub residual_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config_hash: String,
    pub seed: u64,
    pub num_helpers: usize,
    pub users: Vec<UserResult>,
    /// Sum over users of phi(requested_quality).
    pub utility: f64,
    pub mean_q: f64,
    pub mean_theta: f64,
    pub mean_quality: f64,
    pub mean_delay: f64,
    pub mean_buffering_percent: f64,
    /// Every ledger emptied before the drain limit.
    pub drain_complete: bool,
    pub slots_run: u64,
}

/// Component-wise mean of a nonempty trace of equal-length vectors.
pub fn time_average_series(trace: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = trace.first().ok_or_else(|| Error::Domain("empty trace".into()))?;
    let mut sum = vec![0.0; first.len()];
    for row in trace {
        if row.len() != sum.len() {
            return Err(Error::Domain("ragged trace".into()));
        }
        for (s, x) in sum.iter_mut().zip(row) {
            *s += x;
        }
    }
    Ok(sum.into_iter().map(|s| s / trace.len() as f64).collect())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = xs.filter(|x| x.is_finite()).fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

pub fn run(cfg: &SimConfig) -> Result<SimResult> {
    run_with_observer(cfg, &mut NoObserver)
}

pub fn run_with_observer(cfg: &SimConfig, obs: &mut impl SimObserver) -> Result<SimResult> {
    let world = World::build(cfg)?;
    run_world(cfg, world, obs)
}

/// Runs the slot loop on a prebuilt world.
pub fn run_world(cfg: &SimConfig, mut world: World, obs: &mut impl SimObserver) -> Result<SimResult> {
    let n = cfg.n;
    let nu = world.graph.num_users();
    let mut state = world.initial_state()?;
    let mut table = SinrTable::new(&state, &world.graph);
    let mut cache = RateCache::new(&table, &world.graph, &cfg.mimo);
    let mut rr = RoundRobin::new(&max_rssi_associate(&state, &world.graph), world.graph.num_helpers());

    let mut queues = vec![RequestQueueState::new(); nu];
    let mut playback: Vec<PlaybackState> = (0..nu)
        .map(|_| PlaybackState::new(cfg.window, cfg.rho, cfg.session_chunks))
        .collect::<Result<_>>()?;
    let mut requested_quality: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.session_chunks); nu];
    let mut completed_in_video_slot: Vec<Vec<usize>> = vec![Vec::new(); nu];
    let mut delivered_bits = vec![0u64; nu];
    let mut sum_q = vec![0.0; nu];
    let mut sum_theta = vec![0.0; nu];
    let mut gammas = vec![cfg.video.catalog.d_max; nu];
    let mut requests: Vec<Option<ChunkRequest>> = vec![None; nu];
    let mut completions: Vec<Vec<usize>> = vec![Vec::new(); nu];
    let mut history: VecDeque<Vec<f64>> = VecDeque::with_capacity(cfg.weight_staleness as usize + 1);

    let session_slots = cfg.session_chunks as u64 * n;
    let horizon = session_slots + cfg.drain_limit_chunks * n;
    let u_cfg = cfg.utility;
    let (d_min, d_max) = (cfg.video.catalog.d_min, cfg.video.catalog.d_max);

    let mut t: u64 = 0;
    let drain_complete = loop {
        if t.is_multiple_of(n) {
            if t > 0 {
                let i = t / n;
                for (ps, done) in playback.iter_mut().zip(completed_in_video_slot.iter_mut()) {
                    ps.record_arrivals(done, i)?;
                    ps.playback_step(i)?;
                    done.clear();
                }
                obs.on_video_slot(i, &playback)?;
            }
            let idle = world.sessions.iter().all(VideoSession::is_exhausted)
                && queues.iter().all(|q| q.backlog_bits() == 0);
            if idle {
                break true;
            }
            if t >= horizon {
                break false;
            }
        }

        if t < session_slots {
            for (q, s) in sum_q.iter_mut().zip(&queues) {
                *q += s.q();
            }
            for (th, s) in sum_theta.iter_mut().zip(&queues) {
                *th += s.theta;
            }
        }

        let request_slot = t.is_multiple_of(n);
        for u in 0..nu {
            requests[u] = None;
            let active = !world.sessions[u].is_exhausted();
            if !(request_slot && active) && !(cfg.theta_update == ThetaUpdate::Slot && t < session_slots) {
                continue;
            }
            let qs = &mut queues[u];
            gammas[u] = optimize_gamma(qs.theta, &u_cfg, d_min, d_max)?;
            let mut d = 0.0;
            if request_slot && active {
                let profile = &world.profiles[u % world.profiles.len()];
                if let Some(r) = qs.request_chunk(&mut world.sessions[u], profile, t, n)? {
                    d = r.quality;
                    requested_quality[u].push(r.quality);
                    requests[u] = Some(r);
                }
            }
            qs.update_virtual_queue(gammas[u], d);
        }

        if !world.mobility_is_static() {
            world.mobility.advance(cfg.slot_seconds);
            state = topology_state(&world.graph, t, &world.mobility)?;
            table = SinrTable::new(&state, &world.graph);
            cache = RateCache::new(&table, &world.graph, &cfg.mimo);
        }

        history.push_back(queues.iter().map(RequestQueueState::q).collect());
        if history.len() > cfg.weight_staleness as usize + 1 {
            history.pop_front();
        }
        let weights = history.front().expect("just pushed");
        let alloc = match cfg.policy {
            Policy::Dpp => schedule_network_cached(t, weights, &cache, &world.graph, cfg.receiver)?,
            Policy::Baseline => baseline_schedule(t, &mut rr, &table, &world.graph, &cfg.mimo, cfg.receiver),
        };

        for u in 0..nu {
            let mu = alloc.per_user_bits[u];
            delivered_bits[u] += mu;
            completions[u] = queues[u].drain_bits(mu);
            completed_in_video_slot[u].extend_from_slice(&completions[u]);
        }
        obs.on_slot(&SlotView {
            t,
            queues: &queues,
            gammas: &gammas,
            requests: &requests,
            weights,
            allocation: &alloc,
            completions: &completions,
        })?;
        t += 1;
    };

    // play out what is buffered; users stuck without arrivals give up after
    // one window of waiting
    let mut i = t / n;
    let mut idle = vec![0u64; nu];
    while playback
        .iter()
        .zip(&idle)
        .any(|(ps, &w)| !ps.is_finished() && w <= cfg.window)
    {
        i += 1;
        for (u, ps) in playback.iter_mut().enumerate() {
            if ps.is_finished() || idle[u] > cfg.window {
                continue;
            }
            ps.record_arrivals(&[], i)?;
            ps.playback_step(i)?;
            if ps.phase == crate::playback::Phase::Playing {
                idle[u] = 0;
            } else {
                idle[u] += 1;
            }
        }
        obs.on_video_slot(i, &playback)?;
    }

    let sampled = session_slots.min(t).max(1) as f64;
    let mut users = Vec::with_capacity(nu);
    let mut total_utility = 0.0;
    for u in 0..nu {
        let q = &queues[u];
        q.check_consistency()?;
        if delivered_bits[u] != q.drained_bits() + q.discarded_bits() {
            return Err(Error::Accounting(format!("user {u}: delivered bits do not balance")));
        }
        let ps = &playback[u];
        let delivered: Vec<f64> = (0..ps.arrived() as usize)
            .map(|k| requested_quality[u][k])
            .collect();
        let m = qoe_metrics(ps, &delivered);
        let rq = mean(requested_quality[u].iter().copied());
        if rq.is_finite() {
            total_utility += utility(u_cfg.alpha, rq)?;
        }
        let s = &world.sessions[u];
        users.push(UserResult {
            user: u,
            file_id: s.file_id,
            start_chunk: s.start_chunk,
            requested_chunks: requested_quality[u].len(),
            delivered_chunks: m.delivered_chunks,
            average_quality: m.average_quality,
            requested_quality: rq,
            average_delay: m.average_delay,
            buffering_percent: m.buffering_percent,
            stall_count: m.stall_count,
            stall_slots: m.stall_slots,
            prebuffer_slots: m.prebuffer_slots,
            start_slot: m.start_slot,
            mean_q: sum_q[u] / sampled,
            mean_theta: sum_theta[u] / sampled,
            requested_bits: q.requested_bits(),
            delivered_bits: delivered_bits[u],
            drained_bits: q.drained_bits(),
            discarded_bits: q.discarded_bits(),
            residual_bits: q.backlog_bits(),
        });
    }
    Ok(SimResult {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        num_helpers: world.graph.num_helpers(),
        mean_q: mean(users.iter().map(|r| r.mean_q)),
        mean_theta: mean(users.iter().map(|r| r.mean_theta)),
        mean_quality: mean(users.iter().map(|r| r.average_quality)),
        mean_delay: mean(users.iter().map(|r| r.average_delay)),
        mean_buffering_percent: mean(users.iter().map(|r| r.buffering_percent)),
        users,
        utility: total_utility,
        drain_complete,
        slots_run: t,
    })
}

impl World {
    fn mobility_is_static(&self) -> bool {
        self.mobility.is_static()
    }
}

/// Parameters [`sweep`] accepts, with the config key each one sets.
pub const SWEEP_PARAMS: &[(&str, &str)] = &[
    ("V", "utility.V"),
    ("M", "mimo.M"),
    ("sMax", "mimo.S"),
    ("policy", "sim.policy"),
    ("receiverModel", "sim.receiver"),
    ("userCount", "topology.users"),
];

pub fn sweep_key(param: &str) -> Result<&'static str> {
    SWEEP_PARAMS
        .iter()
        .find(|(p, k)| *p == param || *k == param)
        .map(|&(_, k)| k)
        .ok_or_else(|| {
            let names: Vec<&str> = SWEEP_PARAMS.iter().map(|p| p.0).collect();
            Error::config(param, format!("cannot sweep; expected one of {}", names.join(", ")))
        })
}

/// One config per value of `param`, in order.
pub fn sweep_configs(template: &SimConfig, param: &str, values: &[String]) -> Result<Vec<SimConfig>> {
    let key = sweep_key(param)?;
    values
        .iter()
        .map(|v| {
            let mut c = template.clone();
            c.set(key, v)?;
            c.validate()?;
            Ok(c)
        })
        .collect()
}

/// Runs one simulation per value (in parallel); results keyed by value.
pub fn sweep(template: &SimConfig, param: &str, values: &[String]) -> Result<Vec<(String, SimResult)>> {
    let configs = sweep_configs(template, param, values)?;
    let results: Vec<Result<SimResult>> = configs.par_iter().map(run).collect();
    values
        .iter()
        .cloned()
        .zip(results)
        .map(|(v, r)| r.map(|r| (v, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_average_examples() {
        assert_eq!(time_average_series(&vec![vec![3.0, 4.0]; 5]).unwrap(), vec![3.0, 4.0]);
        let alt: Vec<Vec<f64>> = (0..10).map(|i| vec![if i % 2 == 0 { 0.0 } else { 2.0 }]).collect();
        assert_eq!(time_average_series(&alt).unwrap(), vec![1.0]);
        assert!(time_average_series(&[]).is_err());
    }

    #[test]
    fn sub_seeds_differ() {
        let s = SubSeeds::derive(7);
        assert_ne!(s.topology, s.video);
        assert_eq!(s, SubSeeds::derive(7));
    }

    #[test]
    fn unknown_sweep_param() {
        assert!(matches!(sweep_key("rho"), Err(Error::Config { .. })));
        assert_eq!(sweep_key("sMax").unwrap(), "mimo.S");
    }
}
