//! Per-slot transmission scheduling.
//!
//! The DPP scheduler solves the max-weighted-sum-rate problem independently
//! at every helper. Because a stream's rate depends only on the subset size,
//! sorting candidates by weighted rate for each size S and keeping the best S
//! is exact; [`exhaustive_select`] enumerates every subset and serves as the
//! oracle for that claim.
//!
//! Both selectors score a subset through [`subset_objective`], which sums the
//! weighted rates in descending order. Any two subsets holding the same
//! multiset of terms therefore score bit-identically, and the top-S terms
//! dominate every other size-S choice even after rounding.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::{slot_bits, user_rate_per_symbol, MimoConfig, SinrTable};
use crate::topology::NetworkGraph;

/// One schedulable user at a helper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub user: usize,
    /// Q_u(t) in bits.
    pub weight: f64,
    pub sinr: f64,
}

/// An active subset and its weighted sum rate (bits/symbol x bits of backlog).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Ascending user ids.
    pub users: Vec<usize>,
    pub objective: f64,
}

impl Selection {
    pub fn size(&self) -> usize {
        self.users.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReceiverModel {
    /// Decodes every stream addressed to it: mu_u = sum_h mu_hu.
    Advanced,
    /// Decodes only its strongest stream: mu_u = max_h mu_hu.
    Dumb,
}

fn weighted_rate(c: &Candidate, size: usize, antennas: usize) -> f64 {
    let rate = user_rate_per_symbol(c.sinr, size, antennas).expect("1 <= size <= M checked by caller");
    c.weight * rate
}

/// Weighted sum rate of the given terms, accumulated largest first.
pub fn subset_objective(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(|a, b| b.total_cmp(a));
    terms.iter().fold(0.0, |acc, &t| acc + t)
}

fn validate_candidates(cands: &[Candidate]) -> Result<()> {
    if cands.is_empty() {
        return Err(Error::Domain("empty neighborhood".into()));
    }
    for c in cands {
        if !(c.weight >= 0.0 && c.weight.is_finite()) {
            return Err(Error::Domain(format!("user {}: weight {} must be >= 0", c.user, c.weight)));
        }
        if !(c.sinr >= 0.0 && c.sinr.is_finite()) {
            return Err(Error::Domain(format!("user {}: sinr {} must be >= 0", c.user, c.sinr)));
        }
    }
    Ok(())
}

fn size_limit(n: usize, cfg: &MimoConfig) -> usize {
    cfg.max_streams.min(cfg.antennas).min(n)
}

/// Top-S greedy over `users`, with `term(idx, size)` the weighted rate of
/// `users[idx]` in a subset of `size` streams.
fn greedy_core(users: &[usize], limit: usize, term: impl Fn(usize, usize) -> f64) -> Selection {
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(users.len());
    let mut best: Option<Selection> = None;
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    for size in 1..=limit {
        order.clear();
        order.extend(users.iter().enumerate().map(|(idx, &u)| (term(idx, size), u)));
        if size < order.len() {
            order.select_nth_unstable_by(size - 1, by_rank);
        }
        let mut terms: Vec<f64> = order[..size].iter().map(|t| t.0).collect();
        let objective = subset_objective(&mut terms);
        if best.as_ref().is_none_or(|b| objective > b.objective) {
            let mut chosen: Vec<usize> = order[..size].iter().map(|t| t.1).collect();
            chosen.sort_unstable();
            best = Some(Selection { users: chosen, objective });
        }
    }
    best.expect("at least one subset size")
}

/// Sort-and-greedy subset selection.
///
/// For each size S the candidates are ordered by weighted rate (descending,
/// user id ascending) and the first S kept; the best size wins, smaller S on
/// ties. With all weights zero this yields the lowest-id singleton.
pub fn greedy_select_candidates(cands: &[Candidate], cfg: &MimoConfig) -> Result<Selection> {
    validate_candidates(cands)?;
    let users: Vec<usize> = cands.iter().map(|c| c.user).collect();
    let limit = size_limit(cands.len(), cfg);
    Ok(greedy_core(&users, limit, |idx, size| weighted_rate(&cands[idx], size, cfg.antennas)))
}

/// Largest neighborhood [`exhaustive_select_candidates`] will enumerate.
pub const EXHAUSTIVE_LIMIT: usize = 20;

/// Exact argmax over all nonempty subsets of size <= min(S, M).
///
/// Ties go to the smaller subset, then to the lexicographically smaller one.
pub fn exhaustive_select_candidates(cands: &[Candidate], cfg: &MimoConfig) -> Result<Selection> {
    validate_candidates(cands)?;
    let n = cands.len();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::Capacity(format!(
            "{n} candidates exceeds the enumeration limit of {EXHAUSTIVE_LIMIT}"
        )));
    }
    let limit = size_limit(n, cfg);
    // table[size - 1][i]: weighted rate of candidate i at that size
    let table: Vec<Vec<f64>> = (1..=limit)
        .map(|s| cands.iter().map(|c| weighted_rate(c, s, cfg.antennas)).collect())
        .collect();

    let mut by_id: Vec<usize> = (0..n).collect();
    by_id.sort_by_key(|&i| cands[i].user);

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut terms = Vec::with_capacity(limit);
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size > limit {
            continue;
        }
        terms.clear();
        terms.extend((0..n).filter(|i| mask & (1 << i) != 0).map(|i| table[size - 1][i]));
        let objective = subset_objective(&mut terms);
        let better = match &best {
            None => true,
            Some((b, users)) => {
                objective > *b
                    || (objective == *b && {
                        let cand: Vec<usize> = by_id
                            .iter()
                            .filter(|&&i| mask & (1 << i) != 0)
                            .map(|&i| cands[i].user)
                            .collect();
                        (size, &cand) < (users.len(), users)
                    })
            }
        };
        if better {
            let users = by_id
                .iter()
                .filter(|&&i| mask & (1 << i) != 0)
                .map(|&i| cands[i].user)
                .collect();
            best = Some((objective, users));
        }
    }
    let (objective, users) = best.expect("nonempty neighborhood");
    Ok(Selection { users, objective })
}

/// Users of N(h) that hold a copy of their file at `h`, with current weights.
pub fn helper_candidates(
    h: usize,
    weights: &[f64],
    table: &SinrTable,
    graph: &NetworkGraph,
) -> Vec<Candidate> {
    graph
        .helper_neighbors(h)
        .iter()
        .filter(|&&u| graph.has_file(h, u))
        .map(|&u| Candidate {
            user: u,
            weight: weights[u],
            sinr: table.get(h, u),
        })
        .collect()
}

/// Greedy MWSR at helper `h`.
pub fn greedy_select(
    h: usize,
    weights: &[f64],
    table: &SinrTable,
    graph: &NetworkGraph,
    cfg: &MimoConfig,
) -> Result<Selection> {
    greedy_select_candidates(&helper_candidates(h, weights, table, graph), cfg)
}

/// Exhaustive MWSR at helper `h`; testing oracle.
pub fn exhaustive_select(
    h: usize,
    weights: &[f64],
    table: &SinrTable,
    graph: &NetworkGraph,
    cfg: &MimoConfig,
) -> Result<Selection> {
    exhaustive_select_candidates(&helper_candidates(h, weights, table, graph), cfg)
}

/// mu_hu for one slot plus the per-user aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAllocation {
    pub slot: u64,
    num_users: usize,
    /// Row-major helper x user.
    per_edge_bits: Vec<u64>,
    pub per_user_bits: Vec<u64>,
    pub active_subsets: Vec<Vec<usize>>,
}

impl RateAllocation {
    fn empty(slot: u64, num_helpers: usize, num_users: usize) -> Self {
        Self {
            slot,
            num_users,
            per_edge_bits: vec![0; num_helpers * num_users],
            per_user_bits: vec![0; num_users],
            active_subsets: vec![Vec::new(); num_helpers],
        }
    }

    pub fn num_helpers(&self) -> usize {
        self.active_subsets.len()
    }

    pub fn edge_bits(&self, h: usize, u: usize) -> u64 {
        self.per_edge_bits[h * self.num_users + u]
    }

    /// Recomputes mu_u from the per-edge matrix under `model`.
    pub fn aggregate(&mut self, model: ReceiverModel) {
        for u in 0..self.num_users {
            let streams = (0..self.num_helpers()).map(|h| self.edge_bits(h, u));
            self.per_user_bits[u] = match model {
                ReceiverModel::Advanced => streams.sum(),
                ReceiverModel::Dumb => streams.max().unwrap_or(0),
            };
        }
    }

    fn assign(&mut self, h: usize, subset: Vec<usize>, bits: impl Fn(usize) -> u64) {
        for &u in &subset {
            self.per_edge_bits[h * self.num_users + u] = bits(u);
        }
        self.active_subsets[h] = subset;
    }

    /// Appends `t,helperId,subsetSize,userIds,bits` rows; user ids and bits
    /// are `;`-joined in subset order.
    pub fn write_trace_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for (h, subset) in self.active_subsets.iter().enumerate() {
            if subset.is_empty() {
                continue;
            }
            let ids: Vec<String> = subset.iter().map(usize::to_string).collect();
            let bits: Vec<String> = subset.iter().map(|&u| self.edge_bits(h, u).to_string()).collect();
            w.write_record([
                self.slot.to_string(),
                h.to_string(),
                subset.len().to_string(),
                ids.join(";"),
                bits.join(";"),
            ])?;
        }
        Ok(())
    }
}

pub const SCHEDULE_TRACE_HEADER: [&str; 5] = ["t", "helperId", "subsetSize", "userIds", "bits"];

/// Per-helper rates and slot bits for every neighbor and subset size.
///
/// Under a static channel the cache is built once and reused every slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCache {
    /// Eligible users of each helper: N(h) with the file available.
    users: Vec<Vec<usize>>,
    /// rates[h][size - 1][idx]
    rates: Vec<Vec<Vec<f64>>>,
    bits: Vec<Vec<Vec<u64>>>,
    limits: Vec<usize>,
}

impl RateCache {
    pub fn new(table: &SinrTable, graph: &NetworkGraph, cfg: &MimoConfig) -> Self {
        let mut out = Self { users: Vec::new(), rates: Vec::new(), bits: Vec::new(), limits: Vec::new() };
        for h in 0..graph.num_helpers() {
            let users: Vec<usize> = graph
                .helper_neighbors(h)
                .iter()
                .copied()
                .filter(|&u| graph.has_file(h, u))
                .collect();
            let limit = size_limit(users.len(), cfg);
            let rates: Vec<Vec<f64>> = (1..=limit)
                .map(|s| {
                    users
                        .iter()
                        .map(|&u| user_rate_per_symbol(table.get(h, u), s, cfg.antennas).expect("valid size"))
                        .collect()
                })
                .collect();
            let bits = rates.iter().map(|row| row.iter().map(|&r| slot_bits(r, cfg)).collect()).collect();
            out.users.push(users);
            out.rates.push(rates);
            out.bits.push(bits);
            out.limits.push(limit);
        }
        out
    }

    pub fn eligible(&self, h: usize) -> &[usize] {
        &self.users[h]
    }
}

/// DPP scheduling: independent greedy MWSR at every helper.
pub fn schedule_network(
    slot: u64,
    weights: &[f64],
    table: &SinrTable,
    graph: &NetworkGraph,
    cfg: &MimoConfig,
    receiver: ReceiverModel,
) -> Result<RateAllocation> {
    schedule_network_cached(slot, weights, &RateCache::new(table, graph, cfg), graph, receiver)
}

/// [`schedule_network`] over precomputed rates.
pub fn schedule_network_cached(
    slot: u64,
    weights: &[f64],
    cache: &RateCache,
    graph: &NetworkGraph,
    receiver: ReceiverModel,
) -> Result<RateAllocation> {
    if weights.len() != graph.num_users() {
        return Err(Error::Domain(format!(
            "{} weights for {} users",
            weights.len(),
            graph.num_users()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::Domain(format!("weight {w} must be >= 0")));
    }
    let mut alloc = RateAllocation::empty(slot, graph.num_helpers(), graph.num_users());
    for h in 0..graph.num_helpers() {
        let users = &cache.users[h];
        if users.is_empty() {
            continue;
        }
        let rates = &cache.rates[h];
        let sel = greedy_core(users, cache.limits[h], |idx, size| weights[users[idx]] * rates[size - 1][idx]);
        let size = sel.size();
        let row = &cache.bits[h][size - 1];
        let bits: Vec<(usize, u64)> = sel
            .users
            .iter()
            .map(|&u| (u, row[users.binary_search(&u).expect("selected from eligible set")]))
            .collect();
        alloc.assign(h, sel.users, |u| bits.iter().find(|b| b.0 == u).map_or(0, |b| b.1));
    }
    alloc.aggregate(receiver);
    Ok(alloc)
}

/// Each user's max-RSSI helper within N(u); lowest id on ties.
pub fn max_rssi_associate(state: &crate::topology::TopologyState, graph: &NetworkGraph) -> Vec<usize> {
    (0..graph.num_users())
        .map(|u| {
            let nbrs = graph.user_neighbors(u);
            let rssi: Vec<f64> = nbrs
                .iter()
                .map(|&h| graph.helpers[h].tx_power * state.gain(h, u))
                .collect();
            nbrs[crate::topology::argmax_lowest(&rssi)]
        })
        .collect()
}

/// Round-robin cursors of the legacy baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRobin {
    members: Vec<Vec<usize>>,
    cursors: Vec<usize>,
}

impl RoundRobin {
    pub fn new(associations: &[usize], num_helpers: usize) -> Self {
        let mut members = vec![Vec::new(); num_helpers];
        for (u, &h) in associations.iter().enumerate() {
            members[h].push(u);
        }
        Self {
            members,
            cursors: vec![0; num_helpers],
        }
    }

    pub fn members(&self, h: usize) -> &[usize] {
        &self.members[h]
    }
}

/// Queue-oblivious baseline: every helper serves its next associated user
/// alone (S = 1) and advances its cursor. Helpers with no users idle.
pub fn baseline_schedule(
    slot: u64,
    rr: &mut RoundRobin,
    table: &SinrTable,
    graph: &NetworkGraph,
    cfg: &MimoConfig,
    receiver: ReceiverModel,
) -> RateAllocation {
    let mut alloc = RateAllocation::empty(slot, graph.num_helpers(), graph.num_users());
    for h in 0..graph.num_helpers() {
        let members = &rr.members[h];
        if members.is_empty() {
            continue;
        }
        let u = members[rr.cursors[h] % members.len()];
        rr.cursors[h] = (rr.cursors[h] + 1) % members.len();
        if !graph.has_file(h, u) {
            continue;
        }
        let rate = user_rate_per_symbol(table.get(h, u), 1, cfg.antennas).expect("S = 1");
        alloc.assign(h, vec![u], |_| slot_bits(rate, cfg));
    }
    alloc.aggregate(receiver);
    alloc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_graph, EdgeRule, Helper, Point, TopologyState};
    use proptest::prelude::*;

    fn cfg(m: usize, s: usize) -> MimoConfig {
        MimoConfig { antennas: m, max_streams: s, symbols_per_slot: 1000 }
    }

    fn cands(weights: &[f64], sinrs: &[f64]) -> Vec<Candidate> {
        weights
            .iter()
            .zip(sinrs)
            .enumerate()
            .map(|(user, (&weight, &sinr))| Candidate { user, weight, sinr })
            .collect()
    }

    #[test]
    fn zero_weights_pick_lowest_singleton() {
        let c = cands(&[0.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let s = greedy_select_candidates(&c, &cfg(8, 4)).unwrap();
        assert_eq!(s.users, vec![0]);
        assert_eq!(s.objective, 0.0);
        let e = exhaustive_select_candidates(&c, &cfg(8, 4)).unwrap();
        assert_eq!(e.users, vec![0]);
    }

    #[test]
    fn single_backlogged_user_goes_alone() {
        let c = cands(&[0.0, 7.0, 0.0], &[1.0, 0.2, 3.0]);
        let s = greedy_select_candidates(&c, &cfg(10, 3)).unwrap();
        assert_eq!(s.users, vec![1]);
        assert_eq!(s.objective, 7.0 * (1.0 + 10.0 * 0.2f64).log2());
    }

    #[test]
    fn exhaustive_small_cases() {
        let one = cands(&[3.0], &[0.5]);
        assert_eq!(exhaustive_select_candidates(&one, &cfg(4, 2)).unwrap().users, vec![0]);

        let c = cands(&[1.0, 2.0, 1.5], &[4.0, 0.5, 1.0]);
        let su = exhaustive_select_candidates(&c, &cfg(6, 1)).unwrap();
        let best = (0..3)
            .max_by(|&a, &b| {
                let f = |i: usize| c[i].weight * (1.0 + 6.0 * c[i].sinr).log2();
                f(a).total_cmp(&f(b))
            })
            .unwrap();
        assert_eq!(su.users, vec![best]);

        let big = cands(&[1.0; 21], &[1.0; 21]);
        assert!(matches!(exhaustive_select_candidates(&big, &cfg(40, 10)), Err(Error::Capacity(_))));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(greedy_select_candidates(&[], &cfg(4, 2)).is_err());
        assert!(greedy_select_candidates(&cands(&[-1.0], &[1.0]), &cfg(4, 2)).is_err());
    }

    fn two_helper_graph(rule: EdgeRule) -> NetworkGraph {
        build_graph(
            vec![
                Helper { position: Point::new(10.0, 10.0), tx_power: 20.0 },
                Helper { position: Point::new(50.0, 50.0), tx_power: 20.0 },
            ],
            vec![Point::new(10.0, 11.0), Point::new(12.0, 10.0), Point::new(50.0, 52.0)],
            rule,
            80.0,
        )
        .unwrap()
    }

    #[test]
    fn single_helper_single_user() {
        let g = build_graph(
            vec![Helper { position: Point::new(0.0, 0.0), tx_power: 10.0 }],
            vec![Point::new(0.0, 0.0)],
            EdgeRule::AllPairs,
            80.0,
        )
        .unwrap();
        let st = TopologyState::from_gains(1, 1, vec![1.0]).unwrap();
        let t = SinrTable::new(&st, &g);
        let c = cfg(4, 2);
        let a = schedule_network(0, &[5.0], &t, &g, &c, ReceiverModel::Advanced).unwrap();
        assert_eq!(a.per_user_bits[0], slot_bits((1.0 + 4.0 * 10.0f64).log2(), &c));
    }

    #[test]
    fn disjoint_neighborhoods_decouple() {
        let g = two_helper_graph(EdgeRule::SnrThreshold(f64::INFINITY));
        let st = TopologyState::from_gains(2, 3, vec![0.9, 0.8, 0.01, 0.01, 0.02, 0.95]).unwrap();
        let t = SinrTable::new(&st, &g);
        let c = cfg(8, 2);
        let w = [4.0, 9.0, 2.0];
        let a = schedule_network(0, &w, &t, &g, &c, ReceiverModel::Advanced).unwrap();
        for h in 0..2 {
            assert_eq!(a.active_subsets[h], greedy_select(h, &w, &t, &g, &c).unwrap().users);
        }
        assert_eq!(a.active_subsets[1], vec![2]);
    }

    #[test]
    fn shared_user_receiver_models() {
        let g = build_graph(
            vec![
                Helper { position: Point::new(0.0, 0.0), tx_power: 20.0 },
                Helper { position: Point::new(10.0, 0.0), tx_power: 20.0 },
            ],
            vec![Point::new(5.0, 0.0)],
            EdgeRule::AllPairs,
            80.0,
        )
        .unwrap();
        let st = TopologyState::from_gains(2, 1, vec![0.6, 0.3]).unwrap();
        let t = SinrTable::new(&st, &g);
        let c = cfg(4, 1);
        let adv = schedule_network(0, &[1.0], &t, &g, &c, ReceiverModel::Advanced).unwrap();
        let dumb = schedule_network(0, &[1.0], &t, &g, &c, ReceiverModel::Dumb).unwrap();
        let (b0, b1) = (adv.edge_bits(0, 0), adv.edge_bits(1, 0));
        assert!(b0 > 0 && b1 > 0);
        assert_eq!(adv.per_user_bits[0], b0 + b1);
        assert_eq!(dumb.per_user_bits[0], b0.max(b1));
    }

    #[test]
    fn rssi_association() {
        let g = two_helper_graph(EdgeRule::AllPairs);
        let mob = crate::topology::MobilityState::new(&g, crate::topology::Mobility::Static, 0);
        let st = crate::topology::topology_state(&g, 0, &mob).unwrap();
        assert_eq!(max_rssi_associate(&st, &g), vec![0, 0, 1]);

        let tie = TopologyState::from_gains(2, 3, vec![0.5; 6]).unwrap();
        assert_eq!(max_rssi_associate(&tie, &g), vec![0, 0, 0]);

        let lone = build_graph(
            vec![Helper { position: Point::new(0.0, 0.0), tx_power: 1.0 }],
            vec![Point::new(3.0, 3.0), Point::new(70.0, 70.0)],
            EdgeRule::AllPairs,
            80.0,
        )
        .unwrap();
        let st = TopologyState::from_gains(1, 2, vec![0.1, 0.2]).unwrap();
        assert_eq!(max_rssi_associate(&st, &lone), vec![0, 0]);
    }

    #[test]
    fn round_robin_cycles() {
        let g = build_graph(
            vec![
                Helper { position: Point::new(0.0, 0.0), tx_power: 20.0 },
                Helper { position: Point::new(40.0, 40.0), tx_power: 20.0 },
            ],
            (0..4).map(|i| Point::new(i as f64, 0.0)).collect(),
            EdgeRule::AllPairs,
            80.0,
        )
        .unwrap();
        let st = TopologyState::from_gains(2, 4, vec![0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1, 0.9]).unwrap();
        let t = SinrTable::new(&st, &g);
        let assoc = max_rssi_associate(&st, &g);
        assert_eq!(assoc, vec![0, 0, 0, 1]);
        let mut rr = RoundRobin::new(&assoc, 2);
        let c = cfg(10, 10);
        let served: Vec<Vec<usize>> = (0..6)
            .map(|s| baseline_schedule(s, &mut rr, &t, &g, &c, ReceiverModel::Dumb).active_subsets[0].clone())
            .collect();
        assert_eq!(served, vec![vec![0], vec![1], vec![2], vec![0], vec![1], vec![2]]);
        let mut rr = RoundRobin::new(&assoc, 2);
        for s in 0..4 {
            let a = baseline_schedule(s, &mut rr, &t, &g, &c, ReceiverModel::Dumb);
            assert_eq!(a.active_subsets[1], vec![3]);
            assert_eq!(
                a.per_user_bits[3],
                slot_bits((1.0 + 10.0 * t.get(1, 3)).log2(), &c)
            );
        }
    }

    #[test]
    fn empty_helper_idles() {
        let mut rr = RoundRobin::new(&[0, 0], 2);
        let g = build_graph(
            vec![
                Helper { position: Point::new(0.0, 0.0), tx_power: 20.0 },
                Helper { position: Point::new(40.0, 40.0), tx_power: 20.0 },
            ],
            vec![Point::new(1.0, 0.0), Point::new(2.0, 0.0)],
            EdgeRule::AllPairs,
            80.0,
        )
        .unwrap();
        let st = TopologyState::from_gains(2, 2, vec![0.9, 0.9, 0.1, 0.1]).unwrap();
        let t = SinrTable::new(&st, &g);
        let a = baseline_schedule(0, &mut rr, &t, &g, &cfg(4, 1), ReceiverModel::Advanced);
        assert!(a.active_subsets[1].is_empty());
    }

    fn instance() -> impl Strategy<Value = (Vec<Candidate>, MimoConfig)> {
        (1usize..=10, prop::sample::select(vec![10usize, 20, 40])).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec((0.0f64..1e6, 0.0f64..50.0), n),
                1usize..=10.min(m),
                Just(m),
            )
                .prop_map(|(ws, s, m)| {
                    let c = ws
                        .into_iter()
                        .enumerate()
                        .map(|(user, (weight, sinr))| Candidate { user, weight, sinr })
                        .collect();
                    (c, cfg(m, s))
                })
        })
    }

    proptest! {
        #[test]
        fn greedy_matches_exhaustive((c, mc) in instance()) {
            let g = greedy_select_candidates(&c, &mc).unwrap();
            let e = exhaustive_select_candidates(&c, &mc).unwrap();
            prop_assert_eq!(g.objective, e.objective);
            prop_assert!(g.size() <= mc.max_streams);
        }

        #[test]
        fn weight_scaling_keeps_subset((c, mc) in instance(), k in 0.5f64..8.0) {
            // powers of two scale exactly in floating point
            let scale = 2f64.powi(k as i32);
            let scaled: Vec<Candidate> = c.iter().map(|x| Candidate { weight: x.weight * scale, ..*x }).collect();
            let a = greedy_select_candidates(&c, &mc).unwrap();
            let b = greedy_select_candidates(&scaled, &mc).unwrap();
            prop_assert_eq!(&a.users, &b.users);
            prop_assert_eq!(a.objective * scale, b.objective);
        }
    }
}
