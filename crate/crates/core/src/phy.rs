//! Hardened massive MU-MIMO rate model with linear zero-forcing and equal
//! power split across streams.
//!
//! Under channel hardening a scheduled user's rate depends only on its own
//! SINR and on how many streams its helper serves, not on who the other
//! streams belong to. The scheduler relies on that.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NetworkGraph, TopologyState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MimoConfig {
    /// Antennas per helper, M.
    pub antennas: usize,
    /// Largest active subset a helper may serve, S.
    pub max_streams: usize,
    /// Channel symbols per transmission slot, s.
    pub symbols_per_slot: u64,
}

impl Default for MimoConfig {
    /// M = 40, S = 10 and one LTE frame (84 x 100 x 20 symbols).
    fn default() -> Self {
        Self {
            antennas: 40,
            max_streams: 10,
            symbols_per_slot: 84 * 100 * 20,
        }
    }
}

impl MimoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::config("mimo.M", "must be >= 1"));
        }
        if self.max_streams == 0 || self.max_streams > self.antennas {
            return Err(Error::config(
                "mimo.S",
                format!("need 1 <= S <= M = {}, got {}", self.antennas, self.max_streams),
            ));
        }
        if self.symbols_per_slot == 0 {
            return Err(Error::config("mimo.symbols_per_slot", "must be >= 1"));
        }
        Ok(())
    }
}

/// Worst-case SINR of link (h, u): every other helper interferes at full power.
pub fn sinr(h: usize, u: usize, state: &TopologyState, graph: &NetworkGraph) -> f64 {
    let signal = graph.helpers[h].tx_power * state.gain(h, u);
    let interference: f64 = graph
        .helpers
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != h)
        .map(|(k, hk)| hk.tx_power * state.gain(k, u))
        .sum();
    signal / (1.0 + interference)
}

/// Dense helper x user SINR table for one topology state.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrTable {
    num_users: usize,
    values: Vec<f64>,
}

impl SinrTable {
    pub fn new(state: &TopologyState, graph: &NetworkGraph) -> Self {
        let nu = graph.num_users();
        let mut values = Vec::with_capacity(graph.num_helpers() * nu);
        for h in 0..graph.num_helpers() {
            for u in 0..nu {
                values.push(sinr(h, u, state, graph));
            }
        }
        Self { num_users: nu, values }
    }

    pub fn get(&self, h: usize, u: usize) -> f64 {
        self.values[h * self.num_users + u]
    }
}

/// Bits per channel symbol of one stream when the helper serves `subset_size`
/// streams: `log2(1 + (M - S + 1) / S * sinr)`.
pub fn user_rate_per_symbol(sinr: f64, subset_size: usize, antennas: usize) -> Result<f64> {
    if subset_size == 0 || subset_size > antennas {
        return Err(Error::Domain(format!(
            "subset size {subset_size} outside 1..={antennas}"
        )));
    }
    if !(sinr >= 0.0) {
        return Err(Error::Domain(format!("negative sinr {sinr}")));
    }
    let gain = (antennas - subset_size + 1) as f64 / subset_size as f64;
    Ok((1.0 + gain * sinr).log2())
}

/// c_h(S_h): per-user rates when helper `h` serves `subset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRates {
    pub helper: usize,
    pub subset: Vec<usize>,
    /// bits/symbol, aligned with `subset`; users outside the subset get 0.
    pub rates: Vec<f64>,
}

impl SubsetRates {
    pub fn rate_of(&self, u: usize) -> f64 {
        self.subset
            .iter()
            .position(|&v| v == u)
            .map_or(0.0, |i| self.rates[i])
    }
}

pub fn subset_rates(
    h: usize,
    subset: &[usize],
    table: &SinrTable,
    graph: &NetworkGraph,
    cfg: &MimoConfig,
) -> Result<SubsetRates> {
    if subset.len() > cfg.max_streams {
        return Err(Error::Contract(format!(
            "helper {h}: subset of {} exceeds S = {}",
            subset.len(),
            cfg.max_streams
        )));
    }
    if let Some(&u) = subset.iter().find(|&&u| !graph.is_edge(h, u)) {
        return Err(Error::Contract(format!("user {u} is not in N({h})")));
    }
    let rates = subset
        .iter()
        .map(|&u| user_rate_per_symbol(table.get(h, u), subset.len(), cfg.antennas))
        .collect::<Result<_>>()?;
    Ok(SubsetRates {
        helper: h,
        subset: subset.to_vec(),
        rates,
    })
}

/// Integer bit budget of one slot at `rate` bits/symbol.
pub fn slot_bits(rate: f64, cfg: &MimoConfig) -> u64 {
    (cfg.symbols_per_slot as f64 * rate).floor() as u64
}
