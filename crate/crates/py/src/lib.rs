//! Python bindings.

use std::collections::HashMap;

use dppstream::client::{self, RequestQueueState};
use dppstream::phy::MimoConfig;
use dppstream::scheduler::{self, Candidate};
use dppstream::video::{self, CatalogSpec, ModeEntry, VideoSession};
use dppstream::{Error, Point, SimConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Config { .. } | Error::Contract(_) | Error::Capacity(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Pathloss gain 1 / (1 + (d/40)^3.5).
#[pyfunction]
fn pathloss_gain(d: f64) -> f64 {
    dppstream::pathloss_gain(d)
}

/// Wrap-around distance between (ax, ay) and (bx, by) on a square torus.
#[pyfunction]
fn torus_distance(a: (f64, f64), b: (f64, f64), side: f64) -> PyResult<f64> {
    dppstream::torus_distance(Point::new(a.0, a.1), Point::new(b.0, b.1), side).map_err(to_py)
}

#[pyfunction]
fn user_rate_per_symbol(sinr: f64, subset_size: usize, antennas: usize) -> PyResult<f64> {
    dppstream::user_rate_per_symbol(sinr, subset_size, antennas).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (rate, symbols_per_slot = 168_000))]
fn slot_bits(rate: f64, symbols_per_slot: u64) -> u64 {
    let cfg = MimoConfig { symbols_per_slot, ..MimoConfig::default() };
    dppstream::slot_bits(rate, &cfg)
}

#[pyfunction]
fn utility(alpha: f64, x: f64) -> PyResult<f64> {
    dppstream::utility(alpha, x).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (theta, v, alpha = 1.0, d_min = 0.3, d_max = 1.0))]
fn optimize_gamma(theta: f64, v: f64, alpha: f64, d_min: f64, d_max: f64) -> PyResult<f64> {
    client::optimize_gamma(theta, &client::UtilityConfig { alpha, v }, d_min, d_max).map_err(to_py)
}

fn candidates(weights: &[f64], sinrs: &[f64]) -> PyResult<Vec<Candidate>> {
    if weights.len() != sinrs.len() {
        return Err(PyValueError::new_err("weights and sinrs differ in length"));
    }
    Ok(weights
        .iter()
        .zip(sinrs)
        .enumerate()
        .map(|(user, (&weight, &sinr))| Candidate { user, weight, sinr })
        .collect())
}

/// Greedy MWSR over candidates 0..len; returns (subset, objective).
#[pyfunction]
fn greedy_select(weights: Vec<f64>, sinrs: Vec<f64>, antennas: usize, max_streams: usize) -> PyResult<(Vec<usize>, f64)> {
    let cfg = MimoConfig { antennas, max_streams, ..MimoConfig::default() };
    let s = scheduler::greedy_select_candidates(&candidates(&weights, &sinrs)?, &cfg).map_err(to_py)?;
    Ok((s.users, s.objective))
}

/// Exhaustive MWSR oracle; at most 20 candidates.
#[pyfunction]
fn exhaustive_select(weights: Vec<f64>, sinrs: Vec<f64>, antennas: usize, max_streams: usize) -> PyResult<(Vec<usize>, f64)> {
    let cfg = MimoConfig { antennas, max_streams, ..MimoConfig::default() };
    let s = scheduler::exhaustive_select_candidates(&candidates(&weights, &sinrs)?, &cfg).map_err(to_py)?;
    Ok((s.users, s.objective))
}

/// Per-chunk, per-mode (quality, bits) table of one video.
#[pyclass(name = "QualityRateProfile", module = "dppstream_py")]
struct PyProfile {
    inner: video::QualityRateProfile,
}

#[pymethods]
impl PyProfile {
    /// `chunks[i]` lists (quality, size_bits) per mode, lowest mode first.
    #[new]
    #[pyo3(signature = (chunks, d_min = 0.3, d_max = 1.0, file_id = 0))]
    fn new(chunks: Vec<Vec<(f64, u64)>>, d_min: f64, d_max: f64, file_id: u32) -> PyResult<Self> {
        let rows = chunks
            .into_iter()
            .map(|c| c.into_iter().map(|(quality, size_bits)| ModeEntry { quality, size_bits }).collect())
            .collect();
        Ok(Self { inner: video::QualityRateProfile::new(file_id, rows, d_min, d_max).map_err(to_py)? })
    }

    /// The default 800-chunk synthetic catalog.
    #[staticmethod]
    #[pyo3(signature = (seed = 0, file_id = 0))]
    fn synthetic(seed: u64, file_id: u32) -> PyResult<Self> {
        Ok(Self { inner: video::synth_catalog(&CatalogSpec::default(), file_id, seed).map_err(to_py)? })
    }

    #[getter]
    fn num_chunks(&self) -> usize {
        self.inner.num_chunks()
    }

    fn modes_per_chunk(&self, i: usize) -> PyResult<usize> {
        self.inner.modes_per_chunk(i).map_err(to_py)
    }

    fn chunk_quality(&self, i: usize, m: usize) -> PyResult<f64> {
        self.inner.chunk_quality(i, m).map_err(to_py)
    }

    fn chunk_size_bits(&self, i: usize, m: usize) -> PyResult<u64> {
        self.inner.chunk_size_bits(i, m).map_err(to_py)
    }

    fn select_mode(&self, q: f64, theta: f64, i: usize) -> PyResult<usize> {
        client::select_mode(q, theta, &self.inner, i).map_err(to_py)
    }
}

/// Request queue, virtual queue and chunk ledger of one user.
#[pyclass(name = "RequestQueue", module = "dppstream_py")]
struct PyRequestQueue {
    inner: RequestQueueState,
    session: VideoSession,
    profile: video::QualityRateProfile,
    n: u64,
}

#[pymethods]
impl PyRequestQueue {
    #[new]
    #[pyo3(signature = (profile, session_length, start_chunk = 0, n = 50))]
    fn new(profile: &PyProfile, session_length: usize, start_chunk: usize, n: u64) -> PyResult<Self> {
        let session = VideoSession::new(0, &profile.inner, start_chunk, session_length).map_err(to_py)?;
        Ok(Self { inner: RequestQueueState::new(), session, profile: profile.inner.clone(), n })
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }

    #[setter]
    fn set_theta(&mut self, theta: f64) -> PyResult<()> {
        if theta.is_nan() || theta < 0.0 {
            return Err(PyValueError::new_err("theta must be >= 0"));
        }
        self.inner.theta = theta;
        Ok(())
    }

    /// Requests the next chunk at slot `t`: (chunk, mode, bits), or None once
    /// the session is exhausted.
    fn request(&mut self, t: u64) -> PyResult<Option<(usize, usize, u64)>> {
        let r = self
            .inner
            .request_chunk(&mut self.session, &self.profile, t, self.n)
            .map_err(to_py)?;
        Ok(r.map(|r| (r.chunk, r.mode, r.bits)))
    }

    /// Applies delivered bits; returns the chunks completed.
    fn drain(&mut self, bits: u64) -> Vec<usize> {
        self.inner.drain_bits(bits)
    }

    fn update_virtual_queue(&mut self, gamma: f64, quality: f64) -> f64 {
        self.inner.update_virtual_queue(gamma, quality)
    }

    #[getter]
    fn discarded_bits(&self) -> u64 {
        self.inner.discarded_bits()
    }

    fn check(&self) -> PyResult<()> {
        self.inner.check_consistency().map_err(to_py)
    }
}

/// Runs one simulation with `key -> value` overrides on the defaults and
/// returns run-level metrics plus a per-user list.
#[pyfunction]
#[pyo3(signature = (overrides = None))]
fn run_simulation<'py>(py: Python<'py>, overrides: Option<HashMap<String, String>>) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = SimConfig::default();
    let mut pairs: Vec<(String, String)> = overrides.unwrap_or_default().into_iter().collect();
    pairs.sort();
    for (k, v) in &pairs {
        cfg.set(k, v).map_err(to_py)?;
    }
    cfg.validate().map_err(to_py)?;
    let res = py.detach(|| dppstream::run(&cfg)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("config_hash", &res.config_hash)?;
    out.set_item("seed", res.seed)?;
    out.set_item("utility", res.utility)?;
    out.set_item("mean_quality", res.mean_quality)?;
    out.set_item("mean_delay", res.mean_delay)?;
    out.set_item("mean_buffering_percent", res.mean_buffering_percent)?;
    out.set_item("mean_q", res.mean_q)?;
    out.set_item("mean_theta", res.mean_theta)?;
    out.set_item("drain_complete", res.drain_complete)?;
    let users = res
        .users
        .iter()
        .map(|u| {
            let d = PyDict::new(py);
            d.set_item("user", u.user)?;
            d.set_item("average_quality", u.average_quality)?;
            d.set_item("average_delay", u.average_delay)?;
            d.set_item("buffering_percent", u.buffering_percent)?;
            d.set_item("stall_count", u.stall_count)?;
            d.set_item("delivered_chunks", u.delivered_chunks)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("users", users)?;
    Ok(out)
}

#[pymodule]
fn dppstream_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(pathloss_gain, m)?)?;
    m.add_function(wrap_pyfunction!(torus_distance, m)?)?;
    m.add_function(wrap_pyfunction!(user_rate_per_symbol, m)?)?;
    m.add_function(wrap_pyfunction!(slot_bits, m)?)?;
    m.add_function(wrap_pyfunction!(utility, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_select, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive_select, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyRequestQueue>()?;
    Ok(())
}
