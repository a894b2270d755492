//! CSV outputs. Every file opens with `# config_hash=...,seed=...` followed by
//! a header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::client::CLIENT_TRACE_HEADER;
use crate::config::SimConfig;
use crate::error::Result;
use crate::playback::{PlaybackState, PLAYBACK_TRACE_HEADER};
use crate::scheduler::SCHEDULE_TRACE_HEADER;
use crate::sim::{SimObserver, SimResult, SlotView, World};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const RUN_FILE: &str = "run.csv";
pub const SCHEDULE_TRACE_FILE: &str = "trace_schedule.csv";
pub const CLIENT_TRACE_FILE: &str = "trace_client.csv";
pub const PLAYBACK_TRACE_FILE: &str = "trace_playback.csv";

pub const SUMMARY_HEADER: [&str; 20] = [
    "userId",
    "fileId",
    "startChunk",
    "requestedChunks",
    "deliveredChunks",
    "averageQuality",
    "requestedQuality",
    "averageDelay",
    "bufferingPercent",
    "stallCount",
    "stallSlots",
    "prebufferSlots",
    "startSlot",
    "meanQ",
    "meanTheta",
    "requestedBits",
    "deliveredBits",
    "drainedBits",
    "discardedBits",
    "residualBits",
];

pub const RUN_HEADER: [&str; 19] = [
    "configHash",
    "seed",
    "policy",
    "receiver",
    "V",
    "alpha",
    "M",
    "S",
    "n",
    "helpers",
    "users",
    "utility",
    "meanQ",
    "meanTheta",
    "meanQuality",
    "meanDelay",
    "meanBufferingPercent",
    "drainComplete",
    "slotsRun",
];

/// A CSV writer whose file starts with the provenance comment line.
pub fn provenance_writer<W: Write>(mut out: W, hash: &str, seed: u64) -> Result<csv::Writer<W>> {
    writeln!(out, "# config_hash={hash},seed={seed}")?;
    Ok(csv::Writer::from_writer(out))
}

/// Reader that skips the provenance comment.
pub fn provenance_reader<R: std::io::Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

pub fn write_summary<W: Write>(out: W, res: &SimResult) -> Result<()> {
    let mut w = provenance_writer(out, &res.config_hash, res.seed)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in &res.users {
        w.write_record([
            r.user.to_string(),
            r.file_id.to_string(),
            r.start_chunk.to_string(),
            r.requested_chunks.to_string(),
            r.delivered_chunks.to_string(),
            r.average_quality.to_string(),
            r.requested_quality.to_string(),
            r.average_delay.to_string(),
            r.buffering_percent.to_string(),
            r.stall_count.to_string(),
            r.stall_slots.to_string(),
            r.prebuffer_slots.to_string(),
            opt(r.start_slot),
            r.mean_q.to_string(),
            r.mean_theta.to_string(),
            r.requested_bits.to_string(),
            r.delivered_bits.to_string(),
            r.drained_bits.to_string(),
            r.discarded_bits.to_string(),
            r.residual_bits.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_run<W: Write>(out: W, cfg: &SimConfig, res: &SimResult) -> Result<()> {
    let mut w = provenance_writer(out, &res.config_hash, res.seed)?;
    w.write_record(RUN_HEADER)?;
    let get = |k: &str| cfg.get(k).expect("known key");
    w.write_record([
        res.config_hash.clone(),
        res.seed.to_string(),
        get("sim.policy"),
        get("sim.receiver"),
        get("utility.V"),
        get("utility.alpha"),
        get("mimo.M"),
        get("mimo.S"),
        get("sim.n"),
        res.num_helpers.to_string(),
        res.users.len().to_string(),
        res.utility.to_string(),
        res.mean_q.to_string(),
        res.mean_theta.to_string(),
        res.mean_quality.to_string(),
        res.mean_delay.to_string(),
        res.mean_buffering_percent.to_string(),
        res.drain_complete.to_string(),
        res.slots_run.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

/// Writes `summary.csv` and `run.csv` into `dir`; returns their paths.
pub fn write_results(dir: &Path, cfg: &SimConfig, res: &SimResult) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    write_summary(create(dir, SUMMARY_FILE)?, res)?;
    write_run(create(dir, RUN_FILE)?, cfg, res)?;
    Ok(vec![dir.join(SUMMARY_FILE), dir.join(RUN_FILE)])
}

/// Aggregate table of a sweep: one row per value.
pub fn write_sweep_aggregate<W: Write>(
    out: W,
    template: &SimConfig,
    param: &str,
    results: &[(String, SimResult)],
) -> Result<()> {
    let mut w = provenance_writer(out, &template.hash(), template.seed)?;
    w.write_record([param, "configHash", "utility", "meanQuality", "meanDelay", "meanBufferingPercent", "meanQ", "drainComplete"])?;
    for (v, r) in results {
        w.write_record([
            v.clone(),
            r.config_hash.clone(),
            r.utility.to_string(),
            r.mean_quality.to_string(),
            r.mean_delay.to_string(),
            r.mean_buffering_percent.to_string(),
            r.mean_q.to_string(),
            r.drain_complete.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `nodes.csv` and `gains.csv` for the world built from `cfg`.
pub fn write_topology(dir: &Path, cfg: &SimConfig, world: &World) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let hash = cfg.hash();
    let mut nodes = create(dir, "nodes.csv")?;
    writeln!(nodes, "# config_hash={hash},seed={}", cfg.seed)?;
    world.graph.write_nodes_csv(&mut nodes)?;
    nodes.flush()?;
    let mut gains = create(dir, "gains.csv")?;
    writeln!(gains, "# config_hash={hash},seed={}", cfg.seed)?;
    world.initial_state()?.write_gains_csv(&mut gains)?;
    gains.flush()?;
    Ok(vec![dir.join("nodes.csv"), dir.join("gains.csv")])
}

/// Streams the optional trace CSVs while a run progresses.
pub struct TraceWriter {
    schedule: Option<csv::Writer<BufWriter<File>>>,
    client: Option<csv::Writer<BufWriter<File>>>,
    playback: Option<csv::Writer<BufWriter<File>>>,
}

impl TraceWriter {
    /// Opens the trace files enabled in `cfg.traces`.
    pub fn new(dir: &Path, cfg: &SimConfig) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let hash = cfg.hash();
        let open = |on: bool, name: &str, header: &[&str]| -> Result<_> {
            if !on {
                return Ok(None);
            }
            let mut w = provenance_writer(create(dir, name)?, &hash, cfg.seed)?;
            w.write_record(header)?;
            Ok(Some(w))
        };
        Ok(Self {
            schedule: open(cfg.traces.schedule, SCHEDULE_TRACE_FILE, &SCHEDULE_TRACE_HEADER)?,
            client: open(cfg.traces.client, CLIENT_TRACE_FILE, &CLIENT_TRACE_HEADER)?,
            playback: open(cfg.traces.playback, PLAYBACK_TRACE_FILE, &PLAYBACK_TRACE_HEADER)?,
        })
    }

    pub fn finish(self) -> Result<()> {
        for w in [self.schedule, self.client, self.playback].into_iter().flatten() {
            w.into_inner().map_err(|e| e.into_error())?.flush()?;
        }
        Ok(())
    }
}

impl SimObserver for TraceWriter {
    fn on_slot(&mut self, v: &SlotView<'_>) -> Result<()> {
        if let Some(w) = &mut self.schedule {
            v.allocation.write_trace_rows(w)?;
        }
        if let Some(w) = &mut self.client {
            for (u, q) in v.queues.iter().enumerate() {
                let (mode, bits) = v.requests[u]
                    .as_ref()
                    .map_or((String::new(), String::new()), |r| (r.mode.to_string(), r.bits.to_string()));
                w.write_record([
                    v.t.to_string(),
                    u.to_string(),
                    q.q().to_string(),
                    q.theta.to_string(),
                    v.gammas[u].to_string(),
                    mode,
                    bits,
                    v.allocation.per_user_bits[u].to_string(),
                ])?;
            }
        }
        Ok(())
    }

    fn on_video_slot(&mut self, i: u64, playback: &[PlaybackState]) -> Result<()> {
        if let Some(w) = &mut self.playback {
            for (u, ps) in playback.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    u.to_string(),
                    ps.psi.to_string(),
                    ps.phase.as_str().to_string(),
                    ps.estimate().to_string(),
                    ps.last_arrivals().to_string(),
                ])?;
            }
        }
        Ok(())
    }
}
