//! Simulation configuration and its flat `key = value` file format.
//!
//! Lines are `dotted.key = value`; `#` starts a comment. Later assignments
//! override earlier ones, which is how command-line overrides are applied.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::UtilityConfig;
use crate::error::{Error, Result};
use crate::phy::MimoConfig;
use crate::scheduler::ReceiverModel;
use crate::topology::{EdgeRule, Mobility, Point};
use crate::video::{CatalogSpec, SegmentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    Dpp,
    Baseline,
}

/// When the virtual queue and gamma are updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThetaUpdate {
    /// Once per chunk request, with that chunk's quality.
    Chunk,
    /// Every transmission slot, with D = 0 between requests.
    Slot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub side: f64,
    /// `None` selects the default five-helper layout.
    pub helper_positions: Option<Vec<Point>>,
    pub tx_power: f64,
    /// Expected user count of the Poisson placement.
    pub mean_users: f64,
    pub hotspot_ratio: f64,
    /// Fixed user positions; bypasses the Poisson placement.
    pub user_positions: Option<Vec<Point>>,
    pub edge_rule: EdgeRule,
    pub mobility: Mobility,
}

impl Default for TopologySpec {
    fn default() -> Self {
        Self {
            side: 80.0,
            helper_positions: None,
            // 10 dB at 40 m from a lone helper: P * 0.5 = 10
            tx_power: 20.0,
            mean_users: 500.0,
            hotspot_ratio: 4.0,
            user_positions: None,
            edge_rule: EdgeRule::AllPairs,
            mobility: Mobility::Static,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSpec {
    pub catalog: CatalogSpec,
    pub files: usize,
    /// Catalog CSV to load instead of synthesizing.
    pub catalog_path: Option<PathBuf>,
}

impl Default for VideoSpec {
    fn default() -> Self {
        Self {
            catalog: CatalogSpec::default(),
            files: 1,
            catalog_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFlags {
    pub schedule: bool,
    pub client: bool,
    pub playback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Transmission slots per video slot.
    pub n: u64,
    pub t_gop_seconds: f64,
    pub slot_seconds: f64,
    pub session_chunks: usize,
    pub policy: Policy,
    pub receiver: ReceiverModel,
    pub utility: UtilityConfig,
    pub mimo: MimoConfig,
    pub topology: TopologySpec,
    pub video: VideoSpec,
    pub seed: u64,
    /// Window Delta of the delay estimate, in video slots.
    pub window: u64,
    pub rho: f64,
    /// Post-session draining budget, in video slots.
    pub drain_limit_chunks: u64,
    pub theta_update: ThetaUpdate,
    /// Scheduler sees Q from this many slots ago.
    pub weight_staleness: u64,
    pub traces: TraceFlags,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 50,
            t_gop_seconds: 0.5,
            slot_seconds: 0.01,
            session_chunks: 1000,
            policy: Policy::Dpp,
            receiver: ReceiverModel::Advanced,
            utility: UtilityConfig::default(),
            mimo: MimoConfig::default(),
            topology: TopologySpec::default(),
            video: VideoSpec::default(),
            seed: 1,
            window: 20,
            rho: 3.0,
            drain_limit_chunks: 200,
            theta_update: ThetaUpdate::Chunk,
            weight_staleness: 0,
            traces: TraceFlags::default(),
        }
    }
}

/// Every accepted key, in canonical order.
pub const KEYS: &[&str] = &[
    "sim.n",
    "sim.t_gop_seconds",
    "sim.slot_seconds",
    "sim.session_chunks",
    "sim.policy",
    "sim.receiver",
    "sim.seed",
    "sim.drain_limit_chunks",
    "sim.theta_update",
    "sim.weight_staleness",
    "utility.alpha",
    "utility.V",
    "mimo.M",
    "mimo.S",
    "mimo.symbols_per_slot",
    "topology.side",
    "topology.helpers",
    "topology.tx_power",
    "topology.users",
    "topology.hotspot_ratio",
    "topology.user_positions",
    "topology.edge_rule",
    "topology.mobility",
    "video.segments",
    "video.sigma",
    "video.ladder_floor",
    "video.quality_curvature",
    "video.d_min",
    "video.d_max",
    "video.files",
    "video.catalog",
    "playback.window",
    "playback.rho",
    "trace.schedule",
    "trace.client",
    "trace.playback",
];

/// Short names accepted in place of full keys.
pub fn resolve_alias(key: &str) -> &str {
    match key {
        "V" => "utility.V",
        "alpha" => "utility.alpha",
        "M" => "mimo.M",
        "S" | "sMax" => "mimo.S",
        "n" => "sim.n",
        "seed" => "sim.seed",
        "policy" => "sim.policy",
        "receiver" | "receiverModel" => "sim.receiver",
        "users" | "userCount" => "topology.users",
        "rho" => "playback.rho",
        "window" => "playback.window",
        other => other,
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::config(key, format!("expected a boolean, got `{value}`"))),
    }
}

fn parse_points(key: &str, value: &str) -> Result<Vec<Point>> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|p| {
            let (x, y) = p
                .split_once(',')
                .ok_or_else(|| Error::config(key, format!("expected `x,y`, got `{p}`")))?;
            Ok(Point::new(parse(key, x.trim())?, parse(key, y.trim())?))
        })
        .collect()
}

fn fmt_points(points: &[Point]) -> String {
    points
        .iter()
        .map(|p| format!("{},{}", p.x, p.y))
        .collect::<Vec<_>>()
        .join(";")
}

/// `first-last:modes:kbps[:q_lo:q_hi]` separated by `;`.
fn parse_segments(key: &str, value: &str, d_min: f64, d_max: f64) -> Result<Vec<SegmentSpec>> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|seg| {
            let f: Vec<&str> = seg.split(':').map(str::trim).collect();
            if f.len() != 3 && f.len() != 5 {
                return Err(Error::config(key, format!("bad segment `{seg}`")));
            }
            let (a, b) = f[0]
                .split_once('-')
                .ok_or_else(|| Error::config(key, format!("bad chunk range `{}`", f[0])))?;
            let (lo, hi) = if f.len() == 5 {
                (parse(key, f[3])?, parse(key, f[4])?)
            } else {
                (d_min, d_max)
            };
            Ok(SegmentSpec {
                first_chunk: parse(key, a)?,
                last_chunk: parse(key, b)?,
                modes: parse(key, f[1])?,
                mean_kbps: parse(key, f[2])?,
                quality_lo: lo,
                quality_hi: hi,
            })
        })
        .collect()
}

fn fmt_segments(segs: &[SegmentSpec]) -> String {
    segs.iter()
        .map(|s| {
            format!(
                "{}-{}:{}:{}:{}:{}",
                s.first_chunk, s.last_chunk, s.modes, s.mean_kbps, s.quality_lo, s.quality_hi
            )
        })
        .collect::<Vec<_>>()
        .join(";")
}

impl SimConfig {
    /// Assigns one key. Aliases are accepted.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = resolve_alias(key.trim());
        let v = value.trim();
        match key {
            "sim.n" => self.n = parse(key, v)?,
            "sim.t_gop_seconds" => {
                self.t_gop_seconds = parse(key, v)?;
                self.video.catalog.chunk_seconds = self.t_gop_seconds;
            }
            "sim.slot_seconds" => self.slot_seconds = parse(key, v)?,
            "sim.session_chunks" => self.session_chunks = parse(key, v)?,
            "sim.policy" => {
                self.policy = match v {
                    "dpp" => Policy::Dpp,
                    "baseline" => Policy::Baseline,
                    _ => return Err(Error::config(key, format!("expected dpp|baseline, got `{v}`"))),
                }
            }
            "sim.receiver" => {
                self.receiver = match v {
                    "advanced" => ReceiverModel::Advanced,
                    "dumb" => ReceiverModel::Dumb,
                    _ => return Err(Error::config(key, format!("expected advanced|dumb, got `{v}`"))),
                }
            }
            "sim.seed" => self.seed = parse(key, v)?,
            "sim.drain_limit_chunks" => self.drain_limit_chunks = parse(key, v)?,
            "sim.theta_update" => {
                self.theta_update = match v {
                    "chunk" => ThetaUpdate::Chunk,
                    "slot" => ThetaUpdate::Slot,
                    _ => return Err(Error::config(key, format!("expected chunk|slot, got `{v}`"))),
                }
            }
            "sim.weight_staleness" => self.weight_staleness = parse(key, v)?,
            "utility.alpha" => self.utility.alpha = parse(key, v)?,
            "utility.V" => self.utility.v = parse(key, v)?,
            "mimo.M" => self.mimo.antennas = parse(key, v)?,
            "mimo.S" => self.mimo.max_streams = parse(key, v)?,
            "mimo.symbols_per_slot" => self.mimo.symbols_per_slot = parse(key, v)?,
            "topology.side" => self.topology.side = parse(key, v)?,
            "topology.helpers" => {
                self.topology.helper_positions = match v {
                    "default" => None,
                    _ => Some(parse_points(key, v)?),
                }
            }
            "topology.tx_power" => self.topology.tx_power = parse(key, v)?,
            "topology.users" => self.topology.mean_users = parse(key, v)?,
            "topology.hotspot_ratio" => self.topology.hotspot_ratio = parse(key, v)?,
            "topology.user_positions" => {
                self.topology.user_positions = match v {
                    "poisson" => None,
                    _ => Some(parse_points(key, v)?),
                }
            }
            "topology.edge_rule" => {
                self.topology.edge_rule = match v.split_once(':') {
                    None if v == "all" => EdgeRule::AllPairs,
                    Some(("snr", th)) => EdgeRule::SnrThreshold(parse(key, th)?),
                    _ => return Err(Error::config(key, format!("expected all|snr:<threshold>, got `{v}`"))),
                }
            }
            "topology.mobility" => {
                self.topology.mobility = match v.split_once(':') {
                    None if v == "static" => Mobility::Static,
                    Some(("waypoint", s)) => Mobility::Waypoint { speed: parse(key, s)? },
                    _ => return Err(Error::config(key, format!("expected static|waypoint:<m/s>, got `{v}`"))),
                }
            }
            "video.segments" => {
                let c = &self.video.catalog;
                self.video.catalog.segments = parse_segments(key, v, c.d_min, c.d_max)?;
            }
            "video.sigma" => self.video.catalog.sigma = parse(key, v)?,
            "video.ladder_floor" => self.video.catalog.ladder_floor = parse(key, v)?,
            "video.quality_curvature" => self.video.catalog.quality_curvature = parse(key, v)?,
            "video.d_min" => self.video.catalog.d_min = parse(key, v)?,
            "video.d_max" => self.video.catalog.d_max = parse(key, v)?,
            "video.files" => self.video.files = parse(key, v)?,
            "video.catalog" => {
                self.video.catalog_path = match v {
                    "synthetic" => None,
                    _ => Some(PathBuf::from(v)),
                }
            }
            "playback.window" => self.window = parse(key, v)?,
            "playback.rho" => self.rho = parse(key, v)?,
            "trace.schedule" => self.traces.schedule = parse_bool(key, v)?,
            "trace.client" => self.traces.client = parse_bool(key, v)?,
            "trace.playback" => self.traces.playback = parse_bool(key, v)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Current value of `key` in canonical text form.
    pub fn get(&self, key: &str) -> Result<String> {
        let key = resolve_alias(key);
        let c = &self.video.catalog;
        let t = &self.topology;
        Ok(match key {
            "sim.n" => self.n.to_string(),
            "sim.t_gop_seconds" => self.t_gop_seconds.to_string(),
            "sim.slot_seconds" => self.slot_seconds.to_string(),
            "sim.session_chunks" => self.session_chunks.to_string(),
            "sim.policy" => match self.policy {
                Policy::Dpp => "dpp".into(),
                Policy::Baseline => "baseline".into(),
            },
            "sim.receiver" => match self.receiver {
                ReceiverModel::Advanced => "advanced".into(),
                ReceiverModel::Dumb => "dumb".into(),
            },
            "sim.seed" => self.seed.to_string(),
            "sim.drain_limit_chunks" => self.drain_limit_chunks.to_string(),
            "sim.theta_update" => match self.theta_update {
                ThetaUpdate::Chunk => "chunk".into(),
                ThetaUpdate::Slot => "slot".into(),
            },
            "sim.weight_staleness" => self.weight_staleness.to_string(),
            "utility.alpha" => self.utility.alpha.to_string(),
            "utility.V" => self.utility.v.to_string(),
            "mimo.M" => self.mimo.antennas.to_string(),
            "mimo.S" => self.mimo.max_streams.to_string(),
            "mimo.symbols_per_slot" => self.mimo.symbols_per_slot.to_string(),
            "topology.side" => t.side.to_string(),
            "topology.helpers" => t.helper_positions.as_deref().map_or("default".into(), fmt_points),
            "topology.tx_power" => t.tx_power.to_string(),
            "topology.users" => t.mean_users.to_string(),
            "topology.hotspot_ratio" => t.hotspot_ratio.to_string(),
            "topology.user_positions" => t.user_positions.as_deref().map_or("poisson".into(), fmt_points),
            "topology.edge_rule" => match t.edge_rule {
                EdgeRule::AllPairs => "all".into(),
                EdgeRule::SnrThreshold(th) => format!("snr:{th}"),
            },
            "topology.mobility" => match t.mobility {
                Mobility::Static => "static".into(),
                Mobility::Waypoint { speed } => format!("waypoint:{speed}"),
            },
            "video.segments" => fmt_segments(&c.segments),
            "video.sigma" => c.sigma.to_string(),
            "video.ladder_floor" => c.ladder_floor.to_string(),
            "video.quality_curvature" => c.quality_curvature.to_string(),
            "video.d_min" => c.d_min.to_string(),
            "video.d_max" => c.d_max.to_string(),
            "video.files" => self.video.files.to_string(),
            "video.catalog" => self
                .video
                .catalog_path
                .as_ref()
                .map_or("synthetic".into(), |p| p.display().to_string()),
            "playback.window" => self.window.to_string(),
            "playback.rho" => self.rho.to_string(),
            "trace.schedule" => self.traces.schedule.to_string(),
            "trace.client" => self.traces.client.to_string(),
            "trace.playback" => self.traces.playback.to_string(),
            _ => return Err(Error::config(key, "unknown key")),
        })
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), format!("expected key = value, got `{line}`"))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        Self::from_text(&text)
    }

    /// Applies `key=value` overrides in order (last one wins).
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o, "override must look like key=value"))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Canonical `key = value` listing of every key.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("known key")))
            .collect()
    }

    /// sha256 of [`SimConfig::to_text`], hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("sim.n", "must be >= 1"));
        }
        if self.session_chunks == 0 {
            return Err(Error::config("sim.session_chunks", "must be >= 1"));
        }
        if !(self.t_gop_seconds > 0.0) {
            return Err(Error::config("sim.t_gop_seconds", "must be positive"));
        }
        if !(self.slot_seconds > 0.0) {
            return Err(Error::config("sim.slot_seconds", "must be positive"));
        }
        self.utility.validate()?;
        self.mimo.validate()?;
        if self.window == 0 {
            return Err(Error::config("playback.window", "must be >= 1"));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::config("playback.rho", "must be > 0"));
        }
        if self.video.files == 0 {
            return Err(Error::config("video.files", "must be >= 1"));
        }
        let c = &self.video.catalog;
        if !(0.0 < c.d_min && c.d_min < c.d_max) {
            return Err(Error::config("video.d_min", "need 0 < d_min < d_max"));
        }
        let t = &self.topology;
        if !(t.side > 0.0 && t.side.is_finite()) {
            return Err(Error::config("topology.side", "must be positive"));
        }
        if !(t.tx_power > 0.0 && t.tx_power.is_finite()) {
            return Err(Error::config("topology.tx_power", "must be positive"));
        }
        if !(t.mean_users >= 0.0 && t.hotspot_ratio >= 0.0) {
            return Err(Error::config("topology.users", "must be nonnegative"));
        }
        for (key, pts) in [("topology.helpers", &t.helper_positions), ("topology.user_positions", &t.user_positions)] {
            if let Some(pts) = pts {
                if pts.is_empty() {
                    return Err(Error::config(key, "empty position list"));
                }
                if pts.iter().any(|p| !(0.0..t.side).contains(&p.x) || !(0.0..t.side).contains(&p.y)) {
                    return Err(Error::config(key, format!("positions must lie in [0, {})", t.side)));
                }
            }
        }
        if let Mobility::Waypoint { speed } = t.mobility {
            if !(speed >= 0.0 && speed.is_finite()) {
                return Err(Error::config("topology.mobility", "speed must be nonnegative"));
            }
        }
        Ok(())
    }
}
