//! VBR video catalogs: per-chunk, per-mode quality/size tables and a
//! synthetic generator for multi-segment reference sequences.
//!
//! Modes are 1-based throughout the public API (mode 1 is the cheapest
//! encoding). Chunk indices are 0-based.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type FileId = u32;

/// One encoding of a chunk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub quality: f64,
    pub size_bits: u64,
}

/// Quality/size meta-data of one video file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRateProfile {
    file_id: FileId,
    chunks: Vec<Vec<ModeEntry>>,
    d_min: f64,
    d_max: f64,
}

impl QualityRateProfile {
    /// Builds a profile, checking mode monotonicity and the quality bounds.
    pub fn new(
        file_id: FileId,
        chunks: Vec<Vec<ModeEntry>>,
        d_min: f64,
        d_max: f64,
    ) -> Result<Self> {
        if !(d_min < d_max) || !d_min.is_finite() || !d_max.is_finite() {
            return Err(Error::config(
                "video.d_min",
                format!("need d_min < d_max, got [{d_min}, {d_max}]"),
            ));
        }
        if chunks.is_empty() {
            return Err(Error::config("video.segments", "profile has no chunks"));
        }
        for (i, modes) in chunks.iter().enumerate() {
            if modes.is_empty() {
                return Err(Error::config(
                    "video.segments",
                    format!("chunk {i} has no modes"),
                ));
            }
            for (m, e) in modes.iter().enumerate() {
                if !(d_min <= e.quality && e.quality <= d_max) {
                    return Err(Error::config(
                        "video.segments",
                        format!(
                            "chunk {i} mode {} quality {} outside [{d_min}, {d_max}]",
                            m + 1,
                            e.quality
                        ),
                    ));
                }
            }
            for (m, w) in modes.windows(2).enumerate() {
                if w[0].size_bits >= w[1].size_bits || w[0].quality > w[1].quality {
                    return Err(Error::config(
                        "video.segments",
                        format!("chunk {i}: modes {} and {} are not monotone", m + 1, m + 2),
                    ));
                }
            }
        }
        Ok(Self {
            file_id,
            chunks,
            d_min,
            d_max,
        })
    }

    pub fn file_id(&self) -> FileId {
        self.file_id
    }

    pub fn num_chunks(&self) -> usize {
        self.chunks.len()
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Number of encodings N_f(i) available for chunk `i`.
    pub fn modes_per_chunk(&self, i: usize) -> Result<usize> {
        self.chunks
            .get(i)
            .map(Vec::len)
            .ok_or_else(|| Error::Domain(format!("chunk {i} >= {}", self.chunks.len())))
    }

    /// All encodings of chunk `i`, cheapest first.
    pub fn modes(&self, i: usize) -> Result<&[ModeEntry]> {
        self.chunks
            .get(i)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Domain(format!("chunk {i} >= {}", self.chunks.len())))
    }

    fn entry(&self, i: usize, m: usize) -> Result<ModeEntry> {
        let modes = self.modes(i)?;
        if m == 0 || m > modes.len() {
            return Err(Error::Domain(format!(
                "mode {m} outside 1..={} at chunk {i}",
                modes.len()
            )));
        }
        Ok(modes[m - 1])
    }

    /// D_f(m, i).
    pub fn chunk_quality(&self, i: usize, m: usize) -> Result<f64> {
        self.entry(i, m).map(|e| e.quality)
    }

    /// B_f(m, i).
    pub fn chunk_size_bits(&self, i: usize, m: usize) -> Result<u64> {
        self.entry(i, m).map(|e| e.size_bits)
    }
}

/// One homogeneous stretch of the reference sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    /// First chunk, 0-based, inclusive.
    pub first_chunk: usize,
    /// Last chunk, 0-based, inclusive.
    pub last_chunk: usize,
    pub modes: usize,
    /// Mean bitrate of the top (reference) mode in kbit/s.
    pub mean_kbps: f64,
    pub quality_lo: f64,
    pub quality_hi: f64,
}

impl SegmentSpec {
    pub fn len(&self) -> usize {
        self.last_chunk + 1 - self.first_chunk
    }

    pub fn is_empty(&self) -> bool {
        self.last_chunk < self.first_chunk
    }
}

/// Generator parameters for [`synth_catalog`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogSpec {
    pub segments: Vec<SegmentSpec>,
    pub chunk_seconds: f64,
    /// Log-std of the per-chunk VBR multiplier.
    pub sigma: f64,
    /// Size of the cheapest mode relative to the reference mode.
    pub ladder_floor: f64,
    /// Saturation rate of the size-to-quality map.
    pub quality_curvature: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl Default for CatalogSpec {
    /// The 800-chunk reference sequence: 8/4/4/8 modes at 631/3908/6679/556 kbps.
    fn default() -> Self {
        let seg = |first, last, modes, kbps| SegmentSpec {
            first_chunk: first,
            last_chunk: last,
            modes,
            mean_kbps: kbps,
            quality_lo: 0.3,
            quality_hi: 1.0,
        };
        Self {
            segments: vec![
                seg(0, 199, 8, 631.0),
                seg(200, 399, 4, 3908.0),
                seg(400, 599, 4, 6679.0),
                seg(600, 799, 8, 556.0),
            ],
            chunk_seconds: 0.5,
            sigma: 0.2,
            ladder_floor: 0.2,
            quality_curvature: 3.0,
            d_min: 0.3,
            d_max: 1.0,
        }
    }
}

impl CatalogSpec {
    /// Mean size in bits of a reference-mode chunk inside `seg`.
    pub fn reference_bits(&self, seg: &SegmentSpec) -> f64 {
        seg.mean_kbps * 1000.0 * self.chunk_seconds
    }

    fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::config("video.segments", "empty segment list"));
        }
        let mut next = 0;
        for (k, s) in self.segments.iter().enumerate() {
            if s.first_chunk != next || s.is_empty() {
                return Err(Error::config(
                    "video.segments",
                    format!("segment {k} must start at chunk {next} and be non-empty"),
                ));
            }
            if s.modes == 0 {
                return Err(Error::config(
                    "video.segments",
                    format!("segment {k} has zero modes"),
                ));
            }
            if !(s.mean_kbps > 0.0) || !s.mean_kbps.is_finite() {
                return Err(Error::config(
                    "video.segments",
                    format!("segment {k} bitrate must be positive, got {}", s.mean_kbps),
                ));
            }
            if !(self.d_min <= s.quality_lo && s.quality_lo < s.quality_hi && s.quality_hi <= self.d_max)
            {
                return Err(Error::config(
                    "video.segments",
                    format!("segment {k} quality range outside [d_min, d_max]"),
                ));
            }
            next = s.last_chunk + 1;
        }
        if !(self.chunk_seconds > 0.0) {
            return Err(Error::config("video.chunk_seconds", "must be positive"));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::config("video.sigma", "must be nonnegative"));
        }
        if !(self.ladder_floor > 0.0 && self.ladder_floor < 1.0) {
            return Err(Error::config("video.ladder_floor", "must lie in (0, 1)"));
        }
        if !(self.quality_curvature > 0.0) {
            return Err(Error::config("video.quality_curvature", "must be positive"));
        }
        Ok(())
    }
}

/// Generates a VBR profile for `spec`. Deterministic in `(spec, seed)`.
///
/// Each chunk draws a mean-one lognormal multiplier that scales the segment's
/// reference size; lower modes follow a geometric ladder down to
/// `ladder_floor`. Quality saturates exponentially in the size relative to
/// the segment mean, so it is concave in bits and strictly increasing in mode.
pub fn synth_catalog(spec: &CatalogSpec, file_id: FileId, seed: u64) -> Result<QualityRateProfile> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut chunks = Vec::with_capacity(spec.segments.last().map_or(0, |s| s.last_chunk + 1));

    for seg in &spec.segments {
        let reference = spec.reference_bits(seg);
        for _ in seg.first_chunk..=seg.last_chunk {
            let z: f64 = normal.sample(&mut rng);
            let mult = (spec.sigma * z - 0.5 * spec.sigma * spec.sigma).exp();
            let top = reference * mult;
            let mut modes = Vec::with_capacity(seg.modes);
            let mut prev_bits = 0u64;
            for m in 1..=seg.modes {
                let frac = if seg.modes == 1 {
                    1.0
                } else {
                    spec.ladder_floor
                        .powf((seg.modes - m) as f64 / (seg.modes - 1) as f64)
                };
                let bits = ((top * frac).round() as u64).max(prev_bits + 1);
                prev_bits = bits;
                let rel = bits as f64 / reference;
                let span = seg.quality_hi - seg.quality_lo;
                let quality =
                    seg.quality_hi - span * (-spec.quality_curvature * rel).exp();
                modes.push(ModeEntry {
                    quality,
                    size_bits: bits,
                });
            }
            chunks.push(modes);
        }
    }
    QualityRateProfile::new(file_id, chunks, spec.d_min, spec.d_max)
}

/// A user's streaming session over one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSession {
    pub user: usize,
    pub file_id: FileId,
    pub start_chunk: usize,
    pub session_length: usize,
    pub next_request_index: usize,
}

impl VideoSession {
    pub fn new(
        user: usize,
        profile: &QualityRateProfile,
        start_chunk: usize,
        session_length: usize,
    ) -> Result<Self> {
        if start_chunk >= profile.num_chunks() {
            return Err(Error::Domain(format!(
                "start chunk {start_chunk} >= {}",
                profile.num_chunks()
            )));
        }
        if session_length == 0 {
            return Err(Error::config("sim.session_chunks", "must be >= 1"));
        }
        Ok(Self {
            user,
            file_id: profile.file_id(),
            start_chunk,
            session_length,
            next_request_index: 0,
        })
    }

    pub fn is_exhausted(&self) -> bool {
        self.next_request_index >= self.session_length
    }

    /// Catalog chunk index for the session-relative counter `k`, cycling through
    /// `num_chunks`.
    pub fn session_chunk(&self, k: usize, num_chunks: usize) -> Result<usize> {
        if k >= self.session_length {
            return Err(Error::Domain(format!(
                "session chunk {k} >= session length {}",
                self.session_length
            )));
        }
        Ok((self.start_chunk + k) % num_chunks)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogRow {
    #[serde(rename = "fileId")]
    file_id: FileId,
    #[serde(rename = "chunkIndex")]
    chunk_index: usize,
    mode: usize,
    #[serde(rename = "qualityD")]
    quality_d: f64,
    #[serde(rename = "sizeBits")]
    size_bits: u64,
}

/// Writes profiles as `fileId,chunkIndex,mode,qualityD,sizeBits` rows.
pub fn export_catalog_csv<W: Write>(profiles: &[QualityRateProfile], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in profiles {
        for (i, modes) in p.chunks.iter().enumerate() {
            for (m, e) in modes.iter().enumerate() {
                w.serialize(CatalogRow {
                    file_id: p.file_id,
                    chunk_index: i,
                    mode: m + 1,
                    quality_d: e.quality,
                    size_bits: e.size_bits,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the format produced by [`export_catalog_csv`]. Lines starting with
/// `#` are ignored. Rows may come in any order but every (chunk, mode) slot
/// must be filled densely.
pub fn import_catalog_csv<R: Read>(input: R, d_min: f64, d_max: f64) -> Result<Vec<QualityRateProfile>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut files: std::collections::BTreeMap<FileId, Vec<Vec<Option<ModeEntry>>>> =
        Default::default();
    for row in rdr.deserialize() {
        let row: CatalogRow = row?;
        if row.mode == 0 {
            return Err(Error::Domain("catalog modes are 1-based".into()));
        }
        let chunks = files.entry(row.file_id).or_default();
        if chunks.len() <= row.chunk_index {
            chunks.resize(row.chunk_index + 1, Vec::new());
        }
        let modes = &mut chunks[row.chunk_index];
        if modes.len() < row.mode {
            modes.resize(row.mode, None);
        }
        if modes[row.mode - 1].is_some() {
            return Err(Error::Domain(format!(
                "duplicate row for file {} chunk {} mode {}",
                row.file_id, row.chunk_index, row.mode
            )));
        }
        modes[row.mode - 1] = Some(ModeEntry {
            quality: row.quality_d,
            size_bits: row.size_bits,
        });
    }
    files
        .into_iter()
        .map(|(id, chunks)| {
            let dense = chunks
                .into_iter()
                .enumerate()
                .map(|(i, modes)| {
                    modes
                        .into_iter()
                        .enumerate()
                        .map(|(m, e)| {
                            e.ok_or_else(|| {
                                Error::Domain(format!("file {id} chunk {i} missing mode {}", m + 1))
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            QualityRateProfile::new(id, dense, d_min, d_max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_mode() -> QualityRateProfile {
        QualityRateProfile::new(
            0,
            vec![vec![
                ModeEntry { quality: 0.8, size_bits: 100 },
                ModeEntry { quality: 0.95, size_bits: 200 },
            ]],
            0.3,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn lookup() {
        let p = two_mode();
        assert_eq!(p.chunk_quality(0, 2).unwrap(), 0.95);
        assert_eq!(p.chunk_size_bits(0, 1).unwrap(), 100);
        assert!(matches!(p.chunk_quality(0, 3), Err(Error::Domain(_))));
        assert!(matches!(p.chunk_quality(0, 0), Err(Error::Domain(_))));
        assert!(matches!(p.chunk_size_bits(1, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_non_monotone_modes() {
        let bad = vec![vec![
            ModeEntry { quality: 0.8, size_bits: 200 },
            ModeEntry { quality: 0.9, size_bits: 200 },
        ]];
        assert!(QualityRateProfile::new(0, bad, 0.3, 1.0).is_err());
        let worse_quality = vec![vec![
            ModeEntry { quality: 0.9, size_bits: 100 },
            ModeEntry { quality: 0.8, size_bits: 200 },
        ]];
        assert!(QualityRateProfile::new(0, worse_quality, 0.3, 1.0).is_err());
    }

    #[test]
    fn default_catalog_shape() {
        let spec = CatalogSpec::default();
        let p = synth_catalog(&spec, 0, 0).unwrap();
        assert_eq!(p.num_chunks(), 800);
        for (range, modes) in [(0..200, 8), (200..400, 4), (400..600, 4), (600..800, 8)] {
            for i in range {
                assert_eq!(p.modes_per_chunk(i).unwrap(), modes);
            }
        }
        // chunks 201-400 (1-based) carry exactly four encodings
        let distinct: std::collections::BTreeSet<u64> = (1..=4)
            .map(|m| p.chunk_quality(250, m).unwrap().to_bits())
            .collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn segment_means_track_targets() {
        let spec = CatalogSpec::default();
        let p = synth_catalog(&spec, 0, 0).unwrap();
        for seg in &spec.segments {
            let top = seg.modes;
            let mean: f64 = (seg.first_chunk..=seg.last_chunk)
                .map(|i| p.chunk_size_bits(i, top).unwrap() as f64)
                .sum::<f64>()
                / seg.len() as f64;
            let target = spec.reference_bits(seg);
            assert!((mean / target - 1.0).abs() < 0.05, "{mean} vs {target}");
        }
        // 631 kbps over 0.5 s chunks
        assert_eq!(spec.reference_bits(&spec.segments[0]), 315_500.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = CatalogSpec::default();
        let a = synth_catalog(&spec, 0, 7).unwrap();
        let b = synth_catalog(&spec, 0, 7).unwrap();
        let c = synth_catalog(&spec, 0, 8).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        export_catalog_csv(&[a], &mut ca).unwrap();
        export_catalog_csv(&[b], &mut cb).unwrap();
        assert_eq!(ca, cb);
        let mut cc = Vec::new();
        export_catalog_csv(&[c], &mut cc).unwrap();
        assert_ne!(ca, cc);
    }

    #[test]
    fn single_mode_segment() {
        let spec = CatalogSpec {
            segments: vec![SegmentSpec {
                first_chunk: 0,
                last_chunk: 9,
                modes: 1,
                mean_kbps: 100.0,
                quality_lo: 0.3,
                quality_hi: 1.0,
            }],
            ..CatalogSpec::default()
        };
        let p = synth_catalog(&spec, 0, 1).unwrap();
        assert!((0..10).all(|i| p.modes_per_chunk(i).unwrap() == 1));
    }

    #[test]
    fn bad_specs() {
        let empty = CatalogSpec {
            segments: vec![],
            ..CatalogSpec::default()
        };
        assert!(matches!(synth_catalog(&empty, 0, 0), Err(Error::Config { .. })));
        let mut zero_rate = CatalogSpec::default();
        zero_rate.segments[1].mean_kbps = 0.0;
        assert!(matches!(synth_catalog(&zero_rate, 0, 0), Err(Error::Config { .. })));
    }

    #[test]
    fn session_wraps() {
        let p = synth_catalog(&CatalogSpec::default(), 0, 0).unwrap();
        let s = VideoSession::new(0, &p, 799, 1000).unwrap();
        assert_eq!(s.session_chunk(1, 800).unwrap(), 0);
        let s = VideoSession::new(0, &p, 0, 1000).unwrap();
        assert_eq!(s.session_chunk(0, 800).unwrap(), 0);
        let s = VideoSession::new(0, &p, 100, 1000).unwrap();
        assert_eq!(s.session_chunk(999, 800).unwrap(), 299);
        assert!(s.session_chunk(1000, 800).is_err());
        assert!(VideoSession::new(0, &p, 800, 10).is_err());
    }

    #[test]
    fn csv_import_matches_export() {
        let p = synth_catalog(&CatalogSpec::default(), 3, 11).unwrap();
        let mut buf = b"# provenance line\n".to_vec();
        export_catalog_csv(std::slice::from_ref(&p), &mut buf).unwrap();
        let back = import_catalog_csv(buf.as_slice(), 0.3, 1.0).unwrap();
        assert_eq!(back, vec![p]);
    }

    #[test]
    fn csv_import_rejects_holes() {
        let text = "fileId,chunkIndex,mode,qualityD,sizeBits\n0,0,2,0.9,200\n";
        assert!(import_catalog_csv(text.as_bytes(), 0.3, 1.0).is_err());
    }
}
