//! AIS position reports: CSV parsing, cleaning, per-vessel track assembly,
//! fixed-rate resampling and voyage splitting.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default contiguity threshold: a gap strictly longer than this starts a new track.
pub const DEFAULT_GAP_MAX: i64 = 7200;
/// Default resampling period (10 minutes).
pub const DEFAULT_DT: i64 = 600;
pub const DEFAULT_DUR_MIN: i64 = 4 * 3600;
pub const DEFAULT_DUR_MAX: i64 = 24 * 3600;
pub const DEFAULT_SOG_MAX: f64 = 30.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),
    #[error("track has {0} message(s), at least 2 are needed to resample")]
    TrackTooShort(usize),
    #[error("invalid sampling period {0}")]
    InvalidPeriod(i64),
}

/// One AIS position report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AisMessage {
    pub mmsi: u64,
    /// Unix seconds.
    pub t: i64,
    pub lat: f64,
    pub lon: f64,
    /// Knots.
    pub sog: f64,
    /// Degrees in [0, 360).
    pub cog: f64,
}

/// Rectangular region of interest in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Roi {
    /// The Ushant rectangle, (47.5N, 7.0W) to (49.5N, 4.0W).
    pub const USHANT: Roi = Roi { lat_min: 47.5, lat_max: 49.5, lon_min: -7.0, lon_max: -4.0 };

    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Option<Self> {
        let roi = Roi { lat_min, lat_max, lon_min, lon_max };
        roi.is_valid().then_some(roi)
    }

    pub fn is_valid(&self) -> bool {
        self.lat_min < self.lat_max
            && self.lon_min < self.lon_max
            && [self.lat_min, self.lat_max, self.lon_min, self.lon_max].iter().all(|v| v.is_finite())
    }

    /// Inclusive containment test.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }
}

/// Time-ordered, gap-bounded messages of one vessel.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrack {
    pub mmsi: u64,
    pub messages: Vec<AisMessage>,
}

/// Kinematic state of a vessel at one sampling instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub lat: f64,
    pub lon: f64,
    pub sog: f64,
    pub cog: f64,
}

/// Track sampled on a regular grid `t0 + i * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledTrack {
    pub mmsi: u64,
    pub t0: i64,
    pub dt: i64,
    pub states: Vec<State>,
}

impl ResampledTrack {
    /// Covered duration, counting one sampling period per state.
    pub fn duration(&self) -> i64 {
        self.states.len() as i64 * self.dt
    }

    pub fn timestamp(&self, i: usize) -> i64 {
        self.t0 + i as i64 * self.dt
    }
}

/// Column names used to read the input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub mmsi: String,
    pub timestamp: String,
    pub lat: String,
    pub lon: String,
    pub sog: String,
    pub cog: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            mmsi: "mmsi".into(),
            timestamp: "timestamp".into(),
            lat: "lat".into(),
            lon: "lon".into(),
            sog: "sog".into(),
            cog: "cog".into(),
        }
    }
}

/// A rejected input row. `row` is the 1-based line number in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseError {
    pub row: u64,
    pub reason: String,
}

pub fn normalize_cog(cog: f64) -> f64 {
    let c = cog.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if c >= 360.0 {
        0.0
    } else {
        c
    }
}

/// Parses AIS messages from CSV text with a header row.
///
/// Malformed rows are reported and skipped; only unreadable input or a
/// missing mandatory column aborts.
pub fn parse_ais_csv<R: Read>(
    input: R,
    schema: &CsvSchema,
) -> Result<(Vec<AisMessage>, Vec<ParseError>), IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        // empty input: nothing to read, not a schema error
        return Ok((Vec::new(), Vec::new()));
    }
    let col = |name: &str| -> Result<usize, IngestError> {
        headers.iter().position(|h| h == name).ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let idx = [
        col(&schema.mmsi)?,
        col(&schema.timestamp)?,
        col(&schema.lat)?,
        col(&schema.lon)?,
        col(&schema.sog)?,
        col(&schema.cog)?,
    ];

    let mut messages = Vec::new();
    let mut errors = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let row = record.position().map(|p| p.line()).unwrap_or(0);
                match parse_row(&record, &idx) {
                    Ok(m) => messages.push(m),
                    Err(reason) => errors.push(ParseError { row, reason }),
                }
            }
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => return Err(e.into()),
                _ => {
                    let row = e.position().map(|p| p.line()).unwrap_or(0);
                    errors.push(ParseError { row, reason: format!("malformed record: {e}") });
                }
            },
        }
    }
    Ok((messages, errors))
}

fn parse_row(record: &csv::StringRecord, idx: &[usize; 6]) -> Result<AisMessage, String> {
    let field = |i: usize, name: &str| record.get(idx[i]).filter(|s| !s.is_empty()).ok_or(format!("missing {name}"));
    let num = |i: usize, name: &str| -> Result<f64, String> {
        let v: f64 = field(i, name)?.parse().map_err(|_| format!("unparsable {name}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite {name}"))
        }
    };
    let mmsi: u64 = field(0, "mmsi")?.parse().map_err(|_| "unparsable mmsi".to_string())?;
    let t: i64 = field(1, "timestamp")?.parse().map_err(|_| "unparsable timestamp".to_string())?;
    let lat = num(2, "latitude")?;
    let lon = num(3, "longitude")?;
    let sog = num(4, "sog")?;
    let cog = num(5, "cog")?;
    if !(-90.0..=90.0).contains(&lat) {
        return Err("out-of-range latitude".into());
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err("out-of-range longitude".into());
    }
    if sog < 0.0 {
        return Err("negative sog".into());
    }
    if !(0.0..=360.0).contains(&cog) {
        return Err("out-of-range cog".into());
    }
    Ok(AisMessage { mmsi, t, lat, lon, sog, cog: normalize_cog(cog) })
}

/// Drops messages outside `roi`, caps SOG at `sog_max` and wraps COG into [0, 360).
pub fn clean_messages(msgs: &[AisMessage], roi: &Roi, sog_max: f64) -> Vec<AisMessage> {
    msgs.iter()
        .filter(|m| roi.contains(m.lat, m.lon))
        .map(|m| AisMessage { sog: m.sog.min(sog_max), cog: normalize_cog(m.cog), ..*m })
        .collect()
}

/// Groups messages per MMSI and cuts wherever the time gap exceeds `gap_max`.
///
/// Tracks come out ordered by MMSI then time. Repeated timestamps keep the
/// first message seen in input order.
pub fn assemble_tracks(msgs: &[AisMessage], gap_max: i64) -> Vec<RawTrack> {
    let mut by_vessel: BTreeMap<u64, Vec<AisMessage>> = BTreeMap::new();
    for m in msgs {
        by_vessel.entry(m.mmsi).or_default().push(*m);
    }
    let mut tracks = Vec::new();
    for (mmsi, mut list) in by_vessel {
        // stable: equal timestamps keep input order
        list.sort_by_key(|m| m.t);
        list.dedup_by_key(|m| m.t);
        let mut current: Vec<AisMessage> = Vec::new();
        for m in list {
            if let Some(last) = current.last() {
                if m.t - last.t > gap_max {
                    tracks.push(RawTrack { mmsi, messages: std::mem::take(&mut current) });
                }
            }
            current.push(m);
        }
        if !current.is_empty() {
            tracks.push(RawTrack { mmsi, messages: current });
        }
    }
    tracks
}

/// Signed shortest angular difference `to - from`, in (-180, 180].
fn circular_delta(from: f64, to: f64) -> f64 {
    let d = (to - from + 540.0).rem_euclid(360.0) - 180.0;
    if d == -180.0 {
        180.0
    } else {
        d
    }
}

/// Linear resampling at `t0, t0 + dt, ...` up to the last original timestamp.
pub fn resample_track(track: &RawTrack, dt: i64) -> Result<ResampledTrack, IngestError> {
    if dt <= 0 {
        return Err(IngestError::InvalidPeriod(dt));
    }
    let msgs = &track.messages;
    if msgs.len() < 2 {
        return Err(IngestError::TrackTooShort(msgs.len()));
    }
    let t0 = msgs[0].t;
    let t_end = msgs[msgs.len() - 1].t;
    let n = ((t_end - t0) / dt) as usize + 1;
    let mut states = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        let t = t0 + i as i64 * dt;
        while seg + 2 < msgs.len() && msgs[seg + 1].t < t {
            seg += 1;
        }
        let (a, b) = (&msgs[seg], &msgs[seg + 1]);
        let state = if t == a.t {
            State { lat: a.lat, lon: a.lon, sog: a.sog, cog: a.cog }
        } else if t == b.t {
            State { lat: b.lat, lon: b.lon, sog: b.sog, cog: b.cog }
        } else {
            let w = (t - a.t) as f64 / (b.t - a.t) as f64;
            State {
                lat: a.lat + w * (b.lat - a.lat),
                lon: a.lon + w * (b.lon - a.lon),
                sog: a.sog + w * (b.sog - a.sog),
                cog: normalize_cog(a.cog + w * circular_delta(a.cog, b.cog)),
            }
        };
        states.push(state);
    }
    Ok(ResampledTrack { mmsi: track.mmsi, t0, dt, states })
}

/// Cuts a track into consecutive chunks of at most `dur_max` and drops any
/// chunk shorter than `dur_min`.
pub fn split_voyage(track: &ResampledTrack, dur_min: i64, dur_max: i64) -> Vec<ResampledTrack> {
    let max_len = (dur_max / track.dt).max(1) as usize;
    let mut out = Vec::new();
    let mut start = 0;
    while start < track.states.len() {
        let end = (start + max_len).min(track.states.len());
        let chunk = ResampledTrack {
            mmsi: track.mmsi,
            t0: track.timestamp(start),
            dt: track.dt,
            states: track.states[start..end].to_vec(),
        };
        if chunk.duration() >= dur_min {
            out.push(chunk);
        }
        start = end;
    }
    out
}
