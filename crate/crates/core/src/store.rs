//! Preprocessing pipeline from raw reports to encoded tracks, and the JSON
//! track store that carries them between commands.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ais::{
    assemble_tracks, clean_messages, resample_track, split_voyage, AisMessage, DEFAULT_DT, DEFAULT_DUR_MAX,
    DEFAULT_DUR_MIN, DEFAULT_GAP_MAX, DEFAULT_SOG_MAX,
};
use crate::fourhot::{EncodedTrack, FourHotSpec, FourHotVector};

pub const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("track store: {0}")]
    Format(String),
    #[error("invalid preprocessing configuration: {0}")]
    Config(String),
}

/// Thresholds of the preprocessing chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Seconds; a longer silence starts a new track.
    pub gap_max: i64,
    /// Resampling period, seconds.
    pub dt: i64,
    /// Shortest kept voyage, seconds.
    pub dur_min: i64,
    /// Longest voyage before splitting, seconds.
    pub dur_max: i64,
    /// Knots; faster reports are truncated to this value.
    pub sog_max: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            gap_max: DEFAULT_GAP_MAX,
            dt: DEFAULT_DT,
            dur_min: DEFAULT_DUR_MIN,
            dur_max: DEFAULT_DUR_MAX,
            sog_max: DEFAULT_SOG_MAX,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.gap_max <= 0 || self.dt <= 0 {
            return Err(StoreError::Config("gap_max and dt must be positive".into()));
        }
        if self.dur_min <= 0 || self.dur_max < self.dur_min || self.dur_max < self.dt {
            return Err(StoreError::Config(format!(
                "need 0 < dur_min <= dur_max and dur_max >= dt, got {} / {} / {}",
                self.dur_min, self.dur_max, self.dt
            )));
        }
        if !(self.sog_max > 0.0) {
            return Err(StoreError::Config("sog_max must be positive".into()));
        }
        Ok(())
    }
}

/// Counts at each preprocessing stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub messages_read: usize,
    pub parse_errors: usize,
    pub dropped_outside_roi: usize,
    pub raw_tracks: usize,
    /// Tracks with a single report, which cannot be resampled.
    pub dropped_single_message: usize,
    /// Chunks shorter than `dur_min`.
    pub dropped_short: usize,
    pub tracks: usize,
}

/// clean, assemble, resample, split and encode.
pub fn preprocess(
    messages: &[AisMessage],
    spec: &FourHotSpec,
    cfg: &PreprocessConfig,
) -> Result<(Vec<EncodedTrack>, PreprocessSummary), StoreError> {
    cfg.validate()?;
    spec.validate().map_err(|e| StoreError::Config(e.to_string()))?;
    let mut summary = PreprocessSummary { messages_read: messages.len(), ..Default::default() };
    let clean = clean_messages(messages, &spec.roi, cfg.sog_max);
    summary.dropped_outside_roi = messages.len() - clean.len();
    let raw = assemble_tracks(&clean, cfg.gap_max);
    summary.raw_tracks = raw.len();
    let mut out = Vec::new();
    for track in &raw {
        let Ok(resampled) = resample_track(track, cfg.dt) else {
            summary.dropped_single_message += 1;
            continue;
        };
        let max_len = (cfg.dur_max / cfg.dt).max(1) as usize;
        let n_chunks = resampled.states.len().div_ceil(max_len);
        let chunks = split_voyage(&resampled, cfg.dur_min, cfg.dur_max);
        summary.dropped_short += n_chunks - chunks.len();
        for chunk in &chunks {
            // resampled points interpolate in-ROI reports, so they stay inside the ROI
            out.push(spec.encode_track(chunk).map_err(|e| StoreError::Format(e.to_string()))?);
        }
    }
    summary.tracks = out.len();
    Ok((out, summary))
}

#[derive(Debug, Serialize, Deserialize)]
struct StoredTrack {
    track_id: String,
    mmsi: u64,
    t0: i64,
    dt: i64,
    bins: Vec<[usize; 4]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreFile {
    format_version: u32,
    spec: FourHotSpec,
    summary: PreprocessSummary,
    tracks: Vec<StoredTrack>,
}

/// Encoded tracks sharing one four-hot spec.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackStore {
    pub spec: FourHotSpec,
    pub summary: PreprocessSummary,
    pub tracks: Vec<EncodedTrack>,
}

impl TrackStore {
    pub fn to_json(&self) -> String {
        let file = StoreFile {
            format_version: STORE_FORMAT_VERSION,
            spec: self.spec.clone(),
            summary: self.summary.clone(),
            tracks: self
                .tracks
                .iter()
                .map(|t| StoredTrack {
                    track_id: t.track_id.clone(),
                    mmsi: t.mmsi,
                    t0: t.t0,
                    dt: t.dt,
                    bins: t.steps.iter().map(|s| s.bins).collect(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("store serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        let file: StoreFile = serde_json::from_str(text).map_err(|e| StoreError::Format(e.to_string()))?;
        if file.format_version != STORE_FORMAT_VERSION {
            return Err(StoreError::Format(format!("unsupported format version {}", file.format_version)));
        }
        let sizes = file.spec.block_sizes();
        let mut tracks = Vec::with_capacity(file.tracks.len());
        for t in file.tracks {
            if t.bins.is_empty() {
                return Err(StoreError::Format(format!("track {} is empty", t.track_id)));
            }
            if let Some(b) = t.bins.iter().find(|b| b.iter().zip(sizes).any(|(&i, n)| i >= n)) {
                return Err(StoreError::Format(format!("track {} has out-of-range bins {b:?}", t.track_id)));
            }
            tracks.push(EncodedTrack {
                track_id: t.track_id,
                mmsi: t.mmsi,
                t0: t.t0,
                dt: t.dt,
                spec: file.spec.clone(),
                steps: t.bins.into_iter().map(|bins| FourHotVector { bins }).collect(),
            });
        }
        Ok(TrackStore { spec: file.spec, summary: file.summary, tracks })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::Roi;

    fn msg(mmsi: u64, t: i64, lat: f64) -> AisMessage {
        AisMessage { mmsi, t, lat, lon: -5.0, sog: 10.0, cog: 0.0 }
    }

    #[test]
    fn counts_every_stage() {
        let spec = FourHotSpec::with_default_resolution(Roi::USHANT);
        let mut msgs = Vec::new();
        // 5 h voyage, kept
        for i in 0..=30 {
            msgs.push(msg(1, i * 600, 48.0 + 0.001 * i as f64));
        }
        // 3 h voyage, dropped as short
        for i in 0..=18 {
            msgs.push(msg(2, i * 600, 48.5));
        }
        msgs.push(msg(3, 0, 48.0));
        msgs.push(msg(4, 0, 10.0));
        let (tracks, s) = preprocess(&msgs, &spec, &PreprocessConfig::default()).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(
            s,
            PreprocessSummary {
                messages_read: 52,
                parse_errors: 0,
                dropped_outside_roi: 1,
                raw_tracks: 3,
                dropped_single_message: 1,
                dropped_short: 1,
                tracks: 1
            }
        );
        assert_eq!(tracks[0].track_id, "1_0");
        assert_eq!(tracks[0].len(), 31);
    }

    #[test]
    fn empty_input() {
        let spec = FourHotSpec::with_default_resolution(Roi::USHANT);
        let (tracks, s) = preprocess(&[], &spec, &PreprocessConfig::default()).unwrap();
        assert!(tracks.is_empty());
        assert_eq!(s, PreprocessSummary::default());
    }

    #[test]
    fn store_round_trip() {
        let spec = FourHotSpec::with_default_resolution(Roi::USHANT);
        let msgs: Vec<_> = (0..=30).map(|i| msg(1, i * 600, 48.0 + 0.01 * i as f64)).collect();
        let (tracks, summary) = preprocess(&msgs, &spec, &PreprocessConfig::default()).unwrap();
        let store = TrackStore { spec, summary, tracks };
        let json = store.to_json();
        let back = TrackStore::from_json(&json).unwrap();
        assert_eq!(back, store);
        assert_eq!(back.to_json(), json);
        let broken = json.replace("\"format_version\":1", "\"format_version\":9");
        assert!(TrackStore::from_json(&broken).is_err());
    }
}
