//! Four-hot encoding: each state becomes the concatenation of one-hot
//! vectors over latitude, longitude, SOG and COG bins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ais::{ResampledTrack, Roi, State};

/// Guards the floor against values such as `48.005 / 0.01` landing just below an integer.
const BIN_NUDGE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("state {index:?} lies outside the region of interest")]
    OutOfRoi { index: Option<usize> },
    #[error("invalid four-hot vector: {0}")]
    InvalidFourHot(String),
    #[error("invalid encoding spec: {0}")]
    InvalidSpec(String),
    #[error("cannot encode an empty track")]
    EmptyTrack,
}

/// Bucketing scheme for the four-hot representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourHotSpec {
    pub roi: Roi,
    pub res_lat: f64,
    pub res_lon: f64,
    pub res_sog: f64,
    pub res_cog: f64,
    pub sog_max: f64,
}

fn bin_count(extent: f64, res: f64) -> usize {
    ((extent / res) - BIN_NUDGE).ceil().max(1.0) as usize
}

fn bin_index(offset: f64, res: f64, n: usize) -> usize {
    let i = (offset / res + BIN_NUDGE).floor();
    if i <= 0.0 {
        0
    } else {
        (i as usize).min(n - 1)
    }
}

impl FourHotSpec {
    /// 0.01 deg positions, 1 knot SOG, 5 deg COG, SOG capped at 30 knots.
    pub fn with_default_resolution(roi: Roi) -> Self {
        FourHotSpec { roi, res_lat: 0.01, res_lon: 0.01, res_sog: 1.0, res_cog: 5.0, sog_max: 30.0 }
    }

    pub fn validate(&self) -> Result<(), EncodeError> {
        if !self.roi.is_valid() {
            return Err(EncodeError::InvalidSpec("roi bounds are not ordered".into()));
        }
        for (name, v) in [
            ("res_lat", self.res_lat),
            ("res_lon", self.res_lon),
            ("res_sog", self.res_sog),
            ("res_cog", self.res_cog),
            ("sog_max", self.sog_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(EncodeError::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn n_lat(&self) -> usize {
        bin_count(self.roi.lat_max - self.roi.lat_min, self.res_lat)
    }
    pub fn n_lon(&self) -> usize {
        bin_count(self.roi.lon_max - self.roi.lon_min, self.res_lon)
    }
    pub fn n_sog(&self) -> usize {
        bin_count(self.sog_max, self.res_sog)
    }
    pub fn n_cog(&self) -> usize {
        bin_count(360.0, self.res_cog)
    }

    /// Block sizes in lat, lon, sog, cog order.
    pub fn block_sizes(&self) -> [usize; 4] {
        [self.n_lat(), self.n_lon(), self.n_sog(), self.n_cog()]
    }

    /// Start of each block in the concatenated vector.
    pub fn offsets(&self) -> [usize; 4] {
        let [a, b, c, _] = self.block_sizes();
        [0, a, a + b, a + b + c]
    }

    /// Total dimension D.
    pub fn dim(&self) -> usize {
        self.block_sizes().iter().sum()
    }

    pub fn encode_state(&self, state: &State) -> Result<FourHotVector, EncodeError> {
        if !self.roi.contains(state.lat, state.lon) || !state.sog.is_finite() || !state.cog.is_finite() {
            return Err(EncodeError::OutOfRoi { index: None });
        }
        let [n_lat, n_lon, n_sog, n_cog] = self.block_sizes();
        Ok(FourHotVector {
            bins: [
                bin_index(state.lat - self.roi.lat_min, self.res_lat, n_lat),
                bin_index(state.lon - self.roi.lon_min, self.res_lon, n_lon),
                bin_index(state.sog.max(0.0), self.res_sog, n_sog),
                bin_index(crate::ais::normalize_cog(state.cog), self.res_cog, n_cog),
            ],
        })
    }

    /// Bin centers of the four active entries.
    pub fn decode_vector(&self, v: &FourHotVector) -> Result<State, EncodeError> {
        self.check(v)?;
        let [i_lat, i_lon, i_sog, i_cog] = v.bins.map(|i| i as f64 + 0.5);
        Ok(State {
            lat: self.roi.lat_min + i_lat * self.res_lat,
            lon: self.roi.lon_min + i_lon * self.res_lon,
            sog: i_sog * self.res_sog,
            cog: i_cog * self.res_cog,
        })
    }

    /// Rebuilds a vector from a dense 0/1 slice of length D.
    pub fn from_dense(&self, dense: &[f64]) -> Result<FourHotVector, EncodeError> {
        if dense.len() != self.dim() {
            return Err(EncodeError::InvalidFourHot(format!("length {} != D {}", dense.len(), self.dim())));
        }
        let offsets = self.offsets();
        let sizes = self.block_sizes();
        let mut bins = [0usize; 4];
        for b in 0..4 {
            let block = &dense[offsets[b]..offsets[b] + sizes[b]];
            if block.iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(EncodeError::InvalidFourHot("entries must be 0 or 1".into()));
            }
            let active: Vec<usize> = block.iter().enumerate().filter(|(_, &x)| x == 1.0).map(|(i, _)| i).collect();
            if active.len() != 1 {
                return Err(EncodeError::InvalidFourHot(format!("block {b} has {} active entries", active.len())));
            }
            bins[b] = active[0];
        }
        Ok(FourHotVector { bins })
    }

    fn check(&self, v: &FourHotVector) -> Result<(), EncodeError> {
        for (b, (&i, n)) in v.bins.iter().zip(self.block_sizes()).enumerate() {
            if i >= n {
                return Err(EncodeError::InvalidFourHot(format!("block {b} index {i} out of range {n}")));
            }
        }
        Ok(())
    }

    pub fn encode_track(&self, track: &ResampledTrack) -> Result<EncodedTrack, EncodeError> {
        if track.states.is_empty() {
            return Err(EncodeError::EmptyTrack);
        }
        let steps = track
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| self.encode_state(s).map_err(|_| EncodeError::OutOfRoi { index: Some(i) }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EncodedTrack {
            track_id: format!("{}_{}", track.mmsi, track.t0),
            mmsi: track.mmsi,
            t0: track.t0,
            dt: track.dt,
            spec: self.clone(),
            steps,
        })
    }
}

/// A four-hot vector stored as its active bin per block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FourHotVector {
    /// Block-local indices: lat, lon, sog, cog.
    pub bins: [usize; 4],
}

impl FourHotVector {
    /// Positions of the four ones in the concatenated vector.
    pub fn active(&self, spec: &FourHotSpec) -> [usize; 4] {
        let off = spec.offsets();
        [off[0] + self.bins[0], off[1] + self.bins[1], off[2] + self.bins[2], off[3] + self.bins[3]]
    }

    pub fn to_dense(&self, spec: &FourHotSpec) -> Vec<f64> {
        let mut v = vec![0.0; spec.dim()];
        for i in self.active(spec) {
            v[i] = 1.0;
        }
        v
    }
}

/// Sequence of four-hot vectors for one track.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTrack {
    pub track_id: String,
    pub mmsi: u64,
    pub t0: i64,
    pub dt: i64,
    pub spec: FourHotSpec,
    pub steps: Vec<FourHotVector>,
}

impl EncodedTrack {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Bin-center positions of every step.
    pub fn decoded(&self) -> Vec<State> {
        self.steps.iter().map(|v| self.spec.decode_vector(v).expect("track vectors match their spec")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ushant() -> FourHotSpec {
        FourHotSpec::with_default_resolution(Roi::USHANT)
    }

    #[test]
    fn ushant_dimensions() {
        let spec = ushant();
        assert_eq!(spec.block_sizes(), [200, 300, 30, 72]);
        assert_eq!(spec.offsets(), [0, 200, 500, 530]);
        assert_eq!(spec.dim(), 602);
    }

    #[test]
    fn encode_reference_state() {
        let spec = ushant();
        let v = spec.encode_state(&State { lat: 48.005, lon: -5.42, sog: 12.3, cog: 247.0 }).unwrap();
        assert_eq!(v.bins, [50, 158, 12, 49]);
        assert_eq!(v.active(&spec), [50, 358, 512, 579]);
        let dense = v.to_dense(&spec);
        assert_eq!(dense.iter().sum::<f64>(), 4.0);
        assert_eq!(spec.from_dense(&dense).unwrap(), v);
    }

    #[test]
    fn lower_edge_and_sog_clamp() {
        let spec = ushant();
        let v = spec.encode_state(&State { lat: 47.5, lon: -7.0, sog: 0.0, cog: 0.0 }).unwrap();
        assert_eq!(v.bins, [0, 0, 0, 0]);
        let top = spec.encode_state(&State { lat: 49.5, lon: -4.0, sog: 30.0, cog: 359.99 }).unwrap();
        assert_eq!(top.bins, [199, 299, 29, 71]);
    }

    #[test]
    fn out_of_roi() {
        let spec = ushant();
        let err = spec.encode_state(&State { lat: 50.0, lon: -5.0, sog: 1.0, cog: 1.0 }).unwrap_err();
        assert_eq!(err, EncodeError::OutOfRoi { index: None });
    }

    #[test]
    fn bin_centers() {
        let spec = ushant();
        let s = spec.decode_vector(&FourHotVector { bins: [0, 0, 0, 0] }).unwrap();
        assert!((s.lat - 47.505).abs() < 1e-12);
        assert!((s.lon + 6.995).abs() < 1e-12);
        assert_eq!((s.sog, s.cog), (0.5, 2.5));
        let s = spec.decode_vector(&FourHotVector { bins: [0, 0, 0, 71] }).unwrap();
        assert_eq!(s.cog, 357.5);
        assert!(spec.decode_vector(&FourHotVector { bins: [200, 0, 0, 0] }).is_err());
    }

    #[test]
    fn malformed_dense_rejected() {
        let spec = ushant();
        let mut dense = FourHotVector { bins: [1, 2, 3, 4] }.to_dense(&spec);
        dense[7] = 1.0;
        assert!(matches!(spec.from_dense(&dense), Err(EncodeError::InvalidFourHot(_))));
    }

    #[test]
    fn track_encoding() {
        let spec = ushant();
        let state = State { lat: 48.0, lon: -5.0, sog: 10.0, cog: 90.0 };
        let track = ResampledTrack { mmsi: 9, t0: 100, dt: 600, states: vec![state; 25] };
        let enc = spec.encode_track(&track).unwrap();
        assert_eq!(enc.len(), 25);
        assert!(enc.steps.windows(2).all(|w| w[0] == w[1]));

        let mut bad = track.clone();
        bad.states[3].lat = 47.0;
        assert_eq!(spec.encode_track(&bad).unwrap_err(), EncodeError::OutOfRoi { index: Some(3) });
        let empty = ResampledTrack { states: vec![], ..track };
        assert_eq!(spec.encode_track(&empty).unwrap_err(), EncodeError::EmptyTrack);
    }
}
