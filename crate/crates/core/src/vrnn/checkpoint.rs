//! Checkpoint container.
//!
//! ```text
//! offset 0   8 bytes   magic "GTNVRNN1"
//! offset 8   u64 LE    header length L
//! offset 16  L bytes   UTF-8 JSON header
//! offset 16+L          payload: f64 LE values of every tensor, back to back
//! ```
//!
//! Header fields: `format_version`, `spec`, `hidden`, `latent`,
//! `subnet_hidden`, `dim`, `tensors` (each `{name, shape, offset, len}`,
//! with `offset` in bytes from the start of the payload and `len` in values),
//! `training_seed` and `history`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::param_shapes;
use super::{HistorySummary, ModelConfig, ModelError, ParamId, VrnnModel};
use crate::compute::Tensor;
use crate::fourhot::FourHotSpec;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GTNVRNN1";
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    spec: FourHotSpec,
    hidden: usize,
    latent: usize,
    subnet_hidden: usize,
    dim: usize,
    tensors: Vec<TensorEntry>,
    training_seed: u64,
    history: Option<HistorySummary>,
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

impl VrnnModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut offset = 0;
        let tensors = ParamId::ALL
            .iter()
            .zip(self.params())
            .map(|(id, t)| {
                let e = TensorEntry { name: id.name().into(), shape: t.shape().to_vec(), offset, len: t.len() };
                offset += 8 * t.len();
                e
            })
            .collect();
        let header = Header {
            format_version: CHECKPOINT_FORMAT_VERSION,
            spec: self.spec.clone(),
            hidden: self.config.hidden,
            latent: self.config.latent,
            subnet_hidden: self.config.subnet_hidden,
            dim: self.dim(),
            tensors,
            training_seed: self.training_seed,
            history: self.history.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + offset);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.params() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("missing magic"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let payload_start = 16usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(&bytes[16..payload_start]).map_err(|e| bad(format!("header: {e}")))?;
        if header.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {}", header.format_version)));
        }
        let config = ModelConfig { hidden: header.hidden, latent: header.latent, subnet_hidden: header.subnet_hidden };
        config.validate()?;
        header.spec.validate().map_err(|e| bad(e.to_string()))?;
        if header.dim != header.spec.dim() {
            return Err(bad(format!("dimension {} does not match spec dimension {}", header.dim, header.spec.dim())));
        }
        let payload = &bytes[payload_start..];
        let expected = param_shapes(&config, header.dim);
        if header.tensors.len() != expected.len() {
            return Err(bad(format!("expected {} tensors, found {}", expected.len(), header.tensors.len())));
        }
        let mut params = Vec::with_capacity(expected.len());
        for ((id, shape), e) in ParamId::ALL.iter().zip(&expected).zip(&header.tensors) {
            if e.name != id.name() || &e.shape != shape || e.len != shape.iter().product::<usize>() {
                return Err(bad(format!("tensor {} has shape {:?}, expected {} {:?}", e.name, e.shape, id.name(), shape)));
            }
            let end = e.offset.checked_add(8 * e.len).filter(|&x| x <= payload.len()).ok_or_else(|| bad("truncated payload"))?;
            let data: Vec<f64> = payload[e.offset..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            if !data.iter().all(|v| v.is_finite()) {
                return Err(bad(format!("tensor {} holds non-finite values", e.name)));
            }
            params.push(Tensor::new(shape.clone(), data)?);
        }
        Ok(VrnnModel {
            spec: header.spec,
            config,
            params,
            training_seed: header.training_seed,
            history: header.history,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::Roi;
    use crate::fourhot::{EncodedTrack, FourHotVector};

    fn model() -> VrnnModel {
        let spec = FourHotSpec::with_default_resolution(Roi::USHANT);
        VrnnModel::new(spec, ModelConfig { hidden: 6, latent: 6, subnet_hidden: 5 }, 8).unwrap()
    }

    #[test]
    fn round_trip_reproduces_scores_bitwise() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        m.save(&path).unwrap();
        let back = VrnnModel::load(&path).unwrap();
        assert_eq!(back, m);
        let track = EncodedTrack {
            track_id: "a".into(),
            mmsi: 1,
            t0: 0,
            dt: 600,
            spec: m.spec.clone(),
            steps: vec![FourHotVector { bins: [10, 20, 5, 3] }, FourHotVector { bins: [11, 21, 5, 3] }],
        };
        let a = m.score_track(&track, 4, 2).unwrap();
        let b = back.score_track(&track, 4, 2).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(m.content_hash(), back.content_hash());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = model().to_bytes();
        assert!(VrnnModel::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(VrnnModel::from_bytes(&wrong).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = model();
        let bytes = m.to_bytes();
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let json = std::str::from_utf8(&bytes[16..16 + hlen]).unwrap().replace("\"dim\":602", "\"dim\":601");
        let mut out = bytes[..8].to_vec();
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(json.as_bytes());
        out.extend_from_slice(&bytes[16 + hlen..]);
        let err = VrnnModel::from_bytes(&out).unwrap_err();
        assert!(err.to_string().contains("dimension"), "{err}");
    }
}
