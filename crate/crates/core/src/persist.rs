//! Binary persistence: checkpoints and cached spectrograms.
//!
//! Both use the same container: the magic `EMOHRNET`, a little-endian u32
//! format version, a little-endian u32 header length, a UTF-8 JSON header,
//! then raw little-endian f64 tensor payloads in header-manifest order. The
//! header carries a CRC32 of the payload so corruption is always detected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adam::AdamState;
use crate::dsp::{DspConfig, MelSpectrogram};
use crate::error::{Error, Result};
use crate::Tensor;

pub const MAGIC: &[u8; 8] = b"EMOHRNET";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to persist and exactly resume a training run.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    /// Parameter snapshot in manifest order.
    pub params: Vec<(String, Tensor)>,
    pub adam: AdamState,
    /// Hash of the resolved configuration this run was produced with.
    pub config_hash: String,
    /// The resolved configuration itself, echoed opaquely.
    pub config_echo: serde_json::Value,
    /// First epoch still to run when resuming from this checkpoint.
    pub epoch_next: usize,
    pub validation_metric: Option<f64>,
    pub best_epoch: Option<usize>,
    /// Master seed; all streams are derived from (seed, epoch, sample).
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct RngState {
    seed: u64,
    scheme: String,
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    kind: String,
    config_hash: String,
    config: serde_json::Value,
    epoch_next: usize,
    adam_t: u64,
    validation_metric: Option<f64>,
    best_epoch: Option<usize>,
    rng: RngState,
    tensors: Vec<TensorMeta>,
    payload_len: u64,
    payload_crc32: u32,
}

#[derive(Serialize, Deserialize)]
struct MelCacheHeader {
    kind: String,
    source_id: String,
    dsp: DspConfig,
    shape: Vec<usize>,
    payload_len: u64,
    payload_crc32: u32,
}

fn write_container(path: &Path, header: &[u8], payload: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + header.len() + payload.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
    bytes.extend_from_slice(header);
    bytes.extend_from_slice(payload);
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_container(path: &Path) -> Result<(Vec<u8>, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::FileMagic {
            path: path.to_path_buf(),
        });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::FileVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if bytes.len() < 16 + header_len {
        return Err(Error::FileTruncated {
            path: path.to_path_buf(),
            expected: (16 + header_len) as u64,
            found: bytes.len() as u64,
        });
    }
    let header = bytes[16..16 + header_len].to_vec();
    let payload = bytes[16 + header_len..].to_vec();
    Ok((header, payload))
}

fn encode_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn decode_f64s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

fn crc32(bytes: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(bytes);
    h.finalize()
}

/// SHA-256 hex digest of a canonical JSON rendering; used for config hashes.
pub fn hash_json(value: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(value).expect("json serializable");
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let mut payload = Vec::new();
    let mut tensors = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, values: &[f64], payload: &mut Vec<u8>| {
        tensors.push(TensorMeta {
            name,
            shape,
            offset: payload.len() as u64,
        });
        encode_f64s(payload, values);
    };
    for (name, tensor) in &ckpt.params {
        push(
            format!("param/{name}"),
            tensor.shape().to_vec(),
            tensor.data(),
            &mut payload,
        );
    }
    for ((name, tensor), m) in ckpt.params.iter().zip(&ckpt.adam.m) {
        push(format!("adam_m/{name}"), tensor.shape().to_vec(), m, &mut payload);
    }
    for ((name, tensor), v) in ckpt.params.iter().zip(&ckpt.adam.v) {
        push(format!("adam_v/{name}"), tensor.shape().to_vec(), v, &mut payload);
    }
    let header = CheckpointHeader {
        kind: "checkpoint".into(),
        config_hash: ckpt.config_hash.clone(),
        config: ckpt.config_echo.clone(),
        epoch_next: ckpt.epoch_next,
        adam_t: ckpt.adam.t,
        validation_metric: ckpt.validation_metric,
        best_epoch: ckpt.best_epoch,
        rng: RngState {
            seed: ckpt.seed,
            scheme: "stream-derived-v1".into(),
        },
        tensors,
        payload_len: payload.len() as u64,
        payload_crc32: crc32(&payload),
    };
    let header = serde_json::to_vec(&header).expect("header serializable");
    write_container(path, &header, &payload)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let (header, payload) = read_container(path)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&header).map_err(|e| Error::FileHeader {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    if header.kind != "checkpoint" {
        return Err(Error::FileHeader {
            path: path.to_path_buf(),
            msg: format!("expected a checkpoint, found kind {:?}", header.kind),
        });
    }
    if payload.len() as u64 != header.payload_len {
        return Err(Error::FileTruncated {
            path: path.to_path_buf(),
            expected: header.payload_len,
            found: payload.len() as u64,
        });
    }
    if crc32(&payload) != header.payload_crc32 {
        return Err(Error::FileChecksum {
            path: path.to_path_buf(),
        });
    }

    let slice_for = |meta: &TensorMeta| -> Result<Vec<f64>> {
        let numel: usize = meta.shape.iter().product();
        let start = meta.offset as usize;
        let end = start + numel * 8;
        if end > payload.len() {
            return Err(Error::FileTruncated {
                path: path.to_path_buf(),
                expected: end as u64,
                found: payload.len() as u64,
            });
        }
        Ok(decode_f64s(&payload[start..end]))
    };

    let mut params = Vec::new();
    let mut m = Vec::new();
    let mut v = Vec::new();
    for meta in &header.tensors {
        if let Some(name) = meta.name.strip_prefix("param/") {
            let data = slice_for(meta)?;
            params.push((name.to_string(), Tensor::new(meta.shape.clone(), data)?));
        } else if meta.name.starts_with("adam_m/") {
            m.push(slice_for(meta)?);
        } else if meta.name.starts_with("adam_v/") {
            v.push(slice_for(meta)?);
        } else {
            return Err(Error::FileHeader {
                path: path.to_path_buf(),
                msg: format!("unknown tensor section {:?}", meta.name),
            });
        }
    }
    if m.len() != params.len() || v.len() != params.len() {
        return Err(Error::FileHeader {
            path: path.to_path_buf(),
            msg: "optimizer moments do not mirror the parameter manifest".into(),
        });
    }
    Ok(Checkpoint {
        params,
        adam: AdamState {
            m,
            v,
            t: header.adam_t,
        },
        config_hash: header.config_hash,
        config_echo: header.config,
        epoch_next: header.epoch_next,
        validation_metric: header.validation_metric,
        best_epoch: header.best_epoch,
        seed: header.rng.seed,
    })
}

/// File name for one cached spectrogram, stable in the source id.
pub fn mel_cache_file_name(source_id: &str) -> String {
    let digest = Sha256::digest(source_id.as_bytes());
    let mut hex = String::with_capacity(16);
    for b in digest.iter().take(8) {
        hex.push_str(&format!("{b:02x}"));
    }
    let stem: String = Path::new(source_id)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sample".into())
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{stem}.{hex}.mel")
}

pub fn save_mel_cache(mel: &MelSpectrogram<f64>, path: &Path) -> Result<()> {
    let mut payload = Vec::new();
    encode_f64s(&mut payload, mel.values.data());
    let header = MelCacheHeader {
        kind: "mel-cache".into(),
        source_id: mel.source_id.clone(),
        dsp: mel.config.clone(),
        shape: mel.values.shape().to_vec(),
        payload_len: payload.len() as u64,
        payload_crc32: crc32(&payload),
    };
    let header = serde_json::to_vec(&header).expect("header serializable");
    write_container(path, &header, &payload)
}

/// Load a cached spectrogram, verifying it was produced by `expect_dsp`.
pub fn load_mel_cache(path: &Path, expect_dsp: &DspConfig) -> Result<MelSpectrogram<f64>> {
    let (header, payload) = read_container(path)?;
    let header: MelCacheHeader =
        serde_json::from_slice(&header).map_err(|e| Error::FileHeader {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    if header.kind != "mel-cache" {
        return Err(Error::FileHeader {
            path: path.to_path_buf(),
            msg: format!("expected a mel cache, found kind {:?}", header.kind),
        });
    }
    if payload.len() as u64 != header.payload_len {
        return Err(Error::FileTruncated {
            path: path.to_path_buf(),
            expected: header.payload_len,
            found: payload.len() as u64,
        });
    }
    if crc32(&payload) != header.payload_crc32 {
        return Err(Error::FileChecksum {
            path: path.to_path_buf(),
        });
    }
    if &header.dsp != expect_dsp {
        return Err(Error::FileHeader {
            path: path.to_path_buf(),
            msg: "cache was produced with a different dsp config".into(),
        });
    }
    Ok(MelSpectrogram {
        values: crate::tensor::Tensor::new(header.shape, decode_f64s(&payload))?,
        config: header.dsp,
        source_id: header.source_id,
    })
}
