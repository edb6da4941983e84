//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    // ---- tensors and autodiff ----
    #[error("{op}: shape mismatch: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: {msg}")]
    InvalidOperand { op: &'static str, msg: String },
    #[error("backward has already been run on this graph; build a fresh graph per step")]
    BackwardAlreadyRun,
    #[error("backward seed must be a scalar, got shape {shape:?}")]
    NonScalarSeed { shape: Vec<usize> },
    #[error("cross_entropy: label row {row} is not one-hot")]
    NotOneHot { row: usize },

    // ---- audio front end ----
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("wav {path}: non-PCM encoding (only integer PCM is supported)")]
    WavEncoding { path: PathBuf },
    #[error("wav {path}: unsupported bit depth {bits} (only 16-bit PCM is supported)")]
    WavBitDepth { path: PathBuf, bits: u16 },
    #[error("wav {path}: {msg}")]
    WavFormat { path: PathBuf, msg: String },
    #[error("signal of {len} samples is shorter than one analysis window of {n_fft}")]
    SignalTooShort { len: usize, n_fft: usize },
    #[error("waveform sample rate {wave} Hz does not match configured {cfg} Hz (resampling is not performed)")]
    SampleRateMismatch { wave: u32, cfg: u32 },
    #[error("mel filter {index} has no nonzero weight; lower n_mels or raise n_fft")]
    EmptyMelFilter { index: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    // ---- augmentation ----
    #[error("time shift bound {max_shift} must be smaller than the frame count {n_frames}")]
    ShiftTooLarge { max_shift: usize, n_frames: usize },
    #[error("frequency mask bound {width} exceeds the {n_mels} mel bins")]
    FreqMaskTooWide { width: usize, n_mels: usize },
    #[error("time mask bound {width} exceeds the {n_frames} frames")]
    TimeMaskTooWide { width: usize, n_frames: usize },

    // ---- model ----
    #[error("branch {branch} spatial dims collapse to {h}x{w}; input too small for the branch schedule")]
    BranchTooSmall { branch: usize, h: usize, w: usize },

    // ---- training ----
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    // ---- persistence ----
    #[error("{path}: bad magic (not an EMOHRNET file)")]
    FileMagic { path: PathBuf },
    #[error("{path}: unsupported format version {version}")]
    FileVersion { path: PathBuf, version: u32 },
    #[error("{path}: truncated payload (expected {expected} bytes, found {found})")]
    FileTruncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("{path}: payload checksum mismatch")]
    FileChecksum { path: PathBuf },
    #[error("{path}: malformed header: {msg}")]
    FileHeader { path: PathBuf, msg: String },
    #[error("config hash mismatch: checkpoint was produced with {ckpt}, current config hashes to {current}")]
    ConfigHashMismatch { ckpt: String, current: String },

    // ---- datasets ----
    #[error("cannot parse {corpus} filename {name:?}: {msg}")]
    FilenameParse {
        corpus: &'static str,
        name: String,
        msg: String,
    },
    #[error("unknown label schema {0:?}")]
    UnknownSchema(String),
    #[error("manifest {path} line {line}: {msg}")]
    ManifestParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{0}")]
    InvalidData(String),
}
