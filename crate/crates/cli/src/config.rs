//! The engine configuration file: one JSON document with exactly the
//! sections dsp, augment, model, train, and data. Every field has a
//! default; unknown keys are rejected for typo safety; the resolved,
//! fully-defaulted document is echoed into every checkpoint and report so a
//! run can be reproduced from its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use emohrnet_core::augment::AugmentPolicy;
use emohrnet_core::data::{LabelSchema, SplitPolicy};
use emohrnet_core::dsp::DspConfig;
use emohrnet_core::model::HRNetConfig;
use emohrnet_core::persist::hash_json;
use emohrnet_core::train::TrainConfig;

use crate::CliError;

/// Where the audio and labels come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Manifest TSV, or a corpus directory to scan and split.
    pub manifest: Option<PathBuf>,
    /// Label schema name: ravdess, ravdess-merged-calm, iemocap, emovo, or
    /// generic-<k>.
    pub schema: String,
    /// Frame count every spectrogram is padded/cropped to at batching time.
    pub n_frames_target: usize,
    /// Directory of cached spectrograms written by `preprocess`.
    pub cache_dir: Option<PathBuf>,
    /// Split assignment used when `manifest` is a directory.
    pub split: SplitPolicy,
    /// Keep RAVDESS song-channel files (vocal channel 02).
    pub include_song: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            manifest: None,
            schema: "ravdess".into(),
            n_frames_target: 300,
            cache_dir: None,
            split: SplitPolicy::default(),
            include_song: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub dsp: DspConfig,
    pub augment: AugmentPolicy,
    pub model: HRNetConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

impl EngineConfig {
    /// Cross-section consistency on top of per-section validation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.dsp.validate().map_err(CliError::from)?;
        self.model.validate().map_err(CliError::from)?;
        self.train.validate().map_err(CliError::from)?;
        let schema = LabelSchema::by_name(&self.data.schema).map_err(CliError::from)?;
        if schema.n_classes() != self.model.n_classes {
            return Err(CliError::Input(format!(
                "schema {} has {} classes but model.n_classes is {}",
                schema.name,
                schema.n_classes(),
                self.model.n_classes
            )));
        }
        if self.model.in_mels != self.dsp.n_mels {
            return Err(CliError::Input(format!(
                "model.in_mels ({}) must equal dsp.n_mels ({})",
                self.model.in_mels, self.dsp.n_mels
            )));
        }
        if self.model.in_frames != self.data.n_frames_target {
            return Err(CliError::Input(format!(
                "model.in_frames ({}) must equal data.n_frames_target ({})",
                self.model.in_frames, self.data.n_frames_target
            )));
        }
        if self.augment.freq_mask_max > self.dsp.n_mels {
            return Err(CliError::Input(format!(
                "augment.freq_mask_max ({}) exceeds dsp.n_mels ({})",
                self.augment.freq_mask_max, self.dsp.n_mels
            )));
        }
        if self.augment.time_mask_max > self.data.n_frames_target {
            return Err(CliError::Input(format!(
                "augment.time_mask_max ({}) exceeds data.n_frames_target ({})",
                self.augment.time_mask_max, self.data.n_frames_target
            )));
        }
        if self.augment.enabled && self.augment.max_shift >= self.data.n_frames_target {
            return Err(CliError::Input(format!(
                "augment.max_shift ({}) must stay below data.n_frames_target ({})",
                self.augment.max_shift, self.data.n_frames_target
            )));
        }
        let s = &self.data.split;
        if !(s.train >= 0.0 && s.val >= 0.0 && s.test >= 0.0 && s.train + s.val + s.test > 0.0) {
            return Err(CliError::Input(
                "data.split fractions must be non-negative and sum to a positive value".into(),
            ));
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<LabelSchema, CliError> {
        LabelSchema::by_name(&self.data.schema).map_err(CliError::from)
    }

    /// The resolved config as a JSON value (the echo embedded in outputs).
    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializable")
    }

    /// Hash of everything that determines the training trajectory.
    ///
    /// `train.epochs` is excluded so a run can be resumed with a larger
    /// epoch budget; paths (manifest, cache_dir) are excluded because the
    /// trajectory depends on data content, not on where it lives.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct TrainCore<'a> {
            lr: f64,
            beta1: f64,
            beta2: f64,
            adam_eps: f64,
            weight_decay: f64,
            batch_size: usize,
            seed: u64,
            eval_every: usize,
            _marker: std::marker::PhantomData<&'a ()>,
        }
        #[derive(Serialize)]
        struct DataCore<'a> {
            schema: &'a str,
            n_frames_target: usize,
            split: &'a SplitPolicy,
            include_song: bool,
        }
        #[derive(Serialize)]
        struct Fingerprint<'a> {
            dsp: &'a DspConfig,
            augment: &'a AugmentPolicy,
            model: &'a HRNetConfig,
            train: TrainCore<'a>,
            data: DataCore<'a>,
        }
        let fp = Fingerprint {
            dsp: &self.dsp,
            augment: &self.augment,
            model: &self.model,
            train: TrainCore {
                lr: self.train.lr,
                beta1: self.train.beta1,
                beta2: self.train.beta2,
                adam_eps: self.train.adam_eps,
                weight_decay: self.train.weight_decay,
                batch_size: self.train.batch_size,
                seed: self.train.seed,
                eval_every: self.train.eval_every,
                _marker: std::marker::PhantomData,
            },
            data: DataCore {
                schema: &self.data.schema,
                n_frames_target: self.data.n_frames_target,
                split: &self.data.split,
                include_song: self.data.include_song,
            },
        };
        hash_json(&serde_json::to_value(&fp).expect("fingerprint serializable"))
    }
}

/// Apply one `--set section.key=value` override onto the raw JSON document.
/// The value is parsed as JSON when possible, else taken as a string.
pub fn apply_set(doc: &mut serde_json::Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Input(format!("--set {spec:?}: expected section.key=value")))?;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::Input(format!("--set {spec:?}: empty path segment")));
    }
    let value: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = doc;
    for seg in &segments[..segments.len() - 1] {
        cursor = cursor
            .as_object_mut()
            .ok_or_else(|| CliError::Input(format!("--set {spec:?}: {seg:?} is not a section")))?
            .entry(seg.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    cursor
        .as_object_mut()
        .ok_or_else(|| CliError::Input(format!("--set {spec:?}: path does not reach an object")))?
        .insert(segments.last().unwrap().to_string(), value);
    Ok(())
}

/// Load, override, and validate the engine configuration.
///
/// Precedence: file (or built-in defaults) < `--set` overrides < `--seed`.
pub fn load_config(
    path: Option<&Path>,
    seed: Option<u64>,
    sets: &[String],
) -> Result<EngineConfig, CliError> {
    let mut doc = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("config {}: {e}", p.display())))?
        }
        None => serde_json::to_value(EngineConfig::default()).expect("default serializable"),
    };
    for spec in sets {
        apply_set(&mut doc, spec)?;
    }
    if let Some(seed) = seed {
        apply_set(&mut doc, &format!("train.seed={seed}"))?;
    }
    let cfg: EngineConfig = serde_json::from_value(doc)
        .map_err(|e| CliError::Input(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_echo_round_trips() {
        let cfg = EngineConfig::default();
        cfg.validate().unwrap();
        let echoed: EngineConfig = serde_json::from_value(cfg.to_value()).unwrap();
        assert_eq!(echoed, cfg);
        assert_eq!(cfg.fingerprint(), echoed.fingerprint());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let doc = serde_json::json!({"dsp": {"n_fft": 256, "hopp": 80}});
        let err = serde_json::from_value::<EngineConfig>(doc).unwrap_err();
        assert!(err.to_string().contains("hopp"));
    }

    #[test]
    fn set_overrides_parse_json_values() {
        let mut doc = serde_json::to_value(EngineConfig::default()).unwrap();
        apply_set(&mut doc, "train.epochs=7").unwrap();
        apply_set(&mut doc, "model.branch_channels=[16,32]").unwrap();
        apply_set(&mut doc, "model.n_stages=2").unwrap();
        apply_set(&mut doc, "data.schema=generic-8").unwrap();
        let cfg: EngineConfig = serde_json::from_value(doc).unwrap();
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.model.branch_channels, vec![16, 32]);
        assert_eq!(cfg.data.schema, "generic-8");
    }

    #[test]
    fn fingerprint_ignores_epochs_but_not_seed() {
        let a = EngineConfig::default();
        let mut b = a.clone();
        b.train.epochs = 5;
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut c = a.clone();
        c.train.seed = 99;
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
