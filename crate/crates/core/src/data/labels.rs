//! Corpus label schemas and filename convention parsers.

use crate::error::{Error, Result};

/// An ordered emotion-label inventory; the position of a label is its class id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSchema {
    pub name: String,
    pub labels: Vec<String>,
}

impl LabelSchema {
    fn new(name: &str, labels: &[&str]) -> Self {
        LabelSchema {
            name: name.to_string(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// 8-class RAVDESS inventory in filename-code order.
    pub fn ravdess() -> Self {
        Self::new(
            "ravdess",
            &["neutral", "calm", "happy", "sad", "angry", "fearful", "disgust", "surprised"],
        )
    }

    /// 7-class RAVDESS variant with calm folded into neutral.
    pub fn ravdess_merged_calm() -> Self {
        Self::new(
            "ravdess-merged-calm",
            &["neutral", "happy", "sad", "angry", "fearful", "disgust", "surprised"],
        )
    }

    pub fn iemocap() -> Self {
        Self::new(
            "iemocap",
            &["happiness", "anger", "sadness", "frustration", "neutral"],
        )
    }

    pub fn emovo() -> Self {
        Self::new(
            "emovo",
            &["disgust", "fear", "anger", "joy", "surprise", "sadness", "neutral"],
        )
    }

    /// Anonymous k-class schema ("generic-k") for pre-labeled manifests and
    /// synthetic fixtures.
    pub fn generic(k: usize) -> Self {
        LabelSchema {
            name: format!("generic-{k}"),
            labels: (0..k).map(|i| format!("class{i}")).collect(),
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "ravdess" => Ok(Self::ravdess()),
            "ravdess-merged-calm" => Ok(Self::ravdess_merged_calm()),
            "iemocap" => Ok(Self::iemocap()),
            "emovo" => Ok(Self::emovo()),
            _ => {
                if let Some(k) = name.strip_prefix("generic-") {
                    if let Ok(k) = k.parse::<usize>() {
                        if k >= 2 {
                            return Ok(Self::generic(k));
                        }
                    }
                }
                Err(Error::UnknownSchema(name.to_string()))
            }
        }
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }
}

/// Metadata parsed from one RAVDESS filename.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RavdessMeta {
    /// Class id under the 8-class schema (emotion code - 1).
    pub class_id: usize,
    pub actor: u32,
    /// 1 = speech, 2 = song.
    pub vocal_channel: u8,
}

/// Parse the hyphen-separated 7-field RAVDESS code, e.g.
/// `03-01-05-01-02-01-12.wav` -> emotion 05 (angry, class 4), actor 12.
pub fn parse_ravdess_filename(name: &str) -> Result<RavdessMeta> {
    let stem = name.strip_suffix(".wav").unwrap_or(name);
    let fields: Vec<&str> = stem.split('-').collect();
    let fail = |msg: &str| Error::FilenameParse {
        corpus: "ravdess",
        name: name.to_string(),
        msg: msg.to_string(),
    };
    if fields.len() != 7 {
        return Err(fail(&format!("expected 7 fields, found {}", fields.len())));
    }
    let mut parsed = [0u32; 7];
    for (i, f) in fields.iter().enumerate() {
        parsed[i] = f
            .parse::<u32>()
            .map_err(|_| fail(&format!("field {} is not numeric", i + 1)))?;
    }
    let emotion = parsed[2];
    if !(1..=8).contains(&emotion) {
        return Err(fail(&format!("emotion code {emotion} out of range 1..=8")));
    }
    let vocal_channel = parsed[1];
    if !(1..=2).contains(&vocal_channel) {
        return Err(fail(&format!("vocal channel {vocal_channel} out of range 1..=2")));
    }
    Ok(RavdessMeta {
        class_id: (emotion - 1) as usize,
        actor: parsed[6],
        vocal_channel: vocal_channel as u8,
    })
}

/// Map an 8-class RAVDESS class id onto the merged-calm 7-class schema.
pub fn ravdess_merge_calm(class_id: usize) -> usize {
    // calm (1) joins neutral (0); everything above shifts down
    const MAP: [usize; 8] = [0, 0, 1, 2, 3, 4, 5, 6];
    MAP[class_id]
}

/// Metadata parsed from one EMOVO filename.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmovoMeta {
    pub class_id: usize,
    pub speaker: String,
}

/// Parse EMOVO names of the form `<emo>-<speaker>-<sentence>.wav`, e.g.
/// `rab-f1-b2.wav`. Emotion codes are the documented Italian abbreviations.
pub fn parse_emovo_filename(name: &str) -> Result<EmovoMeta> {
    let stem = name.strip_suffix(".wav").unwrap_or(name);
    let fields: Vec<&str> = stem.split('-').collect();
    let fail = |msg: &str| Error::FilenameParse {
        corpus: "emovo",
        name: name.to_string(),
        msg: msg.to_string(),
    };
    if fields.len() < 2 {
        return Err(fail("expected <emotion>-<speaker>-<sentence>"));
    }
    let class_id = match fields[0] {
        "dis" => 0, // disgusto
        "pau" => 1, // paura
        "rab" => 2, // rabbia
        "gio" => 3, // gioia
        "sor" => 4, // sorpresa
        "tri" => 5, // tristezza
        "neu" => 6,
        other => return Err(fail(&format!("unknown emotion prefix {other:?}"))),
    };
    Ok(EmovoMeta {
        class_id,
        speaker: fields[1].to_string(),
    })
}
