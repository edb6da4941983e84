//! Manifest files: rows of (path, class id, split, source id) in TSV form.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::labels::{self, LabelSchema};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn parse(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidData(format!("unknown split tag {other:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRow {
    pub path: PathBuf,
    pub class_id: usize,
    pub split: Split,
    pub source_id: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub schema: LabelSchema,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn rows_for(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    /// Check the invariants required before training: unique paths, class
    /// ids inside the schema, and no empty split.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for row in &self.rows {
            if row.class_id >= self.schema.n_classes() {
                return Err(Error::InvalidData(format!(
                    "class id {} out of range for schema {} ({} classes)",
                    row.class_id,
                    self.schema.name,
                    self.schema.n_classes()
                )));
            }
            if !seen.insert(&row.path) {
                return Err(Error::InvalidData(format!(
                    "duplicate path {} in manifest",
                    row.path.display()
                )));
            }
        }
        for split in Split::ALL {
            if self.rows_for(split).next().is_none() {
                return Err(Error::EmptyDataset(format!("split {split} has no rows")));
            }
        }
        Ok(())
    }

    /// Serialize as TSV: `path<TAB>class_id<TAB>split<TAB>source_id`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                row.path.display(),
                row.class_id,
                row.split,
                row.source_id
            ));
        }
        out
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Parse a TSV manifest; `#`-prefixed and blank lines are ignored.
    pub fn read_tsv(path: &Path, schema: LabelSchema) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::ManifestParse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("expected 4 tab-separated fields, found {}", fields.len()),
                });
            }
            let class_id = fields[1].parse::<usize>().map_err(|_| Error::ManifestParse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("class id {:?} is not an integer", fields[1]),
            })?;
            if class_id >= schema.n_classes() {
                return Err(Error::ManifestParse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!(
                        "class id {} out of range for schema {} ({} classes)",
                        class_id,
                        schema.name,
                        schema.n_classes()
                    ),
                });
            }
            let split = Split::parse(fields[2]).map_err(|e| Error::ManifestParse {
                path: path.to_path_buf(),
                line: line_no,
                msg: e.to_string(),
            })?;
            rows.push(ManifestRow {
                path: PathBuf::from(fields[0]),
                class_id,
                split,
                source_id: fields[3].to_string(),
            });
        }
        Ok(Manifest { schema, rows })
    }
}

/// Split fractions plus the stratification switch.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitPolicy {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    /// Keep each speaker's samples inside a single split when speaker ids
    /// are available.
    pub speaker_disjoint: bool,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        SplitPolicy {
            train: 0.70,
            val: 0.15,
            test: 0.15,
            speaker_disjoint: true,
        }
    }
}

/// Largest-remainder apportionment of `n` items over the three splits; ties
/// on the remainder go to the later split (train < val < test).
pub fn split_targets(n: usize, policy: &SplitPolicy) -> [usize; 3] {
    let fracs = [policy.train, policy.val, policy.test];
    let total: f64 = fracs.iter().sum();
    let quotas: Vec<f64> = fracs.iter().map(|f| n as f64 * f / total).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(b.cmp(&a))
    });
    for i in 0..n - assigned {
        sizes[order[i % 3]] += 1;
    }
    [sizes[0], sizes[1], sizes[2]]
}

/// What `build_manifest` found besides the manifest itself.
#[derive(Clone, Debug, Default)]
pub struct BuildReport {
    /// Files whose names could not be parsed, with the reason; skipped.
    pub skipped: Vec<(PathBuf, String)>,
    /// Schema classes that ended up with zero samples (a warning here; an
    /// error only once training starts).
    pub empty_classes: Vec<String>,
}

/// Scan `root` for WAV files, derive labels from the corpus filename
/// convention, and assign splits with a seeded shuffle.
///
/// IEMOCAP carries labels in transcription files, not filenames, and is
/// license-gated; it is only accepted via a pre-built manifest, never by
/// directory scanning.
pub fn build_manifest(
    root: &Path,
    schema: &LabelSchema,
    policy: &SplitPolicy,
    seed: u64,
    include_song: bool,
) -> Result<(Manifest, BuildReport)> {
    if schema.name == "iemocap" {
        return Err(Error::InvalidData(
            "iemocap labels live in transcriptions; supply a pre-built manifest instead of a directory scan".into(),
        ));
    }
    let mut files: Vec<PathBuf> = WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("wav"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no wav files under {}",
            root.display()
        )));
    }

    let mut report = BuildReport::default();
    // (path, class, speaker)
    let mut labeled: Vec<(PathBuf, usize, Option<String>)> = Vec::new();
    for path in files {
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let parsed = match schema.name.as_str() {
            "ravdess" | "ravdess-merged-calm" => {
                labels::parse_ravdess_filename(&name).map(|meta| {
                    let class = if schema.name == "ravdess-merged-calm" {
                        labels::ravdess_merge_calm(meta.class_id)
                    } else {
                        meta.class_id
                    };
                    (class, Some(format!("actor{:02}", meta.actor)), meta.vocal_channel)
                })
            }
            "emovo" => labels::parse_emovo_filename(&name)
                .map(|meta| (meta.class_id, Some(meta.speaker), 1)),
            _ => {
                // generic-k corpora use `<anything>-<class>-<index>.wav`
                parse_generic_filename(&name, schema.n_classes()).map(|c| (c, None, 1))
            }
        };
        match parsed {
            Ok((class, speaker, vocal_channel)) => {
                if !include_song && vocal_channel == 2 {
                    continue;
                }
                labeled.push((path, class, speaker));
            }
            Err(e) => report.skipped.push((path, e.to_string())),
        }
    }
    if labeled.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no parseable wav files under {} for schema {}",
            root.display(),
            schema.name
        )));
    }

    let n = labeled.len();
    let targets = split_targets(n, policy);
    let mut assignment: Vec<Split> = vec![Split::Train; n];
    let all_speakers_known = labeled.iter().all(|(_, _, s)| s.is_some());
    let mut rng = Rng::new(seed, 0);
    if policy.speaker_disjoint && all_speakers_known {
        let mut by_speaker: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, (_, _, speaker)) in labeled.iter().enumerate() {
            by_speaker
                .entry(speaker.clone().unwrap())
                .or_default()
                .push(i);
        }
        let mut speakers: Vec<String> = by_speaker.keys().cloned().collect();
        rng.shuffle(&mut speakers);
        // each speaker goes to the least-filled split relative to its
        // target, so no nonzero-target split starves even with few speakers
        let mut filled = [0usize; 3];
        for speaker in speakers {
            let mut best: Option<usize> = None;
            for s in 0..3 {
                if targets[s] == 0 {
                    continue;
                }
                let take = match best {
                    None => true,
                    Some(b) => {
                        let r_s = filled[s] as f64 / targets[s] as f64;
                        let r_b = filled[b] as f64 / targets[b] as f64;
                        r_s < r_b || (r_s == r_b && targets[s] > targets[b])
                    }
                };
                if take {
                    best = Some(s);
                }
            }
            let best = best.unwrap_or(0);
            let split = Split::ALL[best];
            for &i in &by_speaker[&speaker] {
                assignment[i] = split;
                filled[best] += 1;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        for (pos, &i) in order.iter().enumerate() {
            assignment[i] = if pos < targets[0] {
                Split::Train
            } else if pos < targets[0] + targets[1] {
                Split::Val
            } else {
                Split::Test
            };
        }
    }

    let rows: Vec<ManifestRow> = labeled
        .into_iter()
        .zip(assignment)
        .map(|((path, class_id, _), split)| {
            let source_id = path
                .strip_prefix(root)
                .unwrap_or(&path)
                .to_string_lossy()
                .into_owned();
            ManifestRow {
                path,
                class_id,
                split,
                source_id,
            }
        })
        .collect();

    let manifest = Manifest {
        schema: schema.clone(),
        rows,
    };
    for (class, label) in manifest.schema.labels.iter().enumerate() {
        if !manifest.rows.iter().any(|r| r.class_id == class) {
            report.empty_classes.push(label.clone());
        }
    }
    Ok((manifest, report))
}

/// `<anything>-<class>-<index>.wav` for generic-k corpora.
fn parse_generic_filename(name: &str, n_classes: usize) -> Result<usize> {
    let stem = name.strip_suffix(".wav").unwrap_or(name);
    let fields: Vec<&str> = stem.split('-').collect();
    let fail = |msg: String| Error::FilenameParse {
        corpus: "generic",
        name: name.to_string(),
        msg,
    };
    if fields.len() < 2 {
        return Err(fail("expected <name>-<class>-<index>".into()));
    }
    let class = fields[fields.len() - 2]
        .parse::<usize>()
        .map_err(|_| fail(format!("class field {:?} is not numeric", fields[fields.len() - 2])))?;
    if class >= n_classes {
        return Err(fail(format!("class {class} out of range 0..{n_classes}")));
    }
    Ok(class)
}
