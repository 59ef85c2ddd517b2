use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{decimate, load_recording, make_tile, EegRecording, Example, ExampleSet, Provenance, Split, SplitConfig};
use crate::error::{Error, Result};

/// What the labels of a manifest mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelTarget {
    /// Song identity.
    Song,
    /// Binned enjoyment rating (low, medium, high).
    Enjoyment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Recording file name, relative to the corpus directory.
    pub file: String,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub label: usize,
}

/// On-disk description of an example set: which windows of which recordings
/// to cut, and their labels. Tiles are rebuilt from the recordings on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleManifest {
    pub split: Split,
    /// Corpus directory, relative to the manifest's own directory unless absolute.
    pub corpus: String,
    /// Working rate the recordings are decimated to before cutting.
    pub sampling_rate: f32,
    pub split_config: SplitConfig,
    pub target: LabelTarget,
    pub classes: usize,
    pub entries: Vec<ManifestEntry>,
}

impl ExampleManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.split_config.validate()?;
        if self.classes < 2 {
            return Err(Error::Malformed {
                what: "manifest",
                detail: format!("{} classes; need at least 2", self.classes),
            });
        }
        if let Some(e) = self.entries.iter().find(|e| e.label >= self.classes) {
            return Err(Error::Malformed {
                what: "manifest",
                detail: format!("label {} of {} is not below {} classes", e.label, e.file, self.classes),
            });
        }
        Ok(())
    }
}

/// Rebuilds the example tiles listed in `manifest`. `base` is the directory
/// the manifest was read from.
pub fn load_examples(manifest: &ExampleManifest, base: &Path) -> Result<ExampleSet> {
    manifest.validate()?;
    let corpus = base.join(&manifest.corpus);
    let mut set = ExampleSet::new(manifest.split);
    let mut current: Option<(String, EegRecording)> = None;
    for entry in &manifest.entries {
        if current.as_ref().map(|(f, _)| f != &entry.file).unwrap_or(true) {
            let path = corpus.join(&entry.file);
            let mut rec = load_recording(&path)?;
            if rec.sampling_rate() != manifest.sampling_rate {
                rec = decimate(&rec, manifest.sampling_rate)?;
            }
            current = Some((entry.file.clone(), rec));
        }
        let (file, rec) = current.as_ref().expect("recording loaded above");
        let p = &entry.provenance;
        if rec.participant_id() != p.participant || rec.song_id() != p.song {
            return Err(Error::Malformed {
                what: "manifest",
                detail: format!(
                    "{file} holds participant {:?} song {}, manifest expects {:?} song {}",
                    rec.participant_id(),
                    rec.song_id(),
                    p.participant,
                    p.song
                ),
            });
        }
        set.examples.push(Example {
            tile: make_tile(rec, p.offset_seconds, manifest.split_config.example_seconds)?,
            label: entry.label,
            provenance: p.clone(),
        });
    }
    Ok(set)
}
