use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-song metadata from the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SongMeta {
    pub song_id: u16,
    pub bpm: Option<f64>,
    /// Behavioral rating, 1 to 9.
    pub enjoyment: Option<u8>,
    /// Behavioral rating, 1 to 9.
    pub familiarity: Option<u8>,
}

impl SongMeta {
    pub fn validate(&self) -> Result<()> {
        if let Some(bpm) = self.bpm {
            if !(bpm > 0.0 && bpm.is_finite()) {
                return Err(Error::Malformed {
                    what: "song metadata",
                    detail: format!("song {}: bpm must be positive, got {bpm}", self.song_id),
                });
            }
        }
        for (name, r) in [("enjoyment", self.enjoyment), ("familiarity", self.familiarity)] {
            if let Some(r) = r.filter(|r| !(1..=9).contains(r)) {
                return Err(Error::Malformed {
                    what: "song metadata",
                    detail: format!("song {}: {name} {r} is outside 1..=9", self.song_id),
                });
            }
        }
        Ok(())
    }
}

/// Checks every entry and that song ids are unique.
pub fn validate_meta(meta: &[SongMeta]) -> Result<()> {
    let mut seen = HashSet::new();
    for m in meta {
        m.validate()?;
        if !seen.insert(m.song_id) {
            return Err(Error::Malformed {
                what: "song metadata",
                detail: format!("duplicate song_id {}", m.song_id),
            });
        }
    }
    Ok(())
}

pub fn load_meta(path: impl AsRef<Path>) -> Result<Vec<SongMeta>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta: Vec<SongMeta> = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    validate_meta(&meta)?;
    Ok(meta)
}

pub fn save_meta(meta: &[SongMeta], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    validate_meta(meta)?;
    let mut text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn song(id: u16, bpm: Option<f64>) -> SongMeta {
        SongMeta {
            song_id: id,
            bpm,
            enjoyment: Some(5),
            familiarity: None,
        }
    }

    #[test]
    fn round_trips_with_nulls() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.json");
        let meta = vec![song(0, Some(120.5)), song(1, None)];
        save_meta(&meta, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"familiarity\": null"));
        assert_eq!(load_meta(&path).unwrap(), meta);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(song(0, Some(0.0)).validate().is_err());
        assert!(song(0, Some(-3.0)).validate().is_err());
        let mut m = song(0, None);
        m.enjoyment = Some(10);
        assert!(m.validate().is_err());
        m.enjoyment = Some(0);
        assert!(m.validate().is_err());
        assert!(validate_meta(&[song(1, None), song(1, None)]).is_err());
    }

    #[test]
    fn unknown_fields_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.json");
        fs::write(
            &path,
            r#"[{"song_id":0,"bpm":90,"enjoyment":null,"familiarity":null,"x":1}]"#,
        )
        .unwrap();
        assert!(matches!(load_meta(&path), Err(Error::Json { .. })));
    }
}
