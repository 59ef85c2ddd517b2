use std::fs;
use std::path::{Component, Path, PathBuf};

use anyhow::{Context, Result};
use eegtile::dataio::{load_examples, ExampleManifest, ExampleSet};
use eegtile::repr::{apply_ordering, periodogram_tile, ChannelOrdering};
use eegtile::synthgen::SynthSpec;
use eegtile::train::TrainConfig;
use eegtile::Error;
use serde::{Deserialize, Serialize};

use crate::args::Repr;

pub const CHECKPOINT_FILE: &str = "model.egtc";
pub const TRAINLOG_FILE: &str = "trainlog.jsonl";
pub const RUN_FILE: &str = "run.json";
pub const ORDERING_FILE: &str = "ordering.json";

/// Everything needed to reproduce a training run, written as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub repr: Repr,
    pub ordering: ChannelOrdering,
    /// Generator settings, when the corpus came from `synth`.
    pub synth: Option<SynthSpec>,
    pub classes: usize,
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub paths: RunPaths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPaths {
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub checkpoint: PathBuf,
    pub trainlog: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    Ok(serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    Ok(())
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.into(),
        source,
    })?;
    Ok(())
}

/// A manifest together with the raw tiles it describes.
pub struct LoadedSet {
    pub manifest: ExampleManifest,
    pub set: ExampleSet,
}

pub fn load_set(path: &Path) -> Result<LoadedSet> {
    let manifest = ExampleManifest::load(path).with_context(|| format!("loading manifest {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let set = load_examples(&manifest, base).with_context(|| format!("rebuilding examples of {}", path.display()))?;
    if set.is_empty() {
        return Err(Error::Malformed {
            what: "manifest",
            detail: format!("{} lists no examples", path.display()),
        }
        .into());
    }
    Ok(LoadedSet { manifest, set })
}

/// Converts raw tiles into `repr`. The periodogram variants are tied to the
/// example length they are named after.
pub fn to_repr(loaded: &LoadedSet, repr: Repr) -> Result<ExampleSet> {
    let seconds = loaded.manifest.split_config.example_seconds;
    let want = match repr {
        Repr::Raw => return Ok(loaded.set.clone()),
        Repr::Psd1 => 1,
        Repr::Psd2 => 2,
    };
    if seconds != want {
        return Err(Error::InvalidArgument(format!(
            "--repr {} needs {want} s examples but the manifest has {seconds} s examples",
            repr_name(repr)
        ))
        .into());
    }
    let rate = loaded.manifest.sampling_rate as f64;
    Ok(loaded.set.map_tiles(|t| periodogram_tile(t, rate))?)
}

pub fn repr_name(repr: Repr) -> &'static str {
    match repr {
        Repr::Raw => "raw",
        Repr::Psd1 => "psd1",
        Repr::Psd2 => "psd2",
    }
}

pub fn reorder(set: &ExampleSet, ordering: &ChannelOrdering) -> Result<ExampleSet> {
    let (rows, _) = set.tile_dims()?;
    if rows != ordering.len() {
        return Err(Error::Malformed {
            what: "ordering",
            detail: format!("permutes {} channels but tiles have {rows}", ordering.len()),
        }
        .into());
    }
    Ok(set.map_tiles(|t| apply_ordering(t, ordering))?)
}

/// Rebuilds the network input for `manifest` exactly as training saw it.
pub fn model_input(manifest: &Path, run: &RunConfig) -> Result<(LoadedSet, ExampleSet)> {
    let loaded = load_set(manifest)?;
    let set = reorder(&to_repr(&loaded, run.repr)?, &run.ordering)?;
    let dims = set.tile_dims()?;
    if dims != (run.tile_rows, run.tile_cols) {
        return Err(Error::Malformed {
            what: "manifest",
            detail: format!(
                "{} yields {}x{} tiles, the model was trained on {}x{}",
                manifest.display(),
                dims.0,
                dims.1,
                run.tile_rows,
                run.tile_cols
            ),
        }
        .into());
    }
    Ok((loaded, set))
}

/// `to` expressed relative to the directory `from`, when both resolve.
pub fn relative_path(from: &Path, to: &Path) -> PathBuf {
    let (Ok(from), Ok(to)) = (from.canonicalize(), to.canonicalize()) else {
        return to.to_path_buf();
    };
    let a: Vec<Component> = from.components().collect();
    let b: Vec<Component> = to.components().collect();
    let common = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    if common == 0 {
        return to;
    }
    let mut out: PathBuf = a[common..].iter().map(|_| Component::ParentDir).collect();
    out.extend(&b[common..]);
    if out.as_os_str().is_empty() {
        out.push(".");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_between_siblings() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus");
        let out = dir.path().join("runs/a");
        fs::create_dir_all(&corpus).unwrap();
        fs::create_dir_all(&out).unwrap();
        assert_eq!(relative_path(&out, &corpus), PathBuf::from("../../corpus"));
        assert_eq!(relative_path(&corpus, &corpus), PathBuf::from("."));
        assert_eq!(relative_path(dir.path(), &out), PathBuf::from("runs/a"));
        assert_eq!(
            out.join(relative_path(&out, &corpus)).canonicalize().unwrap(),
            corpus.canonicalize().unwrap()
        );
    }
}
