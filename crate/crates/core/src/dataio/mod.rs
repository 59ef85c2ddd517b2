//! Recording container, song metadata, and the chunk/split procedure that
//! turns recordings into train and test example sets.
//!
//! A recording is cut into consecutive chunks (5 s by default). Chunks are
//! assigned to train or test with a fixed cyclic pattern, `train, train,
//! train, test` for a 3/4 ratio, so the two sets interleave in time and never
//! share a sample. Each chunk is then cut into examples (1 s by default), and
//! each example becomes a `[channels x samples]` tile of raw amplitudes.

mod container;
mod manifest;
mod meta;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repr::{TileImage, TileKind};

pub use container::{load_recording, save_recording, EegRecording, RECORDING_MAGIC, RECORDING_VERSION};
pub use manifest::{load_examples, ExampleManifest, LabelTarget, ManifestEntry};
pub use meta::{load_meta, save_meta, validate_meta, SongMeta};

/// Which side of the hold-out split a set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Where an example was cut from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub participant: String,
    pub song: u16,
    pub chunk: usize,
    pub offset_seconds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub tile: TileImage,
    pub label: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleSet {
    pub split: Split,
    pub examples: Vec<Example>,
}

impl ExampleSet {
    pub fn new(split: Split) -> Self {
        Self {
            split,
            examples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Appends another set of the same split.
    pub fn extend(&mut self, other: ExampleSet) -> Result<()> {
        if other.split != self.split {
            return Err(Error::InvalidArgument(format!(
                "cannot merge a {:?} set into a {:?} set",
                other.split, self.split
            )));
        }
        self.examples.extend(other.examples);
        Ok(())
    }

    /// Common `(rows, cols)` of every tile, or an error if they differ.
    pub fn tile_dims(&self) -> Result<(usize, usize)> {
        let first = self
            .examples
            .first()
            .ok_or_else(|| Error::InvalidArgument(format!("{:?} set is empty", self.split)))?;
        let dims = (first.tile.rows(), first.tile.cols());
        for e in &self.examples {
            if (e.tile.rows(), e.tile.cols()) != dims {
                return Err(Error::shape(
                    "example set",
                    format!("{}x{} tiles", dims.0, dims.1),
                    format!("{}x{}", e.tile.rows(), e.tile.cols()),
                ));
            }
        }
        Ok(dims)
    }

    /// Replaces every tile, keeping labels and provenance.
    pub fn map_tiles(&self, mut f: impl FnMut(&TileImage) -> Result<TileImage>) -> Result<ExampleSet> {
        let examples = self
            .examples
            .iter()
            .map(|e| {
                Ok(Example {
                    tile: f(&e.tile)?,
                    label: e.label,
                    provenance: e.provenance.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(ExampleSet {
            split: self.split,
            examples,
        })
    }
}

/// Integer samples per second of a recording.
pub fn samples_per_second(rate: f32) -> Result<usize> {
    let r = rate.round();
    if !(r >= 1.0) || (rate - r).abs() > 1e-4 {
        return Err(Error::InvalidArgument(format!(
            "sampling rate {rate} Hz is not a whole number of samples per second"
        )));
    }
    Ok(r as usize)
}

pub(crate) fn window_mean(w: &[f32]) -> f32 {
    (w.iter().map(|&v| v as f64).sum::<f64>() / w.len() as f64) as f32
}

/// Downsamples by averaging non-overlapping windows of `rate / target_rate`
/// samples; a trailing partial window is dropped.
pub fn decimate(rec: &EegRecording, target_rate: f32) -> Result<EegRecording> {
    let from = rec.sampling_rate() as f64;
    let to = target_rate as f64;
    let ratio = from / to;
    let k = ratio.round();
    if !(to > 0.0) || k < 1.0 || (ratio - k).abs() > 1e-6 * ratio {
        return Err(Error::NonIntegerRatio { from, to });
    }
    let k = k as usize;
    let out_len = rec.samples() / k;
    let mut data = Vec::with_capacity(rec.channels() * out_len);
    for c in 0..rec.channels() {
        data.extend(rec.channel(c).chunks_exact(k).take(out_len).map(window_mean));
    }
    EegRecording::new(rec.participant_id(), rec.song_id(), rec.channels(), target_rate, data)
}

/// Raw `[channels x (length * rate)]` tile starting `second_offset` seconds in.
pub fn make_tile(rec: &EegRecording, second_offset: usize, length_seconds: usize) -> Result<TileImage> {
    let rate = samples_per_second(rec.sampling_rate())?;
    let start = second_offset * rate;
    let end = start + length_seconds * rate;
    if length_seconds == 0 || end > rec.samples() {
        return Err(Error::WindowOutOfRange {
            start,
            end,
            len: rec.samples(),
        });
    }
    let mut values = Vec::with_capacity(rec.channels() * (end - start));
    for c in 0..rec.channels() {
        values.extend_from_slice(&rec.channel(c)[start..end]);
    }
    TileImage::new(rec.channels(), end - start, TileKind::Raw, values)
}

/// `train` of every `period` consecutive chunks go to the training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainRatio {
    pub train: usize,
    pub period: usize,
}

impl TrainRatio {
    pub fn split_of(&self, chunk: usize) -> Split {
        if chunk % self.period < self.train {
            Split::Train
        } else {
            Split::Test
        }
    }
}

impl Default for TrainRatio {
    fn default() -> Self {
        Self { train: 3, period: 4 }
    }
}

impl std::str::FromStr for TrainRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parsed = s
            .split_once('/')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
        match parsed {
            Some((train, period)) if train >= 1 && train < period => Ok(Self { train, period }),
            _ => Err(Error::InvalidArgument(format!(
                "train ratio {s:?} must look like a/b with 1 <= a < b"
            ))),
        }
    }
}

impl std::fmt::Display for TrainRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.train, self.period)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub chunk_seconds: usize,
    pub example_seconds: usize,
    pub train_ratio: TrainRatio,
    pub use_seconds: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            chunk_seconds: 5,
            example_seconds: 1,
            train_ratio: TrainRatio::default(),
            use_seconds: 240,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.example_seconds == 0 || !self.chunk_seconds.is_multiple_of(self.example_seconds) {
            return bad(format!(
                "chunk length {} s is not a positive multiple of example length {} s",
                self.chunk_seconds, self.example_seconds
            ));
        }
        if self.chunk_seconds == 0 || !self.use_seconds.is_multiple_of(self.chunk_seconds) || self.use_seconds == 0 {
            return bad(format!(
                "used length {} s is not a positive multiple of chunk length {} s",
                self.use_seconds, self.chunk_seconds
            ));
        }
        let r = self.train_ratio;
        if r.train == 0 || r.train >= r.period {
            return bad(format!("train ratio {r} must satisfy 1 <= a < b"));
        }
        Ok(())
    }

    pub fn chunks(&self) -> usize {
        self.use_seconds / self.chunk_seconds
    }

    /// `(split, chunk, offset_seconds)` for every example, in time order.
    pub fn schedule(&self) -> Result<Vec<(Split, usize, usize)>> {
        self.validate()?;
        let per_chunk = self.chunk_seconds / self.example_seconds;
        Ok((0..self.chunks())
            .flat_map(|chunk| {
                (0..per_chunk).map(move |e| {
                    let offset = chunk * self.chunk_seconds + e * self.example_seconds;
                    (self.train_ratio.split_of(chunk), chunk, offset)
                })
            })
            .collect())
    }
}

/// Splits the first `use_seconds` of `rec` into train and test examples,
/// labelled with the recording's song id.
pub fn chunk_and_split(rec: &EegRecording, config: &SplitConfig) -> Result<(ExampleSet, ExampleSet)> {
    let schedule = config.schedule()?;
    let rate = samples_per_second(rec.sampling_rate())?;
    let required = config.use_seconds * rate;
    if rec.samples() < required {
        return Err(Error::TooShort {
            required,
            actual: rec.samples(),
        });
    }
    let mut train = ExampleSet::new(Split::Train);
    let mut test = ExampleSet::new(Split::Test);
    for (split, chunk, offset_seconds) in schedule {
        let example = Example {
            tile: make_tile(rec, offset_seconds, config.example_seconds)?,
            label: rec.song_id() as usize,
            provenance: Provenance {
                participant: rec.participant_id().to_owned(),
                song: rec.song_id(),
                chunk,
                offset_seconds,
            },
        };
        match split {
            Split::Train => train.examples.push(example),
            Split::Test => test.examples.push(example),
        }
    }
    Ok((train, test))
}
