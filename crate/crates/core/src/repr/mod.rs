//! Input representations: raw and periodogram tiles, channel orderings.

mod mds;
mod psd;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mds::{channel_rms_features, mds_channel_order, mds_embed, MdsResult, MDS_MAX_ITERS, MDS_TOLERANCE};
pub use psd::{one_sided_periodogram, periodogram_columns, periodogram_tile};

/// What the values of a [`TileImage`] hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TileKind {
    Raw,
    Psd,
}

/// A `[channels x columns]` matrix fed to the network as a one-channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct TileImage {
    rows: usize,
    cols: usize,
    kind: TileKind,
    values: Vec<f32>,
}

impl TileImage {
    pub fn new(rows: usize, cols: usize, kind: TileKind, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::shape(
                "tile",
                format!("{rows}x{cols} values with rows, cols >= 1"),
                format!("{} values", values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Malformed {
                what: "tile",
                detail: format!("non-finite value at row {}, column {}", i / cols, i % cols),
            });
        }
        if kind == TileKind::Psd && values.iter().any(|&v| v < 0.0) {
            return Err(Error::Malformed {
                what: "tile",
                detail: "negative power in a PSD tile".into(),
            });
        }
        Ok(Self {
            rows,
            cols,
            kind,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> TileKind {
        self.kind
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> f32 {
        self.values[r * self.cols + c]
    }
}

/// Where a [`ChannelOrdering`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrderingOrigin {
    Default,
    Mds,
    Random(u64),
}

impl fmt::Display for OrderingOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderingOrigin::Default => f.write_str("default"),
            OrderingOrigin::Mds => f.write_str("mds"),
            OrderingOrigin::Random(seed) => write!(f, "random({seed})"),
        }
    }
}

impl FromStr for OrderingOrigin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(OrderingOrigin::Default),
            "mds" => Ok(OrderingOrigin::Mds),
            _ => s
                .strip_prefix("random(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|seed| seed.parse().ok())
                .map(OrderingOrigin::Random)
                .ok_or_else(|| Error::Malformed {
                    what: "ordering origin",
                    detail: format!("{s:?} is not default, mds or random(<seed>)"),
                }),
        }
    }
}

/// Row permutation applied to every tile: output row `i` is input row
/// `permutation[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "OrderingFile", into = "OrderingFile")]
pub struct ChannelOrdering {
    permutation: Vec<usize>,
    origin: OrderingOrigin,
}

#[derive(Serialize, Deserialize)]
struct OrderingFile {
    origin: String,
    permutation: Vec<usize>,
}

impl TryFrom<OrderingFile> for ChannelOrdering {
    type Error = Error;

    fn try_from(file: OrderingFile) -> Result<Self> {
        ChannelOrdering::new(file.permutation, file.origin.parse()?)
    }
}

impl From<ChannelOrdering> for OrderingFile {
    fn from(o: ChannelOrdering) -> Self {
        OrderingFile {
            origin: o.origin.to_string(),
            permutation: o.permutation,
        }
    }
}

impl ChannelOrdering {
    /// Validates that `permutation` is a bijection on `0..len`.
    pub fn new(permutation: Vec<usize>, origin: OrderingOrigin) -> Result<Self> {
        let mut seen = vec![false; permutation.len()];
        for &p in &permutation {
            if p >= seen.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Malformed {
                    what: "channel ordering",
                    detail: format!("{permutation:?} is not a permutation of 0..{}", seen.len()),
                });
            }
        }
        if permutation.is_empty() {
            return Err(Error::Malformed {
                what: "channel ordering",
                detail: "empty permutation".into(),
            });
        }
        Ok(Self { permutation, origin })
    }

    pub fn identity(channels: usize) -> Self {
        Self {
            permutation: (0..channels).collect(),
            origin: OrderingOrigin::Default,
        }
    }

    /// Uniformly random ordering, fixed by `seed`.
    pub fn random(channels: usize, seed: u64) -> Self {
        let mut permutation: Vec<usize> = (0..channels).collect();
        permutation.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self {
            permutation,
            origin: OrderingOrigin::Random(seed),
        }
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn origin(&self) -> OrderingOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.permutation.len()];
        for (i, &p) in self.permutation.iter().enumerate() {
            inv[p] = i;
        }
        Self {
            permutation: inv,
            origin: self.origin,
        }
    }
}

pub fn apply_ordering(tile: &TileImage, ordering: &ChannelOrdering) -> Result<TileImage> {
    if ordering.len() != tile.rows {
        return Err(Error::shape(
            "apply_ordering",
            format!("{} rows", ordering.len()),
            tile.rows,
        ));
    }
    let mut values = Vec::with_capacity(tile.values.len());
    for &src in ordering.permutation() {
        values.extend_from_slice(tile.row(src));
    }
    Ok(TileImage { values, ..*tile })
}
