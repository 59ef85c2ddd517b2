//! Song classification from EEG tiles with a small convolutional network:
//! data containers and splitting, raw and periodogram tile representations,
//! channel ordering, training, evaluation and a synthetic corpus generator.

pub mod dataio;
pub mod error;
pub mod eval;
pub mod model;
pub mod repr;
pub mod synthgen;
pub mod tensor;
pub mod train;

pub use dataio::{EegRecording, Example, ExampleSet, Split};
pub use error::{Error, ErrorKind, Result};
pub use eval::{ConfusionMatrix, MetricsReport};
pub use model::NetworkParams;
pub use repr::{ChannelOrdering, TileImage, TileKind};
pub use synthgen::SynthSpec;
pub use tensor::{Dims4, Tensor4};
pub use train::{TrainConfig, TrainLog};
