use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eegtile::dataio::{LabelTarget, TrainRatio};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "eegtile", version, about = "EEG tile classification pipeline")]
pub struct Cli {
    /// Worker threads for evaluation and permutation trials. Results do not
    /// depend on this value. EEGTILE_THREADS takes precedence when set.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus of recordings plus meta.json.
    Synth(SynthArgs),
    /// Split a corpus into train.json and test.json example manifests.
    Prepare(PrepareArgs),
    /// Train a network and write model.egtc, trainlog.jsonl, run.json and ordering.json.
    Train(TrainArgs),
    /// Score a trained network on a manifest and write report.json.
    Eval(EvalArgs),
    /// Run a label or weight permutation test against a trained network.
    Permtest(PermtestArgs),
    /// Derive a channel ordering from a training manifest.
    Mds(MdsArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 2)]
    pub participants: usize,
    /// Length of every recording.
    #[arg(long, default_value_t = 240)]
    pub seconds: usize,
    #[arg(long, default_value_t = 125)]
    pub channels: usize,
    /// Sampling rate in Hz.
    #[arg(long, default_value_t = 125)]
    pub rate: usize,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long, default_value_t = 1.0)]
    pub noise_sigma: f64,
    /// Peak class-signal amplitude before topography weighting.
    #[arg(long, default_value_t = eegtile::synthgen::DEFAULT_AMPLITUDE)]
    pub amplitude: f64,
    /// Depth of the tempo-locked amplitude modulation, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub modulation_depth: f64,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Directory holding *.egtr recordings.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory for train.json and test.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub chunk_seconds: usize,
    #[arg(long, default_value_t = 1)]
    pub example_seconds: usize,
    /// Training chunks out of every period, as a/b.
    #[arg(long, default_value_t = TrainRatio::default())]
    pub train_ratio: TrainRatio,
    /// Seconds used from the start of each recording.
    #[arg(long, default_value_t = 240)]
    pub use_seconds: usize,
    /// Working rate in Hz; recordings are decimated to it. Defaults to the
    /// rate of the first recording.
    #[arg(long)]
    pub rate: Option<f32>,
    #[arg(long, value_enum, default_value_t = TargetArg::Song)]
    pub target: TargetArg,
    /// Song metadata, needed for the enjoyment target. Defaults to
    /// <corpus>/meta.json.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Song,
    Enjoyment,
}

impl From<TargetArg> for LabelTarget {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Song => LabelTarget::Song,
            TargetArg::Enjoyment => LabelTarget::Enjoyment,
        }
    }
}

/// Input representation fed to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Repr {
    /// Raw amplitude tiles.
    Raw,
    /// Periodogram of 1 s examples.
    Psd1,
    /// Periodogram of 2 s examples.
    Psd2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderingArg {
    /// Channels in recording order.
    Default,
    /// Channels sorted by a one-dimensional MDS embedding of the training set.
    Mds,
    /// Seeded random shuffle; needs --ordering-seed.
    Random,
    /// Read from --ordering-file.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds weight initialization and batch shuffling.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Repr::Raw)]
    pub repr: Repr,
    #[arg(long, value_enum, default_value_t = OrderingArg::Default)]
    pub ordering: OrderingArg,
    #[arg(long, required_if_eq("ordering", "random"))]
    pub ordering_seed: Option<u64>,
    #[arg(long, required_if_eq("ordering", "file"))]
    pub ordering_file: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// SGD momentum.
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Adam first-moment decay.
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    /// Adam second-moment decay.
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    /// Adam denominator offset.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    /// Present batches in a fixed order.
    #[arg(long)]
    pub no_shuffle: bool,
    /// Record per-epoch wall-clock seconds in trainlog.jsonl. Makes the log
    /// differ between otherwise identical runs.
    #[arg(long)]
    pub log_wall_clock: bool,
}

/// Where to find a trained network and the settings it was trained with.
#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Run configuration written by train. Defaults to run.json beside the
    /// checkpoint.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Example manifest to score.
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output report.
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
    /// Song metadata; adds a tempo analysis of the confusions when every
    /// class has a bpm.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Also write the confusion matrix as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PermMode {
    /// Shuffle the labels against fixed predictions.
    Labels,
    /// Shuffle the elements of every weight array.
    Weights,
}

#[derive(Debug, Args)]
pub struct PermtestArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub mode: PermMode,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Trial t uses seed + t.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "permtest.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MdsArgs {
    /// Training manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "ordering.json")]
    pub out: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use eegtile::dataio::SplitConfig;
    use eegtile::synthgen::SynthSpec;
    use eegtile::train::{OptimizerConfig, TrainConfig};

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("eegtile").chain(args.iter().copied()))
    }

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn synth_defaults_match_library() {
        let Command::Synth(a) = parse(&["synth", "--out", "x", "--seed", "3"]).unwrap().command else {
            panic!("expected synth");
        };
        let spec = SynthSpec::new(3);
        assert_eq!(
            (a.classes, a.participants, a.seconds, a.channels, a.rate),
            (spec.classes, spec.participants, spec.seconds, spec.channels, spec.rate)
        );
        assert_eq!(
            (a.noise_sigma, a.amplitude, a.modulation_depth),
            (spec.noise_sigma, spec.amplitude, spec.modulation_depth)
        );
    }

    #[test]
    fn prepare_defaults_match_library() {
        let Command::Prepare(a) = parse(&["prepare", "--corpus", "c", "--out", "o"]).unwrap().command else {
            panic!("expected prepare");
        };
        let d = SplitConfig::default();
        assert_eq!(
            (a.chunk_seconds, a.example_seconds, a.train_ratio, a.use_seconds),
            (d.chunk_seconds, d.example_seconds, d.train_ratio, d.use_seconds)
        );
    }

    #[test]
    fn train_defaults_match_library() {
        let cli = parse(&["train", "--train", "a", "--test", "b", "--out", "o", "--seed", "1"]).unwrap();
        let Command::Train(a) = cli.command else {
            panic!("expected train");
        };
        let d = TrainConfig::new(1);
        assert_eq!(
            (a.batch_size, a.epochs, !a.no_shuffle),
            (d.batch_size, d.epochs, d.shuffle)
        );
        let OptimizerConfig::Adam { lr, beta1, beta2, eps } = d.optimizer else {
            panic!("default optimizer is adam");
        };
        assert_eq!(a.optimizer, OptimizerArg::Adam);
        assert_eq!((a.lr, a.beta1, a.beta2, a.eps), (lr, beta1, beta2, eps));
    }

    #[test]
    fn seeds_are_required() {
        assert!(parse(&["synth", "--out", "x"]).is_err());
        assert!(parse(&["train", "--train", "a", "--test", "b", "--out", "o"]).is_err());
        assert!(parse(&["permtest", "--checkpoint", "m", "--manifest", "t", "--mode", "labels"]).is_err());
    }

    #[test]
    fn ordering_flags_need_their_argument() {
        let base = ["train", "--train", "a", "--test", "b", "--out", "o", "--seed", "1"];
        let with = |extra: &[&str]| parse(&[&base[..], extra].concat());
        assert!(with(&["--ordering", "random"]).is_err());
        assert!(with(&["--ordering", "random", "--ordering-seed", "4"]).is_ok());
        assert!(with(&["--ordering", "file"]).is_err());
        assert!(with(&["--ordering", "mds"]).is_ok());
    }

    #[test]
    fn unknown_flags_and_values_are_rejected() {
        assert!(parse(&["synth", "--out", "x", "--seed", "1", "--colour"]).is_err());
        let base = ["train", "--train", "a", "--test", "b", "--out", "o", "--seed", "1"];
        assert!(parse(&[&base[..], &["--repr", "psd3"]].concat()).is_err());
        assert!(parse(&["prepare", "--corpus", "c", "--out", "o", "--train-ratio", "4/4"]).is_err());
    }

    #[test]
    fn threads_flag_is_global() {
        let cli = parse(&["mds", "--manifest", "m", "--threads", "2"]).unwrap();
        assert_eq!(cli.threads, Some(2));
    }
}
