use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use eegtile::dataio::{
    chunk_and_split, decimate, load_meta, load_recording, ExampleManifest, LabelTarget, ManifestEntry, SongMeta, Split,
    SplitConfig,
};
use eegtile::eval::{
    bin_enjoyment, bpm_confusion_analysis, label_permutation_accuracies, metrics, permutation_test_weights,
    ConfusionMatrix, EnjoymentBin, EvalReport,
};
use eegtile::model::{load_checkpoint, save_checkpoint, NetworkParams};
use eegtile::repr::{mds_channel_order, ChannelOrdering};
use eegtile::synthgen::{load_spec, write_corpus, SynthSpec};
use eegtile::train::{evaluate, OptimizerConfig, TrainConfig, Trainer};
use eegtile::Error;
use serde::Serialize;

use crate::args::{
    EvalArgs, MdsArgs, ModelArgs, OptimizerArg, OrderingArg, PermMode, PermtestArgs, PrepareArgs, Repr, SynthArgs,
    TrainArgs,
};
use crate::pipeline::{
    create_dir, load_set, model_input, read_json, relative_path, reorder, repr_name, to_repr, write_file, write_json,
    RunConfig, RunPaths, CHECKPOINT_FILE, ORDERING_FILE, RUN_FILE, TRAINLOG_FILE,
};

pub fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        classes: a.classes,
        participants: a.participants,
        seconds: a.seconds,
        channels: a.channels,
        rate: a.rate,
        noise_sigma: a.noise_sigma,
        amplitude: a.amplitude,
        modulation_depth: a.modulation_depth,
        seed: a.seed,
    };
    spec.validate()?;
    let files = write_corpus(&spec, &a.out).with_context(|| format!("writing corpus to {}", a.out.display()))?;
    println!("wrote {} recordings to {}", files.len(), a.out.display());
    Ok(())
}

fn recordings_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.into(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| Error::Io {
                path: dir.into(),
                source,
            })?
            .path();
        if path.extension().is_some_and(|e| e == "egtr") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Malformed {
            what: "corpus",
            detail: format!("no .egtr recordings in {}", dir.display()),
        }
        .into());
    }
    Ok(files)
}

fn enjoyment_label(meta: &[SongMeta], song: u16) -> Result<usize> {
    let rating = meta
        .iter()
        .find(|m| m.song_id == song)
        .and_then(|m| m.enjoyment)
        .ok_or_else(|| Error::Malformed {
            what: "song metadata",
            detail: format!("no enjoyment rating for song {song}"),
        })?;
    Ok(bin_enjoyment(rating as i64)?.index())
}

pub fn prepare(a: PrepareArgs) -> Result<()> {
    let split = SplitConfig {
        chunk_seconds: a.chunk_seconds,
        example_seconds: a.example_seconds,
        train_ratio: a.train_ratio,
        use_seconds: a.use_seconds,
    };
    split.validate()?;
    let target = LabelTarget::from(a.target);
    let meta = match target {
        LabelTarget::Song => None,
        LabelTarget::Enjoyment => {
            let path = a.meta.clone().unwrap_or_else(|| a.corpus.join("meta.json"));
            Some(load_meta(&path).with_context(|| format!("loading song metadata {}", path.display()))?)
        }
    };

    let mut rate = a.rate;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    let mut max_song = 0usize;
    for path in recordings_in(&a.corpus)? {
        let rec = load_recording(&path)?;
        let working = *rate.get_or_insert(rec.sampling_rate());
        let rec = if rec.sampling_rate() == working {
            rec
        } else {
            decimate(&rec, working).with_context(|| format!("decimating {}", path.display()))?
        };
        let label = match &meta {
            None => rec.song_id() as usize,
            Some(meta) => enjoyment_label(meta, rec.song_id())?,
        };
        max_song = max_song.max(rec.song_id() as usize);
        let (tr, te) = chunk_and_split(&rec, &split).with_context(|| format!("splitting {}", path.display()))?;
        let file = path
            .file_name()
            .expect("listed files have names")
            .to_string_lossy()
            .into_owned();
        for (set, out) in [(tr, &mut train), (te, &mut test)] {
            out.extend(set.examples.into_iter().map(|e| ManifestEntry {
                file: file.clone(),
                provenance: e.provenance,
                label,
            }));
        }
    }

    let classes = match target {
        LabelTarget::Song => max_song + 1,
        LabelTarget::Enjoyment => EnjoymentBin::COUNT,
    };
    create_dir(&a.out)?;
    let corpus = relative_path(&a.out, &a.corpus).to_string_lossy().into_owned();
    for (split_kind, entries, name) in [(Split::Train, train, "train.json"), (Split::Test, test, "test.json")] {
        let manifest = ExampleManifest {
            split: split_kind,
            corpus: corpus.clone(),
            sampling_rate: rate.expect("at least one recording"),
            split_config: split,
            target,
            classes,
            entries,
        };
        manifest.validate()?;
        let path = a.out.join(name);
        manifest.save(&path)?;
        println!(
            "{}: {} examples, {classes} classes",
            path.display(),
            manifest.entries.len()
        );
    }
    Ok(())
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    let optimizer = match a.optimizer {
        OptimizerArg::Adam => OptimizerConfig::Adam {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
        },
        OptimizerArg::Sgd => OptimizerConfig::Sgd {
            lr: a.lr,
            momentum: a.momentum,
        },
    };
    TrainConfig {
        seed: a.seed,
        batch_size: a.batch_size,
        epochs: a.epochs,
        optimizer,
        shuffle: !a.no_shuffle,
    }
}

/// Generator settings stored beside the corpus a manifest points at.
fn corpus_spec(manifest_path: &Path, manifest: &ExampleManifest) -> Result<Option<SynthSpec>> {
    let dir = manifest_path.parent().unwrap_or(Path::new(".")).join(&manifest.corpus);
    let path = dir.join("synth.json");
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(load_spec(&path)?))
}

pub fn train(a: TrainArgs) -> Result<()> {
    let config = train_config(&a);
    config.validate()?;
    let train = load_set(&a.train)?;
    let test = load_set(&a.test)?;
    let classes = train.manifest.classes;
    if test.manifest.classes != classes || test.manifest.target != train.manifest.target {
        return Err(Error::Malformed {
            what: "manifest",
            detail: format!(
                "train and test manifests disagree: {} vs {} classes of {:?} vs {:?}",
                classes, test.manifest.classes, train.manifest.target, test.manifest.target
            ),
        }
        .into());
    }

    let channels = train.set.tile_dims()?.0;
    let ordering = match a.ordering {
        OrderingArg::Default => ChannelOrdering::identity(channels),
        OrderingArg::Random => ChannelOrdering::random(channels, a.ordering_seed.expect("enforced by clap")),
        OrderingArg::File => {
            let path = a.ordering_file.as_deref().expect("enforced by clap");
            read_json(path).with_context(|| format!("loading ordering {}", path.display()))?
        }
        OrderingArg::Mds => {
            let mds = mds_channel_order(&train.set)?;
            if mds.degenerate {
                eprintln!("warning: channel features carry no spread; MDS ordering is the identity");
            }
            mds.ordering
        }
    };
    let train_set = reorder(&to_repr(&train, a.repr)?, &ordering)?;
    let test_set = reorder(&to_repr(&test, a.repr)?, &ordering)?;
    let (tile_rows, tile_cols) = train_set.tile_dims()?;
    eprintln!(
        "training on {} {tile_rows}x{tile_cols} {} tiles, testing on {}, {classes} classes",
        train_set.len(),
        repr_name(a.repr),
        test_set.len()
    );

    let params = NetworkParams::init_he(a.seed, classes, 1)?;
    let mut trainer = Trainer::new(params, &train_set, &test_set, config)?;
    let outcome = (0..config.epochs).try_for_each(|_| {
        let e = trainer.run_epoch()?;
        eprintln!(
            "epoch {}/{}: loss {:.4}, train {:.4}, test {:.4}",
            e.epoch, config.epochs, e.train_loss, e.train_accuracy, e.test_accuracy
        );
        Ok::<_, Error>(())
    });

    create_dir(&a.out)?;
    let trainlog = a.out.join(TRAINLOG_FILE);
    trainer.log().save(&trainlog, a.log_wall_clock)?;
    outcome?;
    let (params, log) = trainer.into_parts();
    let checkpoint = a.out.join(CHECKPOINT_FILE);
    save_checkpoint(&params, &checkpoint)?;
    write_json(&a.out.join(ORDERING_FILE), &ordering)?;
    let run = RunConfig {
        train: config,
        repr: a.repr,
        ordering,
        synth: corpus_spec(&a.train, &train.manifest)?,
        classes,
        tile_rows,
        tile_cols,
        paths: RunPaths {
            train_manifest: a.train.clone(),
            test_manifest: a.test.clone(),
            checkpoint,
            trainlog,
        },
    };
    write_json(&a.out.join(RUN_FILE), &run)?;
    if let Some(last) = log.epochs.last() {
        println!("test accuracy {:.4} after {} epochs", last.test_accuracy, last.epoch);
    }
    Ok(())
}

fn load_model(m: &ModelArgs) -> Result<(NetworkParams, RunConfig)> {
    let params = load_checkpoint(&m.checkpoint).with_context(|| format!("loading {}", m.checkpoint.display()))?;
    let run_path = m.run.clone().unwrap_or_else(|| m.checkpoint.with_file_name(RUN_FILE));
    let run =
        RunConfig::load(&run_path).with_context(|| format!("loading run configuration {}", run_path.display()))?;
    if run.classes != params.classes() {
        return Err(Error::Malformed {
            what: "run configuration",
            detail: format!("{} classes, checkpoint has {}", run.classes, params.classes()),
        }
        .into());
    }
    Ok((params, run))
}

fn check_classes(manifest: &ExampleManifest, params: &NetworkParams) -> Result<()> {
    if manifest.classes != params.classes() {
        return Err(Error::Malformed {
            what: "manifest",
            detail: format!("{} classes, the model predicts {}", manifest.classes, params.classes()),
        }
        .into());
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportFile {
    split: Split,
    target: LabelTarget,
    repr: Repr,
    ordering: String,
    #[serde(flatten)]
    report: EvalReport,
}

fn class_names(target: LabelTarget, classes: usize) -> Vec<String> {
    match target {
        LabelTarget::Song => (0..classes).map(|c| c.to_string()).collect(),
        LabelTarget::Enjoyment => [EnjoymentBin::Low, EnjoymentBin::Medium, EnjoymentBin::High]
            .iter()
            .map(|b| b.name().to_string())
            .collect(),
    }
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let (params, run) = load_model(&a.model)?;
    let (loaded, set) = model_input(&a.model.manifest, &run)?;
    let manifest = &loaded.manifest;
    check_classes(manifest, &params)?;
    let classes = params.classes();
    let predictions = evaluate(&params, &set)?.predictions;
    let cm = ConfusionMatrix::from_predictions(&set.labels(), &predictions, classes)?;
    let report_metrics = metrics(&cm)?;

    let bpm = match (&a.meta, manifest.target) {
        (None, _) => None,
        (Some(_), LabelTarget::Enjoyment) => {
            eprintln!("note: tempo analysis applies to song targets only; skipped");
            None
        }
        (Some(path), LabelTarget::Song) => {
            let meta = load_meta(path).with_context(|| format!("loading song metadata {}", path.display()))?;
            match bpm_confusion_analysis(&cm, &meta) {
                Ok(b) => Some(b),
                Err(Error::MissingBpm(c)) => {
                    eprintln!("note: class {c} has no bpm; tempo analysis skipped");
                    None
                }
                Err(e) => return Err(e.into()),
            }
        }
    };

    if let Some(path) = &a.csv {
        write_file(path, cm.to_csv(&class_names(manifest.target, classes)).as_bytes())?;
    }
    println!(
        "accuracy {:.4}, kappa {:.4}, macro F1 {:.4} on {} examples",
        report_metrics.accuracy,
        report_metrics.kappa,
        report_metrics.f1_macro,
        set.len()
    );
    let file = ReportFile {
        split: manifest.split,
        target: manifest.target,
        repr: run.repr,
        ordering: run.ordering.origin().to_string(),
        report: EvalReport {
            examples: set.len(),
            classes,
            metrics: report_metrics,
            confusion_matrix: cm,
            bpm,
        },
    };
    write_json(&a.out, &file)
}

#[derive(Serialize)]
struct PermtestFile {
    mode: PermMode,
    trials: usize,
    seed: u64,
    model_accuracy: f64,
    chance: f64,
    mean: Option<f64>,
    accuracies: Vec<f64>,
}

pub fn permtest(a: PermtestArgs) -> Result<()> {
    if a.trials == 0 {
        return Err(Error::InvalidArgument("--trials must be at least 1".into()).into());
    }
    let (params, run) = load_model(&a.model)?;
    let (loaded, set) = model_input(&a.model.manifest, &run)?;
    check_classes(&loaded.manifest, &params)?;
    let model = evaluate(&params, &set)?;
    let result = match a.mode {
        PermMode::Labels => label_permutation_accuracies(&model.predictions, &set.labels(), a.trials, a.seed),
        PermMode::Weights => permutation_test_weights(&params, &set, a.trials, a.seed)?,
    };
    let mean = result.mean.expect("at least one trial");
    println!(
        "model accuracy {:.4}; mean over {} {} permutations {:.4}",
        model.accuracy,
        a.trials,
        match a.mode {
            PermMode::Labels => "label",
            PermMode::Weights => "weight",
        },
        mean
    );
    write_json(
        &a.out,
        &PermtestFile {
            mode: a.mode,
            trials: a.trials,
            seed: a.seed,
            model_accuracy: model.accuracy,
            chance: 1.0 / params.classes() as f64,
            mean: result.mean,
            accuracies: result.trials,
        },
    )
}

pub fn mds(a: MdsArgs) -> Result<()> {
    let loaded = load_set(&a.manifest)?;
    if loaded.manifest.split != Split::Train {
        eprintln!("warning: {} is not a training manifest", a.manifest.display());
    }
    let result = mds_channel_order(&loaded.set)?;
    if result.degenerate {
        eprintln!("warning: channel features carry no spread; ordering is the identity");
    }
    eprintln!(
        "leading eigenvalue {:.6e} after {} iterations",
        result.eigenvalue, result.iterations
    );
    write_json(&a.out, &result.ordering)?;
    println!("wrote {}", a.out.display());
    Ok(())
}
