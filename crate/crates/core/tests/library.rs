use eegtile::dataio::{chunk_and_split, load_meta, load_recording, SplitConfig};
use eegtile::model::{load_checkpoint, save_checkpoint};
use eegtile::repr::{apply_ordering, mds_channel_order, periodogram_tile};
use eegtile::synthgen::{self, recording_file_name};
use eegtile::train::{evaluate, train};
use eegtile::{ChannelOrdering, ExampleSet, NetworkParams, Split, SynthSpec, TrainConfig};

fn small_spec() -> SynthSpec {
    SynthSpec {
        classes: 3,
        participants: 1,
        seconds: 20,
        channels: 16,
        rate: 40,
        amplitude: 3.0,
        ..SynthSpec::new(4)
    }
}

fn small_sets(spec: &SynthSpec) -> (ExampleSet, ExampleSet) {
    let (recordings, _) = synthgen::generate(spec).unwrap();
    let config = SplitConfig {
        use_seconds: spec.seconds,
        ..SplitConfig::default()
    };
    let mut train_set = ExampleSet::new(Split::Train);
    let mut test_set = ExampleSet::new(Split::Test);
    for rec in &recordings {
        let (a, b) = chunk_and_split(rec, &config).unwrap();
        train_set.extend(a).unwrap();
        test_set.extend(b).unwrap();
    }
    (train_set, test_set)
}

#[test]
fn written_corpus_reads_back_unchanged() {
    let spec = small_spec();
    let dir = tempfile::tempdir().unwrap();
    synthgen::write_corpus(&spec, dir.path()).unwrap();
    let (recordings, meta) = synthgen::generate(&spec).unwrap();
    for (class, rec) in recordings.iter().enumerate() {
        let loaded = load_recording(dir.path().join(recording_file_name(0, class))).unwrap();
        assert_eq!(&loaded, rec);
    }
    assert_eq!(load_meta(dir.path().join("meta.json")).unwrap(), meta);
    assert_eq!(synthgen::load_spec(&dir.path().join("synth.json")).unwrap(), spec);
}

#[test]
fn trained_model_survives_a_checkpoint_round_trip() {
    let (train_set, test_set) = small_sets(&small_spec());
    assert_eq!((train_set.len(), test_set.len()), (3 * 15, 3 * 5));

    let params = NetworkParams::init_he(7, 3, 1).unwrap();
    let config = TrainConfig {
        epochs: 4,
        batch_size: 9,
        ..TrainConfig::new(7)
    };
    let (trained, log) = train(params, &train_set, &test_set, &config).unwrap();
    assert_eq!(log.epochs.len(), 4);
    let before = evaluate(&trained, &test_set).unwrap();
    assert!(before.accuracy > 1.0 / 3.0, "accuracy {}", before.accuracy);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.egtc");
    save_checkpoint(&trained, &path).unwrap();
    let restored = load_checkpoint(&path).unwrap();
    assert_eq!(restored, trained);
    assert_eq!(evaluate(&restored, &test_set).unwrap(), before);
}

#[test]
fn orderings_and_spectra_compose_over_a_prepared_set() {
    let (train_set, _) = small_sets(&small_spec());
    let mds = mds_channel_order(&train_set).unwrap();
    assert_eq!(mds.ordering.len(), 16);

    let random = ChannelOrdering::random(16, 3);
    for example in &train_set.examples {
        let tile = &example.tile;
        let there = apply_ordering(tile, &random).unwrap();
        assert_eq!(&apply_ordering(&there, &random.inverse()).unwrap(), tile);

        let psd = periodogram_tile(tile, 40.0).unwrap();
        let shuffled_psd = periodogram_tile(&there, 40.0).unwrap();
        assert_eq!((psd.rows(), psd.cols()), (16, 20));
        assert_eq!(apply_ordering(&psd, &random).unwrap(), shuffled_psd);
    }
}
