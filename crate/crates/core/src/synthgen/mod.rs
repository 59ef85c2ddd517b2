//! Seeded synthetic corpus with song-like class structure.
//!
//! Every class ("song") has a tempo, a carrier frequency and a smooth signed
//! scalp topography. A recording of class `c` is, per channel,
//!
//! ```text
//! x[ch][n] = A * topo_c[ch] * (1 + d * sin(2 pi u / P)) * sin(2 pi m u / P) + sigma * noise
//! u = (n + phase) mod P
//! ```
//!
//! where `P` is the beat period in samples (tempo = 60 * rate / P bpm), `m`
//! the number of carrier cycles per beat, and `phase` a per-recording offset.
//! Because the phase enters through `u`, noise-free recordings repeat exactly
//! every `P` samples.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::{save_meta, save_recording, EegRecording, SongMeta};
use crate::error::{Error, Result};

/// Tempo range the beat periods are drawn from.
pub const MIN_BPM: f64 = 70.0;
pub const MAX_BPM: f64 = 190.0;
/// Upper bound on carrier frequencies.
pub const MAX_CARRIER_HZ: f64 = 40.0;
/// Default peak class-signal amplitude, relative to unit noise.
pub const DEFAULT_AMPLITUDE: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub participants: usize,
    pub seconds: usize,
    pub channels: usize,
    /// Samples per second.
    pub rate: usize,
    pub noise_sigma: f64,
    /// Peak signal amplitude before topography weighting.
    pub amplitude: f64,
    /// Depth of the tempo-locked amplitude modulation, in `[0, 1]`.
    pub modulation_depth: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            classes: 10,
            participants: 2,
            seconds: 240,
            channels: 125,
            rate: 125,
            noise_sigma: 1.0,
            amplitude: DEFAULT_AMPLITUDE,
            modulation_depth: 0.5,
            seed,
        }
    }

    fn period_range(&self) -> (usize, usize) {
        let r = self.rate as f64;
        (
            (60.0 * r / MAX_BPM).ceil() as usize,
            (60.0 * r / MIN_BPM).floor() as usize,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.classes < 2 || self.participants == 0 || self.seconds == 0 || self.channels == 0 {
            return bad("synth needs >= 2 classes and >= 1 participant, second and channel".into());
        }
        if self.classes > u16::MAX as usize || self.participants > 10_000 {
            return bad("too many classes or participants".into());
        }
        let (lo, hi) = self.period_range();
        if lo < 8 || hi < lo || hi - lo + 1 < self.classes {
            return bad(format!(
                "rate {} Hz leaves {} distinct beat periods for {} classes",
                self.rate,
                (hi + 1).saturating_sub(lo.max(8)),
                self.classes
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite() && self.amplitude.is_finite()) {
            return bad("noise sigma and amplitude must be finite, sigma >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.modulation_depth) {
            return bad(format!("modulation depth {} is outside [0, 1]", self.modulation_depth));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSignature {
    /// Beat period in samples.
    pub period: usize,
    /// Carrier cycles per beat.
    pub carrier_cycles: usize,
    pub tempo_bpm: f64,
    pub carrier_hz: f64,
    /// Cycles of the topography across the channel axis.
    pub spatial_cycles: usize,
    pub spatial_phase: f64,
    pub topography: Vec<f64>,
    pub enjoyment: u8,
    pub familiarity: u8,
}

/// Per-class signatures; distinct classes get distinct beat periods and
/// therefore distinct (tempo, carrier) pairs.
pub fn signatures(spec: &SynthSpec) -> Result<Vec<ClassSignature>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.period_range();
    let mut periods: Vec<usize> = (lo.max(8)..=hi).collect();
    periods.shuffle(&mut rng);
    let rate = spec.rate as f64;
    Ok(periods[..spec.classes]
        .iter()
        .map(|&period| {
            let max_cycles = ((MAX_CARRIER_HZ * period as f64 / rate) as usize)
                .min((period - 1) / 2)
                .max(2);
            let carrier_cycles = rng.random_range(2..=max_cycles);
            let spatial_cycles = rng.random_range(1..=3);
            let spatial_phase = rng.random_range(0.0..2.0 * PI);
            let topography = (0..spec.channels)
                .map(|ch| (2.0 * PI * (spatial_cycles * ch) as f64 / spec.channels as f64 + spatial_phase).cos())
                .collect();
            ClassSignature {
                period,
                carrier_cycles,
                tempo_bpm: 60.0 * rate / period as f64,
                carrier_hz: carrier_cycles as f64 * rate / period as f64,
                spatial_cycles,
                spatial_phase,
                topography,
                enjoyment: rng.random_range(1..=9),
                familiarity: rng.random_range(1..=9),
            }
        })
        .collect())
}

pub fn participant_id(p: usize) -> String {
    format!("p{p:02}")
}

pub fn recording_file_name(participant: usize, class: usize) -> String {
    format!("p{participant:02}_s{class:02}.egtr")
}

/// One recording; its noise stream depends only on (seed, participant, class).
pub fn generate_recording(
    spec: &SynthSpec,
    sigs: &[ClassSignature],
    participant: usize,
    class: usize,
) -> Result<EegRecording> {
    let sig = &sigs[class];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1 + (participant * spec.classes + class) as u64);
    let phase = rng.random_range(0..sig.period);
    let p = sig.period as f64;
    let beat: Vec<f64> = (0..sig.period)
        .map(|u| {
            let u = u as f64;
            let envelope = 1.0 + spec.modulation_depth * (2.0 * PI * u / p).sin();
            spec.amplitude * envelope * (2.0 * PI * sig.carrier_cycles as f64 * u / p).sin()
        })
        .collect();
    let samples = spec.seconds * spec.rate;
    let mut data = Vec::with_capacity(spec.channels * samples);
    for ch in 0..spec.channels {
        let w = sig.topography[ch];
        for n in 0..samples {
            let noise: f64 = StandardNormal.sample(&mut rng);
            data.push((w * beat[(n + phase) % sig.period] + spec.noise_sigma * noise) as f32);
        }
    }
    EegRecording::new(
        participant_id(participant),
        class as u16,
        spec.channels,
        spec.rate as f32,
        data,
    )
}

pub fn song_meta(sigs: &[ClassSignature]) -> Vec<SongMeta> {
    sigs.iter()
        .enumerate()
        .map(|(c, s)| SongMeta {
            song_id: c as u16,
            bpm: Some(s.tempo_bpm),
            enjoyment: Some(s.enjoyment),
            familiarity: Some(s.familiarity),
        })
        .collect()
}

/// In-memory corpus: recordings in (participant, class) order.
pub fn generate(spec: &SynthSpec) -> Result<(Vec<EegRecording>, Vec<SongMeta>)> {
    let sigs = signatures(spec)?;
    let mut recs = Vec::with_capacity(spec.participants * spec.classes);
    for p in 0..spec.participants {
        for c in 0..spec.classes {
            recs.push(generate_recording(spec, &sigs, p, c)?);
        }
    }
    Ok((recs, song_meta(&sigs)))
}

/// Writes `p{pp}_s{ss}.egtr` per recording, `meta.json` and `synth.json`.
pub fn write_corpus(spec: &SynthSpec, dir: &Path) -> Result<Vec<String>> {
    let sigs = signatures(spec)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for p in 0..spec.participants {
        for c in 0..spec.classes {
            let name = recording_file_name(p, c);
            save_recording(&generate_recording(spec, &sigs, p, c)?, dir.join(&name))?;
            files.push(name);
        }
    }
    save_meta(&song_meta(&sigs), dir.join("meta.json"))?;
    let path = dir.join("synth.json");
    let mut text = serde_json::to_string_pretty(spec).expect("spec serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(files)
}

pub fn load_spec(path: &Path) -> Result<SynthSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}
