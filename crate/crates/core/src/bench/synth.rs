//! Seeded source-filter voices for desk-scale benchmark runs.
//!
//! Each synthetic speaker has its own mean pitch and three formants, placed
//! along a voice continuum so that adding speakers crowds it. A recording is
//! a jittered glottal pulse train with aspiration noise, passed through a
//! cascade of second-order resonators whose formants wander around the
//! speaker's targets syllable by syllable, preceded by 250 ms of low-level
//! noise. Each recording also shifts pitch and formants slightly as a whole.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CorpusManifest, ManifestEntry};
use crate::audio::{write_wav, AudioSignal};
use crate::derive_seed;
use crate::{Error, Result};

pub const SYNTH_SAMPLE_RATE: u32 = 16000;
pub const LEADING_SILENCE_MS: f64 = 250.0;
const NOISE_FLOOR: f64 = 1e-3;
const PITCH_RANGE: (f64, f64) = (90.0, 220.0);
const FORMANT_RANGES: [(f64, f64); 3] = [(300.0, 850.0), (900.0, 2300.0), (2400.0, 3400.0)];
const SYLLABLE_MS: f64 = 180.0;
const SCATTER: f64 = 0.03;
/// Relative standard deviations of the per-recording and per-syllable
/// formant (and, per recording, pitch) variation.
const SESSION_SPREAD: f64 = 0.02;
const SYLLABLE_SPREAD: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceProfile {
    pub pitch_hz: f64,
    pub formants_hz: [f64; 3],
    pub bandwidths_hz: [f64; 3],
}

/// Place of speaker `i` on the voice continuum: the two ends first, then the
/// base-2 van der Corput sequence, so every new speaker bisects a gap.
fn continuum_position(i: usize) -> f64 {
    match i {
        0 => 0.0,
        1 => 1.0,
        _ => {
            let (mut k, mut base, mut x) = (i - 1, 0.5, 0.0);
            while k > 0 {
                if k & 1 == 1 {
                    x += base;
                }
                base /= 2.0;
                k >>= 1;
            }
            x
        }
    }
}

/// Voice profiles for `n` speakers.
///
/// Speakers sit on a line through the pitch x formant box (each dimension
/// runs up or down along it at random) with a little seeded scatter off the
/// line. Positions follow [`continuum_position`], so adding speakers crowds the
/// line steadily and the first `m` profiles do not depend on `n`.
pub fn voice_profiles(n: usize, seed: u64) -> Vec<VoiceProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "voices"));
    let rising: [bool; 4] = std::array::from_fn(|_| rng.random_bool(0.5));
    let scale = |(lo, hi): (f64, f64), u: f64| lo + (hi - lo) * u;
    (0..n)
        .map(|i| {
            let t = continuum_position(i);
            let u: [f64; 4] = std::array::from_fn(|d| {
                let along = if rising[d] { t } else { 1.0 - t };
                (along + rng.random_range(-SCATTER..SCATTER)).clamp(0.0, 1.0)
            });
            VoiceProfile {
                pitch_hz: scale(PITCH_RANGE, u[0]),
                formants_hz: std::array::from_fn(|f| scale(FORMANT_RANGES[f], u[f + 1])),
                bandwidths_hz: std::array::from_fn(|f| rng.random_range(60.0..120.0) * (1.0 + f as f64 * 0.5)),
            }
        })
        .collect()
}

/// Coefficients `(b1, b2, g)` of the resonator
/// `y[n] = g x[n] + b1 y[n-1] + b2 y[n-2]`, with `g` giving unit DC gain.
fn resonator(freq: f64, bw: f64, rate: f64) -> (f64, f64, f64) {
    let r = (-PI * bw / rate).exp();
    let b1 = 2.0 * r * (2.0 * PI * freq / rate).cos();
    let b2 = -r * r;
    (b1, b2, 1.0 - b1 - b2)
}

/// One recording of `profile`, `seconds` long including the leading
/// near-silence.
pub fn synthesize(profile: &VoiceProfile, seconds: f64, seed: u64) -> Result<AudioSignal> {
    let rate = f64::from(SYNTH_SAMPLE_RATE);
    let total = (seconds * rate).round() as usize;
    let lead = (LEADING_SILENCE_MS / 1000.0 * rate).round() as usize;
    if total <= lead + (rate * 0.1) as usize {
        return Err(Error::InvalidConfig(format!(
            "synthetic recordings need more than {} ms",
            LEADING_SILENCE_MS + 100.0
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid");
    let voiced_len = total - lead;

    // per-recording session shift of pitch and formants
    let pitch_hz = profile.pitch_hz * (1.0 + SESSION_SPREAD * unit.sample(&mut rng));
    let shifts: Vec<f64> = (0..3).map(|_| 1.0 + SESSION_SPREAD * unit.sample(&mut rng)).collect();

    // glottal source: jittered pulses with slow intonation, plus aspiration
    let mut source = vec![0.0; voiced_len];
    let phase = rng.random_range(0.0..2.0 * PI);
    let mut t = 0.0;
    while (t as usize) < voiced_len {
        let secs = t / rate;
        let f0 = pitch_hz * (1.0 + 0.04 * (2.0 * PI * 0.8 * secs + phase).sin());
        let period = rate / f0 * (1.0 + 0.01 * unit.sample(&mut rng));
        let idx = t as usize;
        source[idx] += 1.0;
        if idx + 1 < voiced_len {
            source[idx + 1] -= 0.5;
        }
        t += period.max(2.0);
    }
    for s in source.iter_mut() {
        *s += 0.03 * unit.sample(&mut rng);
    }

    // formant cascade, retargeted every syllable
    let syllable = (SYLLABLE_MS / 1000.0 * rate) as usize;
    let mut voiced = vec![0.0; voiced_len];
    let mut state = [[0.0f64; 2]; 3];
    for (start, chunk) in source.chunks(syllable).enumerate() {
        let coeffs: Vec<(f64, f64, f64)> = (0..3)
            .map(|f| {
                let freq = profile.formants_hz[f] * shifts[f] * (1.0 + SYLLABLE_SPREAD * unit.sample(&mut rng));
                resonator(freq, profile.bandwidths_hz[f], rate)
            })
            .collect();
        for (k, &x) in chunk.iter().enumerate() {
            let mut v = x;
            for (f, &(b1, b2, g)) in coeffs.iter().enumerate() {
                let y = g * v + b1 * state[f][0] + b2 * state[f][1];
                state[f][1] = state[f][0];
                state[f][0] = y;
                v = y;
            }
            voiced[start * syllable + k] = v;
        }
    }

    // syllabic amplitude envelope with soft onset
    let rate_hz = rng.random_range(3.0..5.0);
    let env_phase = rng.random_range(0.0..2.0 * PI);
    for (i, v) in voiced.iter_mut().enumerate() {
        let secs = i as f64 / rate;
        let onset = (secs / 0.02).min(1.0);
        *v *= onset * (0.65 + 0.35 * (2.0 * PI * rate_hz * secs + env_phase).sin());
    }
    let peak = voiced.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 0.0 { 0.5 / peak } else { 0.0 };

    let mut samples = vec![0.0; total];
    for (i, s) in samples.iter_mut().enumerate() {
        let speech = if i >= lead { gain * voiced[i - lead] } else { 0.0 };
        *s = speech + NOISE_FLOOR * unit.sample(&mut rng);
    }
    AudioSignal::new(samples, SYNTH_SAMPLE_RATE)
}

/// Writes `n_speakers x samples_each` WAV files and `manifest.csv` under
/// `dir`. Speakers are numbered `0..n_speakers`, samples `0..samples_each`.
pub fn generate_synthetic_corpus(
    dir: impl AsRef<Path>,
    n_speakers: usize,
    samples_each: usize,
    seconds: f64,
    seed: u64,
) -> Result<CorpusManifest> {
    if !(2..=15).contains(&n_speakers) {
        return Err(Error::InvalidConfig(format!("n_speakers {n_speakers} outside [2, 15]")));
    }
    if samples_each < 2 {
        return Err(Error::InvalidConfig("need at least 2 samples per speaker".into()));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let profiles = voice_profiles(n_speakers, seed);
    let mut entries = Vec::with_capacity(n_speakers * samples_each);
    for (s, profile) in profiles.iter().enumerate() {
        for k in 0..samples_each {
            let name = format!("spk{s:02}_s{k}.wav");
            let signal = synthesize(profile, seconds, derive_seed(seed, &format!("rec-{s}-{k}")))?;
            write_wav(dir.join(&name), &signal)?;
            entries.push(ManifestEntry { path: name.into(), speaker: s as u32, sample: k as u32 });
        }
    }
    let manifest = CorpusManifest::new(dir, entries, SYNTH_SAMPLE_RATE)?;
    manifest.save(dir.join("manifest.csv"))?;
    Ok(manifest)
}
