//! Short-term cepstral features: MFCC, LPCC and PLP.
//!
//! All three extractors share framing, Hamming windowing and the FFT front
//! end, and produce one row of `num_ceps` coefficients per frame.

mod lpc;
mod mfcc;
mod plp;
mod spectrum;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::audio::AudioSignal;
use crate::{Error, Result};

pub use lpc::{
    autocorrelation, frame_lpc, levinson_durbin, lpc_to_cepstrum, lpcc, LpcCepstrum, LpcSolution,
};
pub use mfcc::{mel_center_frequencies, mel_filterbank, mel_scale, mel_to_hz, mfcc, mfcc_filterbank_energies};
pub use plp::{
    auditory_spectrum, bark_center_frequencies, bark_filterbank, bark_scale, bark_to_hz,
    equal_loudness, hz_to_bark, plp, plp_auditory_frames,
};
pub use spectrum::power_spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    Mfcc,
    Lpcc,
    Plp,
}

impl ExtractorKind {
    pub const ALL: [ExtractorKind; 3] = [ExtractorKind::Mfcc, ExtractorKind::Lpcc, ExtractorKind::Plp];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExtractorKind::Mfcc => "mfcc",
            ExtractorKind::Lpcc => "lpcc",
            ExtractorKind::Plp => "plp",
        }
    }
}

impl fmt::Display for ExtractorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExtractorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mfcc" => Ok(ExtractorKind::Mfcc),
            "lpcc" => Ok(ExtractorKind::Lpcc),
            "plp" => Ok(ExtractorKind::Plp),
            other => Err(Error::Parse(format!("unknown extractor '{other}'"))),
        }
    }
}

/// Cosine transform applied to MFCC log filterbank energies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DctMode {
    /// Orthonormal DCT-II.
    #[default]
    Dct2,
    /// Orthonormal DCT-III, the inverse of DCT-II.
    Idct,
}

impl FromStr for DctMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dct2" => Ok(DctMode::Dct2),
            "idct" => Ok(DctMode::Idct),
            other => Err(Error::Parse(format!("unknown DCT mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub kind: ExtractorKind,
    /// Pre-emphasis coefficient `a` in `y[n] = x[n] - a x[n-1]`. Unused by PLP.
    pub pre_emphasis: f64,
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub fft_size: usize,
    /// Mel filters (MFCC) or Bark bands (PLP).
    pub filter_count: usize,
    /// All-pole model order for LPCC and PLP.
    pub lpc_order: usize,
    pub num_ceps: usize,
    pub dct: DctMode,
    /// Emit MFCC coefficient 0 as the first column (then `c1..c_{num_ceps-1}`).
    pub include_c0: bool,
}

impl ExtractorConfig {
    pub fn new(kind: ExtractorKind) -> Self {
        Self {
            kind,
            pre_emphasis: 0.97,
            frame_ms: 25.0,
            hop_ms: 10.0,
            fft_size: 512,
            filter_count: match kind {
                ExtractorKind::Plp => 21,
                _ => 26,
            },
            lpc_order: 12,
            num_ceps: 13,
            dct: DctMode::Dct2,
            include_c0: false,
        }
    }

    pub fn mfcc() -> Self {
        Self::new(ExtractorKind::Mfcc)
    }

    pub fn lpcc() -> Self {
        Self::new(ExtractorKind::Lpcc)
    }

    pub fn plp() -> Self {
        Self::new(ExtractorKind::Plp)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.9..=1.0).contains(&self.pre_emphasis) {
            return bad(format!("pre-emphasis {} outside [0.9, 1]", self.pre_emphasis));
        }
        if !(8..=16).contains(&self.lpc_order) {
            return bad(format!("LPC order {} outside [8, 16]", self.lpc_order));
        }
        if !(12..=15).contains(&self.num_ceps) {
            return bad(format!("num_ceps {} outside [12, 15]", self.num_ceps));
        }
        if !self.fft_size.is_power_of_two() {
            return bad(format!("FFT size {} is not a power of two", self.fft_size));
        }
        if self.filter_count < 2 {
            return bad("need at least 2 filters".into());
        }
        match self.kind {
            ExtractorKind::Mfcc if self.num_ceps >= self.filter_count => {
                bad(format!("num_ceps {} needs more than {} filters", self.num_ceps, self.filter_count))
            }
            ExtractorKind::Plp if self.lpc_order >= 2 * (self.filter_count - 1) => {
                bad(format!("LPC order {} too high for {} bands", self.lpc_order, self.filter_count))
            }
            _ => Ok(()),
        }
    }

    /// Frame length in samples; also checks it fits in the FFT.
    pub(crate) fn frame_length(&self, sample_rate: u32) -> Result<usize> {
        let n = crate::audio::ms_to_samples(self.frame_ms, sample_rate);
        if n > self.fft_size {
            return Err(Error::InvalidConfig(format!(
                "frame of {n} samples exceeds FFT size {}",
                self.fft_size
            )));
        }
        Ok(n)
    }
}

/// Per-frame feature vectors of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub config: ExtractorConfig,
    pub speaker_label: Option<u32>,
    pub source: String,
    /// Frames whose LPC recursion was unstable; their rows are zero.
    pub unstable_frames: usize,
}

impl FeatureMatrix {
    pub fn frame_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn with_source(mut self, source: impl Into<String>, speaker: Option<u32>) -> Self {
        self.source = source.into();
        self.speaker_label = speaker;
        self
    }
}

/// `y[n] = x[n] - a x[n-1]` with `y[0] = x[0]`.
pub fn pre_emphasize(signal: &AudioSignal, a: f64) -> Result<AudioSignal> {
    if !(0.9..=1.0).contains(&a) {
        return Err(Error::InvalidConfig(format!("pre-emphasis {a} outside [0.9, 1]")));
    }
    let x = signal.samples();
    let y = std::iter::once(x[0])
        .chain(x.windows(2).map(|w| w[1] - a * w[0]))
        .collect();
    AudioSignal::new(y, signal.sample_rate())
}

/// Runs the extractor selected by `config.kind`.
pub fn extract(signal: &AudioSignal, config: &ExtractorConfig) -> Result<FeatureMatrix> {
    match config.kind {
        ExtractorKind::Mfcc => mfcc(signal, config),
        ExtractorKind::Lpcc => lpcc(signal, config),
        ExtractorKind::Plp => plp(signal, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(x: Vec<f64>) -> AudioSignal {
        AudioSignal::new(x, 16000).unwrap()
    }

    #[test]
    fn pre_emphasis_examples() {
        let y = pre_emphasize(&sig(vec![1.0; 4]), 1.0).unwrap();
        assert_eq!(y.samples(), &[1.0, 0.0, 0.0, 0.0]);
        let y = pre_emphasize(&sig(vec![1.0, 0.0, 1.0, 0.0]), 0.9).unwrap();
        let expect = [1.0, -0.9, 1.0, -0.9];
        for (a, b) in y.samples().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(pre_emphasize(&sig(vec![1.0; 4]), 0.5).is_err());
    }

    #[test]
    fn pre_emphasis_dc_gain_telescopes() {
        let n = 10_000;
        for a in [0.9, 0.95, 0.97, 1.0] {
            let y = pre_emphasize(&sig(vec![0.25; n]), a).unwrap();
            let sum: f64 = y.samples().iter().sum();
            // x[0] + (n - 1)(1 - a) x
            let expect = 0.25 + (n - 1) as f64 * (1.0 - a) * 0.25;
            assert!((sum - expect).abs() < 1e-9, "a={a}: {sum} vs {expect}");
        }
    }

    #[test]
    fn larger_a_attenuates_dc_more() {
        let x: Vec<f64> = (0..2048)
            .map(|i| 0.3 + 0.2 * (i as f64 * 0.05).sin() + 0.1 * (i as f64 * 1.3).cos())
            .collect();
        let s = sig(x);
        let mut last = f64::INFINITY;
        for a in [0.9, 0.92, 0.94, 0.96, 0.98, 1.0] {
            let y = pre_emphasize(&s, a).unwrap();
            let dc = y.samples().iter().sum::<f64>().abs();
            assert!(dc <= last + 1e-12);
            last = dc;
        }
    }

    #[test]
    fn config_ranges() {
        assert!(ExtractorConfig::mfcc().validate().is_ok());
        assert!(ExtractorConfig::lpcc().validate().is_ok());
        assert!(ExtractorConfig::plp().validate().is_ok());
        assert!(ExtractorConfig { lpc_order: 7, ..ExtractorConfig::lpcc() }.validate().is_err());
        assert!(ExtractorConfig { lpc_order: 17, ..ExtractorConfig::lpcc() }.validate().is_err());
        assert!(ExtractorConfig { num_ceps: 11, ..ExtractorConfig::mfcc() }.validate().is_err());
        assert!(ExtractorConfig { num_ceps: 16, ..ExtractorConfig::mfcc() }.validate().is_err());
        assert!(ExtractorConfig { pre_emphasis: 0.8, ..ExtractorConfig::mfcc() }.validate().is_err());
        assert!(ExtractorConfig { fft_size: 500, ..ExtractorConfig::mfcc() }.validate().is_err());
        assert_eq!("PLP".parse::<ExtractorKind>().unwrap(), ExtractorKind::Plp);
    }
}
