//! Silence removal and endpoint detection.
//!
//! The first 200 ms of a recording are assumed to be silence. Their sample
//! mean and standard deviation define a Gaussian noise model, every sample is
//! standardized against it, and short blocks are voted voiced when enough of
//! their samples fall outside `u_threshold` standard deviations.

use serde::{Deserialize, Serialize};

use crate::audio::{ms_to_samples, AudioSignal};
use crate::{Error, Result};

/// Length of the leading window used to fit the silence model.
pub const SILENCE_WINDOW_MS: f64 = 200.0;

/// Fraction of voiced blocks above which the leading window is suspected to
/// contain speech.
pub const CONTAMINATION_WARNING_FRACTION: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SilenceConfig {
    /// Standardized distance beyond which a sample counts as non-silent.
    pub u_threshold: f64,
    /// Analysis block length.
    pub block_ms: f64,
    /// A block is voiced when strictly more than this fraction of its samples
    /// exceed the threshold.
    pub voiced_fraction: f64,
    pub min_segment_ms: f64,
    /// Only trim leading and trailing silence, keep interior pauses.
    pub endpoints_only: bool,
}

impl Default for SilenceConfig {
    fn default() -> Self {
        Self {
            u_threshold: 3.0,
            block_ms: 10.0,
            voiced_fraction: 0.2,
            min_segment_ms: 50.0,
            endpoints_only: false,
        }
    }
}

impl SilenceConfig {
    fn validate(&self) -> Result<()> {
        if !(self.u_threshold > 0.0 && self.u_threshold.is_finite()) {
            return Err(Error::InvalidConfig("u_threshold must be positive".into()));
        }
        if !(self.block_ms > 0.0) {
            return Err(Error::InvalidConfig("block_ms must be positive".into()));
        }
        if !(self.voiced_fraction > 0.0 && self.voiced_fraction <= 1.0) {
            return Err(Error::InvalidConfig("voiced_fraction must lie in (0, 1]".into()));
        }
        if !(self.min_segment_ms >= 0.0) {
            return Err(Error::InvalidConfig("min_segment_ms must be non-negative".into()));
        }
        Ok(())
    }
}

/// Gaussian model of the leading silence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilenceModel {
    pub mu: f64,
    /// Population standard deviation of the leading window.
    pub sigma: f64,
    pub u_threshold: f64,
    pub frame_ms: f64,
    pub voiced_fraction: f64,
    pub min_segment_ms: f64,
    pub endpoints_only: bool,
}

impl SilenceModel {
    pub fn standardize(&self, x: f64) -> f64 {
        standardize(x, self)
    }
}

pub fn fit_silence_model(signal: &AudioSignal, config: &SilenceConfig) -> Result<SilenceModel> {
    config.validate()?;
    let window = signal.ms_to_samples(SILENCE_WINDOW_MS);
    if signal.len() < window || window == 0 {
        return Err(Error::TooShort {
            needed: window,
            got: signal.len(),
        });
    }
    let head = &signal.samples()[..window];
    let n = head.len() as f64;
    let mu = head.iter().sum::<f64>() / n;
    let var = head.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if !(sigma > 0.0) {
        return Err(Error::DegenerateSilence);
    }
    Ok(SilenceModel {
        mu,
        sigma,
        u_threshold: config.u_threshold,
        frame_ms: config.block_ms,
        voiced_fraction: config.voiced_fraction,
        min_segment_ms: config.min_segment_ms,
        endpoints_only: config.endpoints_only,
    })
}

/// `u = (x - mu) / sigma`.
pub fn standardize(x: f64, model: &SilenceModel) -> f64 {
    (x - model.mu) / model.sigma
}

/// Voiced regions of a signal and their concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct VoicedSegments {
    /// Half-open `[start, end)` sample ranges, sorted and disjoint.
    pub segments: Vec<(usize, usize)>,
    pub trimmed: AudioSignal,
    /// Total analysis blocks and how many voted voiced.
    pub blocks: usize,
    pub voiced_blocks: usize,
    /// Set when more than 60% of blocks are voiced, which usually means the
    /// recording started mid-speech and the silence model is contaminated.
    pub contamination_suspected: bool,
}

impl VoicedSegments {
    pub fn voiced_samples(&self) -> usize {
        self.segments.iter().map(|(s, e)| e - s).sum()
    }
}

/// Per-block voicing decisions; the final block may be shorter than the rest.
pub fn voiced_blocks(signal: &AudioSignal, model: &SilenceModel) -> Vec<bool> {
    let block = ms_to_samples(model.frame_ms, signal.sample_rate()).max(1);
    signal
        .samples()
        .chunks(block)
        .map(|chunk| {
            let loud = chunk
                .iter()
                .filter(|&&x| standardize(x, model).abs() > model.u_threshold)
                .count();
            loud as f64 / chunk.len() as f64 > model.voiced_fraction
        })
        .collect()
}

pub fn remove_silence(signal: &AudioSignal, model: &SilenceModel) -> Result<VoicedSegments> {
    let block = ms_to_samples(model.frame_ms, signal.sample_rate()).max(1);
    let min_segment = ms_to_samples(model.min_segment_ms, signal.sample_rate());
    let votes = voiced_blocks(signal, model);
    let n = signal.len();
    let voiced_count = votes.iter().filter(|&&v| v).count();

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for (b, &v) in votes.iter().enumerate() {
        match (v, start) {
            (true, None) => start = Some(b),
            (false, Some(s)) => {
                runs.push((s * block, b * block));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s * block, n));
    }
    if model.endpoints_only {
        if let (Some(first), Some(last)) = (runs.first(), runs.last()) {
            runs = vec![(first.0, last.1)];
        }
    }
    let segments: Vec<(usize, usize)> = runs
        .into_iter()
        .filter(|(s, e)| e - s >= min_segment.max(1))
        .collect();
    if segments.is_empty() {
        return Err(Error::NoVoicedContent);
    }

    let contamination_suspected =
        voiced_count as f64 > CONTAMINATION_WARNING_FRACTION * votes.len() as f64;
    if contamination_suspected {
        log::warn!(
            "{voiced_count} of {} blocks voiced; the leading {SILENCE_WINDOW_MS} ms may not be silence",
            votes.len()
        );
    }

    let x = signal.samples();
    let trimmed: Vec<f64> = segments
        .iter()
        .flat_map(|&(s, e)| x[s..e].iter().copied())
        .collect();
    Ok(VoicedSegments {
        segments,
        trimmed: AudioSignal::new(trimmed, signal.sample_rate())?,
        blocks: votes.len(),
        voiced_blocks: voiced_count,
        contamination_suspected,
    })
}

/// Fits the silence model on `signal` and removes silence with it.
pub fn trim_silence(signal: &AudioSignal, config: &SilenceConfig) -> Result<VoicedSegments> {
    let model = fit_silence_model(signal, config)?;
    remove_silence(signal, &model)
}
