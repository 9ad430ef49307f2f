//! Audio input, framing and windowing shared by every feature extractor.
//!
//! Only RIFF/WAVE PCM16 mono is accepted. Samples are held as `f64` scaled by
//! `1/32768`, so the representable range is `[-1, 1)`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lowest accepted sample rate (speech-band floor).
pub const MIN_SAMPLE_RATE: u32 = 8000;

const PCM16_SCALE: f64 = 32768.0;

/// A mono signal with its sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(Error::InvalidSignal(format!(
                "sample rate {sample_rate} Hz is below {MIN_SAMPLE_RATE} Hz"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidSignal(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Number of samples covering `ms` milliseconds, rounded to nearest.
    pub fn ms_to_samples(&self, ms: f64) -> usize {
        ms_to_samples(ms, self.sample_rate)
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

pub fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * f64::from(sample_rate) / 1000.0).round() as usize
}

/// Reads a PCM16 mono WAV file.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

/// Decodes an in-memory PCM16 mono WAV image. Chunks other than `fmt ` and
/// `data` are skipped.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioSignal> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::NotWav("missing RIFF/WAVE magic".into()));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        // Truncated trailing chunks are clipped to what is present.
        let body_end = body_start.saturating_add(size).min(bytes.len());
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::NotWav("fmt chunk shorter than 16 bytes".into()));
                }
                let le16 = |o: usize| u16::from_le_bytes([body[o], body[o + 1]]);
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                format = Some((le16(0), le16(2), rate, le16(14)));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_start.saturating_add(size).saturating_add(size & 1);
    }
    let (audio_format, channels, sample_rate, bits) =
        format.ok_or_else(|| Error::NotWav("no fmt chunk".into()))?;
    if audio_format != 1 {
        return Err(Error::UnsupportedEncoding(format!(
            "audio format {audio_format} (only PCM = 1 is supported)"
        )));
    }
    if bits != 16 {
        return Err(Error::UnsupportedEncoding(format!("{bits}-bit samples")));
    }
    if channels != 1 {
        return Err(Error::UnsupportedEncoding(format!("{channels} channels")));
    }
    let data = data.ok_or_else(|| Error::NotWav("no data chunk".into()))?;
    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|b| f64::from(i16::from_le_bytes([b[0], b[1]])) / PCM16_SCALE)
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyAudio);
    }
    AudioSignal::new(samples, sample_rate)
}

/// Encodes a signal as a canonical 44-byte-header PCM16 mono WAV image.
/// Samples are rounded to the nearest code and clipped to `[-32768, 32767]`.
pub fn encode_wav(signal: &AudioSignal) -> Vec<u8> {
    let n = signal.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&signal.sample_rate().to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in signal.samples() {
        let code = (s * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&code.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(signal)).map_err(|e| Error::io(path, e))
}

/// Overlapping analysis frames cut from a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    frames: Array2<f64>,
    hop_samples: usize,
    sample_rate: u32,
}

impl FrameMatrix {
    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> ArrayView1<'_, f64> {
        self.frames.row(i)
    }

    pub fn frame_count(&self) -> usize {
        self.frames.nrows()
    }

    pub fn frame_length_samples(&self) -> usize {
        self.frames.ncols()
    }

    pub fn hop_samples(&self) -> usize {
        self.hop_samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn into_frames(self) -> Array2<f64> {
        self.frames
    }
}

/// Number of complete frames; trailing samples that do not fill a frame are
/// dropped.
pub fn frame_count(signal_len: usize, frame_len: usize, hop: usize) -> usize {
    if signal_len < frame_len || hop == 0 {
        0
    } else {
        (signal_len - frame_len) / hop + 1
    }
}

/// Splits a signal into frames of `frame_ms` every `hop_ms`.
///
/// `frame_ms` must lie in `[10, 50]` and the hop may not exceed the frame nor
/// drop below a fifth of it (overlap between 0% and 80%).
pub fn frame_signal(signal: &AudioSignal, frame_ms: f64, hop_ms: f64) -> Result<FrameMatrix> {
    if !(10.0..=50.0).contains(&frame_ms) {
        return Err(Error::InvalidConfig(format!(
            "frame length {frame_ms} ms outside [10, 50] ms"
        )));
    }
    let frame_len = signal.ms_to_samples(frame_ms);
    let hop = signal.ms_to_samples(hop_ms);
    frame_samples(signal, frame_len, hop)
}

/// Sample-count variant of [`frame_signal`].
pub fn frame_samples(signal: &AudioSignal, frame_len: usize, hop: usize) -> Result<FrameMatrix> {
    if frame_len == 0 || hop == 0 || hop > frame_len || hop * 5 < frame_len {
        return Err(Error::InvalidConfig(format!(
            "hop {hop} must satisfy frame/5 <= hop <= frame (frame = {frame_len})"
        )));
    }
    let x = signal.samples();
    if x.len() < frame_len {
        return Err(Error::SignalTooShort {
            needed: frame_len,
            got: x.len(),
        });
    }
    let count = frame_count(x.len(), frame_len, hop);
    let frames = Array2::from_shape_fn((count, frame_len), |(i, j)| x[i * hop + j]);
    Ok(FrameMatrix {
        frames,
        hop_samples: hop,
        sample_rate: signal.sample_rate(),
    })
}

/// Hamming window `w(n) = 0.54 - 0.46 cos(2 pi n / (N - 1))`.
pub fn hamming_window(frame_length: usize) -> Result<Vec<f64>> {
    if frame_length < 2 {
        return Err(Error::InvalidConfig(format!(
            "Hamming window needs at least 2 points, got {frame_length}"
        )));
    }
    let denom = (frame_length - 1) as f64;
    Ok((0..frame_length)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect())
}
