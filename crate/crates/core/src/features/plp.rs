//! Perceptual linear prediction.
//!
//! Power spectrum -> Bark-spaced critical-band integration -> equal-loudness
//! weighting -> cube-root intensity-to-loudness -> inverse DFT to an
//! autocorrelation -> all-pole model -> cepstrum. No first-order
//! pre-emphasis is applied; the equal-loudness curve takes its place.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use super::lpc::{cepstra_rows, levinson_durbin};
use super::spectrum::windowed_power_spectra;
use super::{ExtractorConfig, ExtractorKind, FeatureMatrix};
use crate::audio::AudioSignal;
use crate::{Error, Result};

/// `Bark(w) = 6 ln(w/1200pi + sqrt((w/1200pi)^2 + 1))` for angular frequency
/// `w` in rad/s.
pub fn bark_scale(omega: f64) -> f64 {
    6.0 * (omega / (1200.0 * PI)).asinh()
}

pub fn hz_to_bark(f: f64) -> f64 {
    bark_scale(2.0 * PI * f)
}

pub fn bark_to_hz(bark: f64) -> f64 {
    600.0 * (bark / 6.0).sinh()
}

/// Equal-loudness weighting for angular frequency `w`:
/// `(w^2 + 56.8e6) w^4 / ((w^2 + 6.3e6)^2 (w^2 + 0.38e9))`.
pub fn equal_loudness(omega: f64) -> f64 {
    let w2 = omega * omega;
    (w2 + 56.8e6) * w2 * w2 / ((w2 + 6.3e6).powi(2) * (w2 + 0.38e9))
}

/// Band centres in Hz, uniform on the Bark axis from 0 to Nyquist inclusive.
pub fn bark_center_frequencies(band_count: usize, sample_rate: u32) -> Vec<f64> {
    let top = hz_to_bark(f64::from(sample_rate) / 2.0);
    let step = top / (band_count - 1) as f64;
    (0..band_count).map(|i| bark_to_hz(i as f64 * step)).collect()
}

/// Asymmetric trapezoidal critical-band masking curve on Bark offset `z`
/// (bin minus band centre).
fn critical_band(z: f64) -> f64 {
    if z < -1.3 || z > 2.5 {
        0.0
    } else if z < -0.5 {
        10f64.powf(2.5 * (z + 0.5))
    } else if z <= 0.5 {
        1.0
    } else {
        10f64.powf(-(z - 0.5))
    }
}

/// Critical-band integration weights, `band_count x (fft_size/2 + 1)`.
pub fn bark_filterbank(band_count: usize, fft_size: usize, sample_rate: u32) -> Result<Array2<f64>> {
    if band_count < 2 {
        return Err(Error::InvalidConfig("need at least 2 Bark bands".into()));
    }
    let bins = fft_size / 2 + 1;
    let bin_hz = f64::from(sample_rate) / fft_size as f64;
    let centers: Vec<f64> = bark_center_frequencies(band_count, sample_rate)
        .into_iter()
        .map(hz_to_bark)
        .collect();
    let mut bank = Array2::zeros((band_count, bins));
    for (b, mut row) in bank.axis_iter_mut(Axis(0)).enumerate() {
        for (k, w) in row.iter_mut().enumerate() {
            *w = critical_band(hz_to_bark(k as f64 * bin_hz) - centers[b]);
        }
        if !row.iter().any(|&w| w > 0.0) {
            return Err(Error::FilterbankTooDense {
                filter: b,
                count: band_count,
            });
        }
    }
    Ok(bank)
}

/// Loudness-compressed auditory spectrum of one power spectrum.
///
/// The outermost bands sit at 0 Hz and Nyquist where the equal-loudness
/// curve is unreliable; they copy their inner neighbours.
pub fn auditory_spectrum(power: &[f64], bank: &Array2<f64>, sample_rate: u32) -> Vec<f64> {
    let centers = bark_center_frequencies(bank.nrows(), sample_rate);
    let mut bands: Vec<f64> = bank
        .rows()
        .into_iter()
        .zip(&centers)
        .map(|(w, &f)| {
            let e: f64 = w.iter().zip(power).map(|(a, b)| a * b).sum();
            (e * equal_loudness(2.0 * PI * f)).cbrt()
        })
        .collect();
    let m = bands.len();
    if m >= 3 {
        bands[0] = bands[1];
        bands[m - 1] = bands[m - 2];
    }
    bands
}

/// Autocorrelation lags `0..=max_lag` of the even extension of a spectrum
/// sampled at `M` points from 0 to Nyquist (inverse real DFT of size
/// `2(M - 1)`).
fn spectrum_to_autocorrelation(bands: &[f64], max_lag: usize) -> Vec<f64> {
    let m = bands.len();
    let period = 2 * (m - 1);
    (0..=max_lag)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let inner: f64 = (1..m - 1)
                .map(|j| 2.0 * bands[j] * (PI * (k * j) as f64 / (m - 1) as f64).cos())
                .sum();
            (bands[0] + sign * bands[m - 1] + inner) / period as f64
        })
        .collect()
}

/// Auditory spectra of every frame, before the inverse DFT.
pub fn plp_auditory_frames(signal: &AudioSignal, config: &ExtractorConfig) -> Result<Array2<f64>> {
    config.validate()?;
    config.frame_length(signal.sample_rate())?;
    let rate = signal.sample_rate();
    let spectra = windowed_power_spectra(signal, config.frame_ms, config.hop_ms, config.fft_size)?;
    let bank = bark_filterbank(config.filter_count, config.fft_size, rate)?;
    let rows: Vec<Vec<f64>> = (0..spectra.nrows())
        .into_par_iter()
        .map(|i| auditory_spectrum(spectra.row(i).as_slice().expect("contiguous rows"), &bank, rate))
        .collect();
    Ok(Array2::from_shape_fn((rows.len(), config.filter_count), |(i, j)| rows[i][j]))
}

pub fn plp(signal: &AudioSignal, config: &ExtractorConfig) -> Result<FeatureMatrix> {
    if config.kind != ExtractorKind::Plp {
        return Err(Error::InvalidConfig(format!("plp called with {} config", config.kind)));
    }
    let auditory = plp_auditory_frames(signal, config)?;
    let solutions: Vec<_> = (0..auditory.nrows())
        .into_par_iter()
        .map(|i| {
            let r = spectrum_to_autocorrelation(auditory.row(i).as_slice().expect("contiguous rows"), config.lpc_order);
            levinson_durbin(&r)
        })
        .collect();
    let (values, unstable_frames) = cepstra_rows(solutions, config.num_ceps);
    Ok(FeatureMatrix {
        values,
        config: *config,
        speaker_label: None,
        source: String::new(),
        unstable_frames,
    })
}
