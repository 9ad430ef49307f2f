use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use super::spectrum::windowed_power_spectra;
use super::{pre_emphasize, DctMode, ExtractorConfig, ExtractorKind, FeatureMatrix};
use crate::audio::AudioSignal;
use crate::{Error, Result};

const LOG_FLOOR: f64 = 1e-10;

/// `Mel(f) = 1125 ln(1 + f / 700)`.
pub fn mel_scale(f: f64) -> f64 {
    1125.0 * (f / 700.0).ln_1p()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (mel / 1125.0).exp_m1()
}

/// Filter edge frequencies: `filter_count + 2` points uniformly spaced on
/// the Mel axis from 0 Hz to Nyquist.
fn mel_edges(filter_count: usize, sample_rate: u32) -> Vec<f64> {
    let top = mel_scale(f64::from(sample_rate) / 2.0);
    let step = top / (filter_count + 1) as f64;
    (0..filter_count + 2)
        .map(|i| mel_to_hz(i as f64 * step))
        .collect()
}

/// Centre frequency of each Mel filter in Hz.
pub fn mel_center_frequencies(filter_count: usize, sample_rate: u32) -> Vec<f64> {
    let edges = mel_edges(filter_count, sample_rate);
    edges[1..=filter_count].to_vec()
}

/// Triangular Mel filterbank, `filter_count x (fft_size/2 + 1)`.
///
/// Each triangle rises from the previous filter's centre and falls to the next
/// one's, so neighbouring filters overlap by half. Weights are evaluated at
/// the exact bin frequencies.
pub fn mel_filterbank(filter_count: usize, fft_size: usize, sample_rate: u32) -> Result<Array2<f64>> {
    if filter_count < 2 {
        return Err(Error::InvalidConfig("need at least 2 Mel filters".into()));
    }
    let bins = fft_size / 2 + 1;
    let edges = mel_edges(filter_count, sample_rate);
    let bin_hz = f64::from(sample_rate) / fft_size as f64;
    let mut bank = Array2::zeros((filter_count, bins));
    for (m, mut row) in bank.axis_iter_mut(Axis(0)).enumerate() {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            *w = if f > lo && f < mid {
                (f - lo) / (mid - lo)
            } else if f >= mid && f < hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            };
        }
        if !row.iter().any(|&w| w > 0.0) {
            return Err(Error::FilterbankTooDense {
                filter: m,
                count: filter_count,
            });
        }
    }
    Ok(bank)
}

/// Mel filterbank energies of every frame (pre-emphasis, Hamming, power
/// spectrum, filterbank), before the logarithm.
pub fn mfcc_filterbank_energies(signal: &AudioSignal, config: &ExtractorConfig) -> Result<Array2<f64>> {
    config.validate()?;
    config.frame_length(signal.sample_rate())?;
    let emphasized = pre_emphasize(signal, config.pre_emphasis)?;
    let spectra = windowed_power_spectra(&emphasized, config.frame_ms, config.hop_ms, config.fft_size)?;
    let bank = mel_filterbank(config.filter_count, config.fft_size, signal.sample_rate())?;
    Ok(spectra.dot(&bank.t()))
}

pub fn mfcc(signal: &AudioSignal, config: &ExtractorConfig) -> Result<FeatureMatrix> {
    if config.kind != ExtractorKind::Mfcc {
        return Err(Error::InvalidConfig(format!("mfcc called with {} config", config.kind)));
    }
    let energies = mfcc_filterbank_energies(signal, config)?;
    let m = config.filter_count;
    let basis = cosine_basis(m, config.dct);
    let first = if config.include_c0 { 0 } else { 1 };
    let rows: Vec<Vec<f64>> = (0..energies.nrows())
        .into_par_iter()
        .map(|i| {
            let e = energies.row(i);
            let logs: Vec<f64> = e.iter().map(|&v| v.max(LOG_FLOOR).ln()).collect();
            (first..first + config.num_ceps)
                .map(|k| basis[k].iter().zip(&logs).map(|(b, l)| b * l).sum())
                .collect()
        })
        .collect();
    let values = Array2::from_shape_fn((rows.len(), config.num_ceps), |(i, j)| rows[i][j]);
    Ok(FeatureMatrix {
        values,
        config: *config,
        speaker_label: None,
        source: String::new(),
        unstable_frames: 0,
    })
}

/// Row `k` holds the weights producing output coefficient `k` from `m` inputs.
fn cosine_basis(m: usize, mode: DctMode) -> Vec<Vec<f64>> {
    let mf = m as f64;
    let scale = |k: usize| if k == 0 { (1.0 / mf).sqrt() } else { (2.0 / mf).sqrt() };
    (0..m)
        .map(|k| {
            (0..m)
                .map(|n| match mode {
                    DctMode::Dct2 => scale(k) * (PI * k as f64 * (n as f64 + 0.5) / mf).cos(),
                    DctMode::Idct => scale(n) * (PI * n as f64 * (k as f64 + 0.5) / mf).cos(),
                })
                .collect()
        })
        .collect()
}
