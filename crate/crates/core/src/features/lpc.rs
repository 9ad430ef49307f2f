//! All-pole (autoregressive) analysis and LPC-derived cepstra.
//!
//! Predictor convention: `x[n] ~ sum_{k=1..Q} a_k x[n-k]`, i.e. the synthesis
//! filter is `G / (1 - sum a_k z^-k)`.

use ndarray::Array2;
use rayon::prelude::*;

use super::spectrum::apply_window;
use super::{pre_emphasize, ExtractorConfig, ExtractorKind, FeatureMatrix};
use crate::audio::{frame_signal, hamming_window, AudioSignal, FrameMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LpcSolution {
    /// `a_1..a_Q`.
    pub coefficients: Vec<f64>,
    /// Final forward prediction error power.
    pub prediction_error: f64,
    pub reflection: Vec<f64>,
}

/// Solves the order-`Q` Toeplitz normal equations for `autocorr` of length
/// `Q + 1` with the Levinson-Durbin recursion.
pub fn levinson_durbin(autocorr: &[f64]) -> Result<LpcSolution> {
    let r0 = *autocorr
        .first()
        .ok_or_else(|| Error::InvalidConfig("empty autocorrelation".into()))?;
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(Error::InvalidAutocorrelation(r0));
    }
    let order = autocorr.len() - 1;
    let mut a = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut reflection = Vec::with_capacity(order);
    let mut err = r0;
    for i in 1..=order {
        let acc = autocorr[i] - (1..i).map(|j| a[j - 1] * autocorr[i - j]).sum::<f64>();
        let k = acc / err;
        if !k.is_finite() || k.abs() >= 1.0 {
            return Err(Error::UnstableRecursion {
                order: i,
                reflection: k,
            });
        }
        prev[..i - 1].copy_from_slice(&a[..i - 1]);
        a[i - 1] = k;
        for j in 1..i {
            a[j - 1] = prev[j - 1] - k * prev[i - j - 1];
        }
        err *= 1.0 - k * k;
        reflection.push(k);
    }
    Ok(LpcSolution {
        coefficients: a,
        prediction_error: err,
        reflection,
    })
}

/// Biased autocorrelation estimate (divides by the frame length), lags
/// `0..=max_lag`.
pub fn autocorrelation(frame: &[f64], max_lag: usize) -> Vec<f64> {
    let n = frame.len() as f64;
    (0..=max_lag)
        .map(|lag| {
            if lag >= frame.len() {
                0.0
            } else {
                frame.iter().zip(&frame[lag..]).map(|(x, y)| x * y).sum::<f64>() / n
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpcCepstrum {
    /// `ln(gain)`.
    pub c0: f64,
    /// `c_1..c_num_ceps`.
    pub coefficients: Vec<f64>,
}

/// Cepstrum of the all-pole model `gain / (1 - sum a_k z^-k)`:
/// `c_n = a_n + (1/n) sum_{k=1..n-1} k c_k a_{n-k}`, with `a_n = 0` past the
/// model order.
pub fn lpc_to_cepstrum(lpc: &[f64], gain: f64, num_ceps: usize) -> Result<LpcCepstrum> {
    if !(gain > 0.0) {
        return Err(Error::InvalidConfig(format!("LPC gain must be positive, got {gain}")));
    }
    let q = lpc.len();
    let a = |n: usize| if n >= 1 && n <= q { lpc[n - 1] } else { 0.0 };
    let mut c = vec![0.0; num_ceps + 1];
    for n in 1..=num_ceps {
        let lo = if n > q { n - q } else { 1 };
        let acc: f64 = (lo..n).map(|k| k as f64 * c[k] * a(n - k)).sum();
        c[n] = a(n) + acc / n as f64;
    }
    Ok(LpcCepstrum {
        c0: gain.ln(),
        coefficients: c[1..].to_vec(),
    })
}

/// Hamming-windowed autocorrelation + Levinson-Durbin on every frame.
pub fn frame_lpc(frames: &FrameMatrix, order: usize) -> Result<Vec<Result<LpcSolution>>> {
    let window = hamming_window(frames.frame_length_samples())?;
    Ok((0..frames.frame_count())
        .into_par_iter()
        .map(|i| {
            let w = apply_window(frames.frame(i), &window);
            levinson_durbin(&autocorrelation(&w, order))
        })
        .collect())
}

pub(crate) fn cepstra_rows(
    solutions: Vec<Result<LpcSolution>>,
    num_ceps: usize,
) -> (Array2<f64>, usize) {
    let mut unstable = 0;
    let mut values = Array2::zeros((solutions.len(), num_ceps));
    for (i, sol) in solutions.into_iter().enumerate() {
        let ceps = sol.and_then(|s| {
            lpc_to_cepstrum(&s.coefficients, s.prediction_error.sqrt(), num_ceps)
        });
        match ceps {
            Ok(c) if c.coefficients.iter().all(|v| v.is_finite()) => {
                values.row_mut(i).assign(&ndarray::ArrayView1::from(&c.coefficients));
            }
            _ => unstable += 1,
        }
    }
    (values, unstable)
}

pub fn lpcc(signal: &AudioSignal, config: &ExtractorConfig) -> Result<FeatureMatrix> {
    if config.kind != ExtractorKind::Lpcc {
        return Err(Error::InvalidConfig(format!("lpcc called with {} config", config.kind)));
    }
    config.validate()?;
    let emphasized = pre_emphasize(signal, config.pre_emphasis)?;
    let frames = frame_signal(&emphasized, config.frame_ms, config.hop_ms)?;
    let (values, unstable_frames) = cepstra_rows(frame_lpc(&frames, config.lpc_order)?, config.num_ceps);
    if unstable_frames > 0 {
        log::debug!("{unstable_frames} LPCC frames had an unstable recursion");
    }
    Ok(FeatureMatrix {
        values,
        config: *config,
        speaker_label: None,
        source: String::new(),
        unstable_frames,
    })
}
