use std::sync::Arc;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::{frame_signal, hamming_window, AudioSignal};
use crate::Result;

/// Power spectrum `|X[k]|^2`, `k = 0..=fft_size/2`, of a frame zero-padded to
/// `fft_size`.
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Vec<f64> {
    let fft = FftPlanner::new().plan_fft_forward(fft_size);
    power_spectrum_with(frame, fft.as_ref())
}

pub(crate) fn power_spectrum_with(frame: &[f64], fft: &dyn Fft<f64>) -> Vec<f64> {
    let n = fft.len();
    let mut buf: Vec<Complex<f64>> = frame
        .iter()
        .take(n)
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    fft.process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm_sqr()).collect()
}

/// Frames `signal`, applies the Hamming window and returns one power
/// spectrum per row. Rows are computed independently, so the result does not
/// depend on the thread count.
pub(crate) fn windowed_power_spectra(
    signal: &AudioSignal,
    frame_ms: f64,
    hop_ms: f64,
    fft_size: usize,
) -> Result<Array2<f64>> {
    let frames = frame_signal(signal, frame_ms, hop_ms)?;
    let window = hamming_window(frames.frame_length_samples())?;
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(fft_size);
    let rows: Vec<Vec<f64>> = (0..frames.frame_count())
        .into_par_iter()
        .map(|i| {
            let windowed = apply_window(frames.frame(i), &window);
            power_spectrum_with(&windowed, fft.as_ref())
        })
        .collect();
    let bins = fft_size / 2 + 1;
    Ok(Array2::from_shape_fn((rows.len(), bins), |(i, j)| rows[i][j]))
}

pub(crate) fn apply_window(frame: ArrayView1<'_, f64>, window: &[f64]) -> Vec<f64> {
    frame.iter().zip(window).map(|(x, w)| x * w).collect()
}
