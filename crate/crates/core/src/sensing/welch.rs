use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::TimeSeries;
use crate::error::{Result, SimError};

/// One-sided amplitude spectral density, units of the input per √Hz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeSpectralDensity {
    pub freqs_hz: Vec<f64>,
    pub values: Vec<f64>,
    pub df_hz: f64,
    pub segments: usize,
}

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos()).collect()
}

/// Welch estimate with a periodic Hann window and per-segment mean removal.
pub fn welch_asd(ts: &TimeSeries, segment_len: usize, overlap: f64) -> Result<AmplitudeSpectralDensity> {
    ts.validate()?;
    if segment_len < 2 || segment_len > ts.len() {
        return Err(SimError::InsufficientData(format!("segment length {segment_len} must be in 2..={}", ts.len())));
    }
    if !(0.0..=0.9).contains(&overlap) {
        return Err(SimError::param("overlap", "must be within [0, 0.9]"));
    }
    let step = segment_len - (overlap * segment_len as f64).round() as usize;
    let segments = (ts.len() - segment_len) / step + 1;
    if segments < 2 {
        return Err(SimError::InsufficientData(format!("{segments} Welch segment(s); need at least 2")));
    }

    let window = hann(segment_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let bins = segment_len / 2 + 1;
    let periodograms: Vec<Vec<f64>> = (0..segments)
        .into_par_iter()
        .map(|s| {
            let seg = &ts.values[s * step..s * step + segment_len];
            let mean = seg.iter().sum::<f64>() / segment_len as f64;
            let mut buf: Vec<Complex<f64>> = seg.iter().zip(&window).map(|(x, w)| Complex::new((x - mean) * w, 0.0)).collect();
            fft.process(&mut buf);
            buf[..bins].iter().map(|c| c.norm_sqr()).collect()
        })
        .collect();

    let mut psd = vec![0.0; bins];
    for p in &periodograms {
        for (acc, v) in psd.iter_mut().zip(p) {
            *acc += v;
        }
    }
    let fs = ts.sample_rate;
    let scale = 1.0 / (fs * window.iter().map(|w| w * w).sum::<f64>() * segments as f64);
    let df = fs / segment_len as f64;
    let values = psd
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || (segment_len % 2 == 0 && k == bins - 1) { 1.0 } else { 2.0 };
            (p * scale * one_sided).sqrt()
        })
        .collect();
    Ok(AmplitudeSpectralDensity {
        freqs_hz: (0..bins).map(|k| k as f64 * df).collect(),
        values,
        df_hz: df,
        segments,
    })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Median ASD over bins inside [lo, hi].
pub fn band_median(asd: &AmplitudeSpectralDensity, lo_hz: f64, hi_hz: f64) -> Result<f64> {
    let v: Vec<f64> = asd.freqs_hz.iter().zip(&asd.values).filter(|(f, _)| **f >= lo_hz && **f <= hi_hz).map(|(_, a)| *a).collect();
    median(v).ok_or_else(|| SimError::InsufficientData(format!("no ASD bins in [{lo_hz}, {hi_hz}] Hz")))
}

/// Amplitude of a sinusoid near `freq_hz`: power integrated over ±`half_width`
/// bins around the local maximum, minus the median floor of the neighbouring
/// bins, converted to amplitude via P = A²/2.
pub fn tone_amplitude(asd: &AmplitudeSpectralDensity, freq_hz: f64, half_width: usize) -> Result<f64> {
    let n = asd.values.len();
    let guess = (freq_hz / asd.df_hz).round() as usize;
    if guess == 0 || guess + half_width + 1 >= n {
        return Err(SimError::param("freq_hz", "tone outside the resolvable band"));
    }
    let lo = guess.saturating_sub(2).max(1);
    let k0 = (lo..=(guess + 2).min(n - 1)).max_by(|&a, &b| asd.values[a].total_cmp(&asd.values[b])).unwrap_or(guess);
    let a = k0.saturating_sub(half_width).max(1);
    let b = (k0 + half_width).min(n - 1);
    let psd = |k: usize| asd.values[k] * asd.values[k];
    let guard = 30;
    let neighbours: Vec<f64> = (a.saturating_sub(guard).max(1)..a).chain(b + 1..(b + 1 + guard).min(n)).map(psd).collect();
    let floor = median(neighbours).unwrap_or(0.0);
    let power: f64 = (a..=b).map(|k| psd(k) - floor).sum::<f64>() * asd.df_hz;
    Ok((2.0 * power.max(0.0)).sqrt())
}
