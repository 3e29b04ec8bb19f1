use super::TimeSeries;
use crate::error::{Result, SimError};

/// Square-reference lock-in with a single-pole low-pass and decimation.
#[derive(Debug, Clone, PartialEq)]
pub struct LockInConfig {
    pub ref_freq_hz: f64,
    pub time_constant_s: f64,
    pub output_rate_hz: f64,
    /// Leading output discarded, in time constants.
    pub settle_time_constants: f64,
}

impl Default for LockInConfig {
    fn default() -> Self {
        Self {
            ref_freq_hz: 900.0,
            time_constant_s: 10e-3,
            output_rate_hz: 1200.0,
            settle_time_constants: 5.0,
        }
    }
}

fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let k = r.round();
    ((r - k).abs() <= 1e-9 * r && k >= 1.0).then_some(k as usize)
}

/// Demodulates `ts` against a ±1 square reference that is +1 during the first
/// half of each period. A 0/A toggle in phase with the reference gives A/2.
pub fn lock_in(ts: &TimeSeries, cfg: &LockInConfig) -> Result<TimeSeries> {
    ts.validate()?;
    let fs = ts.sample_rate;
    if !(cfg.time_constant_s > 0.0) || !(cfg.output_rate_hz > 0.0) || !(cfg.ref_freq_hz > 0.0) {
        return Err(SimError::param("lock_in", "reference, time constant and output rate must be > 0"));
    }
    if cfg.time_constant_s <= 1.0 / cfg.ref_freq_hz {
        return Err(SimError::param("time_constant_s", "must exceed one reference period"));
    }
    let period = integer_ratio(fs, cfg.ref_freq_hz)
        .filter(|p| p % 2 == 0 && *p >= 20)
        .ok_or_else(|| SimError::RateMismatch(format!("input rate {fs} Hz is not an even multiple (≥ 20×) of the reference {} Hz", cfg.ref_freq_hz)))?;
    let decim = integer_ratio(fs, cfg.output_rate_hz)
        .filter(|d| *d > 1)
        .ok_or_else(|| SimError::RateMismatch(format!("input rate {fs} Hz is not an integer multiple of the output rate {} Hz", cfg.output_rate_hz)))?;

    let a = (-1.0 / (fs * cfg.time_constant_s)).exp();
    let b = 1.0 - a;
    let skip = (cfg.settle_time_constants * cfg.time_constant_s * cfg.output_rate_hz).ceil() as usize;
    let mut y = 0.0;
    let mut out = Vec::with_capacity(ts.len() / decim);
    for (n, x) in ts.values.iter().enumerate() {
        let r = if n % period < period / 2 { 1.0 } else { -1.0 };
        y = a * y + b * r * x;
        if n % decim == decim - 1 {
            out.push(y);
        }
    }
    if out.len() <= skip {
        return Err(SimError::InsufficientData(format!("{} output samples, settling discards {skip}", out.len())));
    }
    Ok(TimeSeries {
        sample_rate: cfg.output_rate_hz,
        t0_s: ts.t0_s + (skip * decim + decim - 1) as f64 / fs,
        values: out.split_off(skip),
    })
}
