//! Magnetometry figures of merit from ODMR spectra: slope extraction,
//! synthetic lock-in time series, Welch spectra and the shot-noise bound.

mod io;
mod lockin;
mod report;
mod slope;
mod synth;
mod welch;

pub use io::{read_timeseries_binary, read_timeseries_csv, write_timeseries_binary, write_timeseries_csv, BINARY_MAGIC, BINARY_VERSION};
pub use lockin::{lock_in, LockInConfig};
pub use report::{sensitivity_report, ModeSensitivity, SensitivityReport};
pub use slope::{max_slope, max_slope_xy, OdmrSlope};
pub use synth::{synthesize_timeseries, GateConfig, InjectedField, NoiseModel};
pub use welch::{band_median, tone_amplitude, welch_asd, AmplitudeSpectralDensity};

use crate::constants::{G_ELECTRON, MU_B_OVER_H};
use crate::error::{Result, SimError};

/// Uniformly sampled trace starting at `t0_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub sample_rate: f64,
    pub t0_s: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, values: Vec<f64>) -> Result<Self> {
        let ts = Self {
            sample_rate,
            t0_s: 0.0,
            values,
        };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(SimError::param("sample_rate", "must be finite and > 0 Hz"));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(SimError::Format(format!("non-finite sample at index {i}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0_s + i as f64 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.sample_rate
    }
}

/// Ground-state gyromagnetic ratio g·μB/h in Hz/T.
pub fn gyromagnetic_hz_per_t(g: f64) -> f64 {
    g * MU_B_OVER_H
}

/// Converts a demodulated PL trace into magnetic field.
///
/// The lock-in maps a 0/A toggle to A/2, so the contrast is 2Y/PL_off. That is
/// divided by the slope and by the gyromagnetic ratio for the given g.
pub fn to_field(ts: &TimeSeries, slope: &OdmrSlope, pl_off: f64, g: f64) -> Result<TimeSeries> {
    if !(slope.alpha.is_finite() && slope.alpha != 0.0) {
        return Err(SimError::param("alpha", "slope must be finite and nonzero"));
    }
    if !(pl_off.is_finite() && pl_off > 0.0) {
        return Err(SimError::param("pl_off", "must be finite and > 0 s⁻¹"));
    }
    let scale = 2.0 / pl_off / slope.alpha / gyromagnetic_hz_per_t(g);
    Ok(TimeSeries {
        sample_rate: ts.sample_rate,
        t0_s: ts.t0_s,
        values: ts.values.iter().map(|v| v * scale).collect(),
    })
}

/// Shot-noise-limited cw sensitivity in T/√Hz for a slope `alpha` (Hz⁻¹) and
/// photon rate `r` (s⁻¹): η = 1 / (γe·α·√R) with γe = g_e·μB/h.
pub fn shot_noise_limit(alpha: f64, r: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(SimError::param("alpha", "must be finite and > 0 Hz⁻¹"));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(SimError::param("photon_rate", "must be finite and > 0 s⁻¹"));
    }
    Ok(1.0 / (gyromagnetic_hz_per_t(G_ELECTRON) * alpha * r.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{HBAR, MU_B};

    fn slope(alpha: f64) -> OdmrSlope {
        OdmrSlope {
            alpha,
            operating_freq_mhz: 49.0,
            peak_freq_mhz: 49.5,
            contrast_at_operating: 0.1,
            source: "test".into(),
        }
    }

    #[test]
    fn eta_hand_value() {
        let eta = shot_noise_limit(5e-8, 1e12).unwrap();
        assert!((eta * 1e9 - 0.7135).abs() < 5e-4, "{eta}");
    }

    #[test]
    fn eta_scaling_exact() {
        let e = shot_noise_limit(3e-8, 2e11).unwrap();
        assert_eq!(shot_noise_limit(6e-8, 2e11).unwrap(), e / 2.0);
        assert_eq!(shot_noise_limit(3e-8, 8e11).unwrap(), e / 2.0);
    }

    #[test]
    fn eta_identity_angular_units() {
        // α per angular frequency: α_ω = α / 2π.
        let (alpha, r) = (5e-8, 1e12);
        let eta = shot_noise_limit(alpha, r).unwrap();
        let alpha_w = alpha / std::f64::consts::TAU;
        let v = eta * alpha_w * r.sqrt() * (G_ELECTRON * MU_B / HBAR);
        assert!((v - 1.0).abs() < 4.0 * f64::EPSILON, "{v}");
    }

    #[test]
    fn eta_rejects_nonpositive() {
        assert!(shot_noise_limit(0.0, 1.0).is_err());
        assert!(shot_noise_limit(1e-8, -1.0).is_err());
    }

    #[test]
    fn to_field_linear() {
        let ts = TimeSeries::new(100.0, vec![1.0, -1.0, 2.0, -2.0]).unwrap();
        let a = to_field(&ts, &slope(1e-7), 1e9, 2.0).unwrap();
        let b = to_field(&ts, &slope(2e-7), 1e9, 2.0).unwrap();
        assert!(a.values.iter().sum::<f64>().abs() < 1e-30);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(*x, 2.0 * y);
        }
        assert!(to_field(&ts, &slope(0.0), 1e9, 2.0).is_err());
    }

    #[test]
    fn timeseries_rejects_nan() {
        assert!(TimeSeries::new(10.0, vec![0.0, f64::NAN]).is_err());
        assert!(TimeSeries::new(0.0, vec![0.0]).is_err());
    }
}
