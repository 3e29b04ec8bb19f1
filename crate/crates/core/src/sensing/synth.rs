use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::TimeSeries;
use crate::error::{Result, SimError};
use crate::scenario::Tone;

/// Square RF gate and the contrast-to-field operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct GateConfig {
    pub internal_rate_hz: f64,
    pub ref_freq_hz: f64,
    /// Contrast at the operating RF frequency.
    pub contrast: f64,
    /// dC/df at the operating point, Hz⁻¹.
    pub alpha: f64,
    /// g·μB/h, Hz/T.
    pub gyro_hz_per_t: f64,
}

impl GateConfig {
    /// Internal samples per reference period.
    pub fn period_samples(&self) -> Result<usize> {
        let p = self.internal_rate_hz / self.ref_freq_hz;
        let k = p.round();
        if !(self.ref_freq_hz > 0.0) || (p - k).abs() > 1e-9 * p || k < 20.0 || k as usize % 2 != 0 {
            return Err(SimError::RateMismatch(format!(
                "internal rate {} Hz must be an even multiple (≥ 20×) of the reference {} Hz",
                self.internal_rate_hz, self.ref_freq_hz
            )));
        }
        Ok(k as usize)
    }
}

/// Shot noise and field noise added to a synthetic trace.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Detected photon rate with RF off, s⁻¹.
    pub photon_rate: f64,
    pub shot_noise: bool,
    /// Exact Poisson counts instead of the Gaussian approximation.
    pub poisson: bool,
    /// Deterministic field tones, amplitude in tesla.
    pub tones: Vec<Tone>,
    /// Ornstein-Uhlenbeck field noise: low-frequency ASD (T/√Hz) and corner.
    pub skirt_asd_t_per_rthz: f64,
    pub skirt_corner_hz: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectedField {
    pub amplitude_t: f64,
    pub freq_hz: f64,
}

/// Detector count-rate trace at the internal rate. The RF is on during the
/// first half of each reference period, where the rate is R·(1 + C) with
/// C = C_op + α·γ·B(t).
pub fn synthesize_timeseries(gate: &GateConfig, n_samples: usize, noise: &NoiseModel, injected: Option<InjectedField>) -> Result<TimeSeries> {
    let period = gate.period_samples()?;
    let fs = gate.internal_rate_hz;
    let dt = 1.0 / fs;
    let r = noise.photon_rate;
    if !(r.is_finite() && r > 0.0) {
        return Err(SimError::param("photon_rate", "must be finite and > 0 s⁻¹"));
    }
    if noise.shot_noise && !noise.poisson && r * dt < 25.0 {
        return Err(SimError::param(
            "photon_rate",
            format!("R·Δt = {:.3} < 25 counts per sample; the Gaussian approximation is invalid (enable poisson)", r * dt),
        ));
    }
    if !(noise.skirt_asd_t_per_rthz >= 0.0) || (noise.skirt_asd_t_per_rthz > 0.0 && !(noise.skirt_corner_hz > 0.0)) {
        return Err(SimError::param("skirt", "ASD must be ≥ 0 and the corner > 0 Hz"));
    }

    let mut tones: Vec<Tone> = noise.tones.clone();
    if let Some(inj) = injected {
        tones.push(Tone {
            freq_hz: inj.freq_hz,
            amplitude_t: inj.amplitude_t,
        });
    }
    let tones: Vec<(f64, f64)> = tones.iter().map(|t| (std::f64::consts::TAU * t.freq_hz, t.amplitude_t)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let skirt = noise.skirt_asd_t_per_rthz > 0.0;
    let (a, step_sd, mut x) = if skirt {
        let tau_c = 1.0 / (std::f64::consts::TAU * noise.skirt_corner_hz);
        let var = noise.skirt_asd_t_per_rthz.powi(2) / (4.0 * tau_c);
        let a = (-dt / tau_c).exp();
        let x0: f64 = rng.sample::<f64, _>(StandardNormal) * var.sqrt();
        (a, (var * (1.0 - a * a)).sqrt(), x0)
    } else {
        (0.0, 0.0, 0.0)
    };
    let slope = gate.alpha * gate.gyro_hz_per_t;

    let mut values = Vec::with_capacity(n_samples);
    for n in 0..n_samples {
        let t = n as f64 * dt;
        let on = n % period < period / 2;
        let mean = if on {
            let b: f64 = tones.iter().map(|(w, amp)| amp * (w * t).sin()).sum::<f64>() + x;
            r * (1.0 + gate.contrast + slope * b)
        } else {
            r
        };
        if skirt {
            x = a * x + step_sd * rng.sample::<f64, _>(StandardNormal);
        }
        let counts = if !noise.shot_noise {
            mean * dt
        } else if noise.poisson {
            let lambda = (mean * dt).max(f64::MIN_POSITIVE);
            Poisson::new(lambda).map_err(|e| SimError::param("photon_rate", e.to_string()))?.sample(&mut rng)
        } else {
            let lambda = mean * dt;
            lambda + lambda.max(0.0).sqrt() * rng.sample::<f64, _>(StandardNormal)
        };
        values.push(counts / dt);
    }
    TimeSeries::new(fs, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gate() -> GateConfig {
        GateConfig {
            internal_rate_hz: 18_000.0,
            ref_freq_hz: 900.0,
            contrast: 0.2,
            alpha: 1e-7,
            gyro_hz_per_t: 28e9,
        }
    }

    fn noise(shot: bool) -> NoiseModel {
        NoiseModel {
            photon_rate: 1e9,
            shot_noise: shot,
            poisson: false,
            tones: vec![],
            skirt_asd_t_per_rthz: 0.0,
            skirt_corner_hz: 1.0,
            seed: 3,
        }
    }

    #[test]
    fn noiseless_square_wave() {
        let ts = synthesize_timeseries(&gate(), 400, &noise(false), None).unwrap();
        for (n, v) in ts.values.iter().enumerate() {
            let expect = if n % 20 < 10 { 1.2e9 } else { 1e9 };
            assert!((v / expect - 1.0).abs() < 1e-12, "{n}: {v}");
        }
    }

    #[test]
    fn same_seed_identical() {
        let mut nm = noise(true);
        nm.skirt_asd_t_per_rthz = 1e-9;
        let a = synthesize_timeseries(&gate(), 5000, &nm, None).unwrap();
        let b = synthesize_timeseries(&gate(), 5000, &nm, None).unwrap();
        assert_eq!(a, b);
        nm.seed = 4;
        let c = synthesize_timeseries(&gate(), 5000, &nm, None).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shot_noise_variance() {
        let ts = synthesize_timeseries(&gate(), 200_000, &noise(true), None).unwrap();
        let off: Vec<f64> = ts.values.iter().enumerate().filter(|(n, _)| n % 20 >= 10).map(|(_, v)| v / 18_000.0).collect();
        let m = off.iter().sum::<f64>() / off.len() as f64;
        let var = off.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (off.len() - 1) as f64;
        let lam = 1e9 / 18_000.0;
        assert!((var / lam - 1.0).abs() < 0.03, "{var} vs {lam}");
    }

    #[test]
    fn low_count_rejected_unless_poisson() {
        let mut nm = noise(true);
        nm.photon_rate = 1e5;
        assert!(synthesize_timeseries(&gate(), 100, &nm, None).is_err());
        nm.poisson = true;
        let ts = synthesize_timeseries(&gate(), 100, &nm, None).unwrap();
        assert!(ts.values.iter().all(|v| (v / 18_000.0).fract() == 0.0));
    }

    #[test]
    fn rate_mismatch_rejected() {
        let mut g = gate();
        g.internal_rate_hz = 17_000.0;
        assert!(matches!(synthesize_timeseries(&g, 10, &noise(false), None), Err(SimError::RateMismatch(_))));
    }

    #[test]
    fn ou_skirt_variance() {
        let mut nm = noise(false);
        nm.skirt_asd_t_per_rthz = 1e-8;
        nm.skirt_corner_hz = 30.0;
        let mut g = gate();
        g.contrast = 0.0;
        let ts = synthesize_timeseries(&g, 400_000, &nm, None).unwrap();
        let b: Vec<f64> = ts.values.iter().enumerate().filter(|(n, _)| n % 20 < 10).map(|(_, v)| (v / 1e9 - 1.0) / (1e-7 * 28e9)).collect();
        let var = b.iter().map(|v| v * v).sum::<f64>() / b.len() as f64;
        let expect = 1e-16 / (4.0 / (std::f64::consts::TAU * 30.0));
        assert!((var / expect - 1.0).abs() < 0.15, "{var} vs {expect}");
    }
}
