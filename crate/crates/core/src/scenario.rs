//! Experiment description loaded from a TOML file. Every physical key carries
//! its unit in the name; unknown keys are rejected.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{dbm_to_mw, nm_to_thz};
use crate::dynamics::{RateParams, RfDrive};
use crate::error::{Result, SimError};
use crate::spin::{HyperfineParams, ZeemanZfsParams};

pub const RESONANT_DEFAULT: &str = include_str!("../scenarios/resonant.default");
pub const OFFRESONANT_DEFAULT: &str = include_str!("../scenarios/offresonant.default");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaserMode {
    Resonant,
    Broadband,
}

impl LaserMode {
    pub fn is_broadband(self) -> bool {
        matches!(self, LaserMode::Broadband)
    }

    pub fn name(self) -> &'static str {
        match self {
            LaserMode::Resonant => "resonant",
            LaserMode::Broadband => "broadband",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemperatureKind {
    Activated,
    PowerLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub b_mt: [f64; 3],
}

impl Default for FieldSection {
    fn default() -> Self {
        Self { b_mt: [0.0, 0.0, 0.75] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinSection {
    pub g: f64,
    pub d_mhz: f64,
    pub a_parallel_mhz: f64,
    pub a_perp_mhz: f64,
    pub satellite_weight: f64,
    pub secular: bool,
    pub drive_axis: [f64; 3],
}

impl Default for SpinSection {
    fn default() -> Self {
        Self {
            g: 2.0,
            d_mhz: 35.0,
            a_parallel_mhz: 9.5,
            a_perp_mhz: 0.0,
            satellite_weight: 0.10,
            secular: true,
            drive_axis: [1.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalSection {
    pub gamma_rad_per_s: f64,
    pub k_isc_12_per_s: f64,
    pub k_isc_32_per_s: f64,
    pub b_12: f64,
    pub gamma_m_per_s: f64,
    /// `inf` disables ground relaxation.
    pub t1_s: f64,
    pub gamma_hom_mhz: f64,
    pub delta_opt_ghz: f64,
    pub detection_fraction: f64,
    pub k_p_resonant_per_s_per_w: f64,
    pub k_p_broadband_per_s_per_w: f64,
}

impl Default for OpticalSection {
    fn default() -> Self {
        Self {
            gamma_rad_per_s: 1.67e8,
            k_isc_12_per_s: 1.0e8,
            k_isc_32_per_s: 1.1e8,
            b_12: 0.2,
            gamma_m_per_s: 5e6,
            t1_s: 1e-4,
            gamma_hom_mhz: 145.0,
            delta_opt_ghz: 1.0,
            detection_fraction: 0.05,
            k_p_resonant_per_s_per_w: 3e11,
            k_p_broadband_per_s_per_w: 3e7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfSection {
    pub power_dbm: f64,
    pub k_rf_per_s_per_sqrt_mw: f64,
    pub gamma2_per_s: f64,
    pub start_mhz: f64,
    pub stop_mhz: f64,
    pub step_mhz: f64,
}

impl Default for RfSection {
    fn default() -> Self {
        Self {
            power_dbm: 16.0,
            // Ω(16 dBm) ≈ 3·γ₂, γ₂ = 2π·1.5 MHz
            k_rf_per_s_per_sqrt_mw: 9.95818e5,
            gamma2_per_s: 3.14159e6,
            start_mhz: 30.0,
            stop_mhz: 110.0,
            step_mhz: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub center_nm: f64,
    pub fwhm_ghz: f64,
    pub quadrature: usize,
    pub cutoff_sigma: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            center_nm: 916.49,
            fwhm_ghz: 46.4,
            quadrature: 401,
            cutoff_sigma: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaserSection {
    pub mode: LaserMode,
    pub center_nm: f64,
    pub resonant_power_w: f64,
    pub broadband_power_w: f64,
    /// Peak-to-peak sinusoidal modulation span.
    pub mod_span_ghz: f64,
    pub mod_rate_khz: f64,
}

impl Default for LaserSection {
    fn default() -> Self {
        Self {
            mode: LaserMode::Resonant,
            center_nm: 916.49,
            resonant_power_w: 2e-6,
            broadband_power_w: 30e-3,
            mod_span_ghz: 0.0,
            mod_rate_khz: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub power_min_w: f64,
    pub power_max_w: f64,
    pub power_points: usize,
    pub mod_spans_ghz: Vec<f64>,
    pub temperatures_k: Vec<f64>,
    pub ple_half_range_nm: f64,
    pub ple_points: usize,
    pub ple_power_w: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            power_min_w: 1e-7,
            power_max_w: 0.1,
            power_points: 25,
            mod_spans_ghz: vec![0.0, 0.5, 1.0, 2.0, 3.0, 5.0],
            temperatures_k: vec![
                4.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0,
            ],
            ple_half_range_nm: 0.25,
            ple_points: 201,
            ple_power_w: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperatureSection {
    pub model: TemperatureKind,
    pub gamma0_mhz: f64,
    pub pin_low_k: f64,
    pub pin_low_mhz: f64,
    pub pin_high_k: f64,
    pub pin_high_mhz: f64,
}

impl Default for TemperatureSection {
    fn default() -> Self {
        Self {
            model: TemperatureKind::Activated,
            gamma0_mhz: 145.0,
            pin_low_k: 26.0,
            pin_low_mhz: 250.0,
            pin_high_k: 60.0,
            pin_high_mhz: 30_000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tone {
    pub freq_hz: f64,
    pub amplitude_t: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub tones: Vec<Tone>,
    /// Low-frequency level of an Ornstein-Uhlenbeck field noise, T/√Hz.
    pub skirt_asd_t_per_rthz: f64,
    pub skirt_corner_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModes {
    pub resonant: NoiseSection,
    pub broadband: NoiseSection,
}

impl Default for NoiseModes {
    fn default() -> Self {
        Self {
            resonant: NoiseSection {
                tones: Vec::new(),
                skirt_asd_t_per_rthz: 0.0,
                skirt_corner_hz: 1.0,
            },
            broadband: NoiseSection {
                tones: vec![Tone {
                    freq_hz: 100.0,
                    amplitude_t: 1e-6,
                }],
                skirt_asd_t_per_rthz: 150e-9,
                skirt_corner_hz: 30.0,
            },
        }
    }
}

impl NoiseModes {
    pub fn for_mode(&self, mode: LaserMode) -> &NoiseSection {
        match mode {
            LaserMode::Resonant => &self.resonant,
            LaserMode::Broadband => &self.broadband,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingSection {
    pub ref_freq_hz: f64,
    pub time_constant_s: f64,
    pub output_rate_hz: f64,
    pub internal_rate_hz: f64,
    pub samples: usize,
    pub segment_len: usize,
    pub overlap: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub seed: u64,
    pub poisson: bool,
    /// Defects in the detection volume; scales per-defect PL to the photon rate R.
    pub n_defects: f64,
    pub resonant_power_w: f64,
    pub broadband_power_w: f64,
    pub inject_amplitude_t: f64,
    pub inject_freq_hz: f64,
    pub noise: NoiseModes,
}

impl Default for SensingSection {
    fn default() -> Self {
        Self {
            ref_freq_hz: 900.0,
            time_constant_s: 10e-3,
            output_rate_hz: 1200.0,
            internal_rate_hz: 18_000.0,
            samples: 500_000,
            segment_len: 16_384,
            overlap: 0.5,
            band_low_hz: 1.0,
            band_high_hz: 10.0,
            seed: 1,
            poisson: false,
            n_defects: 5e7,
            resonant_power_w: 300e-6,
            broadband_power_w: 30e-3,
            inject_amplitude_t: 0.0,
            inject_freq_hz: 5.0,
            noise: NoiseModes::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub field: FieldSection,
    pub spin: SpinSection,
    pub optical: OpticalSection,
    pub rf: RfSection,
    pub ensemble: EnsembleSection,
    pub laser: LaserSection,
    pub sweeps: SweepSection,
    pub temperature: TemperatureSection,
    pub sensing: SensingSection,
}

fn check(ok: bool, key: &str, expect: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(SimError::schema(key, format!("expected {expect}")))
    }
}

fn finite3(v: &[f64; 3]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| SimError::schema("<document>", e.to_string().trim().to_string()))?;
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let msg = e.into_inner().message().to_string();
            SimError::schema(key, msg)
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn resonant_default() -> Self {
        Self::from_toml_str(RESONANT_DEFAULT).expect("shipped resonant scenario is valid")
    }

    pub fn offresonant_default() -> Self {
        Self::from_toml_str(OFFRESONANT_DEFAULT).expect("shipped off-resonant scenario is valid")
    }

    pub fn validate(&self) -> Result<()> {
        check(finite3(&self.field.b_mt), "field.b_mt", "three finite values in mT")?;

        let s = &self.spin;
        check(s.g.is_finite() && s.g > 0.0, "spin.g", "g > 0")?;
        check(s.d_mhz.is_finite() && s.d_mhz > 0.0, "spin.d_mhz", "D > 0 in MHz")?;
        check(s.a_parallel_mhz.is_finite(), "spin.a_parallel_mhz", "finite value in MHz")?;
        check(s.a_perp_mhz.is_finite(), "spin.a_perp_mhz", "finite value in MHz")?;
        check((0.0..=1.0).contains(&s.satellite_weight), "spin.satellite_weight", "fraction in [0, 1]")?;
        check(
            finite3(&s.drive_axis) && s.drive_axis.iter().any(|&x| x != 0.0),
            "spin.drive_axis",
            "non-zero direction",
        )?;

        let o = &self.optical;
        let rate = |v: f64| v.is_finite() && v >= 0.0;
        check(rate(o.gamma_rad_per_s), "optical.gamma_rad_per_s", "rate ≥ 0 in s⁻¹")?;
        check(rate(o.k_isc_12_per_s), "optical.k_isc_12_per_s", "rate ≥ 0 in s⁻¹")?;
        check(rate(o.k_isc_32_per_s), "optical.k_isc_32_per_s", "rate ≥ 0 in s⁻¹")?;
        check((0.0..=1.0).contains(&o.b_12), "optical.b_12", "fraction in [0, 1]")?;
        check(rate(o.gamma_m_per_s), "optical.gamma_m_per_s", "rate ≥ 0 in s⁻¹")?;
        check(o.t1_s > 0.0, "optical.t1_s", "time > 0 in s (inf disables relaxation)")?;
        check(o.gamma_hom_mhz.is_finite() && o.gamma_hom_mhz > 0.0, "optical.gamma_hom_mhz", "width > 0 in MHz")?;
        check(o.delta_opt_ghz.is_finite() && o.delta_opt_ghz > 0.0, "optical.delta_opt_ghz", "splitting > 0 in GHz")?;
        check((0.0..=1.0).contains(&o.detection_fraction), "optical.detection_fraction", "fraction in [0, 1]")?;
        check(rate(o.k_p_resonant_per_s_per_w), "optical.k_p_resonant_per_s_per_w", "value ≥ 0 in s⁻¹/W")?;
        check(rate(o.k_p_broadband_per_s_per_w), "optical.k_p_broadband_per_s_per_w", "value ≥ 0 in s⁻¹/W")?;

        let r = &self.rf;
        check(r.power_dbm.is_finite(), "rf.power_dbm", "finite power in dBm")?;
        check(rate(r.k_rf_per_s_per_sqrt_mw), "rf.k_rf_per_s_per_sqrt_mw", "value ≥ 0 in s⁻¹/√mW")?;
        check(r.gamma2_per_s.is_finite() && r.gamma2_per_s > 0.0, "rf.gamma2_per_s", "rate > 0 in s⁻¹")?;
        check(r.start_mhz.is_finite() && r.start_mhz > 0.0, "rf.start_mhz", "frequency > 0 in MHz")?;
        check(r.stop_mhz.is_finite() && r.stop_mhz > r.start_mhz, "rf.stop_mhz", "frequency above rf.start_mhz in MHz")?;
        check(
            r.step_mhz.is_finite() && r.step_mhz > 0.0 && r.step_mhz <= r.stop_mhz - r.start_mhz,
            "rf.step_mhz",
            "step > 0 in MHz, no larger than the sweep",
        )?;

        let e = &self.ensemble;
        check(e.center_nm.is_finite() && e.center_nm > 0.0, "ensemble.center_nm", "wavelength > 0 in nm")?;
        check(e.fwhm_ghz.is_finite() && e.fwhm_ghz > 0.0, "ensemble.fwhm_ghz", "width > 0 in GHz")?;
        check(e.quadrature >= 3, "ensemble.quadrature", "at least 3 nodes")?;
        check(e.cutoff_sigma.is_finite() && e.cutoff_sigma >= 3.0, "ensemble.cutoff_sigma", "cutoff ≥ 3 σ")?;

        let l = &self.laser;
        check(l.center_nm.is_finite() && l.center_nm > 0.0, "laser.center_nm", "wavelength > 0 in nm")?;
        check(rate(l.resonant_power_w), "laser.resonant_power_w", "power ≥ 0 in W")?;
        check(rate(l.broadband_power_w), "laser.broadband_power_w", "power ≥ 0 in W")?;
        check(rate(l.mod_span_ghz), "laser.mod_span_ghz", "span ≥ 0 in GHz")?;
        check(rate(l.mod_rate_khz), "laser.mod_rate_khz", "rate ≥ 0 in kHz")?;

        let w = &self.sweeps;
        check(w.power_min_w.is_finite() && w.power_min_w > 0.0, "sweeps.power_min_w", "power > 0 in W")?;
        check(w.power_max_w.is_finite() && w.power_max_w >= w.power_min_w, "sweeps.power_max_w", "power ≥ sweeps.power_min_w in W")?;
        check(w.power_points >= 1, "sweeps.power_points", "at least 1 point")?;
        check(
            !w.mod_spans_ghz.is_empty() && w.mod_spans_ghz.iter().all(|&x| rate(x)),
            "sweeps.mod_spans_ghz",
            "non-empty list of spans ≥ 0 in GHz",
        )?;
        check(
            !w.temperatures_k.is_empty() && w.temperatures_k.iter().all(|&t| t.is_finite() && t > 0.0),
            "sweeps.temperatures_k",
            "non-empty list of temperatures > 0 in K",
        )?;
        check(w.ple_half_range_nm.is_finite() && w.ple_half_range_nm > 0.0, "sweeps.ple_half_range_nm", "range > 0 in nm")?;
        check(w.ple_points >= 3, "sweeps.ple_points", "at least 3 points")?;
        check(w.ple_power_w.is_finite() && w.ple_power_w > 0.0, "sweeps.ple_power_w", "power > 0 in W")?;

        let t = &self.temperature;
        check(t.gamma0_mhz.is_finite() && t.gamma0_mhz > 0.0, "temperature.gamma0_mhz", "width > 0 in MHz")?;
        check(t.pin_low_k.is_finite() && t.pin_low_k > 0.0, "temperature.pin_low_k", "temperature > 0 in K")?;
        check(t.pin_high_k.is_finite() && t.pin_high_k > t.pin_low_k, "temperature.pin_high_k", "temperature above pin_low_k in K")?;
        check(t.pin_low_mhz.is_finite() && t.pin_low_mhz > t.gamma0_mhz, "temperature.pin_low_mhz", "width above gamma0_mhz in MHz")?;
        check(t.pin_high_mhz.is_finite() && t.pin_high_mhz > t.pin_low_mhz, "temperature.pin_high_mhz", "width above pin_low_mhz in MHz")?;

        let z = &self.sensing;
        check(z.ref_freq_hz.is_finite() && z.ref_freq_hz > 0.0, "sensing.ref_freq_hz", "frequency > 0 in Hz")?;
        check(z.time_constant_s.is_finite() && z.time_constant_s > 1.0 / z.ref_freq_hz, "sensing.time_constant_s", "time constant longer than one reference period, in s")?;
        check(z.output_rate_hz.is_finite() && z.output_rate_hz > 0.0, "sensing.output_rate_hz", "rate > 0 in Hz")?;
        check(z.internal_rate_hz >= 20.0 * z.ref_freq_hz, "sensing.internal_rate_hz", "rate ≥ 20 × ref_freq_hz in Hz")?;
        let ratio = z.internal_rate_hz / z.output_rate_hz;
        check(
            ratio > 1.0 && (ratio - ratio.round()).abs() < 1e-9,
            "sensing.output_rate_hz",
            "an integer divisor of internal_rate_hz, in Hz",
        )?;
        let period = z.internal_rate_hz / z.ref_freq_hz;
        check((period - period.round()).abs() < 1e-9 && period.round() as usize % 2 == 0, "sensing.ref_freq_hz", "internal_rate_hz / ref_freq_hz an even integer")?;
        check(z.segment_len >= 16, "sensing.segment_len", "at least 16 samples")?;
        check(z.samples >= z.segment_len, "sensing.samples", "at least sensing.segment_len samples")?;
        check((0.0..=0.9).contains(&z.overlap), "sensing.overlap", "fraction in [0, 0.9]")?;
        check(z.band_low_hz > 0.0 && z.band_high_hz > z.band_low_hz, "sensing.band_high_hz", "band with 0 < low < high in Hz")?;
        check(z.n_defects.is_finite() && z.n_defects > 0.0, "sensing.n_defects", "count > 0")?;
        check(rate(z.resonant_power_w), "sensing.resonant_power_w", "power ≥ 0 in W")?;
        check(rate(z.broadband_power_w), "sensing.broadband_power_w", "power ≥ 0 in W")?;
        check(z.inject_amplitude_t.is_finite(), "sensing.inject_amplitude_t", "finite field in T")?;
        check(z.inject_freq_hz.is_finite() && z.inject_freq_hz > 0.0, "sensing.inject_freq_hz", "frequency > 0 in Hz")?;
        for (name, n) in [("resonant", &z.noise.resonant), ("broadband", &z.noise.broadband)] {
            for tone in &n.tones {
                let key = format!("sensing.noise.{name}.tones");
                check(tone.freq_hz.is_finite() && tone.freq_hz > 0.0, &key, "tone frequency > 0 in Hz")?;
                check(tone.amplitude_t.is_finite(), &key, "finite tone amplitude in T")?;
            }
            check(rate(n.skirt_asd_t_per_rthz), &format!("sensing.noise.{name}.skirt_asd_t_per_rthz"), "level ≥ 0 in T/√Hz")?;
            check(n.skirt_corner_hz.is_finite() && n.skirt_corner_hz > 0.0, &format!("sensing.noise.{name}.skirt_corner_hz"), "frequency > 0 in Hz")?;
        }
        Ok(())
    }

    pub fn zeeman(&self) -> ZeemanZfsParams {
        ZeemanZfsParams {
            g: self.spin.g,
            d_half_split: self.spin.d_mhz,
            b_field: Vector3::from(self.field.b_mt),
        }
    }

    pub fn hyperfine(&self) -> HyperfineParams {
        HyperfineParams {
            a_parallel: self.spin.a_parallel_mhz,
            a_perp: self.spin.a_perp_mhz,
            satellite_weight: self.spin.satellite_weight,
            secular: self.spin.secular,
        }
    }

    pub fn drive_axis(&self) -> Vector3<f64> {
        Vector3::from(self.spin.drive_axis).normalize()
    }

    /// Rate parameters at the operating linewidth.
    pub fn rate_params(&self) -> RateParams {
        let o = &self.optical;
        RateParams {
            gamma_rad: o.gamma_rad_per_s,
            k_isc_12: o.k_isc_12_per_s,
            k_isc_32: o.k_isc_32_per_s,
            b_12: o.b_12,
            gamma_m: o.gamma_m_per_s,
            t1: o.t1_s,
            gamma_hom: o.gamma_hom_mhz * 1e6,
            delta_opt: o.delta_opt_ghz * 1e9,
            detection_fraction: o.detection_fraction,
        }
    }

    /// On-resonance excitation rate for a laser power in the given mode.
    pub fn w0(&self, mode: LaserMode, power_w: f64) -> f64 {
        match mode {
            LaserMode::Resonant => self.optical.k_p_resonant_per_s_per_w * power_w,
            LaserMode::Broadband => self.optical.k_p_broadband_per_s_per_w * power_w,
        }
    }

    /// Configured laser power for a mode.
    pub fn laser_power(&self, mode: LaserMode) -> f64 {
        match mode {
            LaserMode::Resonant => self.laser.resonant_power_w,
            LaserMode::Broadband => self.laser.broadband_power_w,
        }
    }

    pub fn omega_at(&self, power_dbm: f64) -> f64 {
        self.rf.k_rf_per_s_per_sqrt_mw * dbm_to_mw(power_dbm).sqrt()
    }

    pub fn rf_drive(&self, frequency_mhz: f64) -> RfDrive {
        RfDrive {
            frequency: frequency_mhz,
            omega: self.omega_at(self.rf.power_dbm),
            gamma2: self.rf.gamma2_per_s,
        }
    }

    /// Laser minus ensemble centre, Hz.
    pub fn laser_offset_hz(&self) -> f64 {
        (nm_to_thz(self.laser.center_nm) - nm_to_thz(self.ensemble.center_nm)) * 1e12
    }

    pub fn rf_grid_mhz(&self) -> Vec<f64> {
        let r = &self.rf;
        let n = ((r.stop_mhz - r.start_mhz) / r.step_mhz + 1e-9).floor() as usize + 1;
        (0..n).map(|i| r.start_mhz + i as f64 * r.step_mhz).collect()
    }

    pub fn power_grid_w(&self) -> Vec<f64> {
        let w = &self.sweeps;
        if w.power_points == 1 {
            return vec![w.power_min_w];
        }
        let (a, b) = (w.power_min_w.ln(), w.power_max_w.ln());
        let n = w.power_points - 1;
        (0..=n).map(|i| (a + (b - a) * i as f64 / n as f64).exp()).collect()
    }

    /// Fully resolved scenario, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the resolved scenario text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_file_gives_defaults() {
        let s = Scenario::from_toml_str("").unwrap();
        assert_eq!(s, Scenario::default());
    }

    #[test]
    fn shipped_resonant_file_matches_defaults() {
        assert_eq!(Scenario::resonant_default(), Scenario::default());
    }

    #[test]
    fn shipped_offresonant_file_differs_only_in_mode() {
        let mut s = Scenario::offresonant_default();
        assert_eq!(s.laser.mode, LaserMode::Broadband);
        s.laser.mode = LaserMode::Resonant;
        assert_eq!(s, Scenario::default());
    }

    #[test]
    fn dbm_maps_to_omega() {
        let s = Scenario::from_toml_str("[rf]\npower_dbm = 16").unwrap();
        let expect = s.rf.k_rf_per_s_per_sqrt_mw * 10f64.powf(1.6).sqrt();
        assert_relative_eq!(s.rf_drive(49.0).omega, expect, max_relative = 1e-12);
        assert_relative_eq!(s.omega_at(16.0), 2.0 * s.rf.gamma2_per_s, max_relative = 1e-4);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Scenario::from_toml_str("[laser]\nwavelenght = 916.0").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("laser"), "{msg}");
        assert!(msg.contains("wavelenght"), "{msg}");
    }

    #[test]
    fn unknown_section_rejected() {
        assert!(matches!(
            Scenario::from_toml_str("[lazer]\npower_w = 1").unwrap_err(),
            SimError::Schema { .. }
        ));
    }

    #[test]
    fn wrong_type_reports_path() {
        match Scenario::from_toml_str("[ensemble]\nfwhm_ghz = \"wide\"").unwrap_err() {
            SimError::Schema { key, .. } => assert_eq!(key, "ensemble.fwhm_ghz"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn invalid_value_reports_unit() {
        match Scenario::from_toml_str("[optical]\ngamma_hom_mhz = -1").unwrap_err() {
            SimError::Schema { key, message } => {
                assert_eq!(key, "optical.gamma_hom_mhz");
                assert!(message.contains("MHz"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn infinite_t1_round_trips() {
        let s = Scenario::from_toml_str("[optical]\nt1_s = inf").unwrap();
        assert!(s.rate_params().t1.is_infinite());
        let back = Scenario::from_toml_str(&s.to_toml()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn hash_tracks_content() {
        let a = Scenario::default();
        let b = Scenario::from_toml_str("[field]\nb_mt = [0.0, 0.0, 0.75]").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = Scenario::from_toml_str("[field]\nb_mt = [0.0, 0.0, 0.5]").unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn grids() {
        let s = Scenario::default();
        let rf = s.rf_grid_mhz();
        assert_eq!(rf.len(), 801);
        assert_relative_eq!(*rf.last().unwrap(), 110.0, max_relative = 1e-12);
        let p = s.power_grid_w();
        assert_eq!(p.len(), 25);
        assert_relative_eq!(p[0], 1e-7, max_relative = 1e-12);
        assert_relative_eq!(p[24], 0.1, max_relative = 1e-12);
    }

    #[test]
    fn decimation_must_be_integral() {
        assert!(Scenario::from_toml_str("[sensing]\noutput_rate_hz = 1100").is_err());
    }
}
