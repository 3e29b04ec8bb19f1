use rayon::prelude::*;
use serde::Serialize;

use super::{
    band_median, gyromagnetic_hz_per_t, lock_in, max_slope, shot_noise_limit, synthesize_timeseries, to_field, tone_amplitude, welch_asd, AmplitudeSpectralDensity,
    GateConfig, InjectedField, LockInConfig, NoiseModel, TimeSeries,
};
use crate::ensemble::odmr_spectrum_with_pl;
use crate::error::Result;
use crate::scenario::{LaserMode, Scenario};

/// One row of the sensitivity table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSensitivity {
    pub mode: String,
    pub laser_power_w: f64,
    pub alpha_per_hz: f64,
    pub operating_freq_mhz: f64,
    pub contrast_at_operating: f64,
    pub pl_off_per_defect_per_s: f64,
    pub photon_rate_per_s: f64,
    pub measured_t_per_rthz: f64,
    pub shot_limit_t_per_rthz: f64,
    pub injected_amplitude_t: f64,
    pub recovered_amplitude_t: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub scenario_hash: String,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub modes: Vec<ModeSensitivity>,
    /// Field ASD per mode, in the order of `modes`.
    #[serde(skip)]
    pub spectra: Vec<AmplitudeSpectralDensity>,
    /// Field-converted lock-in output per mode.
    #[serde(skip)]
    pub traces: Vec<TimeSeries>,
}

/// Per-mode RNG seed; distinct for every (seed, mode) pair.
pub(crate) fn mode_seed(seed: u64, mode: LaserMode) -> u64 {
    seed.wrapping_mul(2).wrapping_add(mode.is_broadband() as u64)
}

fn run_mode(sc: &Scenario, mode: LaserMode) -> Result<(ModeSensitivity, AmplitudeSpectralDensity, TimeSeries)> {
    let s = &sc.sensing;
    let power = match mode {
        LaserMode::Resonant => s.resonant_power_w,
        LaserMode::Broadband => s.broadband_power_w,
    };
    let mut msc = sc.clone();
    msc.laser.mode = mode;
    msc.laser.resonant_power_w = s.resonant_power_w;
    msc.laser.broadband_power_w = s.broadband_power_w;
    let (spectrum, pl_off) = odmr_spectrum_with_pl(&msc)?;
    let slope = max_slope(&spectrum)?;
    let r = pl_off * s.n_defects;
    let gyro = gyromagnetic_hz_per_t(sc.spin.g);

    let cfg = LockInConfig {
        ref_freq_hz: s.ref_freq_hz,
        time_constant_s: s.time_constant_s,
        output_rate_hz: s.output_rate_hz,
        settle_time_constants: 5.0,
    };
    let decim = (s.internal_rate_hz / s.output_rate_hz).round() as usize;
    let settle = (cfg.settle_time_constants * s.time_constant_s * s.output_rate_hz).ceil() as usize;
    let gate = GateConfig {
        internal_rate_hz: s.internal_rate_hz,
        ref_freq_hz: s.ref_freq_hz,
        contrast: slope.contrast_at_operating,
        alpha: slope.alpha,
        gyro_hz_per_t: gyro,
    };
    let nm = s.noise.for_mode(mode);
    let seed = mode_seed(s.seed, mode);
    let noise = NoiseModel {
        photon_rate: r,
        shot_noise: true,
        poisson: s.poisson,
        tones: nm.tones.clone(),
        skirt_asd_t_per_rthz: nm.skirt_asd_t_per_rthz,
        skirt_corner_hz: nm.skirt_corner_hz,
        seed,
    };
    let injected = (s.inject_amplitude_t > 0.0).then_some(InjectedField {
        amplitude_t: s.inject_amplitude_t,
        freq_hz: s.inject_freq_hz,
    });

    let raw = synthesize_timeseries(&gate, (s.samples + settle) * decim, &noise, injected)?;
    let demod = lock_in(&raw, &cfg)?;
    drop(raw);
    let field = to_field(&demod, &slope, r, sc.spin.g)?;
    let asd = welch_asd(&field, s.segment_len, s.overlap)?;
    let measured = band_median(&asd, s.band_low_hz, s.band_high_hz)?;
    let recovered = match injected {
        Some(inj) => Some(tone_amplitude(&asd, inj.freq_hz, 4)?),
        None => None,
    };
    let row = ModeSensitivity {
        mode: mode.name().into(),
        laser_power_w: power,
        alpha_per_hz: slope.alpha,
        operating_freq_mhz: slope.operating_freq_mhz,
        contrast_at_operating: slope.contrast_at_operating,
        pl_off_per_defect_per_s: pl_off,
        photon_rate_per_s: r,
        measured_t_per_rthz: measured,
        shot_limit_t_per_rthz: shot_noise_limit(slope.alpha, r)?,
        injected_amplitude_t: s.inject_amplitude_t,
        recovered_amplitude_t: recovered,
        seed,
    };
    Ok((row, asd, field))
}

/// Synthesizes, demodulates and analyses a trace for both excitation modes at
/// the sensing powers, giving one table row per mode.
pub fn sensitivity_report(sc: &Scenario) -> Result<SensitivityReport> {
    sc.validate()?;
    let runs = [LaserMode::Resonant, LaserMode::Broadband]
        .par_iter()
        .map(|&m| run_mode(sc, m))
        .collect::<Result<Vec<_>>>()?;
    let mut report = SensitivityReport {
        scenario_hash: sc.hash(),
        band_low_hz: sc.sensing.band_low_hz,
        band_high_hz: sc.sensing.band_high_hz,
        modes: Vec::new(),
        spectra: Vec::new(),
        traces: Vec::new(),
    };
    for (row, asd, field) in runs {
        report.modes.push(row);
        report.spectra.push(asd);
        report.traces.push(field);
    }
    Ok(report)
}
