use serde::Serialize;

use crate::ensemble::EnsembleCurve;
use crate::error::{Result, SimError};

/// Steepest point of an ODMR spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdmrSlope {
    /// max |dC/df|, Hz⁻¹.
    pub alpha: f64,
    pub operating_freq_mhz: f64,
    /// Location of the largest |C| in the spectrum.
    pub peak_freq_mhz: f64,
    pub contrast_at_operating: f64,
    pub source: String,
}

/// Max slope of a contrast spectrum whose abscissa is RF frequency in MHz.
pub fn max_slope(spectrum: &EnsembleCurve) -> Result<OdmrSlope> {
    if spectrum.abscissa.unit != "mhz" {
        return Err(SimError::Format(format!("expected an RF axis in MHz, got `{}`", spectrum.abscissa.label())));
    }
    let c = spectrum.series("contrast").ok_or_else(|| SimError::Format("spectrum has no contrast column".into()))?;
    let source = spectrum.metadata.get("scenario_hash").cloned().unwrap_or_default();
    max_slope_xy(&spectrum.abscissa.values, c, &source)
}

/// Same as [`max_slope`] on raw arrays. Derivatives come from a 5-point local
/// quadratic fit, which needs a uniform grid.
pub fn max_slope_xy(freq_mhz: &[f64], contrast: &[f64], source: &str) -> Result<OdmrSlope> {
    let n = freq_mhz.len();
    if n != contrast.len() {
        return Err(SimError::Format("frequency and contrast lengths differ".into()));
    }
    if n < 7 {
        return Err(SimError::InsufficientData(format!("{n} spectrum points, need at least 7")));
    }
    let h_mhz = (freq_mhz[n - 1] - freq_mhz[0]) / (n - 1) as f64;
    if !(h_mhz > 0.0) {
        return Err(SimError::Format("frequency grid must be increasing".into()));
    }
    if freq_mhz.windows(2).any(|w| ((w[1] - w[0]) / h_mhz - 1.0).abs() > 1e-6) {
        return Err(SimError::Format("frequency grid must be uniform".into()));
    }

    let peak = (0..n).fold(0, |best, i| if contrast[i].abs() > contrast[best].abs() { i } else { best });
    let amp = contrast[peak].abs();
    if amp == 0.0 {
        return Ok(OdmrSlope {
            alpha: 0.0,
            operating_freq_mhz: freq_mhz[2],
            peak_freq_mhz: freq_mhz[peak],
            contrast_at_operating: contrast[2],
            source: source.into(),
        });
    }
    let fwhm = peak_fwhm(freq_mhz, contrast, peak);
    if h_mhz > fwhm / 5.0 {
        return Err(SimError::SpectrumTooCoarse {
            spacing_mhz: h_mhz,
            limit_mhz: fwhm / 5.0,
        });
    }

    let h_hz = h_mhz * 1e6;
    let mut best = (2, 0.0f64);
    for i in 2..n - 2 {
        let d = (-2.0 * contrast[i - 2] - contrast[i - 1] + contrast[i + 1] + 2.0 * contrast[i + 2]) / (10.0 * h_hz);
        if d.abs() > best.1.abs() {
            best = (i, d);
        }
    }
    Ok(OdmrSlope {
        alpha: best.1.abs(),
        operating_freq_mhz: freq_mhz[best.0],
        peak_freq_mhz: freq_mhz[peak],
        contrast_at_operating: contrast[best.0],
        source: source.into(),
    })
}

fn peak_fwhm(x: &[f64], y: &[f64], peak: usize) -> f64 {
    let half = y[peak].abs() / 2.0;
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = peak;
        for i in range {
            if y[i].abs() < half {
                let (a, b) = (y[prev].abs(), y[i].abs());
                return Some(x[prev] + (a - half) / (a - b) * (x[i] - x[prev]));
            }
            prev = i;
        }
        None
    };
    let left = cross(&mut (0..peak).rev());
    let right = cross(&mut (peak + 1..x.len()));
    match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (x[peak] - l),
        (None, Some(r)) => 2.0 * (r - x[peak]),
        (None, None) => x[x.len() - 1] - x[0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentzian(c0: f64, f0: f64, hwhm: f64, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|f| c0 / (1.0 + ((f - f0) / hwhm).powi(2))).collect()
    }

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn lorentzian_closed_form() {
        let f = grid(40.0, 60.0, 2001);
        let (c0, f0, g) = (0.4, 50.0, 1.0);
        let s = max_slope_xy(&f, &lorentzian(c0, f0, g, &f), "").unwrap();
        let expect = 9.0 / (8.0 * 3f64.sqrt()) * c0 / (g * 1e6);
        assert!((s.alpha / expect - 1.0).abs() < 2e-3, "{} vs {}", s.alpha, expect);
        assert!(((s.operating_freq_mhz - f0).abs() - g / 3f64.sqrt()).abs() < 0.011);
        assert_eq!(s.peak_freq_mhz, 50.0);
    }

    #[test]
    fn flat_spectrum_zero_slope() {
        let f = grid(30.0, 40.0, 101);
        let s = max_slope_xy(&f, &vec![0.0; 101], "").unwrap();
        assert_eq!(s.alpha, 0.0);
    }

    #[test]
    fn scaling_doubles_alpha() {
        let f = grid(40.0, 60.0, 401);
        let c = lorentzian(0.3, 48.0, 0.8, &f);
        let c2: Vec<f64> = c.iter().map(|v| 2.0 * v).collect();
        let a = max_slope_xy(&f, &c, "").unwrap();
        let b = max_slope_xy(&f, &c2, "").unwrap();
        assert_eq!(b.alpha, 2.0 * a.alpha);
        assert_eq!(a.operating_freq_mhz, b.operating_freq_mhz);
    }

    #[test]
    fn coarse_grid_rejected() {
        let f = grid(40.0, 60.0, 41);
        let err = max_slope_xy(&f, &lorentzian(0.3, 50.0, 0.5, &f), "").unwrap_err();
        assert!(matches!(err, SimError::SpectrumTooCoarse { .. }), "{err}");
        assert!(err.to_string().contains("refine"));
    }

    #[test]
    fn short_or_uneven_rejected() {
        assert!(max_slope_xy(&[1.0, 2.0, 3.0], &[0.0, 1.0, 0.0], "").is_err());
        let f = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0];
        assert!(max_slope_xy(&f, &[0.0; 7], "").is_err());
    }
}
