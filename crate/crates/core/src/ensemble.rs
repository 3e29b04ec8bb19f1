//! Ensemble averages over the inhomogeneous zero-phonon-line distribution and
//! the laser spectrum: ODMR spectra, PLE scans and contrast sweeps.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erf;

use crate::constants::{nm_to_thz, thz_to_nm};
use crate::dynamics::{optical_rate, OpticalRates, RateParams, ReducedDefect, RfCoupling, RfDrive, rf_couplings};
use crate::error::{Result, SimError};
use crate::scenario::{LaserMode, Scenario, TemperatureKind};
use crate::spin::{spin_lines, NuclearProjection, SpinProjection, TransitionTable, DEFAULT_WEIGHT_FLOOR};

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Gaussian spread of zero-phonon-line frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InhomogeneousDist {
    pub center_thz: f64,
    pub fwhm_ghz: f64,
}

impl InhomogeneousDist {
    pub fn from_nm(center_nm: f64, fwhm_ghz: f64) -> Self {
        Self {
            center_thz: nm_to_thz(center_nm),
            fwhm_ghz,
        }
    }

    pub fn sigma_hz(&self) -> f64 {
        self.fwhm_ghz * 1e9 / FWHM_PER_SIGMA
    }

    /// Unit-area density in Hz⁻¹ at offset `x` from the centre.
    pub fn density(&self, x: f64) -> f64 {
        let s = self.sigma_hz();
        (-0.5 * (x / s).powi(2)).exp() / (s * (2.0 * PI).sqrt())
    }
}

/// A narrow feature of the integrand, used to place quadrature nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub offset_hz: f64,
    pub width_hz: f64,
}

/// Defect classes, indexed by the offset (Hz) of their mean zero-phonon line
/// from the ensemble centre, with normalized Gaussian weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

enum Component {
    Gauss { sigma: f64 },
    Cauchy { center: f64, hwhm: f64 },
}

impl Component {
    fn cdf(&self, x: f64) -> f64 {
        match *self {
            Component::Gauss { sigma } => 0.5 * (1.0 + erf(x / (sigma * std::f64::consts::SQRT_2))),
            Component::Cauchy { center, hwhm } => 0.5 + ((x - center) / hwhm).atan() / PI,
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            Component::Gauss { sigma } => (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt()),
            Component::Cauchy { center, hwhm } => hwhm / (PI * ((x - center).powi(2) + hwhm * hwhm)),
        }
    }
}

struct Mixture {
    /// (component, cdf at −limit, truncated mass, mixture share)
    parts: Vec<(Component, f64, f64, f64)>,
    limit: f64,
}

impl Mixture {
    fn new(sigma: f64, limit: f64, features: &[Resonance]) -> Self {
        let mut comps = vec![Component::Gauss { sigma }];
        comps.extend(features.iter().map(|f| Component::Cauchy {
            center: f.offset_hz,
            hwhm: 0.5 * f.width_hz,
        }));
        // half the nodes follow the smooth Gaussian, half the resonances
        let share = |i: usize| match (i, features.len()) {
            (_, 0) => 1.0,
            (0, _) => 0.5,
            (_, k) => 0.5 / k as f64,
        };
        let parts = comps
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let lo = c.cdf(-limit);
                let mass = c.cdf(limit) - lo;
                (c, lo, mass, share(i))
            })
            .collect();
        Self { parts, limit }
    }

    fn cdf(&self, x: f64) -> f64 {
        self.parts.iter().map(|(c, lo, mass, p)| p * (c.cdf(x) - lo) / mass).sum()
    }

    fn pdf(&self, x: f64) -> f64 {
        self.parts.iter().map(|(c, _, mass, p)| p * c.pdf(x) / mass).sum()
    }

    fn quantile(&self, u: f64) -> f64 {
        let (mut a, mut b) = (-self.limit, self.limit);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if self.cdf(m) < u {
                a = m;
            } else {
                b = m;
            }
            if b - a <= 1e-12 * self.limit {
                break;
            }
        }
        0.5 * (a + b)
    }
}

/// Nodes at midpoint quantiles of a mixture of the Gaussian and Lorentzians at
/// `features`, weighted by the Gaussian density over the mixture density.
/// Narrow resonances far inside the Gaussian are resolved without a dense grid.
pub fn detuning_quadrature(dist: &InhomogeneousDist, n: usize, cutoff_sigma: f64, features: &[Resonance]) -> Result<Quadrature> {
    if n < 3 {
        return Err(SimError::param("quadrature", "need at least 3 nodes"));
    }
    if !(cutoff_sigma >= 3.0) {
        return Err(SimError::param("cutoff_sigma", "must be ≥ 3"));
    }
    if !(dist.fwhm_ghz > 0.0) {
        return Err(SimError::param("fwhm_ghz", "must be > 0"));
    }
    if features.iter().any(|f| !(f.width_hz > 0.0) || !f.offset_hz.is_finite()) {
        return Err(SimError::param("features", "widths must be > 0"));
    }
    let sigma = dist.sigma_hz();
    let mix = Mixture::new(sigma, cutoff_sigma * sigma, features);
    let nodes: Vec<f64> = (0..n).map(|i| mix.quantile((i as f64 + 0.5) / n as f64)).collect();
    let raw: Vec<f64> = nodes.iter().map(|&x| dist.density(x) / mix.pdf(x)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    Ok(Quadrature { nodes, weights })
}

/// Optical resonances of the class grid for a laser at `laser_offset_hz` from
/// the ensemble centre: classes whose ±1/2 or ±3/2 line meets the laser.
pub fn optical_features(laser_offset_hz: f64, delta_opt_hz: f64, width_hz: f64) -> [Resonance; 2] {
    [
        Resonance {
            offset_hz: laser_offset_hz - 0.5 * delta_opt_hz,
            width_hz,
        },
        Resonance {
            offset_hz: laser_offset_hz + 0.5 * delta_opt_hz,
            width_hz,
        },
    ]
}

/// Dwell-time (arcsine) distribution of a sinusoidally swept laser with
/// peak-to-peak `span_hz`, as Gauss-Chebyshev nodes of equal weight.
/// `resolution_hz` sets the node density; zero span gives one node.
pub fn modulated_laser_distribution(span_hz: f64, resolution_hz: f64) -> Vec<(f64, f64)> {
    if span_hz <= 0.0 {
        return vec![(0.0, 1.0)];
    }
    let m = ((8.0 * span_hz / resolution_hz).ceil() as usize).max(16);
    let w = 1.0 / m as f64;
    (0..m)
        .map(|j| (0.5 * span_hz * (PI * (j as f64 + 0.5) / m as f64).cos(), w))
        .collect()
}

/// Homogeneous linewidth against temperature, Γ(T) = γ₀ + A·f(T) with
/// f = exp(−E/k_BT) (activated) or Tⁿ (power law).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemperatureModel {
    pub kind: TemperatureKind,
    pub gamma0_mhz: f64,
    pub amplitude_mhz: f64,
    /// Activation energy in meV, or the exponent for a power law.
    pub parameter: f64,
}

impl TemperatureModel {
    /// Solve A and E (or n) so that Γ passes through both pins.
    pub fn from_pins(kind: TemperatureKind, gamma0_mhz: f64, low: (f64, f64), high: (f64, f64)) -> Result<Self> {
        let ((t1, g1), (t2, g2)) = (low, high);
        if !(t1 > 0.0 && t2 > t1) {
            return Err(SimError::param("temperature pins", "need 0 < T_low < T_high"));
        }
        if !(gamma0_mhz > 0.0 && g1 > gamma0_mhz && g2 > g1) {
            return Err(SimError::param("temperature pins", "need γ₀ < Γ(T_low) < Γ(T_high)"));
        }
        let ratio = ((g2 - gamma0_mhz) / (g1 - gamma0_mhz)).ln();
        let (amplitude_mhz, parameter) = match kind {
            TemperatureKind::Activated => {
                let e_over_k = ratio / (1.0 / t1 - 1.0 / t2);
                ((g1 - gamma0_mhz) * (e_over_k / t1).exp(), e_over_k * crate::constants::K_B_MEV_PER_K)
            }
            TemperatureKind::PowerLaw => {
                let n = ratio / (t2 / t1).ln();
                ((g1 - gamma0_mhz) / t1.powf(n), n)
            }
        };
        Ok(Self {
            kind,
            gamma0_mhz,
            amplitude_mhz,
            parameter,
        })
    }

    pub fn from_scenario(sc: &Scenario) -> Result<Self> {
        let t = &sc.temperature;
        Self::from_pins(t.model, t.gamma0_mhz, (t.pin_low_k, t.pin_low_mhz), (t.pin_high_k, t.pin_high_mhz))
    }

    pub fn gamma_hom_mhz(&self, t_k: f64) -> f64 {
        if t_k <= 0.0 {
            return self.gamma0_mhz;
        }
        let f = match self.kind {
            TemperatureKind::Activated => (-self.parameter / (crate::constants::K_B_MEV_PER_K * t_k)).exp(),
            TemperatureKind::PowerLaw => t_k.powf(self.parameter),
        };
        self.gamma0_mhz + self.amplitude_mhz * f
    }

    pub fn describe(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let kind = match self.kind {
            TemperatureKind::Activated => "activated",
            TemperatureKind::PowerLaw => "power-law",
        };
        m.insert("temperature_model".into(), kind.into());
        m.insert("gamma0_mhz".into(), format!("{}", self.gamma0_mhz));
        m.insert("amplitude_mhz".into(), format!("{:e}", self.amplitude_mhz));
        let key = match self.kind {
            TemperatureKind::Activated => "activation_mev",
            TemperatureKind::PowerLaw => "exponent",
        };
        m.insert(key.into(), format!("{}", self.parameter));
        m
    }
}

/// Fraction of defects within one homogeneous FWHM of the laser, weighted at
/// the line centre: γ_hom·g(0) with g the unit-area Gaussian of FWHM γ_inh.
/// Both widths in the same unit.
pub fn sub_ensemble_fraction(gamma_hom: f64, gamma_inh: f64) -> Result<f64> {
    if !(gamma_hom > 0.0 && gamma_inh > 0.0) {
        return Err(SimError::param("linewidth", "both widths must be > 0"));
    }
    if gamma_hom >= gamma_inh {
        return Err(SimError::param("gamma_hom", "must be below the inhomogeneous width"));
    }
    let g0 = 2.0 * (std::f64::consts::LN_2 / PI).sqrt() / gamma_inh;
    Ok(gamma_hom * g0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: &str, unit: &str, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            values,
        }
    }

    /// Header label such as `rf_mhz` or `contrast`.
    pub fn label(&self) -> String {
        if self.unit.is_empty() {
            self.name.clone()
        } else {
            format!("{}_{}", self.name, self.unit)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleCurve {
    pub abscissa: Column,
    pub series: Vec<Column>,
    pub metadata: BTreeMap<String, String>,
}

impl EnsembleCurve {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.abscissa.values.len();
        for c in &self.series {
            if c.values.len() != n {
                return Err(SimError::Format(format!("column {} has {} rows, expected {n}", c.name, c.values.len())));
            }
        }
        let finite = self.abscissa.values.iter().chain(self.series.iter().flat_map(|c| c.values.iter())).all(|v| v.is_finite());
        if !finite {
            return Err(SimError::Format("non-finite value in curve".into()));
        }
        Ok(())
    }
}

/// Defects sharing one spin Hamiltonian, with their share of the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSpecies {
    pub weight: f64,
    pub table: TransitionTable,
}

/// Uncoupled defects plus, when `satellite_weight > 0`, the two frozen
/// nuclear projections of defects carrying one coupled nucleus.
pub fn spin_species(sc: &Scenario) -> Result<Vec<SpinSpecies>> {
    let zeeman = sc.zeeman();
    let hf = sc.hyperfine();
    let axis = sc.drive_axis();
    let sw = hf.satellite_weight;
    let mut out = vec![SpinSpecies {
        weight: 1.0 - sw,
        table: spin_lines(&zeeman, None, &axis, DEFAULT_WEIGHT_FLOOR)?,
    }];
    if sw > 0.0 {
        for m_i in [NuclearProjection::Up, NuclearProjection::Down] {
            out.push(SpinSpecies {
                weight: 0.5 * sw,
                table: spin_lines(&zeeman, Some((&hf, m_i)), &axis, DEFAULT_WEIGHT_FLOOR)?,
            });
        }
    }
    Ok(out)
}

/// Laser as seen by the defect classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserSpec {
    /// Centre frequency minus the ensemble centre, Hz.
    pub offset_hz: f64,
    /// On-resonance excitation rate, s⁻¹.
    pub w0: f64,
    /// Peak-to-peak modulation span, Hz.
    pub mod_span_hz: f64,
    pub broadband: bool,
}

/// Everything needed to evaluate ensemble PL for one scenario.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub rates: RateParams,
    pub species: Vec<SpinSpecies>,
    pub dist: InhomogeneousDist,
    pub quadrature: usize,
    pub cutoff_sigma: f64,
}

/// Ensemble-averaged PL per defect with RF off and at each RF frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePl {
    pub off: f64,
    pub on: Vec<f64>,
}

impl EnsemblePl {
    pub fn contrast(&self) -> Result<Vec<f64>> {
        self.on.iter().map(|&on| crate::dynamics::contrast_from_pl(on, self.off)).collect()
    }
}

impl EnsembleModel {
    pub fn from_scenario(sc: &Scenario) -> Result<Self> {
        let rates = sc.rate_params();
        rates.validate()?;
        Ok(Self {
            rates,
            species: spin_species(sc)?,
            dist: InhomogeneousDist::from_nm(sc.ensemble.center_nm, sc.ensemble.fwhm_ghz),
            quadrature: sc.ensemble.quadrature,
            cutoff_sigma: sc.ensemble.cutoff_sigma,
        })
    }

    pub fn with_gamma_hom(&self, gamma_hom_hz: f64) -> Self {
        let mut m = self.clone();
        m.rates.gamma_hom = gamma_hom_hz;
        m
    }

    /// Frequency of the strongest uncoupled line between `a` and `b`, MHz.
    pub fn line_mhz(&self, a: SpinProjection, b: SpinProjection) -> Result<f64> {
        self.species[0]
            .table
            .find(a, b)
            .map(|l| l.frequency_mhz)
            .ok_or_else(|| SimError::param("transition", format!("no {a} ↔ {b} line above the weight floor")))
    }

    /// The −3/2 ↔ −1/2 line every sweep reports.
    pub fn reference_line_mhz(&self) -> Result<f64> {
        self.line_mhz(SpinProjection::MINUS_3_2, SpinProjection::MINUS_1_2)
    }

    fn class_grid(&self, laser: &LaserSpec) -> Result<Quadrature> {
        if laser.broadband {
            return Ok(Quadrature {
                nodes: vec![0.0],
                weights: vec![1.0],
            });
        }
        let r = &self.rates;
        let sat = r.saturation_rate();
        let broadened = r.gamma_hom * (1.0 + if sat > 0.0 { laser.w0 / sat } else { 0.0 }).sqrt();
        let width = broadened + laser.mod_span_hz;
        let features = optical_features(laser.offset_hz, r.delta_opt, width);
        detuning_quadrature(&self.dist, self.quadrature, self.cutoff_sigma, &features)
    }

    /// Optical rates of the class whose mean line sits `x` Hz from the centre.
    pub fn class_optical(&self, laser: &LaserSpec, x: f64, sweep: &[(f64, f64)]) -> OpticalRates {
        if laser.broadband {
            return OpticalRates {
                w_12: laser.w0,
                w_32: laser.w0,
            };
        }
        let r = &self.rates;
        let d12 = laser.offset_hz - x - 0.5 * r.delta_opt;
        let (mut w_12, mut w_32) = (0.0, 0.0);
        for &(nu, w) in sweep {
            w_12 += w * optical_rate(d12 + nu, r.gamma_hom, laser.w0);
            w_32 += w * optical_rate(d12 + nu + r.delta_opt, r.gamma_hom, laser.w0);
        }
        OpticalRates { w_12, w_32 }
    }

    /// PL per defect averaged over classes and spin species.
    pub fn evaluate(&self, laser: &LaserSpec, rf: &[RfDrive]) -> Result<EnsemblePl> {
        let grid = self.class_grid(laser)?;
        let sweep = modulated_laser_distribution(laser.mod_span_hz, self.rates.gamma_hom);
        let couplings: Vec<Vec<Vec<RfCoupling>>> = rf
            .iter()
            .map(|drive| {
                drive.validate()?;
                Ok(self.species.iter().map(|s| rf_couplings(drive, &s.table)).collect())
            })
            .collect::<Result<_>>()?;
        let per_class: Vec<(f64, Vec<f64>)> = grid
            .nodes
            .par_iter()
            .enumerate()
            .map(|(k, &x)| {
                let optical = self.class_optical(laser, x, &sweep);
                let wrap = |source: SimError| SimError::DefectClass {
                    class: k,
                    offset_ghz: x * 1e-9,
                    source: Box::new(source),
                };
                let defect = ReducedDefect::new(&self.rates, optical).map_err(wrap)?;
                let off = defect.pl(&[]).map_err(wrap)?;
                let on = couplings
                    .iter()
                    .map(|per_species| {
                        let mut acc = 0.0;
                        for (s, c) in self.species.iter().zip(per_species) {
                            let pl = if c.is_empty() { off } else { defect.pl(c).map_err(wrap)? };
                            acc += s.weight * pl;
                        }
                        Ok(acc)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok((off, on))
            })
            .collect::<Result<_>>()?;
        let mut off = 0.0;
        let mut on = vec![0.0; rf.len()];
        for ((pl_off, pl_on), w) in per_class.iter().zip(&grid.weights) {
            off += w * pl_off;
            for (acc, v) in on.iter_mut().zip(pl_on) {
                *acc += w * v;
            }
        }
        Ok(EnsemblePl { off, on })
    }

    /// Contrast of the reference line, RF tuned to its centre.
    pub fn peak_contrast(&self, laser: &LaserSpec, omega: f64, gamma2: f64) -> Result<(f64, f64)> {
        let drive = RfDrive {
            frequency: self.reference_line_mhz()?,
            omega,
            gamma2,
        };
        let pl = self.evaluate(laser, &[drive])?;
        Ok((pl.contrast()?[0], pl.off))
    }
}

fn base_metadata(sc: &Scenario, model: &EnsembleModel) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("scenario_hash".into(), sc.hash());
    m.insert("quadrature".into(), model.quadrature.to_string());
    m.insert("cutoff_sigma".into(), model.cutoff_sigma.to_string());
    m
}

/// Laser for one scenario mode at a given power.
pub fn laser_spec(sc: &Scenario, mode: LaserMode, power_w: f64, mod_span_ghz: f64) -> LaserSpec {
    LaserSpec {
        offset_hz: sc.laser_offset_hz(),
        w0: sc.w0(mode, power_w),
        mod_span_hz: mod_span_ghz * 1e9,
        broadband: mode.is_broadband(),
    }
}

/// Contrast against RF frequency over the scenario's sweep, in the configured
/// laser mode.
pub fn ensemble_odmr_spectrum(sc: &Scenario) -> Result<EnsembleCurve> {
    odmr_spectrum_with_pl(sc).map(|(c, _)| c)
}

/// [`ensemble_odmr_spectrum`] together with the RF-off PL per defect.
pub fn odmr_spectrum_with_pl(sc: &Scenario) -> Result<(EnsembleCurve, f64)> {
    let model = EnsembleModel::from_scenario(sc)?;
    let mode = sc.laser.mode;
    let laser = laser_spec(sc, mode, sc.laser_power(mode), sc.laser.mod_span_ghz);
    let freqs = sc.rf_grid_mhz();
    let drives: Vec<RfDrive> = freqs.iter().map(|&f| sc.rf_drive(f)).collect();
    let pl = model.evaluate(&laser, &drives)?;
    let contrast = pl.contrast()?;
    let mut metadata = base_metadata(sc, &model);
    metadata.insert("mode".into(), mode.name().into());
    metadata.insert("rf_power_dbm".into(), sc.rf.power_dbm.to_string());
    metadata.insert("pl_off_per_s".into(), format!("{:e}", pl.off));
    let curve = EnsembleCurve {
        abscissa: Column::new("rf", "mhz", freqs),
        series: vec![Column::new("contrast", "", contrast)],
        metadata,
    };
    Ok((curve, pl.off))
}

/// Peak contrast of the reference line and RF-off PL per defect against laser
/// power, for both excitation modes.
pub fn contrast_vs_power(sc: &Scenario, powers_w: &[f64]) -> Result<(EnsembleCurve, EnsembleCurve)> {
    if powers_w.iter().any(|&p| !(p > 0.0)) {
        return Err(SimError::param("powers", "must be > 0 W"));
    }
    let model = EnsembleModel::from_scenario(sc)?;
    let omega = sc.omega_at(sc.rf.power_dbm);
    let mut contrast = Vec::new();
    let mut pl = Vec::new();
    for mode in [LaserMode::Resonant, LaserMode::Broadband] {
        let points = powers_w
            .iter()
            .map(|&p| model.peak_contrast(&laser_spec(sc, mode, p, sc.laser.mod_span_ghz), omega, sc.rf.gamma2_per_s))
            .collect::<Result<Vec<_>>>()?;
        contrast.push(Column::new(&format!("contrast_{}", mode.name()), "", points.iter().map(|p| p.0).collect()));
        pl.push(Column::new(&format!("pl_{}", mode.name()), "per_s", points.iter().map(|p| p.1).collect()));
    }
    let metadata = base_metadata(sc, &model);
    let abscissa = Column::new("power", "w", powers_w.to_vec());
    Ok((
        EnsembleCurve {
            abscissa: abscissa.clone(),
            series: contrast,
            metadata: metadata.clone(),
        },
        EnsembleCurve {
            abscissa,
            series: pl,
            metadata,
        },
    ))
}

/// RF-off PL per defect against laser wavelength at low resonant power.
pub fn ple_scan(sc: &Scenario, wavelengths_nm: &[f64], power_w: f64) -> Result<EnsembleCurve> {
    let model = EnsembleModel::from_scenario(sc)?;
    let w0 = sc.w0(LaserMode::Resonant, power_w);
    let center = model.dist.center_thz;
    let pl = wavelengths_nm
        .iter()
        .map(|&nm| {
            let laser = LaserSpec {
                offset_hz: (nm_to_thz(nm) - center) * 1e12,
                w0,
                mod_span_hz: 0.0,
                broadband: false,
            };
            Ok(model.evaluate(&laser, &[])?.off)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut metadata = base_metadata(sc, &model);
    metadata.insert("power_w".into(), format!("{power_w:e}"));
    Ok(EnsembleCurve {
        abscissa: Column::new("wavelength", "nm", wavelengths_nm.to_vec()),
        series: vec![Column::new("pl", "per_s", pl)],
        metadata,
    })
}

/// Default PLE grid: ±`half_range_nm` around the ensemble centre.
pub fn ple_grid(sc: &Scenario) -> Vec<f64> {
    let (c, h, n) = (sc.ensemble.center_nm, sc.sweeps.ple_half_range_nm, sc.sweeps.ple_points);
    (0..n).map(|i| c - h + 2.0 * h * i as f64 / (n - 1) as f64).collect()
}

/// Peak contrast of the reference line against peak-to-peak modulation span,
/// with resonant excitation at the configured power.
pub fn contrast_vs_modulation(sc: &Scenario, spans_ghz: &[f64]) -> Result<EnsembleCurve> {
    if spans_ghz.iter().any(|&s| !(s >= 0.0)) {
        return Err(SimError::param("spans", "must be ≥ 0 GHz"));
    }
    let model = EnsembleModel::from_scenario(sc)?;
    let omega = sc.omega_at(sc.rf.power_dbm);
    let power = sc.laser.resonant_power_w;
    let c = spans_ghz
        .iter()
        .map(|&s| Ok(model.peak_contrast(&laser_spec(sc, LaserMode::Resonant, power, s), omega, sc.rf.gamma2_per_s)?.0))
        .collect::<Result<Vec<f64>>>()?;
    let mut metadata = base_metadata(sc, &model);
    metadata.insert("mod_rate_khz".into(), sc.laser.mod_rate_khz.to_string());
    metadata.insert("span_convention".into(), "peak-to-peak".into());
    Ok(EnsembleCurve {
        abscissa: Column::new("span", "ghz", spans_ghz.to_vec()),
        series: vec![Column::new("contrast", "", c)],
        metadata,
    })
}

/// Peak contrast of the reference line against temperature, the homogeneous
/// linewidth following `tm`.
pub fn contrast_vs_temperature(sc: &Scenario, temps_k: &[f64], tm: &TemperatureModel) -> Result<EnsembleCurve> {
    if temps_k.iter().any(|&t| !(t > 0.0)) {
        return Err(SimError::param("temperatures", "must be > 0 K"));
    }
    let base = EnsembleModel::from_scenario(sc)?;
    let omega = sc.omega_at(sc.rf.power_dbm);
    let power = sc.laser.resonant_power_w;
    let mut widths = Vec::with_capacity(temps_k.len());
    let mut c = Vec::with_capacity(temps_k.len());
    for &t in temps_k {
        let g = tm.gamma_hom_mhz(t);
        let model = base.with_gamma_hom(g * 1e6);
        let laser = laser_spec(sc, LaserMode::Resonant, power, sc.laser.mod_span_ghz);
        c.push(model.peak_contrast(&laser, omega, sc.rf.gamma2_per_s)?.0);
        widths.push(g);
    }
    let mut metadata = base_metadata(sc, &base);
    metadata.extend(tm.describe());
    Ok(EnsembleCurve {
        abscissa: Column::new("temperature", "k", temps_k.to_vec()),
        series: vec![Column::new("contrast", "", c), Column::new("gamma_hom", "mhz", widths)],
        metadata,
    })
}

/// Location and full width at half maximum of the largest peak of `y(x)`.
/// The peak is refined by a parabola through the top three samples; the
/// half-maximum crossings are linearly interpolated.
pub fn peak_and_fwhm(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(SimError::InsufficientData("need at least 3 matching samples".into()));
    }
    let (i, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let peak = if i > 0 && i + 1 < y.len() {
        let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        x[i] + shift * (x[i + 1] - x[i - 1]) / 2.0
    } else {
        x[i]
    };
    let half = 0.5 * ymax;
    let cross = |j: usize, k: usize| x[j] + (half - y[j]) * (x[k] - x[j]) / (y[k] - y[j]);
    let left = (1..=i).rev().find(|&j| y[j - 1] < half).map(|j| cross(j - 1, j));
    let right = (i..y.len() - 1).find(|&j| y[j + 1] < half).map(|j| cross(j, j + 1));
    match (left, right) {
        (Some(l), Some(r)) => Ok((peak, (r - l).abs())),
        _ => Err(SimError::InsufficientData("peak does not fall below half maximum inside the grid".into())),
    }
}

/// Wavelength of a frequency offset from `center_nm`, nm.
pub fn offset_to_nm(center_nm: f64, offset_hz: f64) -> f64 {
    thz_to_nm(nm_to_thz(center_nm) + offset_hz * 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::defect_pl;
    use crate::constants::{nm_width_to_ghz, UEV_IN_MHZ};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn dist() -> InhomogeneousDist {
        InhomogeneousDist::from_nm(916.49, 46.4)
    }

    #[test]
    fn weights_sum_to_one() {
        for n in [3, 10, 201, 401, 1000] {
            let q = detuning_quadrature(&dist(), n, 4.0, &optical_features(0.0, 1e9, 145e6)).unwrap();
            assert_eq!(q.nodes.len(), n);
            assert_abs_diff_eq!(q.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
            assert!(q.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn centred_laser_gives_symmetric_grid() {
        let q = detuning_quadrature(&dist(), 401, 4.0, &optical_features(0.0, 1e9, 145e6)).unwrap();
        let n = q.nodes.len();
        for k in 0..n / 2 {
            assert_abs_diff_eq!(q.nodes[k], -q.nodes[n - 1 - k], epsilon = 1e-6 * dist().sigma_hz());
            assert_relative_eq!(q.weights[k], q.weights[n - 1 - k], max_relative = 1e-6);
        }
    }

    fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
        h * (inner + 0.5 * (f(a) + f(b)))
    }

    #[test]
    fn quadrature_integrates_smooth_moments() {
        let d = dist();
        let s = d.sigma_hz();
        let q = detuning_quadrature(&d, 401, 4.0, &optical_features(3e9, 1e9, 145e6)).unwrap();
        let second: f64 = q.nodes.iter().zip(&q.weights).map(|(x, w)| w * x * x).sum();
        let mass = trapezoid(|x| d.density(x), -4.0 * s, 4.0 * s, 200_000);
        let exact = trapezoid(|x| x * x * d.density(x), -4.0 * s, 4.0 * s, 200_000) / mass;
        assert_relative_eq!(second, exact, max_relative = 5e-3);
    }

    #[test]
    fn quadrature_resolves_narrow_lorentzian() {
        let d = dist();
        let s = d.sigma_hz();
        let gamma = 145e6;
        let x0 = 2e9;
        let q = detuning_quadrature(&d, 401, 4.0, &[Resonance { offset_hz: x0, width_hz: gamma }]).unwrap();
        let num: f64 = q.nodes.iter().zip(&q.weights).map(|(x, w)| w * optical_rate(x - x0, gamma, 1.0)).sum();
        let mass = trapezoid(|x| d.density(x), -4.0 * s, 4.0 * s, 2_000_000);
        let exact = trapezoid(|x| d.density(x) * optical_rate(x - x0, gamma, 1.0), -4.0 * s, 4.0 * s, 2_000_000) / mass;
        assert_relative_eq!(num, exact, max_relative = 2e-3);
    }

    #[test]
    fn zero_span_is_delta() {
        assert_eq!(modulated_laser_distribution(0.0, 1e8), vec![(0.0, 1.0)]);
    }

    #[test]
    fn modulation_distribution_is_symmetric_arcsine() {
        let span = 5e9;
        let d = modulated_laser_distribution(span, 145e6);
        assert_abs_diff_eq!(d.iter().map(|p| p.1).sum::<f64>(), 1.0, epsilon = 1e-12);
        let mean: f64 = d.iter().map(|(x, w)| x * w).sum();
        assert!(mean.abs() < 1e-9 * span);
        assert!(d.iter().all(|(x, _)| x.abs() <= span / 2.0));
        // arcsine variance (span/2)²/2
        let var: f64 = d.iter().map(|(x, w)| x * x * w).sum();
        assert_relative_eq!(var, (span / 2.0).powi(2) / 2.0, max_relative = 1e-9);
        // dwell time piles up at the turning points
        let edge = d.iter().filter(|(x, _)| x.abs() > 0.4 * span).count();
        let middle = d.iter().filter(|(x, _)| x.abs() < 0.1 * span).count();
        assert!(edge > 2 * middle);
    }

    #[test]
    fn modulated_lorentzian_matches_closed_form() {
        // ⟨L(Δ + a cos θ)⟩_θ for L = b²/(x² + b²) is b·Im[1/√((Δ − ib)² − a²)]
        let (gamma, span) = (145e6, 3e9);
        let (a, b) = (span / 2.0, gamma / 2.0);
        let d = modulated_laser_distribution(span, gamma);
        for delta in [0.0, 0.3e9, 1.0e9, 1.6e9, 4e9] {
            let num: f64 = d.iter().map(|(x, w)| w * optical_rate(delta + x, gamma, 1.0)).sum();
            let z = Complex64::new(delta, -b);
            let mut root = (z * z - a * a).sqrt();
            if root.im * z.im < 0.0 {
                root = -root;
            }
            let exact = -(b / root).im;
            assert_relative_eq!(num, exact.abs(), max_relative = 1e-3);
        }
    }

    #[test]
    fn temperature_model_hits_pins() {
        for kind in [TemperatureKind::Activated, TemperatureKind::PowerLaw] {
            let tm = TemperatureModel::from_pins(kind, 145.0, (26.0, 250.0), (60.0, 30_000.0)).unwrap();
            assert_relative_eq!(tm.gamma_hom_mhz(26.0), 250.0, max_relative = 1e-10);
            assert_relative_eq!(tm.gamma_hom_mhz(60.0), 30_000.0, max_relative = 1e-10);
            let mut prev = tm.gamma_hom_mhz(0.0);
            assert_eq!(prev, 145.0);
            for t in (1..200).map(|k| k as f64 * 0.5) {
                let g = tm.gamma_hom_mhz(t);
                assert!(g >= prev && g >= 145.0);
                prev = g;
            }
        }
    }

    #[test]
    fn activated_energy_from_pins() {
        let tm = TemperatureModel::from_pins(TemperatureKind::Activated, 145.0, (26.0, 250.0), (60.0, 30_000.0)).unwrap();
        let e_over_k = (29_855.0f64 / 105.0).ln() / (1.0 / 26.0 - 1.0 / 60.0);
        assert_relative_eq!(tm.parameter / crate::constants::K_B_MEV_PER_K, e_over_k, max_relative = 1e-12);
        assert!(TemperatureModel::from_pins(TemperatureKind::Activated, 300.0, (26.0, 250.0), (60.0, 5e3)).is_err());
    }

    #[test]
    fn sub_ensemble_fraction_convention() {
        let f = sub_ensemble_fraction(0.6, 170.0).unwrap();
        assert_relative_eq!(f, 0.939_437_278_699_651_4 * 0.6 / 170.0, max_relative = 1e-12);
        assert_abs_diff_eq!(f * 100.0, 0.3316, epsilon = 5e-4);
        let tenth = sub_ensemble_fraction(17.0, 170.0).unwrap();
        assert_abs_diff_eq!(tenth, 0.0939, epsilon = 1e-4);
        let mhz = sub_ensemble_fraction(0.6 * UEV_IN_MHZ, 170.0 * UEV_IN_MHZ).unwrap();
        assert_relative_eq!(mhz, f, max_relative = 1e-12);
        let rounded = sub_ensemble_fraction(145.0, 41.1e3).unwrap();
        assert_relative_eq!(rounded, f, max_relative = 1e-3);
        assert!(sub_ensemble_fraction(2.0, 1.0).is_err());
    }

    #[test]
    fn peak_and_fwhm_of_gaussian() {
        let x: Vec<f64> = (0..401).map(|i| -10.0 + 0.05 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (-0.5 * ((v - 0.3) / 1.5f64).powi(2)).exp()).collect();
        let (p, w) = peak_and_fwhm(&x, &y).unwrap();
        assert_abs_diff_eq!(p, 0.3, epsilon = 1e-3);
        assert_relative_eq!(w, 1.5 * FWHM_PER_SIGMA, max_relative = 1e-3);
    }

    #[test]
    fn ple_width_conversion() {
        assert_abs_diff_eq!(nm_width_to_ghz(0.13, 916.49), 46.4, epsilon = 0.05);
    }

    fn small(sc: &mut Scenario) {
        sc.ensemble.quadrature = 101;
    }

    #[test]
    fn broadband_ensemble_equals_single_defect() {
        let sc = Scenario::offresonant_default();
        let model = EnsembleModel::from_scenario(&sc).unwrap();
        let laser = laser_spec(&sc, LaserMode::Broadband, 30e-3, 0.0);
        let f = model.reference_line_mhz().unwrap();
        let drive = sc.rf_drive(f);
        let pl = model.evaluate(&laser, &[drive]).unwrap();
        let c_ens = pl.contrast().unwrap()[0];
        let w0 = sc.w0(LaserMode::Broadband, 30e-3);
        let optical = OpticalRates { w_12: w0, w_32: w0 };
        let off = defect_pl(&model.rates, optical, &[]).unwrap();
        let mut on = 0.0;
        for s in &model.species {
            on += s.weight * defect_pl(&model.rates, optical, &rf_couplings(&drive, &s.table)).unwrap();
        }
        assert_relative_eq!(c_ens, (on - off) / off, max_relative = 1e-9);
    }

    #[test]
    fn zero_rf_gives_flat_spectrum() {
        let mut sc = Scenario::default();
        small(&mut sc);
        sc.rf.k_rf_per_s_per_sqrt_mw = 0.0;
        sc.rf.step_mhz = 5.0;
        let curve = ensemble_odmr_spectrum(&sc).unwrap();
        assert!(curve.series("contrast").unwrap().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn reordering_nodes_leaves_sum_unchanged() {
        let sc = Scenario::default();
        let model = EnsembleModel::from_scenario(&sc).unwrap();
        let laser = laser_spec(&sc, LaserMode::Resonant, 2e-6, 0.0);
        let q = model.class_grid(&laser).unwrap();
        let pls: Vec<f64> = q
            .nodes
            .iter()
            .map(|&x| defect_pl(&model.rates, model.class_optical(&laser, x, &[(0.0, 1.0)]), &[]).unwrap())
            .collect();
        let fwd: f64 = pls.iter().zip(&q.weights).map(|(p, w)| p * w).sum();
        let rev: f64 = pls.iter().zip(&q.weights).rev().map(|(p, w)| p * w).sum();
        assert_relative_eq!(fwd, rev, max_relative = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn ple_width_within_voigt_bounds(hom_mhz in 50.0f64..2000.0, inh_ghz in 5.0f64..60.0) {
            let mut sc = Scenario::default();
            sc.optical.gamma_hom_mhz = hom_mhz;
            sc.ensemble.fwhm_ghz = inh_ghz;
            sc.ensemble.quadrature = 201;
            let half = 1.2 * crate::constants::ghz_width_to_nm(inh_ghz + hom_mhz / 1e3 + 1.0, 916.49);
            let grid: Vec<f64> = (0..161).map(|i| 916.49 - half + 2.0 * half * i as f64 / 160.0).collect();
            let curve = ple_scan(&sc, &grid, 1e-9).unwrap();
            let (_, w_nm) = peak_and_fwhm(&grid, curve.series("pl").unwrap()).unwrap();
            let w = nm_width_to_ghz(w_nm, 916.49);
            let hom = hom_mhz / 1e3;
            let step = nm_width_to_ghz(2.0 * half / 160.0, 916.49);
            // two lines split by delta_opt widen the homogeneous part
            prop_assert!(w >= inh_ghz.max(hom) - step, "{w} < {inh_ghz}");
            prop_assert!(w <= inh_ghz + hom + 1.0 + step, "{w} > bound");
        }
    }
}
