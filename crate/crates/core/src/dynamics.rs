//! Per-defect rate equations: spin-conserving optical cycling, spin-dependent
//! intersystem crossing through a metastable pool, incoherent RF mixing and
//! ground-state relaxation. Steady state gives PL and single-defect contrast.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::spin::{SpinProjection, TransitionLine, TransitionTable};

pub const N_STATES: usize = 9;
pub type Generator = SMatrix<f64, N_STATES, N_STATES>;

/// Ground sublevels, indexed −3/2, −1/2, +1/2, +3/2.
pub const GROUND: [usize; 4] = [0, 1, 2, 3];
/// Excited sublevels in the same order.
pub const EXCITED: [usize; 4] = [4, 5, 6, 7];
pub const METASTABLE: usize = 8;

/// Steady-state occupation of the nine-level scheme
/// g(−3/2) g(−1/2) g(+1/2) g(+3/2) e(−3/2) e(−1/2) e(+1/2) e(+3/2) m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Populations(pub [f64; N_STATES]);

impl Populations {
    pub fn ground(&self, m: SpinProjection) -> f64 {
        self.0[GROUND[m.ground_index()]]
    }

    pub fn excited(&self, m: SpinProjection) -> f64 {
        self.0[EXCITED[m.ground_index()]]
    }

    pub fn metastable(&self) -> f64 {
        self.0[METASTABLE]
    }

    pub fn excited_total(&self) -> f64 {
        EXCITED.iter().map(|&i| self.0[i]).sum()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    /// Radiative decay e → g, s⁻¹.
    pub gamma_rad: f64,
    /// ISC e(±1/2) → m, s⁻¹.
    pub k_isc_12: f64,
    /// ISC e(±3/2) → m, s⁻¹.
    pub k_isc_32: f64,
    /// Fraction of metastable decay landing in g(±1/2).
    pub b_12: f64,
    /// Metastable decay rate, s⁻¹.
    pub gamma_m: f64,
    /// Ground-state population relaxation time, s. `f64::INFINITY` disables relaxation.
    pub t1: f64,
    /// Homogeneous ZPL FWHM, Hz.
    pub gamma_hom: f64,
    /// Splitting between the ±1/2 and ±3/2 spin-conserving optical lines, Hz.
    pub delta_opt: f64,
    /// Lumped sideband + collection efficiency applied to emitted photons.
    pub detection_fraction: f64,
}

impl RateParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("gamma_rad", self.gamma_rad),
            ("k_isc_12", self.k_isc_12),
            ("k_isc_32", self.k_isc_32),
            ("gamma_m", self.gamma_m),
            ("gamma_hom", self.gamma_hom),
            ("detection_fraction", self.detection_fraction),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SimError::param(name, format!("must be finite and ≥ 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.b_12) {
            return Err(SimError::param("b_12", "must lie in [0, 1]"));
        }
        if !(self.t1 > 0.0) {
            return Err(SimError::param("t1", "must be > 0 (use infinity to disable relaxation)"));
        }
        if !(self.delta_opt > 0.0) || !self.delta_opt.is_finite() {
            return Err(SimError::param("delta_opt", "must be > 0"));
        }
        Ok(())
    }

    /// Excitation rate at which a resonantly driven ±1/2 cycle is half saturated.
    pub fn saturation_rate(&self) -> f64 {
        0.5 * (self.gamma_rad + self.k_isc_12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserDrive {
    /// Laser frequency minus the defect's ±1/2 line, Hz.
    pub detuning: f64,
    /// On-resonance excitation rate, s⁻¹.
    pub w0: f64,
    /// Off-resonant, spin-unselective excitation.
    pub broadband: bool,
}

/// Excitation rates of the two spin-conserving optical lines.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OpticalRates {
    pub w_12: f64,
    pub w_32: f64,
}

impl LaserDrive {
    /// The ±3/2 line sits `delta_opt` below the ±1/2 line, so its detuning is
    /// `detuning + delta_opt`.
    pub fn optical_rates(&self, rates: &RateParams) -> OpticalRates {
        if self.broadband {
            return OpticalRates {
                w_12: self.w0,
                w_32: self.w0,
            };
        }
        OpticalRates {
            w_12: optical_rate(self.detuning, rates.gamma_hom, self.w0),
            w_32: optical_rate(self.detuning + rates.delta_opt, rates.gamma_hom, self.w0),
        }
    }
}

/// Lorentzian excitation rate with FWHM `gamma_hom`.
pub fn optical_rate(detuning: f64, gamma_hom: f64, w0: f64) -> f64 {
    let hw2 = 0.25 * gamma_hom * gamma_hom;
    if hw2 == 0.0 {
        return if detuning == 0.0 { w0 } else { 0.0 };
    }
    w0 * hw2 / (detuning * detuning + hw2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfDrive {
    /// Drive frequency, MHz.
    pub frequency: f64,
    /// Rabi-equivalent angular rate, s⁻¹.
    pub omega: f64,
    /// Inverse dephasing time 1/T2*, s⁻¹.
    pub gamma2: f64,
}

impl RfDrive {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0) {
            return Err(SimError::param("omega", "must be ≥ 0"));
        }
        if !(self.gamma2 > 0.0) {
            return Err(SimError::param("gamma2", "must be > 0"));
        }
        Ok(())
    }
}

/// Incoherent transfer rate between the two levels of `line`, including
/// power broadening through the saturation parameter s = wΩ²/γ₂².
pub fn rf_rate(rf: &RfDrive, line: &TransitionLine) -> f64 {
    let w = line.dipole_weight;
    if w == 0.0 || rf.omega == 0.0 {
        return 0.0;
    }
    let g2 = rf.gamma2;
    let drive = w * rf.omega * rf.omega;
    let s = drive / (g2 * g2);
    let det = 2.0 * std::f64::consts::PI * (rf.frequency - line.frequency_mhz) * 1e6;
    drive * (g2 / 2.0) / (det * det + g2 * g2 * (1.0 + s) / 4.0)
}

/// Symmetric RF coupling between two ground sublevels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfCoupling {
    pub a: SpinProjection,
    pub b: SpinProjection,
    pub rate: f64,
}

pub fn rf_couplings(rf: &RfDrive, table: &TransitionTable) -> Vec<RfCoupling> {
    table
        .lines
        .iter()
        .map(|line| RfCoupling {
            a: line.label_i,
            b: line.label_j,
            rate: rf_rate(rf, line),
        })
        .filter(|c| c.rate > 0.0)
        .collect()
}

fn add_flow(q: &mut Generator, from: usize, to: usize, rate: f64) {
    if rate != 0.0 {
        q[(to, from)] += rate;
        q[(from, from)] -= rate;
    }
}

/// Generator Q with dp/dt = Q·p; Q[(i, j)] is the rate from j to i and every
/// column sums to zero.
pub fn build_generator_from_rates(rates: &RateParams, optical: OpticalRates, rf: &[RfCoupling]) -> Result<Generator> {
    rates.validate()?;
    if !(optical.w_12 >= 0.0 && optical.w_32 >= 0.0) {
        return Err(SimError::param("optical", "excitation rates must be ≥ 0"));
    }
    let mut q = Generator::zeros();
    for (k, m) in (0..4).map(|k| (k, SpinProjection::from_ground_index(k))) {
        let (g, e) = (GROUND[k], EXCITED[k]);
        let (w, k_isc, back) = if m.is_outer() {
            (optical.w_32, rates.k_isc_32, rates.gamma_m * (1.0 - rates.b_12) / 2.0)
        } else {
            (optical.w_12, rates.k_isc_12, rates.gamma_m * rates.b_12 / 2.0)
        };
        add_flow(&mut q, g, e, w);
        add_flow(&mut q, e, g, w + rates.gamma_rad);
        add_flow(&mut q, e, METASTABLE, k_isc);
        add_flow(&mut q, METASTABLE, g, back);
    }
    if rates.t1.is_finite() {
        let mix = 1.0 / (4.0 * rates.t1);
        for a in GROUND {
            for b in GROUND {
                if a != b {
                    add_flow(&mut q, a, b, mix);
                }
            }
        }
    }
    for c in rf {
        if !(c.rate >= 0.0) {
            return Err(SimError::param("rf", "coupling rates must be ≥ 0"));
        }
        let (a, b) = (GROUND[c.a.ground_index()], GROUND[c.b.ground_index()]);
        add_flow(&mut q, a, b, c.rate);
        add_flow(&mut q, b, a, c.rate);
    }
    Ok(q)
}

pub fn build_generator(rates: &RateParams, laser: &LaserDrive, rf: Option<(&RfDrive, &TransitionTable)>) -> Result<Generator> {
    if !(laser.w0 >= 0.0) {
        return Err(SimError::param("w0", "must be ≥ 0"));
    }
    let couplings = match rf {
        Some((drive, table)) => {
            drive.validate()?;
            rf_couplings(drive, table)
        }
        None => Vec::new(),
    };
    build_generator_from_rates(rates, laser.optical_rates(rates), &couplings)
}

/// Number of closed communicating classes of the chain described by `gen`.
fn closed_classes<const N: usize>(gen: &SMatrix<f64, N, N>) -> usize {
    let mut reach = [[false; N]; N];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
        for (j, cell) in row.iter_mut().enumerate() {
            if i != j && gen[(j, i)] > 0.0 {
                *cell = true;
            }
        }
    }
    for k in 0..N {
        for i in 0..N {
            if reach[i][k] {
                for j in 0..N {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let mut counted = [false; N];
    let mut classes = 0;
    for i in 0..N {
        if counted[i] {
            continue;
        }
        // i is in a closed class iff everything it reaches also reaches it
        let closed = (0..N).all(|j| !reach[i][j] || reach[j][i]);
        if closed {
            classes += 1;
            for j in 0..N {
                if reach[i][j] {
                    counted[j] = true;
                }
            }
        }
    }
    classes
}

/// Stationary distribution, solving Q·p = 0 with row `replace_row` swapped for
/// the normalization Σp = 1.
pub fn steady_state_with_row(gen: &Generator, replace_row: usize) -> Result<Populations> {
    assert!(replace_row < N_STATES);
    let classes = closed_classes(gen);
    if classes != 1 {
        return Err(SimError::SingularGenerator(format!(
            "{classes} closed communicating classes; stationary state is not unique"
        )));
    }
    let mut a = *gen;
    for j in 0..N_STATES {
        a[(replace_row, j)] = 1.0;
    }
    let mut rhs = SVector::<f64, N_STATES>::zeros();
    rhs[replace_row] = 1.0;
    let p = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SimError::SingularGenerator("LU factorization failed".into()))?;
    if p.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return Err(SimError::SingularGenerator("solution is not a probability vector".into()));
    }
    let mut out = [0.0; N_STATES];
    for (o, v) in out.iter_mut().zip(p.iter()) {
        *o = v.max(0.0);
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    Ok(Populations(out))
}

pub fn steady_state(gen: &Generator) -> Result<Populations> {
    steady_state_with_row(gen, N_STATES - 1)
}

/// One defect with fixed optical rates, reduced to its ground manifold.
///
/// RF only couples ground sublevels, so the excited and metastable levels are
/// eliminated once (Schur complement) and each RF configuration costs a 4×4
/// solve. The result equals [`defect_pl`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDefect {
    m: SMatrix<f64, 4, 4>,
    /// Total population per unit ground population, by ground level.
    norm: SVector<f64, 4>,
    /// Detected PL per unit ground population.
    pl: SVector<f64, 4>,
}

impl ReducedDefect {
    pub fn new(rates: &RateParams, optical: OpticalRates) -> Result<Self> {
        let q = build_generator_from_rates(rates, optical, &[])?;
        let a: SMatrix<f64, 4, 4> = q.fixed_view::<4, 4>(0, 0).into_owned();
        let b: SMatrix<f64, 4, 5> = q.fixed_view::<4, 5>(0, 4).into_owned();
        let c: SMatrix<f64, 5, 4> = q.fixed_view::<5, 4>(4, 0).into_owned();
        let d: SMatrix<f64, 5, 5> = q.fixed_view::<5, 5>(4, 4).into_owned();
        let d_inv = d
            .try_inverse()
            .ok_or_else(|| SimError::SingularGenerator("excited and metastable levels do not decay".into()))?;
        // populations outside the ground manifold: u = −D⁻¹C·g
        let u = -(d_inv * c);
        let m = a + b * u;
        let norm = SVector::<f64, 4>::from_fn(|j, _| 1.0 + u.column(j).sum());
        let det = rates.gamma_rad * rates.detection_fraction;
        let pl = SVector::<f64, 4>::from_fn(|j, _| det * (0..4).map(|i| u[(i, j)]).sum::<f64>());
        Ok(Self { m, norm, pl })
    }

    /// Steady-state ground populations with the given RF couplings.
    pub fn ground(&self, rf: &[RfCoupling]) -> Result<SVector<f64, 4>> {
        let mut m = self.m;
        for c in rf {
            if !(c.rate >= 0.0) {
                return Err(SimError::param("rf", "coupling rates must be ≥ 0"));
            }
            let (i, j) = (c.a.ground_index(), c.b.ground_index());
            m[(i, j)] += c.rate;
            m[(j, j)] -= c.rate;
            m[(j, i)] += c.rate;
            m[(i, i)] -= c.rate;
        }
        let classes = closed_classes(&m);
        if classes != 1 {
            return Err(SimError::SingularGenerator(format!(
                "{classes} closed communicating classes; stationary state is not unique"
            )));
        }
        let last = 3;
        for j in 0..4 {
            m[(last, j)] = self.norm[j];
        }
        let mut rhs = SVector::<f64, 4>::zeros();
        rhs[last] = 1.0;
        let g = m.lu().solve(&rhs).ok_or_else(|| SimError::SingularGenerator("LU factorization failed".into()))?;
        if g.iter().any(|v| !v.is_finite() || *v < -1e-9) {
            return Err(SimError::SingularGenerator("solution is not a probability vector".into()));
        }
        Ok(g.map(|v| v.max(0.0)))
    }

    pub fn pl(&self, rf: &[RfCoupling]) -> Result<f64> {
        let g = self.ground(rf)?;
        Ok(self.pl.dot(&g) / self.norm.dot(&g))
    }
}

/// Detected photons per second per defect.
pub fn pl_rate(p: &Populations, rates: &RateParams) -> f64 {
    rates.gamma_rad * p.excited_total() * rates.detection_fraction
}

pub fn contrast_from_pl(pl_on: f64, pl_off: f64) -> Result<f64> {
    if !(pl_off > 0.0) {
        return Err(SimError::UndefinedContrast);
    }
    Ok((pl_on - pl_off) / pl_off)
}

/// Steady-state PL of one defect with fixed optical rates and RF couplings.
pub fn defect_pl(rates: &RateParams, optical: OpticalRates, rf: &[RfCoupling]) -> Result<f64> {
    let gen = build_generator_from_rates(rates, optical, rf)?;
    Ok(pl_rate(&steady_state(&gen)?, rates))
}

/// C = (PL_on − PL_off)/PL_off with the RF drive applied to `lines`.
pub fn defect_contrast(rates: &RateParams, laser: &LaserDrive, rf: &RfDrive, lines: &TransitionTable) -> Result<f64> {
    let on = pl_rate(&steady_state(&build_generator(rates, laser, Some((rf, lines)))?)?, rates);
    let off = pl_rate(&steady_state(&build_generator(rates, laser, None)?)?, rates);
    contrast_from_pl(on, off)
}
