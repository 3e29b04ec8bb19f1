//! Ground-state spin-3/2 Hamiltonian: Zeeman + axial zero-field splitting (+ a
//! mean-field hyperfine term), its eigenlevels, and the RF transition table.

use nalgebra::{Matrix4, SymmetricEigen, Vector3, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::MU_B_OVER_H_MHZ_PER_MT;
use crate::error::{Result, SimError};

pub type CMatrix4 = Matrix4<Complex64>;

const SPIN: f64 = 1.5;

/// Twice the spin projection, so that m_s = ±3/2, ±1/2 are stored exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinProjection(i8);

impl SpinProjection {
    pub const MINUS_3_2: Self = Self(-3);
    pub const MINUS_1_2: Self = Self(-1);
    pub const PLUS_1_2: Self = Self(1);
    pub const PLUS_3_2: Self = Self(3);

    /// Projections in the order of the `sz` eigenbasis used by [`spin_operators_3_2`].
    pub const BASIS: [Self; 4] = [Self::PLUS_3_2, Self::PLUS_1_2, Self::MINUS_1_2, Self::MINUS_3_2];

    pub fn twice(self) -> i8 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// Index in the rate-model ground manifold: −3/2, −1/2, +1/2, +3/2 → 0..4.
    pub fn ground_index(self) -> usize {
        ((self.0 + 3) / 2) as usize
    }

    pub fn from_ground_index(i: usize) -> Self {
        Self(2 * i as i8 - 3)
    }

    pub fn is_outer(self) -> bool {
        self.0.abs() == 3
    }
}

impl std::fmt::Display for SpinProjection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sign = if self.0 < 0 { '-' } else { '+' };
        write!(f, "{sign}{}/2", self.0.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators {
    pub sx: CMatrix4,
    pub sy: CMatrix4,
    pub sz: CMatrix4,
}

impl SpinOperators {
    /// Operator S·n for a (not necessarily unit) direction n.
    pub fn along(&self, n: &Vector3<f64>) -> CMatrix4 {
        self.sx * Complex64::from(n.x) + self.sy * Complex64::from(n.y) + self.sz * Complex64::from(n.z)
    }
}

/// Canonical spin-3/2 matrices in the `sz` eigenbasis ordered m = +3/2, +1/2, −1/2, −3/2.
pub fn spin_operators_3_2() -> SpinOperators {
    let m = |i: usize| SPIN - i as f64;
    let mut s_plus = CMatrix4::zeros();
    // ⟨m+1|S+|m⟩ = √(s(s+1) − m(m+1))
    for col in 1..4 {
        let mm = m(col);
        let row = col - 1;
        s_plus[(row, col)] = Complex64::from((SPIN * (SPIN + 1.0) - mm * (mm + 1.0)).sqrt());
    }
    let s_minus = s_plus.adjoint();
    let half = Complex64::from(0.5);
    let sx = (s_plus + s_minus) * half;
    let sy = (s_plus - s_minus) * Complex64::new(0.0, -0.5);
    let sz = CMatrix4::from_diagonal(&Vector4::from_fn(|i, _| Complex64::from(m(i))));
    SpinOperators { sx, sy, sz }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeemanZfsParams {
    /// Electronic g-factor.
    pub g: f64,
    /// Axial zero-field parameter D in MHz; the doublets are split by 2D.
    pub d_half_split: f64,
    /// Static field in mT, crystal frame with z along the c-axis.
    pub b_field: Vector3<f64>,
}

impl ZeemanZfsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g.is_finite() && self.d_half_split.is_finite() && self.b_field.iter().all(|b| b.is_finite())) {
            return Err(SimError::param("zeeman", "non-finite input"));
        }
        if self.g < 0.0 {
            return Err(SimError::param("g", "must be non-negative"));
        }
        if self.d_half_split <= 0.0 {
            return Err(SimError::param("d_half_split", "must be > 0 MHz"));
        }
        Ok(())
    }

    /// Gyromagnetic ratio g·μ_B/h in MHz/mT.
    pub fn gamma_mhz_per_mt(&self) -> f64 {
        self.g * MU_B_OVER_H_MHZ_PER_MT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineParams {
    pub a_parallel: f64,
    pub a_perp: f64,
    /// Fraction of defects carrying one coupled nucleus.
    pub satellite_weight: f64,
    /// Drop the transverse term when true.
    pub secular: bool,
}

impl HyperfineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_parallel.is_finite() && self.a_perp.is_finite()) {
            return Err(SimError::param("hyperfine", "non-finite coupling"));
        }
        if !(0.0..=1.0).contains(&self.satellite_weight) {
            return Err(SimError::param("satellite_weight", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Nuclear spin-1/2 projection used when the hyperfine term is evaluated in mean field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuclearProjection {
    Up,
    Down,
}

impl NuclearProjection {
    pub fn value(self) -> f64 {
        match self {
            NuclearProjection::Up => 0.5,
            NuclearProjection::Down => -0.5,
        }
    }
}

/// H = γ(B·S) + D·Sz² in MHz. With hyperfine, the nuclear spin is frozen at
/// `m_I` and contributes a_∥·m_I·Sz, plus a_⊥·m_I·Sx unless secular.
pub fn build_hamiltonian(
    p: &ZeemanZfsParams,
    hf: Option<(&HyperfineParams, NuclearProjection)>,
) -> Result<CMatrix4> {
    p.validate()?;
    let ops = spin_operators_3_2();
    let gamma = p.gamma_mhz_per_mt();
    let mut h = ops.along(&(p.b_field * gamma)) + ops.sz * ops.sz * Complex64::from(p.d_half_split);
    if let Some((hf, m_i)) = hf {
        hf.validate()?;
        let m_i = m_i.value();
        h += ops.sz * Complex64::from(hf.a_parallel * m_i);
        if !hf.secular {
            h += ops.sx * Complex64::from(hf.a_perp * m_i);
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinLevels {
    /// Ascending energies, MHz.
    pub energies: [f64; 4],
    /// Column k is the eigenvector of `energies[k]`, expressed in the `sz` basis.
    pub states: CMatrix4,
    /// Dominant m_s of each level.
    pub labels: [SpinProjection; 4],
}

impl SpinLevels {
    pub fn level_of(&self, label: SpinProjection) -> usize {
        self.labels.iter().position(|&l| l == label).expect("labels are a permutation")
    }
}

fn hermitian_deviation(h: &CMatrix4) -> f64 {
    let diff = (h - h.adjoint()).norm();
    let scale = h.norm().max(f64::MIN_POSITIVE);
    diff / scale
}

/// Numerical diagonalization of a 4×4 Hermitian matrix. Labels are the
/// assignment of m_s values to levels that maximizes the summed overlap.
pub fn eigenlevels(h: &CMatrix4) -> Result<SpinLevels> {
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SimError::param("hamiltonian", "non-finite entry"));
    }
    let deviation = hermitian_deviation(h);
    if deviation > 1e-9 {
        return Err(SimError::NotHermitian { deviation });
    }
    let herm = (h + h.adjoint()) * Complex64::from(0.5);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut energies = [0.0; 4];
    let mut states = CMatrix4::zeros();
    for (k, &src) in order.iter().enumerate() {
        energies[k] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).into_owned();
        // fix the global phase: largest component real and positive
        let (imax, _) = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        let phase = col[imax] / Complex64::from(col[imax].norm());
        col *= phase.conj();
        states.set_column(k, &col);
    }

    let overlap = |level: usize, basis: usize| states[(basis, level)].norm_sqr();
    let mut best = ([0usize; 4], f64::NEG_INFINITY);
    for perm in permutations4() {
        let score: f64 = (0..4).map(|level| overlap(level, perm[level])).sum();
        if score > best.1 + 1e-15 {
            best = (perm, score);
        }
    }
    let labels = best.0.map(|basis| SpinProjection::BASIS[basis]);
    Ok(SpinLevels {
        energies,
        states,
        labels,
    })
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let mut seen = [false; 4];
                    if p.iter().all(|&i| !std::mem::replace(&mut seen[i], true)) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Main,
    /// Hyperfine satellite with the nuclear projection it belongs to.
    SatelliteUp,
    SatelliteDown,
}

impl LineKind {
    pub fn is_satellite(self) -> bool {
        !matches!(self, LineKind::Main)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine {
    pub level_i: usize,
    pub level_j: usize,
    pub label_i: SpinProjection,
    pub label_j: SpinProjection,
    pub frequency_mhz: f64,
    pub dipole_weight: f64,
    pub kind: LineKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransitionTable {
    pub lines: Vec<TransitionLine>,
}

impl TransitionTable {
    pub fn total_weight(&self) -> f64 {
        self.lines.iter().map(|l| l.dipole_weight).sum()
    }

    pub fn find(&self, a: SpinProjection, b: SpinProjection) -> Option<&TransitionLine> {
        self.lines.iter().find(|l| {
            l.kind == LineKind::Main && ((l.label_i == a && l.label_j == b) || (l.label_i == b && l.label_j == a))
        })
    }

    pub fn main_lines(&self) -> impl Iterator<Item = &TransitionLine> {
        self.lines.iter().filter(|l| l.kind == LineKind::Main)
    }
}

pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-9;

/// All level pairs with dipole weight |⟨i|S·n|j⟩|² above `weight_floor`,
/// ordered by frequency.
pub fn transition_table(levels: &SpinLevels, drive_axis: &Vector3<f64>, weight_floor: f64) -> Result<TransitionTable> {
    let norm = drive_axis.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(SimError::param("drive_axis", "must be a non-zero finite vector"));
    }
    let n = drive_axis / norm;
    let op = spin_operators_3_2().along(&n);
    let coupling = levels.states.adjoint() * op * levels.states;
    let mut lines = Vec::new();
    for i in 0..4 {
        for j in (i + 1)..4 {
            let frequency_mhz = levels.energies[j] - levels.energies[i];
            if frequency_mhz <= 1e-9 {
                continue;
            }
            let dipole_weight = coupling[(i, j)].norm_sqr();
            if dipole_weight <= weight_floor {
                continue;
            }
            lines.push(TransitionLine {
                level_i: i,
                level_j: j,
                label_i: levels.labels[i],
                label_j: levels.labels[j],
                frequency_mhz,
                dipole_weight,
                kind: LineKind::Main,
            });
        }
    }
    lines.sort_by(|a, b| a.frequency_mhz.total_cmp(&b.frequency_mhz));
    Ok(TransitionTable { lines })
}

/// First-order secular satellites: every main line of weight w gets two
/// companions at ±a_∥/2 carrying w·f/2 each, and keeps w·(1 − f).
pub fn hyperfine_satellites(t: &TransitionTable, hf: &HyperfineParams) -> Result<TransitionTable> {
    hf.validate()?;
    let f = hf.satellite_weight;
    if f == 0.0 {
        return Ok(t.clone());
    }
    let mut lines = Vec::with_capacity(t.lines.len() * 3);
    for line in &t.lines {
        if line.kind != LineKind::Main {
            lines.push(*line);
            continue;
        }
        lines.push(TransitionLine {
            dipole_weight: line.dipole_weight * (1.0 - f),
            ..*line
        });
        for (kind, sign) in [(LineKind::SatelliteDown, -1.0), (LineKind::SatelliteUp, 1.0)] {
            // a shift through zero reflects the line; |ΔE| is what is observed
            let frequency_mhz = (line.frequency_mhz + sign * hf.a_parallel / 2.0).abs();
            lines.push(TransitionLine {
                frequency_mhz,
                dipole_weight: line.dipole_weight * f / 2.0,
                kind,
                ..*line
            });
        }
    }
    lines.sort_by(|a, b| a.frequency_mhz.total_cmp(&b.frequency_mhz));
    Ok(TransitionTable { lines })
}

/// Convenience: Hamiltonian → levels → table for one nuclear configuration.
pub fn spin_lines(
    p: &ZeemanZfsParams,
    hf: Option<(&HyperfineParams, NuclearProjection)>,
    drive_axis: &Vector3<f64>,
    weight_floor: f64,
) -> Result<TransitionTable> {
    let h = build_hamiltonian(p, hf)?;
    let levels = eigenlevels(&h)?;
    transition_table(&levels, drive_axis, weight_floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(b: [f64; 3]) -> ZeemanZfsParams {
        ZeemanZfsParams {
            g: 2.0,
            d_half_split: 35.0,
            b_field: Vector3::from(b),
        }
    }

    fn x_axis() -> Vector3<f64> {
        Vector3::x()
    }

    // ½√(s(s+1) − m m′) for adjacent m, m′
    fn ladder_sx(m: f64, mp: f64) -> f64 {
        0.5 * (SPIN * (SPIN + 1.0) - m * mp).sqrt()
    }

    #[test]
    fn sx_matrix_elements() {
        let ops = spin_operators_3_2();
        // basis indices: +3/2→0, +1/2→1, −1/2→2, −3/2→3
        assert_abs_diff_eq!(ops.sx[(2, 3)].re, 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ops.sx[(1, 2)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ops.sx[(2, 3)].re, ladder_sx(-0.5, -1.5), epsilon = 1e-15);
        assert_abs_diff_eq!(ops.sx[(1, 2)].re, ladder_sx(0.5, -0.5), epsilon = 1e-15);
    }

    #[test]
    fn commutator_and_casimir() {
        let ops = spin_operators_3_2();
        let comm = ops.sx * ops.sy - ops.sy * ops.sx - ops.sz * Complex64::i();
        assert!(comm.norm() < 1e-12);
        let s2 = ops.sx * ops.sx + ops.sy * ops.sy + ops.sz * ops.sz;
        let expect = CMatrix4::identity() * Complex64::from(SPIN * (SPIN + 1.0));
        assert!((s2 - expect).norm() < 1e-12);
        for op in [&ops.sx, &ops.sy, &ops.sz] {
            assert!((op - op.adjoint()).norm() < 1e-15);
        }
        let diag: Vec<f64> = (0..4).map(|i| ops.sz[(i, i)].re).collect();
        assert_eq!(diag, vec![1.5, 0.5, -0.5, -1.5]);
    }

    #[test]
    fn zero_field_doublets() {
        let h = build_hamiltonian(&params([0.0; 3]), None).unwrap();
        let lv = eigenlevels(&h).unwrap();
        for (got, want) in lv.energies.iter().zip([8.75, 8.75, 78.75, 78.75]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(lv.energies[2] - lv.energies[0], 70.0, epsilon = 1e-10);
    }

    #[test]
    fn default_field_lines() {
        let t = spin_lines(&params([0.0, 0.0, 0.75]), None, &x_axis(), DEFAULT_WEIGHT_FLOOR).unwrap();
        let lo = t.find(SpinProjection::MINUS_3_2, SpinProjection::MINUS_1_2).unwrap();
        let hi = t.find(SpinProjection::PLUS_1_2, SpinProjection::PLUS_3_2).unwrap();
        // γB = 2·13.996245·0.75 = 20.994 MHz
        let gb = 2.0 * MU_B_OVER_H_MHZ_PER_MT * 0.75;
        assert_abs_diff_eq!(lo.frequency_mhz, 70.0 - gb, epsilon = 1e-9);
        assert_abs_diff_eq!(hi.frequency_mhz, 70.0 + gb, epsilon = 1e-9);
        assert!((lo.frequency_mhz - 49.0).abs() < 0.05);
        assert!((hi.frequency_mhz - 91.0).abs() < 0.05);
    }

    #[test]
    fn zero_g_is_pure_zfs() {
        let p = ZeemanZfsParams {
            g: 0.0,
            ..params([0.3, -1.2, 4.0])
        };
        let h = build_hamiltonian(&p, None).unwrap();
        let ops = spin_operators_3_2();
        assert!((h - ops.sz * ops.sz * Complex64::from(35.0)).norm() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(build_hamiltonian(&params([f64::NAN, 0.0, 0.0]), None).is_err());
        let mut h = CMatrix4::identity();
        h[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(eigenlevels(&h), Err(SimError::NotHermitian { .. })));
    }

    #[test]
    fn diagonal_eigenlevels() {
        let h = CMatrix4::from_diagonal(&Vector4::new(3.0, -1.0, 7.0, 2.0).map(Complex64::from));
        let lv = eigenlevels(&h).unwrap();
        assert_eq!(lv.energies, [-1.0, 2.0, 3.0, 7.0]);
        // each eigenvector is a basis vector
        for k in 0..4 {
            let col = lv.states.column(k);
            let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert_abs_diff_eq!(max, 1.0, epsilon = 1e-12);
        }
        assert_eq!(lv.labels[0], SpinProjection::PLUS_1_2);
        assert_eq!(lv.labels[3], SpinProjection::MINUS_1_2);
    }

    #[test]
    fn axial_field_gives_sz_eigenstates() {
        let h = build_hamiltonian(&params([0.0, 0.0, 2.0]), None).unwrap();
        let lv = eigenlevels(&h).unwrap();
        for k in 0..4 {
            let basis = SpinProjection::BASIS.iter().position(|&m| m == lv.labels[k]).unwrap();
            assert_abs_diff_eq!(lv.states[(basis, k)].norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn transverse_field_labels_distinct() {
        // B ⊥ z: the ±1/2 doublet mixes at first order (split 2γB⊥), the ±3/2
        // doublet only at second order; labels stay a permutation either way.
        let p = params([0.2, 0.1, 0.0]);
        let h = build_hamiltonian(&p, None).unwrap();
        let lv = eigenlevels(&h).unwrap();
        let mut labels = lv.labels.to_vec();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 4);
        let gb = p.gamma_mhz_per_mt() * p.b_field.norm();
        let split = lv.energies[1] - lv.energies[0];
        assert!((split - 2.0 * gb).abs() < 0.1 * gb, "{split} vs {}", 2.0 * gb);
        // the ±3/2 pair is degenerate too, so only the doublet weight is sharp
        for k in 2..4 {
            assert!(lv.labels[k].is_outer());
            let outer = lv.states[(0, k)].norm_sqr() + lv.states[(3, k)].norm_sqr();
            assert!(outer > 0.9);
        }
    }

    #[test]
    fn unitary_eigenvectors() {
        let h = build_hamiltonian(&params([0.4, -0.3, 1.1]), None).unwrap();
        let lv = eigenlevels(&h).unwrap();
        let u = lv.states.adjoint() * lv.states;
        assert!((u - CMatrix4::identity()).norm() < 1e-10);
        assert!(lv.energies.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn transverse_drive_weights() {
        let t = spin_lines(&params([0.0, 0.0, 0.75]), None, &x_axis(), DEFAULT_WEIGHT_FLOOR).unwrap();
        assert_eq!(t.lines.len(), 3);
        let w = |a, b| t.find(a, b).unwrap().dipole_weight;
        use SpinProjection as M;
        assert_abs_diff_eq!(w(M::MINUS_3_2, M::MINUS_1_2), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(w(M::MINUS_1_2, M::PLUS_1_2), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w(M::PLUS_1_2, M::PLUS_3_2), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(t.total_weight(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn axial_drive_has_no_lines() {
        let t = spin_lines(&params([0.0, 0.0, 0.75]), None, &Vector3::z(), DEFAULT_WEIGHT_FLOOR).unwrap();
        assert!(t.lines.is_empty());
        assert!(transition_table(
            &eigenlevels(&build_hamiltonian(&params([0.0; 3]), None).unwrap()).unwrap(),
            &Vector3::zeros(),
            0.0
        )
        .is_err());
    }

    #[test]
    fn tilted_field_unlocks_double_quantum() {
        let th = 30f64.to_radians();
        let b = 2.0;
        let t = spin_lines(
            &params([b * th.sin(), 0.0, b * th.cos()]),
            None,
            &x_axis(),
            DEFAULT_WEIGHT_FLOOR,
        )
        .unwrap();
        let dq: Vec<_> = t
            .lines
            .iter()
            .filter(|l| (l.label_i.twice() - l.label_j.twice()).abs() == 4)
            .collect();
        assert!(!dq.is_empty());
        assert!(dq.iter().all(|l| l.dipole_weight > 0.0));
    }

    #[test]
    fn satellites_positions_and_weights() {
        let hf = HyperfineParams {
            a_parallel: 9.5,
            a_perp: 0.0,
            satellite_weight: 0.1,
            secular: true,
        };
        let mk = |f: f64| TransitionLine {
            level_i: 0,
            level_j: 1,
            label_i: SpinProjection::MINUS_3_2,
            label_j: SpinProjection::MINUS_1_2,
            frequency_mhz: f,
            dipole_weight: 0.75,
            kind: LineKind::Main,
        };
        let t = TransitionTable {
            lines: vec![mk(49.0), mk(91.0)],
        };
        let s = hyperfine_satellites(&t, &hf).unwrap();
        let sats: Vec<f64> = s.lines.iter().filter(|l| l.kind.is_satellite()).map(|l| l.frequency_mhz).collect();
        assert_eq!(sats, vec![44.25, 53.75, 86.25, 95.75]);
        assert_abs_diff_eq!(s.total_weight(), t.total_weight(), epsilon = 1e-12);
        let unchanged = hyperfine_satellites(
            &t,
            &HyperfineParams {
                satellite_weight: 0.0,
                ..hf
            },
        )
        .unwrap();
        assert_eq!(unchanged, t);
    }

    #[test]
    fn satellites_match_mean_field_hamiltonian() {
        // Two routes: first-order table shift vs exact diagonalization with m_I fixed.
        let hf = HyperfineParams {
            a_parallel: 9.5,
            a_perp: 0.0,
            satellite_weight: 0.1,
            secular: true,
        };
        let p = params([0.0, 0.0, 0.75]);
        let main = spin_lines(&p, None, &x_axis(), DEFAULT_WEIGHT_FLOOR).unwrap();
        let table = hyperfine_satellites(&main, &hf).unwrap();
        let mut exact = Vec::new();
        for m_i in [NuclearProjection::Up, NuclearProjection::Down] {
            let t = spin_lines(&p, Some((&hf, m_i)), &x_axis(), DEFAULT_WEIGHT_FLOOR).unwrap();
            exact.extend(t.lines.iter().map(|l| l.frequency_mhz));
        }
        exact.sort_by(f64::total_cmp);
        let mut first: Vec<f64> = table
            .lines
            .iter()
            .filter(|l| l.kind.is_satellite())
            .map(|l| l.frequency_mhz)
            .collect();
        first.sort_by(f64::total_cmp);
        assert_eq!(exact.len(), first.len());
        for (a, b) in exact.iter().zip(&first) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn hermitian_and_trace(bx in -5.0..5.0f64, by in -5.0..5.0f64, bz in -10.0..10.0f64, g in 0.0..3.0f64) {
            let p = ZeemanZfsParams { g, d_half_split: 35.0, b_field: Vector3::new(bx, by, bz) };
            let h = build_hamiltonian(&p, None).unwrap();
            prop_assert!((h - h.adjoint()).norm() < 1e-10 * h.norm());
            prop_assert!((h.trace().re - 2.0 * (0.25 + 2.25) * 35.0).abs() < 1e-9);
        }

        #[test]
        fn axial_closed_form(bz in 0.0..10.0f64) {
            let p = params([0.0, 0.0, bz]);
            let t = spin_lines(&p, None, &x_axis(), DEFAULT_WEIGHT_FLOOR).unwrap();
            let gb = p.gamma_mhz_per_mt() * bz;
            let lo = t.find(SpinProjection::MINUS_3_2, SpinProjection::MINUS_1_2).unwrap().frequency_mhz;
            let hi = t.find(SpinProjection::PLUS_1_2, SpinProjection::PLUS_3_2).unwrap().frequency_mhz;
            prop_assert!((lo - (gb - 70.0).abs()).abs() < 1e-6);
            prop_assert!((hi - (gb + 70.0)).abs() < 1e-6);
        }

        #[test]
        fn satellites_conserve_weight(f in 0.0..=1.0f64, a in 0.5..20.0f64, bz in 0.1..3.0f64) {
            let t = spin_lines(&params([0.0, 0.0, bz]), None, &x_axis(), DEFAULT_WEIGHT_FLOOR).unwrap();
            let hf = HyperfineParams { a_parallel: a, a_perp: 0.0, satellite_weight: f, secular: true };
            let s = hyperfine_satellites(&t, &hf).unwrap();
            prop_assert!((s.total_weight() - t.total_weight()).abs() < 1e-12);
        }
    }
}
