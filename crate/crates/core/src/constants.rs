//! Physical constants (CODATA 2018) and unit conversions used throughout the crate.

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = PLANCK / std::f64::consts::TAU;
/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Bohr magneton over Planck's constant, Hz/T (≈ 13.996 GHz/T).
pub const MU_B_OVER_H: f64 = MU_B / PLANCK;
/// Same, in MHz/mT (numerically identical to GHz/T).
pub const MU_B_OVER_H_MHZ_PER_MT: f64 = MU_B_OVER_H * 1e-9;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
/// Boltzmann constant in meV/K.
pub const K_B_MEV_PER_K: f64 = 8.617_333_262e-2;
/// Free-electron g-factor used by the shot-noise bound.
pub const G_ELECTRON: f64 = 2.0028;
/// 1 μeV expressed as a frequency, MHz.
pub const UEV_IN_MHZ: f64 = 241.799_242;

/// Vacuum wavelength (nm) to optical frequency (THz).
pub fn nm_to_thz(lambda_nm: f64) -> f64 {
    SPEED_OF_LIGHT / (lambda_nm * 1e-9) / 1e12
}

/// Optical frequency (THz) to vacuum wavelength (nm).
pub fn thz_to_nm(nu_thz: f64) -> f64 {
    SPEED_OF_LIGHT / (nu_thz * 1e12) * 1e9
}

/// Width in wavelength at `lambda_nm` to width in frequency: Δν = cΔλ/λ².
pub fn nm_width_to_ghz(width_nm: f64, lambda_nm: f64) -> f64 {
    SPEED_OF_LIGHT * (width_nm * 1e-9) / (lambda_nm * 1e-9).powi(2) / 1e9
}

pub fn ghz_width_to_nm(width_ghz: f64, lambda_nm: f64) -> f64 {
    width_ghz * 1e9 * (lambda_nm * 1e-9).powi(2) / SPEED_OF_LIGHT * 1e9
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}
