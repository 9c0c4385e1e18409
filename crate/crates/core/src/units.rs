//! Physical constants and the internal unit system.
//!
//! Interfaces use lengths in bohr, energies as `E/k_B` in kelvin and masses in
//! daltons. The only conversion the solver needs is
//! `KAPPA = hbar^2 / (1 Da * a0^2 * k_B)`, so that a kinetic term reads
//! `-KAPPA / (2 mu) d^2/dx^2` with `mu` in daltons and `x` in bohr.

use serde::Serialize;

/// Reduced Planck constant, J s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (CODATA 2018, exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Unified atomic mass unit, kg (CODATA 2018).
pub const DALTON: f64 = 1.660_539_066_60e-27;
/// Bohr radius, m (CODATA 2018).
pub const BOHR: f64 = 5.291_772_109_03e-11;

/// `hbar^2 / (Da a0^2 k_B)` in kelvin.
pub const KAPPA: f64 = HBAR * HBAR / (DALTON * BOHR * BOHR * BOLTZMANN);

/// Mass of a neon-20 atom in daltons.
pub const NEON_20_MASS: f64 = 19.992_440_175_3;

/// Revision tag of the constants above, echoed into output metadata.
pub const CODATA_REVISION: &str = "CODATA 2018";

/// Lifetime in seconds of a state with width `gamma` given in kelvin.
pub fn lifetime_seconds(gamma_kelvin: f64) -> f64 {
    HBAR / (gamma_kelvin * BOLTZMANN)
}

/// Constant table written into artifact headers.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsRecord {
    pub revision: &'static str,
    pub hbar_j_s: f64,
    pub boltzmann_j_per_k: f64,
    pub dalton_kg: f64,
    pub bohr_m: f64,
    pub kappa_kelvin: f64,
}

impl ConstantsRecord {
    pub fn current() -> Self {
        Self {
            revision: CODATA_REVISION,
            hbar_j_s: HBAR,
            boltzmann_j_per_k: BOLTZMANN,
            dalton_kg: DALTON,
            bohr_m: BOHR,
            kappa_kelvin: KAPPA,
        }
    }
}
