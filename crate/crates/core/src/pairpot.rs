//! Isotropic pair potentials.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of dispersion terms, `C6 .. C16`.
pub const N_DISPERSION: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PotentialModel {
    /// `A exp(-b x) - sum_{n=3}^{8} f_2n(x, b) C_2n / x^2n`.
    DampedDispersion {
        /// Repulsive prefactor, K.
        a: f64,
        /// Range parameter, 1/bohr.
        b: f64,
        /// `C6, C8, ..., C16` in K bohr^2n.
        c: [f64; N_DISPERSION],
    },
    /// `D (1 - exp(-a (x - r_e)))^2 - D`, zero at infinity.
    Morse {
        depth: f64,
        r_e: f64,
        a: f64,
    },
    Zero,
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Tang–Toennies damping `1 - exp(-bx) sum_{k=0}^{2n} (bx)^k / k!`.
pub fn damping_f2n(n: u32, x: f64, b: f64) -> f64 {
    let t = b * x;
    if t <= 0.0 {
        return 0.0;
    }
    let top = 2 * n;
    if t < f64::from(top + 1) {
        // positive tail e^{-t} sum_{k>2n} t^k/k!, no cancellation
        tail_sum(top, t) * (-t).exp()
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=top {
            term *= t / f64::from(k);
            sum += term;
        }
        1.0 - (-t).exp() * sum
    }
}

/// `sum_{k>top} t^k / k!`, for `t` below `top + 1`.
fn tail_sum(top: u32, t: f64) -> f64 {
    let mut term = t.powi(top as i32 + 1) / factorial(top + 1);
    let mut sum = term;
    let mut k = top + 1;
    while term > 1e-17 * sum {
        k += 1;
        term *= t / f64::from(k);
        sum += term;
    }
    sum
}

/// `f_2n(x, b) / x^2n`, finite (and vanishing linearly) at `x -> 0`.
pub fn damped_inverse_power(n: u32, x: f64, b: f64) -> f64 {
    let t = b * x;
    let top = 2 * n;
    if t < f64::from(top + 1) {
        // b^2n e^{-t} sum_{k>2n} t^{k-2n}/k!
        let mut term = t / factorial(top + 1);
        let mut sum = term;
        let mut k = top + 1;
        while term > 1e-17 * sum && term > 0.0 {
            k += 1;
            term *= t / f64::from(k);
            sum += term;
        }
        b.powi(top as i32) * (-t).exp() * sum
    } else {
        damping_f2n(n, x, b) / x.powi(top as i32)
    }
}

impl PotentialModel {
    /// Validated constructor for the damped-dispersion form.
    pub fn damped_dispersion(a: f64, b: f64, c: [f64; N_DISPERSION]) -> Result<Self> {
        if !(b > 0.0) || !a.is_finite() || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("damped dispersion needs b > 0 and finite coefficients (b = {b})")));
        }
        Ok(Self::DampedDispersion { a, b, c })
    }

    pub fn morse(depth: f64, r_e: f64, a: f64) -> Result<Self> {
        if !(depth > 0.0 && r_e > 0.0 && a > 0.0) {
            return Err(Error::InvalidInput(format!("Morse parameters must be positive (D = {depth}, r_e = {r_e}, a = {a})")));
        }
        Ok(Self::Morse { depth, r_e, a })
    }

    /// Potential in kelvin at separation `x` in bohr.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        match self {
            Self::DampedDispersion { .. } if !(x > 0.0) => Err(Error::Domain(format!("pair potential evaluated at x = {x} bohr"))),
            _ => Ok(self.value(x)),
        }
    }

    /// Unchecked evaluation; callers guarantee `x > 0`.
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Self::DampedDispersion { a, b, ref c } => {
                let mut v = a * (-b * x).exp();
                for (i, c2n) in c.iter().enumerate() {
                    v -= c2n * damped_inverse_power(3 + i as u32, x, b);
                }
                v
            }
            Self::Morse { depth, r_e, a } => {
                let e = 1.0 - (-a * (x - r_e)).exp();
                depth * e * e - depth
            }
            Self::Zero => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// Reads a damped-dispersion parameter file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::ParameterFile { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::ParameterFile { reason, .. } => Error::ParameterFile { path: path.display().to_string(), reason },
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::ParameterFile { path: "<inline>".into(), reason };
        let file: ParameterFile = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        if file.units.energy != "kelvin" || file.units.length != "bohr" {
            return Err(bad(format!(
                "units must be energy = \"kelvin\", length = \"bohr\" (found {:?}, {:?})",
                file.units.energy, file.units.length
            )));
        }
        Self::damped_dispersion(file.a, file.b, [file.c6, file.c8, file.c10, file.c12, file.c14, file.c16]).map_err(|e| bad(e.to_string()))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParameterFile {
    #[allow(dead_code)]
    version: Option<String>,
    #[serde(rename = "A")]
    a: f64,
    b: f64,
    #[serde(rename = "C6")]
    c6: f64,
    #[serde(rename = "C8")]
    c8: f64,
    #[serde(rename = "C10")]
    c10: f64,
    #[serde(rename = "C12")]
    c12: f64,
    #[serde(rename = "C14")]
    c14: f64,
    #[serde(rename = "C16")]
    c16: f64,
    units: Units,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Units {
    energy: String,
    length: String,
}

/// Path of the bundled Ne–Ne parameter file.
pub fn bundled_neon_parameters() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("ne2_potential.toml")
}

/// Loads the bundled Ne–Ne potential.
pub fn neon() -> Result<PotentialModel> {
    PotentialModel::from_file(bundled_neon_parameters())
}
