//! Masses and unscaled Jacobi kinematics.
//!
//! Frames are indexed `0, 1, 2`; frame `i` describes the pair `(j, k)` with
//! `(i, j, k)` a cyclic permutation of `(0, 1, 2)`:
//!
//! * `x_i = r_j - r_k` is the pair separation,
//! * `y_i = r_i - (m_j r_j + m_k r_k) / (m_j + m_k)` locates particle `i`
//!   relative to the pair centre of mass.
//!
//! Rotated coordinates are reported in the body frame where `x_i` lies along
//! `z` and `y_i` lies in the `xz` half-plane with azimuth 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identical-particle symmetry of a three-body system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryClass {
    ThreeDistinct,
    /// The two listed (0-based) particles share a mass.
    TwoIdentical {
        pair: (usize, usize),
    },
    AllIdentical,
}

impl SymmetryClass {
    /// Index of the particle that is not part of the identical pair.
    pub fn odd_particle(&self) -> Option<usize> {
        match *self {
            SymmetryClass::TwoIdentical { pair: (a, b) } => Some(3 - a - b),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassSystem {
    masses: [f64; 3],
    pair_reduced: [f64; 3],
    atom_pair_reduced: [f64; 3],
    symmetry: SymmetryClass,
}

impl MassSystem {
    /// Builds the mass system, classifying symmetry by comparing masses
    /// within the relative tolerance `tol`.
    pub fn new(m1: f64, m2: f64, m3: f64, tol: f64) -> Result<Self> {
        let masses = [m1, m2, m3];
        if masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidInput(format!("masses must be strictly positive, got {masses:?}")));
        }
        let total: f64 = masses.iter().sum();
        let mut pair_reduced = [0.0; 3];
        let mut atom_pair_reduced = [0.0; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            pair_reduced[i] = masses[j] * masses[k] / (masses[j] + masses[k]);
            atom_pair_reduced[i] = masses[i] * (masses[j] + masses[k]) / total;
        }
        let same = |a: f64, b: f64| (a - b).abs() <= tol * a.max(b);
        let eq01 = same(m1, m2);
        let eq12 = same(m2, m3);
        let eq02 = same(m1, m3);
        let symmetry = if eq01 && eq12 && eq02 {
            SymmetryClass::AllIdentical
        } else if eq01 {
            SymmetryClass::TwoIdentical { pair: (0, 1) }
        } else if eq12 {
            SymmetryClass::TwoIdentical { pair: (1, 2) }
        } else if eq02 {
            SymmetryClass::TwoIdentical { pair: (0, 2) }
        } else {
            SymmetryClass::ThreeDistinct
        };
        Ok(Self { masses, pair_reduced, atom_pair_reduced, symmetry })
    }

    /// Three identical particles of mass `m`.
    pub fn identical(m: f64) -> Result<Self> {
        Self::new(m, m, m, 1e-12)
    }

    pub fn masses(&self) -> [f64; 3] {
        self.masses
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `mu_jk` for the pair described by frame `i`.
    pub fn pair_reduced(&self, frame: usize) -> f64 {
        self.pair_reduced[frame]
    }

    /// `mu_i,jk` for frame `i`.
    pub fn atom_pair_reduced(&self, frame: usize) -> f64 {
        self.atom_pair_reduced[frame]
    }

    pub fn symmetry(&self) -> SymmetryClass {
        self.symmetry
    }

    /// Same masses with the symmetry class forced to `ThreeDistinct`, used to
    /// solve an identical-particle system without the block reduction.
    pub fn without_reduction(&self) -> Self {
        Self { symmetry: SymmetryClass::ThreeDistinct, ..self.clone() }
    }

    /// Relabels particles so that, for `TwoIdentical`, the distinct particle
    /// comes first and the identical pair is `(1, 2)`.
    pub fn canonical(&self) -> Self {
        match self.symmetry.odd_particle() {
            Some(odd) if odd != 0 => {
                let (a, b) = ((odd + 1) % 3, (odd + 2) % 3);
                let m = self.masses;
                let mut out = Self::new(m[odd], m[a], m[b], 0.0).expect("masses already validated");
                out.symmetry = SymmetryClass::TwoIdentical { pair: (1, 2) };
                out
            }
            _ => self.clone(),
        }
    }
}

/// A configuration expressed in one Jacobi frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiPoint {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    /// Angle between `x_i` and `y_i`, radians.
    pub theta: f64,
}

impl JacobiPoint {
    pub fn new(frame: usize, x: f64, y: f64, theta: f64) -> Result<Self> {
        if frame > 2 {
            return Err(Error::InvalidInput(format!("frame index {frame} out of range")));
        }
        if !(x >= 0.0 && y >= 0.0) || !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::InvalidInput(format!("Jacobi point needs x, y >= 0 and 0 <= theta <= pi, got ({x}, {y}, {theta})")));
        }
        Ok(Self { frame, x, y, theta })
    }

    /// Body-frame vectors `(x_i, y_i)`.
    pub fn vectors(&self) -> ([f64; 3], [f64; 3]) {
        let (s, c) = self.theta.sin_cos();
        ([0.0, 0.0, self.x], [self.y * s, 0.0, self.y * c])
    }
}

/// Jacobi vectors of a target frame, in the body frame of the source point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedJacobi {
    pub frame: usize,
    pub x_vec: [f64; 3],
    pub y_vec: [f64; 3],
    pub x: f64,
    pub y: f64,
    pub theta_x: f64,
    pub phi_x: f64,
    pub theta_y: f64,
    pub phi_y: f64,
}

impl RotatedJacobi {
    /// Cosine of the angle between the rotated `x` and `y` vectors.
    pub fn cos_between(&self) -> f64 {
        (dot(&self.x_vec, &self.y_vec) / (self.x * self.y)).clamp(-1.0, 1.0)
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [alpha * a[0] + b[0], alpha * a[1] + b[1], alpha * a[2] + b[2]]
}

fn neg(a: [f64; 3]) -> [f64; 3] {
    [-a[0], -a[1], -a[2]]
}

pub(crate) fn polar_angles(v: &[f64; 3], r: f64) -> (f64, f64) {
    let theta = (v[2] / r).clamp(-1.0, 1.0).acos();
    // every vector lives in the xz-plane, so the azimuth is 0 or pi
    let phi = if v[0] < 0.0 { std::f64::consts::PI } else { 0.0 };
    (theta, phi)
}

/// Rotated vectors without the coincident-geometry check. Used in the inner
/// loops of kernel assembly where degenerate points carry zero weight.
pub(crate) fn rotate_vectors(source: usize, x_i: &[f64; 3], y_i: &[f64; 3], target: usize, masses: &MassSystem) -> ([f64; 3], [f64; 3]) {
    let m = masses.masses();
    let i = source;
    let j = (i + 1) % 3;
    let k = (i + 2) % 3;
    if target == j {
        // -x_j = m_j/(m_j+m_k) x_i + y_i ;  y_j = m_i/(m_i+m_k) x_j + x_i
        let x_j = neg(axpy(m[j] / (m[j] + m[k]), x_i, y_i));
        let y_j = axpy(m[i] / (m[i] + m[k]), &x_j, x_i);
        (x_j, y_j)
    } else if target == k {
        // -x_k = m_k/(m_j+m_k) x_i - y_i ; -y_k = m_i/(m_i+m_j) x_k + x_i
        let x_k = neg(axpy(m[k] / (m[j] + m[k]), x_i, &neg(*y_i)));
        let y_k = neg(axpy(m[i] / (m[i] + m[j]), &x_k, x_i));
        (x_k, y_k)
    } else {
        (*x_i, *y_i)
    }
}

/// Expresses `point` in the Jacobi frame `target`.
pub fn rotate_jacobi(point: &JacobiPoint, target: usize, masses: &MassSystem) -> Result<RotatedJacobi> {
    if target > 2 || target == point.frame {
        return Err(Error::InvalidInput(format!("target frame {target} must differ from source frame {}", point.frame)));
    }
    let (x_i, y_i) = point.vectors();
    let (x_vec, y_vec) = rotate_vectors(point.frame, &x_i, &y_i, target, masses);
    let x = norm(&x_vec);
    let y = norm(&y_vec);
    let scale = point.x.max(point.y).max(f64::MIN_POSITIVE);
    if x <= 1e-14 * scale || y <= 1e-14 * scale {
        return Err(Error::CoincidentGeometry(format!("frame {target} has x = {x:.3e}, y = {y:.3e}")));
    }
    let (theta_x, phi_x) = polar_angles(&x_vec, x);
    let (theta_y, phi_y) = polar_angles(&y_vec, y);
    Ok(RotatedJacobi { frame: target, x_vec, y_vec, x, y, theta_x, phi_x, theta_y, phi_y })
}

/// Hyperradius in bohr * sqrt(Da): `rho^2 = mu_jk x^2 + mu_i,jk y^2`.
pub fn hyperradius(point: &JacobiPoint, masses: &MassSystem) -> f64 {
    let i = point.frame;
    (masses.pair_reduced(i) * point.x * point.x + masses.atom_pair_reduced(i) * point.y * point.y).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Independent route: build particle positions, then read every frame's
    /// Jacobi vectors off them.
    fn positions(point: &JacobiPoint, m: [f64; 3]) -> [[f64; 3]; 3] {
        let (x_i, y_i) = point.vectors();
        let i = point.frame;
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let total = m[0] + m[1] + m[2];
        let mjk = m[j] + m[k];
        let mut r = [[0.0; 3]; 3];
        for c in 0..3 {
            let centre = -m[i] / total * y_i[c];
            r[i][c] = mjk / total * y_i[c];
            r[j][c] = centre + m[k] / mjk * x_i[c];
            r[k][c] = centre - m[j] / mjk * x_i[c];
        }
        r
    }

    fn jacobi_from_positions(r: &[[f64; 3]; 3], m: [f64; 3], frame: usize) -> ([f64; 3], [f64; 3]) {
        let (i, j, k) = (frame, (frame + 1) % 3, (frame + 2) % 3);
        let mut x = [0.0; 3];
        let mut y = [0.0; 3];
        for c in 0..3 {
            x[c] = r[j][c] - r[k][c];
            y[c] = r[i][c] - (m[j] * r[j][c] + m[k] * r[k][c]) / (m[j] + m[k]);
        }
        (x, y)
    }

    #[test]
    fn neon_masses_are_all_identical() {
        let m = crate::units::NEON_20_MASS;
        let sys = MassSystem::new(m, m, m, 1e-9).unwrap();
        assert_eq!(sys.symmetry(), SymmetryClass::AllIdentical);
        for i in 0..3 {
            assert!((sys.pair_reduced(i) - m / 2.0).abs() < 1e-13);
            assert!((sys.atom_pair_reduced(i) - 2.0 * m / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn two_identical_and_distinct_masses() {
        let sys = MassSystem::new(1.0, 1.0, 2.0, 1e-9).unwrap();
        assert_eq!(sys.symmetry(), SymmetryClass::TwoIdentical { pair: (0, 1) });
        assert_eq!(sys.pair_reduced(2), 0.5);
        assert_eq!(sys.atom_pair_reduced(2), 1.0);

        let sys = MassSystem::new(1.0, 2.0, 3.0, 1e-9).unwrap();
        assert_eq!(sys.symmetry(), SymmetryClass::ThreeDistinct);
        assert!((sys.pair_reduced(0) - 1.2).abs() < 1e-15);
        assert!((sys.atom_pair_reduced(0) - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_mass() {
        assert!(matches!(MassSystem::new(1.0, 0.0, 1.0, 1e-9), Err(Error::InvalidInput(_))));
        assert!(MassSystem::new(-1.0, 1.0, 1.0, 1e-9).is_err());
    }

    #[test]
    fn canonical_puts_odd_particle_first() {
        let sys = MassSystem::new(1.0, 1.0, 2.0, 1e-9).unwrap().canonical();
        assert_eq!(sys.masses(), [2.0, 1.0, 1.0]);
        assert_eq!(sys.symmetry(), SymmetryClass::TwoIdentical { pair: (1, 2) });
    }

    #[test]
    fn midpoint_configuration() {
        let sys = MassSystem::identical(1.0).unwrap();
        let d = 3.0;
        let p = JacobiPoint::new(0, d, 0.0, 0.0).unwrap();
        for target in [1, 2] {
            let r = rotate_jacobi(&p, target, &sys).unwrap();
            assert!((r.x - d / 2.0).abs() < 1e-14);
            assert!((r.y - 0.75 * d).abs() < 1e-14);
        }
    }

    #[test]
    fn equilateral_configuration() {
        let sys = MassSystem::identical(20.0).unwrap();
        let d = 5.5;
        let p = JacobiPoint::new(0, d, 3f64.sqrt() / 2.0 * d, PI / 2.0).unwrap();
        for target in [1, 2] {
            let r = rotate_jacobi(&p, target, &sys).unwrap();
            assert!((r.x - d).abs() < 1e-13);
            assert!((r.y - 3f64.sqrt() / 2.0 * d).abs() < 1e-13);
        }
    }

    #[test]
    fn unequal_masses_match_position_oracle() {
        let m = [1.0, 2.0, 3.0];
        let sys = MassSystem::new(m[0], m[1], m[2], 1e-9).unwrap();
        let p = JacobiPoint::new(0, 1.0, 1.0, PI / 3.0).unwrap();
        let r = positions(&p, m);
        for target in [1, 2] {
            let (xv, yv) = jacobi_from_positions(&r, m, target);
            let rot = rotate_jacobi(&p, target, &sys).unwrap();
            for c in 0..3 {
                assert!((rot.x_vec[c] - xv[c]).abs() < 1e-14, "x {target} {c}");
                assert!((rot.y_vec[c] - yv[c]).abs() < 1e-14, "y {target} {c}");
            }
        }
    }

    #[test]
    fn hyperradius_examples() {
        let sys = MassSystem::identical(4.0).unwrap();
        assert_eq!(hyperradius(&JacobiPoint::new(0, 0.0, 0.0, 0.0).unwrap(), &sys), 0.0);
        let d = 2.5;
        let rho = hyperradius(&JacobiPoint::new(0, d, 0.0, 0.0).unwrap(), &sys);
        assert!((rho - d * (4.0f64 / 2.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn coincident_geometry_is_flagged() {
        let sys = MassSystem::identical(1.0).unwrap();
        // particle 0 sits on particle 2: y_0 = x_0 / 2 along the axis
        let p = JacobiPoint::new(0, 2.0, 1.0, 0.0).unwrap();
        let hit = [1, 2].iter().any(|&t| matches!(rotate_jacobi(&p, t, &sys), Err(Error::CoincidentGeometry(_))));
        assert!(hit);
    }

    #[test]
    fn collinear_points_have_polar_angles_zero_or_pi() {
        let sys = MassSystem::new(1.0, 2.0, 3.0, 1e-9).unwrap();
        for &theta in &[0.0, PI] {
            let p = JacobiPoint::new(0, 1.3, 0.4, theta).unwrap();
            for t in [1, 2] {
                let r = rotate_jacobi(&p, t, &sys).unwrap();
                for a in [r.theta_x, r.theta_y] {
                    assert!(a.abs() < 1e-7 || (a - PI).abs() < 1e-7, "angle {a}");
                }
            }
        }
    }

    fn arb_masses() -> impl Strategy<Value = [f64; 3]> {
        [0.1f64..50.0, 0.1f64..50.0, 0.1f64..50.0]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn hyperradius_is_frame_invariant(
            m in arb_masses(),
            frame in 0usize..3,
            x in 0.01f64..40.0,
            y in 0.01f64..40.0,
            theta in 0.0f64..PI,
        ) {
            let sys = MassSystem::new(m[0], m[1], m[2], 1e-12).unwrap();
            let p = JacobiPoint::new(frame, x, y, theta).unwrap();
            let rho = hyperradius(&p, &sys);
            for target in 0..3 {
                if target == frame { continue; }
                let (xv, yv) = rotate_vectors(frame, &p.vectors().0, &p.vectors().1, target, &sys);
                let rho_t = (sys.pair_reduced(target) * dot(&xv, &xv)
                    + sys.atom_pair_reduced(target) * dot(&yv, &yv)).sqrt();
                prop_assert!((rho_t / rho - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn rotation_agrees_with_positions(
            m in arb_masses(),
            frame in 0usize..3,
            x in 0.01f64..40.0,
            y in 0.01f64..40.0,
            theta in 0.0f64..PI,
        ) {
            let sys = MassSystem::new(m[0], m[1], m[2], 1e-12).unwrap();
            let p = JacobiPoint::new(frame, x, y, theta).unwrap();
            let r = positions(&p, m);
            let scale = x.max(y);
            for target in 0..3 {
                let (xv, yv) = rotate_vectors(frame, &p.vectors().0, &p.vectors().1, target, &sys);
                let (xo, yo) = jacobi_from_positions(&r, m, target);
                for c in 0..3 {
                    prop_assert!((xv[c] - xo[c]).abs() < 1e-12 * scale);
                    prop_assert!((yv[c] - yo[c]).abs() < 1e-12 * scale);
                }
                // and back again
                let (xb, yb) = rotate_vectors(target, &xv, &yv, frame, &sys);
                let (x0, y0) = p.vectors();
                for c in 0..3 {
                    prop_assert!((xb[c] - x0[c]).abs() < 1e-12 * scale);
                    prop_assert!((yb[c] - y0[c]).abs() < 1e-12 * scale);
                }
            }
        }
    }
}
