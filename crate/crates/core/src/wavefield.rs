//! Total wavefunction `Psi = sum of Faddeev components`, density slices
//! `|rho^2 Psi|^2` and the classical boundary `V_total = E`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::angular::BipolarEvaluator;
use crate::error::{Error, Result};
use crate::geometry::{norm, polar_angles, rotate_vectors, JacobiPoint, MassSystem};
use crate::operators::{ProblemAssembly, ReductionMode};
use crate::pairpot::PotentialModel;

/// `(component, frame, exchange sign)` images that sum to `Psi`.
fn images(a: &ProblemAssembly) -> Vec<(usize, usize, bool)> {
    match a.mode {
        ReductionMode::ThreeDistinct => vec![(0, 0, false), (1, 1, false), (2, 2, false)],
        // the frame-2 component is the pair-exchanged copy of the frame-1 one
        ReductionMode::TwoIdentical => vec![(0, 0, false), (1, 1, false), (1, 2, true)],
        ReductionMode::AllIdentical => vec![(0, 0, false), (0, 1, false), (0, 2, false)],
    }
}

/// `f(x, y) / x` style factor, replaced by the slope at the origin.
fn radial_pair(a: &ProblemAssembly, coeffs: &[Complex64], base: usize, x: f64, y: f64) -> Complex64 {
    let (dx, dy) = (u32::from(x <= 0.0), u32::from(y <= 0.0));
    let (Some(lx), Some(ly)) = (a.x_basis.local(x, dx), a.y_basis.local(y, dy)) else {
        return Complex64::new(0.0, 0.0);
    };
    let nx = a.nx();
    let mut acc = Complex64::new(0.0, 0.0);
    for &(p, sy) in &ly {
        if p == usize::MAX {
            continue;
        }
        for &(q, sx) in &lx {
            if q == usize::MAX {
                continue;
            }
            acc += coeffs[base + p * nx + q] * (sx * sy);
        }
    }
    let sx = if x > 0.0 { x } else { 1.0 };
    let sy = if y > 0.0 { y } else { 1.0 };
    acc / (sx * sy)
}

/// `Psi` at a point given in frame 0.
pub fn evaluate_total_wavefunction(coeffs: &[Complex64], a: &ProblemAssembly, point: &JacobiPoint) -> Result<Complex64> {
    if coeffs.len() != a.dim() {
        return Err(Error::InvalidInput(format!("coefficient vector has length {}, expected {}", coeffs.len(), a.dim())));
    }
    if point.frame != 0 {
        return Err(Error::InvalidInput("points are given in frame 0".into()));
    }
    let (x0, y0) = point.vectors();
    let (x_max, y_max) = (a.x_basis.grid().x_max(), a.y_basis.grid().x_max());
    let mut psi = Complex64::new(0.0, 0.0);
    for (c, frame, exchange) in images(a) {
        let (xv, yv) = rotate_vectors(0, &x0, &y0, frame, &a.masses);
        let (x, y) = (norm(&xv), norm(&yv));
        if x > x_max || y > y_max {
            continue;
        }
        // directions are immaterial where the radial factor vanishes
        let (tx, px) = if x > 0.0 { polar_angles(&xv, x) } else { (0.0, 0.0) };
        let (ty, py) = if y > 0.0 { polar_angles(&yv, y) } else { (0.0, 0.0) };
        let comp = &a.components()[c];
        for (alpha, ch) in comp.channels.channels().iter().enumerate() {
            let radial = radial_pair(a, coeffs, a.index(c, alpha, 0, 0), x, y);
            if radial == Complex64::new(0.0, 0.0) {
                continue;
            }
            let sign = if exchange && ch.l % 2 == 1 { -1.0 } else { 1.0 };
            psi += sign * radial * BipolarEvaluator::new(*ch).eval(tx, px, ty, py);
        }
    }
    Ok(psi)
}

/// Pair separations `(|x_0|, |x_1|, |x_2|)` of a frame-0 point.
pub fn pair_distances(point: &JacobiPoint, masses: &MassSystem) -> [f64; 3] {
    let (x0, y0) = point.vectors();
    std::array::from_fn(|f| {
        let (xv, _) = rotate_vectors(point.frame, &x0, &y0, f, masses);
        norm(&xv)
    })
}

/// `sum_pairs V(r_pair)`.
pub fn total_potential(model: &PotentialModel, point: &JacobiPoint, masses: &MassSystem) -> f64 {
    pair_distances(point, masses).iter().map(|&r| model.value(r.max(1e-9))).sum()
}

/// `rho^2` in the units of [`crate::geometry::hyperradius`].
pub fn rho_squared(point: &JacobiPoint, masses: &MassSystem) -> f64 {
    let h = crate::geometry::hyperradius(point, masses);
    h * h
}

/// Straight segment of a contour, `((x1, y1), (x2, y2))`.
pub type Segment = ((f64, f64), (f64, f64));

/// Marching squares for `f = 0` on a rectilinear lattice; `values[iy][ix]`.
pub fn marching_squares(xs: &[f64], ys: &[f64], values: &[Vec<f64>]) -> Vec<Segment> {
    let mut out = Vec::new();
    let cross = |(xa, ya, fa): (f64, f64, f64), (xb, yb, fb): (f64, f64, f64)| {
        let t = fa / (fa - fb);
        (xa + t * (xb - xa), ya + t * (yb - ya))
    };
    for iy in 0..ys.len().saturating_sub(1) {
        for ix in 0..xs.len().saturating_sub(1) {
            // corners counter-clockwise from (ix, iy)
            let c = [
                (xs[ix], ys[iy], values[iy][ix]),
                (xs[ix + 1], ys[iy], values[iy][ix + 1]),
                (xs[ix + 1], ys[iy + 1], values[iy + 1][ix + 1]),
                (xs[ix], ys[iy + 1], values[iy + 1][ix]),
            ];
            let mut pts = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                if (a.2 < 0.0) != (b.2 < 0.0) {
                    pts.push(cross(a, b));
                }
            }
            match pts.len() {
                2 => out.push((pts[0], pts[1])),
                4 => {
                    // saddle: pair by the cell-centre sign
                    let centre = c.iter().map(|v| v.2).sum::<f64>() / 4.0;
                    if (centre < 0.0) == (c[0].2 < 0.0) {
                        out.push((pts[0], pts[3]));
                        out.push((pts[1], pts[2]));
                    } else {
                        out.push((pts[0], pts[1]));
                        out.push((pts[2], pts[3]));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Contour of `V_total - E = 0` over `(x, y)` at fixed `theta`.
pub fn classical_boundary(
    model: &PotentialModel,
    masses: &MassSystem,
    energy: f64,
    theta: f64,
    xs: &[f64],
    ys: &[f64],
) -> Result<Vec<Segment>> {
    let values = ys
        .iter()
        .map(|&y| {
            xs.iter()
                .map(|&x| Ok(total_potential(model, &JacobiPoint::new(0, x, y, theta)?, masses) - energy))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(marching_squares(xs, ys, &values))
}

/// One `theta` slice of `|rho^2 Psi|^2`.
#[derive(Debug, Clone, Serialize)]
pub struct FieldSlice {
    pub theta: f64,
    /// `values[iy][ix]`.
    pub values: Vec<Vec<f64>>,
    pub boundary: Vec<Segment>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub slices: Vec<FieldSlice>,
}

/// Evenly spaced lattice strictly inside `(0, max]`.
pub fn lattice(max: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| max * k as f64 / n as f64).collect()
}

/// Density slices plus classical boundaries at `energy`.
pub fn density_field(coeffs: &[Complex64], a: &ProblemAssembly, energy: f64, thetas: &[f64], xs: &[f64], ys: &[f64]) -> Result<FieldGrid> {
    let slices = thetas
        .par_iter()
        .map(|&theta| {
            let values = ys
                .iter()
                .map(|&y| {
                    xs.iter()
                        .map(|&x| {
                            let p = JacobiPoint::new(0, x, y, theta)?;
                            let psi = evaluate_total_wavefunction(coeffs, a, &p)?;
                            Ok((rho_squared(&p, &a.masses) * psi).norm_sqr())
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let boundary = classical_boundary(&a.potential, &a.masses, energy, theta, xs, ys)?;
            Ok(FieldSlice { theta, values, boundary })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldGrid { x: xs.to_vec(), y: ys.to_vec(), slices })
}
