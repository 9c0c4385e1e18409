//! Pair (dimer) rovibrational levels and the zero-energy scattering length,
//! on the same Hermite collocation basis as the three-body problem.

use faer::Mat;
use serde::Serialize;

use crate::basis::{composite_gauss, HermiteBasis, RadialGrid};
use crate::error::{Error, Result};
use crate::pairpot::PotentialModel;
use crate::units::KAPPA;

#[derive(Debug, Clone, Serialize)]
pub struct DimerState {
    pub v: usize,
    pub j: u32,
    /// Energy in K.
    pub energy: f64,
    /// Expansion coefficients on the active basis functions.
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DimerSpectrum {
    pub states: Vec<DimerState>,
    pub mu: f64,
    pub basis: HermiteBasis,
}

impl DimerSpectrum {
    pub fn ground(&self) -> Option<&DimerState> {
        self.states.iter().min_by(|a, b| a.energy.total_cmp(&b.energy))
    }

    pub fn state(&self, v: usize, j: u32) -> Option<&DimerState> {
        self.states.iter().find(|s| s.v == v && s.j == j)
    }

    /// `phi(x)` of a state, derivative order `d`.
    pub fn eval(&self, state: &DimerState, x: f64, d: u32) -> f64 {
        self.basis.expand(&state.coeffs, x, d)
    }
}

/// Collocation matrices of the radial Hamiltonian `-(kappa/2mu) d2 + V + cent`
/// and of the indicator: `(H, S)`.
pub fn radial_operator(model: &PotentialModel, mu: f64, j: u32, basis: &HermiteBasis) -> (Mat<f64>, Mat<f64>) {
    let s0 = basis.collocation_matrix(0);
    let s2 = basis.collocation_matrix(2);
    let kin = KAPPA / (2.0 * mu);
    let cent = f64::from(j * (j + 1));
    let nodes = basis.grid().nodes();
    let h = Mat::from_fn(s0.nrows(), s0.ncols(), |n, a| {
        let x = nodes[n];
        let w = model.value(x) + kin * cent / (x * x);
        -kin * s2[(n, a)] + w * s0[(n, a)]
    });
    (h, s0)
}

/// Bound levels (`E < 0`) of one rotational quantum number `j`.
pub fn solve_dimer(model: &PotentialModel, mu: f64, j: u32, grid: &RadialGrid) -> Result<Vec<DimerState>> {
    if !(mu > 0.0) {
        return Err(Error::InvalidInput(format!("reduced mass must be positive (got {mu})")));
    }
    let basis = HermiteBasis::dirichlet(grid.clone());
    let (h, s) = radial_operator(model, mu, j, &basis);
    let s_lu = s.partial_piv_lu();
    let a = {
        use faer::linalg::solvers::Solve;
        s_lu.solve(&h)
    };
    let eig = a.eigen().map_err(|e| Error::Singular(format!("dimer eigensolver: {e:?}")))?;
    let (vals, vecs) = (eig.S(), eig.U());
    let n = basis.len();

    let mut found: Vec<(f64, Vec<f64>)> = Vec::new();
    for k in 0..n {
        let e = vals[k];
        if !(e.re < 0.0) || e.im.abs() > 1e-8 * e.re.abs().max(1.0) {
            continue;
        }
        // eigenvector of a real eigenvalue: rotate to a real vector
        let col: Vec<_> = (0..n).map(|i| vecs[(i, k)]).collect();
        let pivot = col.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).copied().unwrap();
        let phase = pivot.conj() / pivot.norm();
        let c: Vec<f64> = col.iter().map(|z| (z * phase).re).collect();
        found.push((e.re, c));
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (gx, gw) = composite_gauss(grid, 4);
    Ok(found
        .into_iter()
        .enumerate()
        .map(|(v, (energy, mut c))| {
            let norm: f64 = gx.iter().zip(&gw).map(|(x, w)| w * basis.expand(&c, *x, 0).powi(2)).sum();
            let scale = 1.0 / norm.sqrt();
            // positive first lobe
            let peak = gx.iter().map(|x| basis.expand(&c, *x, 0).abs()).fold(0.0, f64::max);
            let first = gx.iter().map(|x| basis.expand(&c, *x, 0)).find(|v| v.abs() > 1e-3 * peak).unwrap_or(1.0);
            let sign = if first < 0.0 { -1.0 } else { 1.0 };
            c.iter_mut().for_each(|ci| *ci *= sign * scale);
            DimerState { v, j, energy, coeffs: c }
        })
        .collect())
}

/// All bound levels for `j = 0 ..= j_max`, ordered by energy.
pub fn dimer_spectrum(model: &PotentialModel, mu: f64, j_max: u32, grid: &RadialGrid) -> Result<DimerSpectrum> {
    let mut states = Vec::new();
    for j in 0..=j_max {
        states.extend(solve_dimer(model, mu, j, grid)?);
    }
    states.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(DimerSpectrum { states, mu, basis: HermiteBasis::dirichlet(grid.clone()) })
}

/// Solves on `grid` and on its refinement; fails if any level common to both
/// moves by more than `tol` K.
pub fn solve_dimer_checked(model: &PotentialModel, mu: f64, j: u32, grid: &RadialGrid, tol: f64) -> Result<Vec<DimerState>> {
    let coarse = solve_dimer(model, mu, j, grid)?;
    let fine = solve_dimer(model, mu, j, &grid.refined())?;
    let drift = coarse.iter().zip(&fine).map(|(a, b)| (a.energy - b.energy).abs()).fold(0.0, f64::max);
    if drift > tol || coarse.len() != fine.len() {
        return Err(Error::Accuracy { what: format!("dimer j={j} levels"), drift, tol });
    }
    Ok(coarse)
}

/// Exact `j = 0` Morse levels on the full line, K. Accurate on the half
/// line when `a r_e` is large.
pub fn morse_levels(depth: f64, a: f64, mu: f64) -> Vec<f64> {
    let nu = a * (KAPPA / (2.0 * mu * depth)).sqrt();
    (0..).map(|v| (v as f64 + 0.5) * nu).take_while(|&x| x < 1.0).map(|x| -depth * (1.0 - x).powi(2)).collect()
}

/// Zero-energy s-wave scattering length in bohr.
///
/// The radial equation `u'' = (2 mu / kappa) V u` is integrated outward with
/// RK4 from deep inside the repulsive core; `a(x) = x - u/u'` is evaluated
/// at doubling radii until it settles within `tol`.
pub fn scattering_length(model: &PotentialModel, mu: f64) -> Result<f64> {
    scattering_length_with(model, mu, 1e-5)
}

pub fn scattering_length_with(model: &PotentialModel, mu: f64, tol: f64) -> Result<f64> {
    if model.is_zero() {
        return Ok(0.0);
    }
    let k2 = |x: f64| 2.0 * mu / KAPPA * model.value(x);

    // start where the barrier is a few thousand kelvin high
    let mut x = 1e-3;
    while k2(x) > 2.0 * mu / KAPPA * 5e3 && x < 50.0 {
        x += 1e-3;
    }
    let (mut u, mut du) = (0.0, 1.0);
    let rhs = |x: f64, u: f64, du: f64| (du, k2(x) * u);

    let mut checkpoint = 100.0f64.max(2.0 * x);
    let mut history = Vec::new();
    let mut last = f64::NAN;
    while checkpoint < 1e5 {
        while x < checkpoint {
            let local = k2(x).abs().sqrt();
            let h = (0.02 / (local + 1e-12)).clamp(1e-4, 0.02 * x.max(1.0)).min(checkpoint - x);
            let (a1, b1) = rhs(x, u, du);
            let (a2, b2) = rhs(x + 0.5 * h, u + 0.5 * h * a1, du + 0.5 * h * b1);
            let (a3, b3) = rhs(x + 0.5 * h, u + 0.5 * h * a2, du + 0.5 * h * b2);
            let (a4, b4) = rhs(x + h, u + h * a3, du + h * b3);
            u += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            du += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
            x += h;
            let m = u.abs().max(du.abs());
            if m > 1e100 {
                u /= m;
                du /= m;
            }
        }
        let a = x - u / du;
        history.push(a);
        if (a - last).abs() < tol {
            return Ok(a);
        }
        last = a;
        checkpoint *= 2.0;
    }
    Err(Error::Convergence { what: "scattering length extrapolation".into(), iterations: history.len(), history })
}
