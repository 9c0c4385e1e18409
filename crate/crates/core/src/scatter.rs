//! Atom–dimer scattering below the three-body breakup threshold.
//!
//! The incident wave `phi_vj(x) j_lambda(q y)` sits in the first Faddeev
//! component. The scattered part solves `(A - E 1) v = -K chi`; its
//! projections on the dimer states, fitted at large `y` to
//! `X j(q' y) + Y h(q' y)`, give `T = (1 + X)^{-1} Y` and `S = 1 + 2 i T`.
//!
//! Riccati functions follow `j_l(z) = z j_l^sph(z)`, `n_l(z) = z y_l^sph(z)`
//! (so `n_0 = -cos z`) and `h = -n + i j = e^{iz}`, an outgoing wave.

use faer::{c64, Mat};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::angular::ChannelSet;
use crate::basis::{composite_gauss, HermiteBasis};
use crate::bound::GeneralizedProblem as _;
use crate::dimer::{dimer_spectrum, DimerSpectrum, DimerState};
use crate::error::{Error, Result};
use crate::geometry::MassSystem;
use crate::linalg::DenseLu;
use crate::operators::{ProblemAssembly, ReducedSystem, ReductionMode};
use crate::units::KAPPA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RiccatiKind {
    Regular,
    Irregular,
    Outgoing,
}

/// Regular and irregular Riccati functions with derivatives:
/// `(j, j', n, n')`.
pub fn riccati_pair(l: u32, z: f64) -> (f64, f64, f64, f64) {
    let l = l as usize;
    let (j, jm) = regular_values(l, z);
    let (n, nm) = irregular_values(l, z);
    let (dj, dn) = if l == 0 {
        (z.cos(), z.sin())
    } else {
        let lz = l as f64 / z;
        (jm - lz * j, nm - lz * n)
    };
    (j, dj, n, dn)
}

/// `(value, derivative)` of one Riccati function.
pub fn riccati(l: u32, z: f64, kind: RiccatiKind) -> (Complex64, Complex64) {
    if z == 0.0 && kind == RiccatiKind::Regular {
        return (Complex64::new(0.0, 0.0), Complex64::new(if l == 0 { 1.0 } else { 0.0 }, 0.0));
    }
    let (j, dj, n, dn) = riccati_pair(l, z);
    match kind {
        RiccatiKind::Regular => (j.into(), dj.into()),
        RiccatiKind::Irregular => (n.into(), dn.into()),
        RiccatiKind::Outgoing => (Complex64::new(-n, j), Complex64::new(-dn, dj)),
    }
}

/// `(j_l, j_{l-1})` (the second is unused for `l = 0`).
fn regular_values(l: usize, z: f64) -> (f64, f64) {
    if z == 0.0 {
        return (0.0, 0.0);
    }
    let j0 = z.sin();
    if l == 0 {
        return (j0, 0.0);
    }
    let j1 = z.sin() / z - z.cos();
    if z > l as f64 {
        // upward recurrence is stable beyond the turning point
        let (mut a, mut b) = (j0, j1);
        for k in 1..l {
            let c = (2 * k + 1) as f64 / z * b - a;
            a = b;
            b = c;
        }
        return (b, a);
    }
    // downward (Miller) recurrence, normalized on the larger of j0, j1
    let start = l + 20 + (z as usize) + (2.0 * (l as f64).sqrt()) as usize;
    let (mut up, mut cur) = (0.0f64, 1e-30f64);
    let mut vals = vec![0.0; l + 1];
    for k in (1..=start).rev() {
        let down = (2 * k + 1) as f64 / z * cur - up;
        up = cur;
        cur = down;
        if k - 1 <= l {
            vals[k - 1] = cur;
        }
        if cur.abs() > 1e250 {
            let s = 1e-250;
            up *= s;
            cur *= s;
            vals.iter_mut().for_each(|v| *v *= s);
        }
    }
    // cur is the unnormalized j_0, up the unnormalized j_1
    let scale = if j0.abs() > j1.abs() { j0 / vals[0] } else { j1 / vals[1] };
    (vals[l] * scale, vals[l - 1] * scale)
}

fn irregular_values(l: usize, z: f64) -> (f64, f64) {
    let n0 = -z.cos();
    if l == 0 {
        return (n0, 0.0);
    }
    let n1 = -z.cos() / z - z.sin();
    let (mut a, mut b) = (n0, n1);
    for k in 1..l {
        let c = (2 * k + 1) as f64 / z * b - a;
        a = b;
        b = c;
    }
    (b, a)
}

/// One atom–dimer arrangement channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticChannel {
    pub v: usize,
    /// Dimer rotation, equal to the pair angular momentum of `channel`.
    pub j: u32,
    /// Index in the channel set of the first component.
    pub channel: usize,
    /// Atom–dimer relative angular momentum.
    pub lambda: u32,
    /// Dimer level, K.
    pub threshold: f64,
    /// Relative momentum, 1/bohr.
    pub q: f64,
    pub open: bool,
}

/// `q = sqrt(2 mu (E - E_th)) / hbar` in 1/bohr; 0 at and below threshold.
pub fn channel_momentum(energy: f64, threshold: f64, mu: f64) -> f64 {
    (2.0 * mu * (energy - threshold).max(0.0) / KAPPA).sqrt()
}

/// Open channels at `energy`, ordered by channel index, then by `v`.
pub fn open_channels(energy: f64, spectrum: &DimerSpectrum, channels: &ChannelSet, masses: &MassSystem) -> Result<Vec<AsymptoticChannel>> {
    if !(energy < 0.0) {
        return Err(Error::OutOfScope(format!("E = {energy} K is at or above the three-body breakup threshold")));
    }
    let mu = masses.atom_pair_reduced(0);
    let mut out = Vec::new();
    for (alpha, ch) in channels.channels().iter().enumerate() {
        let mut levels: Vec<&DimerState> = spectrum.states.iter().filter(|s| s.j == ch.l).collect();
        levels.sort_by_key(|s| s.v);
        for s in levels {
            if s.energy < energy {
                out.push(AsymptoticChannel {
                    v: s.v,
                    j: s.j,
                    channel: alpha,
                    lambda: ch.lambda,
                    threshold: s.energy,
                    q: channel_momentum(energy, s.energy, mu),
                    open: true,
                });
            }
        }
    }
    Ok(out)
}

/// Where the asymptotic form is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingWindow {
    /// Outermost fraction of the `y` collocation nodes.
    OuterFraction(f64),
    /// Nodes with `lo <= y <= hi`, bohr.
    Range { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScatterOptions {
    pub window: MatchingWindow,
    /// Largest accepted fit residual, in units of the incident amplitude.
    pub fit_gate: f64,
    /// Above this `eta_U` the eigenphase sum is flagged unreliable.
    pub unitarity_gate: f64,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        Self { window: MatchingWindow::OuterFraction(0.2), fit_gate: 0.05, unitarity_gate: 0.1 }
    }
}

/// Everything fixed across energies: operators and the dimer levels of the
/// same `x` basis.
pub struct ScatteringProblem<'a> {
    pub assembly: &'a ProblemAssembly,
    pub system: &'a ReducedSystem,
    pub spectrum: DimerSpectrum,
    pub options: ScatterOptions,
}

impl<'a> ScatteringProblem<'a> {
    pub fn new(assembly: &'a ProblemAssembly, system: &'a ReducedSystem, options: ScatterOptions) -> Result<Self> {
        if assembly.mode != ReductionMode::AllIdentical {
            return Err(Error::OutOfScope("scattering is implemented for three identical particles (one arrangement)".into()));
        }
        let spectrum = dimer_spectrum(&assembly.potential, assembly.masses.pair_reduced(0), assembly.l_max, assembly.x_basis.grid())?;
        Ok(Self { assembly, system, spectrum, options })
    }

    pub fn open_channels(&self, energy: f64) -> Result<Vec<AsymptoticChannel>> {
        open_channels(energy, &self.spectrum, &self.assembly.components()[0].channels, &self.assembly.masses)
    }
}

fn dimer_state<'s>(spectrum: &'s DimerSpectrum, ch: &AsymptoticChannel) -> Result<&'s DimerState> {
    spectrum.state(ch.v, ch.j).ok_or_else(|| Error::InvalidInput(format!("no dimer level (v={}, j={})", ch.v, ch.j)))
}

/// Interpolation coefficients on `basis` of the node values `f(y_m)`.
fn interpolate_nodes(basis: &HermiteBasis, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let s = basis.collocation_matrix(0);
    let lu = DenseLu::factor(s, 0.0)?;
    let vals: Vec<f64> = basis.grid().nodes().iter().map(|&y| f(y)).collect();
    Ok(lu.solve_vec(&vals))
}

/// Coefficients `chi` of the incident wave: `1 chi = b` with `b` the values
/// of `phi_vj(x) j_lambda(q y)` at the collocation points of the first
/// component, zero elsewhere.
pub fn build_source(channel: &AsymptoticChannel, assembly: &ProblemAssembly, spectrum: &DimerSpectrum) -> Result<Vec<f64>> {
    if !channel.open {
        return Err(Error::InvalidInput("source requested for a closed channel".into()));
    }
    let state = dimer_state(spectrum, channel)?;
    if state.coeffs.len() != assembly.nx() {
        return Err(Error::InvalidInput("dimer basis differs from the x basis".into()));
    }
    let cy = interpolate_nodes(&assembly.y_basis, |y| riccati_pair(channel.lambda, channel.q * y).0)?;
    let mut chi = vec![0.0; assembly.dim()];
    for (p, &yp) in cy.iter().enumerate() {
        for (q, &xq) in state.coeffs.iter().enumerate() {
            chi[assembly.index(0, channel.channel, p, q)] = yp * xq;
        }
    }
    Ok(chi)
}

/// Node indices of the matching window.
fn window_nodes(basis: &HermiteBasis, window: MatchingWindow) -> Result<Vec<usize>> {
    let nodes = basis.grid().nodes();
    let idx: Vec<usize> = match window {
        MatchingWindow::OuterFraction(f) => {
            let k = ((f * nodes.len() as f64).ceil() as usize).clamp(4, nodes.len());
            (nodes.len() - k..nodes.len()).collect()
        }
        MatchingWindow::Range { lo, hi } => (0..nodes.len()).filter(|&m| nodes[m] >= lo && nodes[m] <= hi).collect(),
    };
    if idx.len() < 3 {
        return Err(Error::InvalidInput(format!("matching window {window:?} holds fewer than 3 nodes")));
    }
    Ok(idx)
}

/// `w_q = int phi(x) s_q(x) dx`, exact for the piecewise-cubic products.
fn projection_weights(basis: &HermiteBasis, phi: &[f64]) -> Vec<f64> {
    let (gx, gw) = composite_gauss(basis.grid(), 4);
    let mut w = vec![0.0; basis.len()];
    for (&x, &g) in gx.iter().zip(&gw) {
        let f = basis.expand(phi, x, 0);
        basis.for_each_active(x, 0, |a, s| w[a] += g * f * s);
    }
    w
}

/// Result of the asymptotic analysis of a set of solutions.
#[derive(Debug, Clone)]
pub struct AsymptoticFit {
    pub x: Mat<c64>,
    pub y: Mat<c64>,
    /// Largest fit residual per window node, in incident-amplitude units.
    pub residual: f64,
}

/// Fits each solution's projection on each open channel to
/// `X j(q y) + Y h(q y)` over the matching window. Row = solution, column =
/// channel.
pub fn extract_xy(
    solutions: &[Vec<Complex64>],
    channels: &[AsymptoticChannel],
    assembly: &ProblemAssembly,
    spectrum: &DimerSpectrum,
    window: MatchingWindow,
    gate: f64,
) -> Result<AsymptoticFit> {
    let win = window_nodes(&assembly.y_basis, window)?;
    let ys = assembly.y_basis.grid().nodes();
    let sy = assembly.y_basis.collocation_matrix(0);
    let (nx, ny) = (assembly.nx(), assembly.ny());
    let weights: Vec<Vec<f64>> = channels
        .iter()
        .map(|ch| dimer_state(spectrum, ch).map(|s| projection_weights(&assembly.x_basis, &s.coeffs)))
        .collect::<Result<_>>()?;
    let nsol = solutions.len();
    let nch = channels.len();
    let mut xm = Mat::<c64>::zeros(nsol, nch);
    let mut ym = Mat::<c64>::zeros(nsol, nch);
    let mut worst = 0.0f64;
    for (s, sol) in solutions.iter().enumerate() {
        for (c, ch) in channels.iter().enumerate() {
            let base = assembly.index(0, ch.channel, 0, 0);
            // radial profile at the window nodes
            let profile: Vec<Complex64> = win
                .iter()
                .map(|&m| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for p in 0..ny {
                        let syp = sy[(m, p)];
                        if syp == 0.0 {
                            continue;
                        }
                        let row = &sol[base + p * nx..base + (p + 1) * nx];
                        let proj: Complex64 = row.iter().zip(&weights[c]).map(|(v, w)| v * w).sum();
                        acc += syp * proj;
                    }
                    acc
                })
                .collect();
            let basis: Vec<(Complex64, Complex64)> = win
                .iter()
                .map(|&m| {
                    let z = ch.q * ys[m];
                    (riccati(ch.lambda, z, RiccatiKind::Regular).0, riccati(ch.lambda, z, RiccatiKind::Outgoing).0)
                })
                .collect();
            let (cj, ch_, res) = fit_two(&profile, &basis)?;
            worst = worst.max(res / (win.len() as f64).sqrt());
            xm[(s, c)] = c64::new(cj.re, cj.im);
            ym[(s, c)] = c64::new(ch_.re, ch_.im);
        }
    }
    if worst > gate {
        return Err(Error::AsymptoticRegion { residual: worst, threshold: gate });
    }
    Ok(AsymptoticFit { x: xm, y: ym, residual: worst })
}

/// Complex least squares `f ~ a u + b w`; returns `(a, b, ||residual||)`.
fn fit_two(f: &[Complex64], uw: &[(Complex64, Complex64)]) -> Result<(Complex64, Complex64, f64)> {
    let (mut g11, mut g12, mut g22) = (0.0, Complex64::new(0.0, 0.0), 0.0);
    let (mut r1, mut r2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for (fi, (u, w)) in f.iter().zip(uw) {
        g11 += u.norm_sqr();
        g22 += w.norm_sqr();
        g12 += u.conj() * w;
        r1 += u.conj() * fi;
        r2 += w.conj() * fi;
    }
    let det = g11 * g22 - g12.norm_sqr();
    if !(det > 1e-14 * g11 * g22) {
        return Err(Error::Singular("asymptotic basis is degenerate on the matching window".into()));
    }
    let a = (r1 * g22 - g12 * r2) / det;
    let b = (r2 * g11 - g12.conj() * r1) / det;
    let res = f.iter().zip(uw).map(|(fi, (u, w))| (fi - a * u - b * w).norm_sqr()).sum::<f64>().sqrt();
    Ok((a, b, res))
}

fn cmat_mul(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    a * b
}

/// `T = (1 + X)^{-1} Y`, then flux-normalized with `sqrt(q_out / q_in)`.
pub fn t_matrix(fit: &AsymptoticFit, q: &[f64]) -> Result<Mat<c64>> {
    use faer::linalg::solvers::Solve;
    let n = q.len();
    let one_x = Mat::from_fn(n, n, |i, j| fit.x[(i, j)] + if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
    let lu = one_x.partial_piv_lu();
    let t = lu.solve(&fit.y);
    if t.col_iter().flat_map(|c| c.iter().copied().collect::<Vec<_>>()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular("1 + X is singular".into()));
    }
    Ok(Mat::from_fn(n, n, |i, j| t[(i, j)] * (q[j] / q[i]).sqrt()))
}

pub fn s_from_t(t: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(t.nrows(), t.ncols(), |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        c64::new(d, 0.0) + c64::new(0.0, 2.0) * t[(i, j)]
    })
}

pub fn t_from_s(s: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(s.nrows(), s.ncols(), |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        (s[(i, j)] - c64::new(d, 0.0)) * c64::new(0.0, -0.5)
    })
}

fn spectral_norm(m: &Mat<c64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    match m.singular_values() {
        Ok(s) => s.into_iter().fold(0.0, f64::max),
        Err(_) => f64::NAN,
    }
}

/// `(eta_U, eta_R) = (||1 - S S^+||, ||S - S^T|| / ||S + S^T||)`, spectral norms.
pub fn defects(s: &Mat<c64>) -> (f64, f64) {
    let n = s.nrows();
    let ssd = cmat_mul(s, &s.adjoint().to_owned());
    let u = Mat::from_fn(n, n, |i, j| {
        let d = if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) };
        d - ssd[(i, j)]
    });
    let diff = Mat::from_fn(n, n, |i, j| s[(i, j)] - s[(j, i)]);
    let sum = Mat::from_fn(n, n, |i, j| s[(i, j)] + s[(j, i)]);
    let den = spectral_norm(&sum);
    let eta_r = if den == 0.0 { 0.0 } else { spectral_norm(&diff) / den };
    (spectral_norm(&u), eta_r)
}

/// Sum of half-arguments of the eigenvalues of `S`, shifted by a multiple of
/// `pi` to lie closest to `previous`.
pub fn eigenphase_sum(s: &Mat<c64>, previous: Option<f64>) -> Result<f64> {
    let n = s.nrows();
    let delta: f64 = if n == 1 {
        0.5 * s[(0, 0)].im.atan2(s[(0, 0)].re)
    } else {
        let ev = s.eigenvalues().map_err(|e| Error::Singular(format!("S eigenvalues: {e:?}")))?;
        ev.iter().map(|z| 0.5 * z.im.atan2(z.re)).sum()
    };
    Ok(match previous {
        Some(p) => delta + std::f64::consts::PI * ((p - delta) / std::f64::consts::PI).round(),
        None => delta,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScatteringResult {
    pub energy: f64,
    pub channels: Vec<AsymptoticChannel>,
    #[serde(skip)]
    pub x: Mat<c64>,
    #[serde(skip)]
    pub y: Mat<c64>,
    #[serde(skip)]
    pub t: Mat<c64>,
    #[serde(skip)]
    pub s: Mat<c64>,
    pub eta_u: f64,
    pub eta_r: f64,
    /// Elastic cross section `pi/q^2 |T_11|^2`, bohr^2.
    pub sigma_el: f64,
    /// Eigenphase sum, radians.
    pub eigenphase_sum: f64,
    /// `eta_U` above the configured gate.
    pub unreliable: bool,
    pub fit_residual: f64,
    /// Total (incident + scattered) coefficients per incident channel.
    #[serde(skip)]
    pub solutions: Vec<Vec<f64>>,
}

impl ScatteringResult {
    /// Coefficients of the elastic solution normalized to
    /// `phi_1 (j + T_11 h) + ...`: row 0 of `(1 + X)^{-1}` applied to the
    /// per-channel solutions.
    pub fn elastic_field(&self) -> Result<Vec<Complex64>> {
        use faer::linalg::solvers::DenseSolveCore;
        let n = self.channels.len();
        let one_x = Mat::from_fn(n, n, |i, j| self.x[(i, j)] + if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
        let inv = one_x.partial_piv_lu().inverse();
        let dim = self.solutions.first().map_or(0, Vec::len);
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for k in 0..n {
            let c = inv[(0, k)];
            let c = Complex64::new(c.re, c.im);
            for (o, v) in out.iter_mut().zip(&self.solutions[k]) {
                *o += c * v;
            }
        }
        Ok(out)
    }
}

/// One energy: one real factorization of `E 1 - A` serves every incident
/// channel.
pub fn solve_scattering(problem: &ScatteringProblem, energy: f64) -> Result<ScatteringResult> {
    let channels = problem.open_channels(energy)?;
    if channels.is_empty() {
        return Err(Error::InvalidInput(format!("no open channel at E = {energy} K")));
    }
    let a = problem.assembly;
    let lu = DenseLu::factor(problem.system.shifted(energy), energy)?;
    let mut scattered = Vec::with_capacity(channels.len());
    let mut totals = Vec::with_capacity(channels.len());
    for ch in &channels {
        let chi = build_source(ch, a, &problem.spectrum)?;
        // (E 1 - A) v = K chi
        let rhs = problem.system.kernel.matvec(&chi);
        let v = lu.solve_vec(&rhs);
        totals.push(chi.iter().zip(&v).map(|(c, s)| c + s).collect::<Vec<f64>>());
        scattered.push(v.into_iter().map(Complex64::from).collect::<Vec<_>>());
    }
    let fit = extract_xy(&scattered, &channels, a, &problem.spectrum, problem.options.window, problem.options.fit_gate)?;
    let q: Vec<f64> = channels.iter().map(|c| c.q).collect();
    let t = t_matrix(&fit, &q)?;
    let s = s_from_t(&t);
    let (eta_u, eta_r) = defects(&s);
    let sigma_el = std::f64::consts::PI / (q[0] * q[0]) * (t[(0, 0)].re.powi(2) + t[(0, 0)].im.powi(2));
    let eigenphase_sum = eigenphase_sum(&s, None)?;
    Ok(ScatteringResult {
        energy,
        channels,
        x: fit.x,
        y: fit.y,
        t,
        s,
        eta_u,
        eta_r,
        sigma_el,
        eigenphase_sum,
        unreliable: eta_u > problem.options.unitarity_gate,
        fit_residual: fit.residual,
        solutions: totals,
    })
}

/// One row of an energy scan; failures are kept and the scan goes on.
#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub energy: f64,
    pub result: std::result::Result<ScatteringResult, String>,
}

/// Independent energies (concurrently), then a sequential eigenphase
/// unwrapping pass in energy order.
pub fn energy_scan(problem: &ScatteringProblem, energies: &[f64]) -> Result<Vec<ScanPoint>> {
    let lowest =
        problem.spectrum.ground().map(|s| s.energy).ok_or_else(|| Error::InvalidInput("the pair potential has no bound level".into()))?;
    if let Some(e) = energies.iter().find(|&&e| !(e < 0.0 && e > lowest)) {
        return Err(Error::InvalidInput(format!("scan energy {e} K outside ({lowest}, 0) K")));
    }
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut points: Vec<ScanPoint> =
        sorted.par_iter().map(|&e| ScanPoint { energy: e, result: solve_scattering(problem, e).map_err(|err| err.to_string()) }).collect();
    let mut prev: Option<f64> = None;
    for p in &mut points {
        if let Ok(r) = &mut p.result {
            r.eigenphase_sum = eigenphase_sum(&r.s, prev)?;
            prev = Some(r.eigenphase_sum);
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        for &z in &[0.05, 0.7, 3.0, 25.0] {
            let (j, dj, n, dn) = riccati_pair(0, z);
            assert!((j - z.sin()).abs() < 1e-15 && (dj - z.cos()).abs() < 1e-15);
            assert!((n + z.cos()).abs() < 1e-15 && (dn - z.sin()).abs() < 1e-15);
            let (h, _) = riccati(0, z, RiccatiKind::Outgoing);
            assert!((h - Complex64::new(z.cos(), z.sin())).norm() < 1e-15);
            let (j2, ..) = riccati_pair(2, z);
            let exact = (3.0 / (z * z) - 1.0) * z.sin() - 3.0 * z.cos() / z;
            // the closed form itself cancels badly at small z
            assert!((j2 - exact).abs() < 1e-12 + 1e-8 * exact.abs(), "z={z}: {j2} vs {exact}");
        }
    }

    #[test]
    fn small_argument_regular() {
        // j_l(z) ~ z^{l+1} / (2l+1)!!
        let z = 1e-3;
        for l in 0..=10u32 {
            let df: f64 = (1..=l).map(|k| (2 * k + 1) as f64).product();
            let (j, ..) = riccati_pair(l, z);
            let lead = z.powi(l as i32 + 1) / df;
            assert!((j / lead - 1.0).abs() < 1e-5, "l={l}: {j} vs {lead}");
        }
    }

    #[test]
    fn wronskian() {
        for l in 0..=10 {
            for &z in &[0.1, 1.0, 10.0, 50.0] {
                let (j, dj, n, dn) = riccati_pair(l, z);
                let w = j * dn - dj * n;
                assert!((w - 1.0).abs() < 1e-10, "l={l} z={z}: {w}");
            }
        }
    }

    #[test]
    fn defects_oracle() {
        let eye = Mat::<c64>::identity(3, 3);
        assert_eq!(defects(&eye), (0.0, 0.0));
        let d = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                let ph = 0.7 * i as f64 + 0.3;
                c64::new((2.0 * ph).cos(), (2.0 * ph).sin())
            } else {
                c64::new(0.0, 0.0)
            }
        });
        assert!(defects(&d).0 < 1e-15);
        // a non-unitary matrix against its singular values
        let m = Mat::from_fn(3, 3, |i, j| c64::new(0.3 * i as f64 - 0.2 * j as f64, 0.1 * (i * j) as f64 + 0.05));
        let (eu, er) = defects(&m);
        let mm = &m * m.adjoint();
        let u = Mat::from_fn(3, 3, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) } - mm[(i, j)]);
        // hermitian: spectral norm is the largest |eigenvalue|
        let ev = u.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let expect = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((eu - expect).abs() < 1e-12);
        assert!(er > 0.0);
    }

    #[test]
    fn eigenphase_examples() {
        let eye = Mat::<c64>::identity(2, 2);
        assert!(eigenphase_sum(&eye, None).unwrap().abs() < 1e-15);
        let d: f64 = 0.4;
        let s = Mat::from_fn(1, 1, |_, _| c64::new((2.0 * d).cos(), (2.0 * d).sin()));
        assert!((eigenphase_sum(&s, None).unwrap() - d).abs() < 1e-15);
        // unwrapping continues past pi/2
        let d: f64 = 1.9;
        let s = Mat::from_fn(1, 1, |_, _| c64::new((2.0 * d).cos(), (2.0 * d).sin()));
        assert!((eigenphase_sum(&s, Some(1.5)).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn t_s_round_trip() {
        let t = Mat::from_fn(3, 3, |i, j| c64::new(0.1 * (i + 2 * j) as f64 - 0.2, 0.05 * (i * j) as f64));
        let back = t_from_s(&s_from_t(&t));
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[(i, j)] - t[(i, j)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn fit_two_exact() {
        let pts: Vec<f64> = (0..8).map(|k| 10.0 + k as f64).collect();
        let uw: Vec<_> =
            pts.iter().map(|&y| (riccati(1, 0.8 * y, RiccatiKind::Regular).0, riccati(1, 0.8 * y, RiccatiKind::Outgoing).0)).collect();
        let f: Vec<_> = uw.iter().map(|(u, w)| 0.3 * u + Complex64::new(0.0, 0.1) * w).collect();
        let (a, b, r) = fit_two(&f, &uw).unwrap();
        assert!((a - 0.3).norm() < 1e-12 && (b - Complex64::new(0.0, 0.1)).norm() < 1e-12 && r < 1e-12);
    }
}
