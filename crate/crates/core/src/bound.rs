//! Bound states of `(T + V + K) v = E 1 v` by shifted inverse iteration.
//!
//! With a shift `E0` the recursion `(E0 1 - A) v_k = 1 v_{k-1}` amplifies the
//! eigenvector whose energy is closest to `E0`; the ratio
//! `<v_k|v_{k-1}> / <v_k|v_k>` tends to `E0 - E`. The indicator is never
//! inverted. One factorization per shift serves every iteration, and a block
//! of vectors (subspace iteration with a Rayleigh–Ritz step) extracts several
//! neighbouring states from the same factorization.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dimer::solve_dimer;
use crate::error::{Error, Result};
use crate::linalg::DenseLu;
use crate::operators::{ProblemAssembly, ReducedSystem, ReductionMode};

/// A generalized problem `A v = E S v` that can be shifted and factored.
pub trait GeneralizedProblem: Sync {
    fn dim(&self) -> usize;
    fn apply_a(&self, v: &[f64]) -> Vec<f64>;
    fn apply_s(&self, v: &[f64]) -> Vec<f64>;
    /// Dense `shift S - A`.
    fn shifted(&self, shift: f64) -> Mat<f64>;
}

impl GeneralizedProblem for ReducedSystem {
    fn dim(&self) -> usize {
        ReducedSystem::dim(self)
    }

    fn apply_a(&self, v: &[f64]) -> Vec<f64> {
        self.apply_hamiltonian(v)
    }

    fn apply_s(&self, v: &[f64]) -> Vec<f64> {
        self.indicator.matvec(v)
    }

    fn shifted(&self, shift: f64) -> Mat<f64> {
        self.shifted_dense(shift)
    }
}

/// Small dense pair, mostly for tests.
#[derive(Debug, Clone)]
pub struct DensePair {
    pub a: Mat<f64>,
    pub s: Mat<f64>,
}

fn dense_matvec(m: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

impl GeneralizedProblem for DensePair {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply_a(&self, v: &[f64]) -> Vec<f64> {
        dense_matvec(&self.a, v)
    }

    fn apply_s(&self, v: &[f64]) -> Vec<f64> {
        dense_matvec(&self.s, v)
    }

    fn shifted(&self, shift: f64) -> Mat<f64> {
        Mat::from_fn(self.dim(), self.dim(), |i, j| shift * self.s[(i, j)] - self.a[(i, j)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Bound,
    /// Discretized continuum above the lowest dimer level.
    Box,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundStateResult {
    /// Energy in K.
    pub energy: f64,
    #[serde(skip)]
    pub vector: Vec<f64>,
    /// Energy estimates, one per iteration.
    pub history: Vec<f64>,
    /// `||(A - E S) v|| / ||S v||`.
    pub residual: f64,
    pub iterations: usize,
    pub shift: f64,
    pub kind: StateKind,
}

impl BoundStateResult {
    /// `|E_k - E_{k-1}|` shrinks over the last three iterations. Steps below
    /// `floor * max(|E|, 1)` count as settled. Vacuous for shorter histories.
    pub fn monotone_tail(&self, floor: f64) -> bool {
        let h = &self.history;
        if h.len() < 4 {
            return true;
        }
        let eps = floor * self.energy.abs().max(1.0);
        let d: Vec<f64> = h[h.len() - 4..].windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        d.windows(2).all(|w| w[1] <= w[0].max(eps))
    }
}

/// Lowest dimer level over the pairs present in the assembly, on its `x`
/// grid. Box states sit above it.
pub fn lowest_threshold(a: &ProblemAssembly) -> Result<f64> {
    let frames: Vec<usize> = match a.mode {
        ReductionMode::AllIdentical => vec![0],
        _ => vec![0, 1, 2],
    };
    let mut lowest = f64::INFINITY;
    for f in frames {
        let states = solve_dimer(&a.potential, a.masses.pair_reduced(f), 0, a.x_basis.grid())?;
        if let Some(s) = states.first() {
            lowest = lowest.min(s.energy);
        }
    }
    Ok(lowest)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterationOptions {
    /// Relative energy change that stops the iteration.
    pub tol: f64,
    /// Required residual certificate.
    pub residual_tol: f64,
    pub max_iter: usize,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self { tol: 1e-12, residual_tol: 1e-8, max_iter: 300 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `||(A - E S) v|| / ||S v||`.
pub fn residual<P: GeneralizedProblem + ?Sized>(p: &P, energy: f64, v: &[f64]) -> f64 {
    let av = p.apply_a(v);
    let sv = p.apply_s(v);
    let r: Vec<f64> = av.iter().zip(&sv).map(|(a, s)| a - energy * s).collect();
    norm(&r) / norm(&sv)
}

/// Factors `shift S - A`, nudging the shift if it sits on the spectrum.
pub fn factor_shift<P: GeneralizedProblem + ?Sized>(p: &P, shift: f64) -> Result<(DenseLu<f64>, f64)> {
    let mut s = shift;
    for attempt in 0..4 {
        match DenseLu::factor(p.shifted(s), s) {
            Ok(lu) => return Ok((lu, s)),
            Err(e) if attempt == 3 => return Err(e),
            Err(_) => s += 1e-7 * (1.0 + shift.abs()) * (attempt as f64 + 1.0),
        }
    }
    unreachable!()
}

/// Single-vector inverse iteration from `v0` at shift `e0`.
pub fn inverse_iteration<P: GeneralizedProblem + ?Sized>(p: &P, e0: f64, v0: &[f64], opts: &IterationOptions) -> Result<BoundStateResult> {
    let (lu, e0) = factor_shift(p, e0)?;
    inverse_iteration_with(p, &lu, e0, v0, opts)
}

/// Inverse iteration reusing an existing factorization of `e0 S - A`.
pub fn inverse_iteration_with<P: GeneralizedProblem + ?Sized>(
    p: &P,
    lu: &DenseLu<f64>,
    e0: f64,
    v0: &[f64],
    opts: &IterationOptions,
) -> Result<BoundStateResult> {
    let n0 = norm(v0);
    let mut v: Vec<f64> = v0.iter().map(|x| x / n0).collect();
    let mut history = Vec::new();
    for k in 1..=opts.max_iter {
        let w = lu.solve_vec(&p.apply_s(&v));
        let ratio = dot(&w, &v) / dot(&w, &w);
        let energy = e0 - ratio;
        let nw = norm(&w);
        // fix the sign so successive iterates are comparable
        let sign = if dot(&w, &v) < 0.0 { -1.0 } else { 1.0 };
        v = w.iter().map(|x| sign * x / nw).collect();
        let prev = history.last().copied();
        history.push(energy);
        if let Some(prev) = prev {
            if (energy - prev).abs() <= opts.tol * energy.abs().max(1.0) {
                let res = residual(p, energy, &v);
                if res <= opts.residual_tol {
                    return Ok(BoundStateResult {
                        energy,
                        vector: v,
                        history,
                        residual: res,
                        iterations: k,
                        shift: e0,
                        kind: StateKind::Bound,
                    });
                }
            }
        }
    }
    Err(Error::Convergence { what: format!("inverse iteration at shift {e0} K"), iterations: opts.max_iter, history })
}

/// Orthonormalizes the columns of `v` in place (modified Gram–Schmidt, two
/// passes); returns the number of independent columns kept at the front.
fn orthonormalize(v: &mut [Vec<f64>]) -> usize {
    let mut kept = 0;
    for i in 0..v.len() {
        for _ in 0..2 {
            for j in 0..kept {
                let c = dot(&v[i], &v[j]);
                let (head, tail) = v.split_at_mut(i);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= c * y;
                }
            }
        }
        let nv = norm(&v[i]);
        if nv > 1e-300 {
            v[i].iter_mut().for_each(|x| *x /= nv);
            v.swap(kept, i);
            kept += 1;
        }
    }
    kept
}

/// Subspace inverse iteration with `block` vectors at one shift. Returns the
/// Ritz pairs that pass the residual certificate, nearest the shift first.
pub fn block_inverse_iteration<P: GeneralizedProblem + ?Sized>(
    p: &P,
    e0: f64,
    block: usize,
    seed: u64,
    opts: &IterationOptions,
) -> Result<Vec<BoundStateResult>> {
    let (lu, e0) = factor_shift(p, e0)?;
    let n = p.dim();
    let block = block.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    if block == 1 {
        return match inverse_iteration_with(p, &lu, e0, &start, opts) {
            Ok(r) => Ok(vec![r]),
            Err(Error::Convergence { .. }) => Ok(vec![]),
            Err(e) => Err(e),
        };
    }
    let mut basis: Vec<Vec<f64>> =
        std::iter::once(start).chain((1..block).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())).collect();
    orthonormalize(&mut basis);
    let want = block.div_ceil(2);
    let mut histories: Vec<Vec<f64>> = vec![Vec::new(); block];
    let mut last: Vec<BoundStateResult> = Vec::new();
    for it in 1..=opts.max_iter {
        let images: Vec<Vec<f64>> = basis.iter().map(|b| lu.solve_vec(&p.apply_s(b))).collect();
        // Rayleigh-Ritz for (e0 S - A)^{-1} S on span(basis)
        let h = Mat::from_fn(block, block, |i, j| dot(&basis[i], &images[j]));
        let eig = h.eigen().map_err(|e| Error::Singular(format!("Ritz step: {e:?}")))?;
        let mut ritz: Vec<(f64, Vec<f64>)> = (0..block)
            .filter_map(|k| {
                let mu = eig.S()[k];
                if mu.norm() == 0.0 || mu.im.abs() > 1e-8 * mu.norm() {
                    return None;
                }
                let y: Vec<_> = (0..block).map(|i| eig.U()[(i, k)]).collect();
                let pivot = y.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).copied().unwrap();
                let phase = pivot.conj() / pivot.norm();
                let yr: Vec<f64> = y.iter().map(|z| (z * phase).re).collect();
                let mut u = vec![0.0; n];
                for (c, b) in yr.iter().zip(&images) {
                    for (x, v) in u.iter_mut().zip(b) {
                        *x += c * v;
                    }
                }
                let nu = norm(&u);
                u.iter_mut().for_each(|x| *x /= nu);
                Some((e0 - 1.0 / mu.re, u))
            })
            .collect();
        ritz.sort_by(|a, b| (a.0 - e0).abs().total_cmp(&(b.0 - e0).abs()));
        let results: Vec<BoundStateResult> = ritz
            .iter()
            .enumerate()
            .map(|(k, (e, u))| {
                if k < block {
                    histories[k].push(*e);
                }
                BoundStateResult {
                    energy: *e,
                    vector: u.clone(),
                    history: histories.get(k).cloned().unwrap_or_default(),
                    residual: residual(p, *e, u),
                    iterations: it,
                    shift: e0,
                    kind: StateKind::Bound,
                }
            })
            .collect();
        let done = results.len() >= want && results[..want].iter().all(|r| r.residual <= opts.residual_tol);
        last = results;
        if done {
            break;
        }
        basis = images;
        orthonormalize(&mut basis);
    }
    Ok(last.into_iter().filter(|r| r.residual <= opts.residual_tol).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanOptions {
    pub window: (f64, f64),
    pub n_guesses: usize,
    pub block: usize,
    pub seed: u64,
    /// States closer than this (K) are merged.
    pub dedup_tol: f64,
    pub iteration: IterationOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { window: (-80.0, -20.0), n_guesses: 12, block: 4, seed: 7, dedup_tol: 1e-3, iteration: IterationOptions::default() }
    }
}

/// Uniformly spaced shifts over the window; converged states deduplicated
/// and labelled as box states above `dimer_ground`.
pub fn spectrum_scan<P: GeneralizedProblem + ?Sized>(p: &P, opts: &ScanOptions, dimer_ground: f64) -> Result<Vec<BoundStateResult>> {
    let (lo, hi) = opts.window;
    if !(hi < 0.0) || !(lo < hi) {
        return Err(Error::InvalidInput(format!("scan window [{lo}, {hi}] K must be ordered and below the breakup threshold")));
    }
    let n = opts.n_guesses.max(1);
    let shifts: Vec<f64> = (0..n).map(|i| if n == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect();
    let per_shift: Vec<Result<Vec<BoundStateResult>>> = shifts
        .par_iter()
        .enumerate()
        .map(|(i, &s)| block_inverse_iteration(p, s, opts.block, opts.seed.wrapping_add(i as u64), &opts.iteration))
        .collect();
    let mut all = Vec::new();
    for r in per_shift {
        all.extend(r?);
    }
    all.retain(|r| r.energy >= lo - 1.0 && r.energy <= hi + 1.0);
    all.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let mut merged: Vec<BoundStateResult> = Vec::new();
    for r in all {
        match merged.last_mut() {
            Some(m) if (r.energy - m.energy).abs() < opts.dedup_tol => {
                if r.residual < m.residual {
                    *m = r;
                }
            }
            _ => merged.push(r),
        }
    }
    for r in &mut merged {
        r.kind = if r.energy > dimer_ground { StateKind::Box } else { StateKind::Bound };
    }
    Ok(merged)
}
