//! Collocation operators over the composite index
//! `(component c, channel alpha, y node m, x node n)`.
//!
//! Row `((c, alpha), m, n)` is the collocation equation at `(x_n, y_m)` for
//! channel `alpha` of Faddeev component `c`; column `((c, beta), p, q)` is the
//! coefficient of `s_p(y) s_q(x)`. Components are stored one after another,
//! each with its own channel list.

use std::f64::consts::PI;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::{enumerate_channels, theta_quadrature, BipolarEvaluator, ChannelSet, Parity};
use crate::basis::HermiteBasis;
use crate::error::{Error, Result};
use crate::geometry::{norm, polar_angles, rotate_vectors, MassSystem, SymmetryClass};
use crate::pairpot::PotentialModel;
use crate::sparse::{block_diag, kron, Csr};
use crate::units::KAPPA;

/// How identical particles fold the three Faddeev components together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionMode {
    /// Three components, no symmetry used.
    ThreeDistinct,
    /// Particles 1 and 2 (0-based) identical bosons: components for frames
    /// 0 and 1, kernel rows `[0, 2 K01]` and `[K10, K12]`.
    TwoIdentical,
    /// One component with kernel `2 K01`.
    AllIdentical,
}

impl ReductionMode {
    pub fn natural(symmetry: SymmetryClass) -> Self {
        match symmetry {
            SymmetryClass::ThreeDistinct => Self::ThreeDistinct,
            SymmetryClass::TwoIdentical { .. } => Self::TwoIdentical,
            SymmetryClass::AllIdentical => Self::AllIdentical,
        }
    }
}

/// One kernel block: rows of `component` receive the function of
/// `target_component` evaluated in Jacobi frame `target_frame`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelLink {
    pub component: usize,
    pub target_component: usize,
    pub target_frame: usize,
    pub factor: f64,
    /// Multiply by `(-1)^l_beta`: the target is the pair-exchanged image.
    pub exchange_sign: bool,
}

#[derive(Debug, Clone)]
pub struct Component {
    pub frame: usize,
    pub channels: ChannelSet,
    pub offset: usize,
}

/// Everything needed to assemble the operators.
#[derive(Debug, Clone)]
pub struct ProblemAssembly {
    pub masses: MassSystem,
    pub x_basis: HermiteBasis,
    pub y_basis: HermiteBasis,
    pub potential: PotentialModel,
    pub mode: ReductionMode,
    pub n_theta: usize,
    pub total_l: u32,
    pub parity: Parity,
    pub l_max: u32,
    components: Vec<Component>,
    links: Vec<KernelLink>,
    dim: usize,
}

#[allow(clippy::too_many_arguments)]
impl ProblemAssembly {
    pub fn new(
        masses: MassSystem,
        total_l: u32,
        parity: Parity,
        l_max: u32,
        x_basis: HermiteBasis,
        y_basis: HermiteBasis,
        potential: PotentialModel,
        mode: ReductionMode,
        n_theta: usize,
    ) -> Result<Self> {
        let ok = match (mode, masses.symmetry()) {
            (ReductionMode::ThreeDistinct, _) => true,
            (ReductionMode::AllIdentical, SymmetryClass::AllIdentical) => true,
            (ReductionMode::TwoIdentical, SymmetryClass::TwoIdentical { pair: (1, 2) }) => true,
            _ => false,
        };
        if !ok {
            return Err(Error::InvalidInput(format!(
                "reduction {mode:?} does not match the mass symmetry {:?} (use MassSystem::canonical for two identical particles)",
                masses.symmetry()
            )));
        }
        if x_basis.len() != x_basis.n_nodes() || y_basis.len() != y_basis.n_nodes() {
            return Err(Error::InvalidInput("bases must be square (one active function per node)".into()));
        }
        if n_theta == 0 {
            return Err(Error::InvalidInput("n_theta must be positive".into()));
        }
        let full = enumerate_channels(total_l, parity, l_max, false);
        let even = enumerate_channels(total_l, parity, l_max, true);
        let (frames_sets, links): (Vec<(usize, ChannelSet)>, Vec<KernelLink>) = match mode {
            ReductionMode::ThreeDistinct => {
                let mut links = Vec::new();
                for c in 0..3 {
                    for t in 0..3 {
                        if t != c {
                            links.push(KernelLink {
                                component: c,
                                target_component: t,
                                target_frame: t,
                                factor: 1.0,
                                exchange_sign: false,
                            });
                        }
                    }
                }
                ((0..3).map(|f| (f, full.clone())).collect(), links)
            }
            ReductionMode::TwoIdentical => (
                vec![(0, even), (1, full)],
                vec![
                    KernelLink { component: 0, target_component: 1, target_frame: 1, factor: 2.0, exchange_sign: false },
                    KernelLink { component: 1, target_component: 0, target_frame: 0, factor: 1.0, exchange_sign: false },
                    KernelLink { component: 1, target_component: 1, target_frame: 2, factor: 1.0, exchange_sign: true },
                ],
            ),
            ReductionMode::AllIdentical => (
                vec![(0, even)],
                vec![KernelLink { component: 0, target_component: 0, target_frame: 1, factor: 2.0, exchange_sign: false }],
            ),
        };
        let block = x_basis.len() * y_basis.len();
        let mut offset = 0;
        let components = frames_sets
            .into_iter()
            .map(|(frame, channels)| {
                let c = Component { frame, channels, offset };
                offset += c.channels.len() * block;
                c
            })
            .collect();
        Ok(Self { masses, x_basis, y_basis, potential, mode, n_theta, total_l, parity, l_max, components, links, dim: offset })
    }

    /// Total dimension `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn links(&self) -> &[KernelLink] {
        &self.links
    }

    pub fn nx(&self) -> usize {
        self.x_basis.len()
    }

    pub fn ny(&self) -> usize {
        self.y_basis.len()
    }

    /// Composite index of `(component, channel, y index, x index)`.
    pub fn index(&self, c: usize, alpha: usize, m: usize, n: usize) -> usize {
        self.components[c].offset + (alpha * self.ny() + m) * self.nx() + n
    }

    /// Inverse of [`ProblemAssembly::index`].
    pub fn split_index(&self, idx: usize) -> (usize, usize, usize, usize) {
        let c = self.components.iter().rposition(|comp| comp.offset <= idx).unwrap();
        let local = idx - self.components[c].offset;
        let n = local % self.nx();
        let m = (local / self.nx()) % self.ny();
        let alpha = local / (self.nx() * self.ny());
        (c, alpha, m, n)
    }
}

/// `-(kin) (s'' - l(l+1)/x^2 s)` on collocation nodes: the radial kinetic
/// block shared by the pair and three-body problems.
pub fn radial_kinetic(basis: &HermiteBasis, kin: f64, l: u32) -> Mat<f64> {
    let s0 = basis.collocation_matrix(0);
    let s2 = basis.collocation_matrix(2);
    let cent = f64::from(l * (l + 1));
    let nodes = basis.grid().nodes();
    Mat::from_fn(s0.nrows(), s0.ncols(), |n, a| {
        let x = nodes[n];
        -kin * (s2[(n, a)] - cent / (x * x) * s0[(n, a)])
    })
}

/// `[V(x_n) s_a(x_n)]`.
pub fn radial_potential(basis: &HermiteBasis, model: &PotentialModel) -> Mat<f64> {
    let s0 = basis.collocation_matrix(0);
    let nodes = basis.grid().nodes();
    Mat::from_fn(s0.nrows(), s0.ncols(), |n, a| model.value(nodes[n]) * s0[(n, a)])
}

fn per_channel_blocks(a: &ProblemAssembly, mut block: impl FnMut(&Component, usize) -> Csr) -> Csr {
    let mut blocks = Vec::new();
    for comp in &a.components {
        for alpha in 0..comp.channels.len() {
            blocks.push(block(comp, alpha));
        }
    }
    block_diag(&blocks)
}

/// `1 = s_y (x) s_x` on every (component, channel) block.
pub fn assemble_indicator(a: &ProblemAssembly) -> Csr {
    let sx = a.x_basis.collocation_matrix(0);
    let sy = a.y_basis.collocation_matrix(0);
    let one = kron(&sy, &sx);
    per_channel_blocks(a, |_, _| one.clone())
}

/// Kinetic operator with reduced masses of each component's frame and
/// centrifugal terms of each channel.
pub fn assemble_kinetic(a: &ProblemAssembly) -> Csr {
    let sx = a.x_basis.collocation_matrix(0);
    let sy = a.y_basis.collocation_matrix(0);
    per_channel_blocks(a, |comp, alpha| {
        let ch = comp.channels.channels()[alpha];
        let kx = KAPPA / (2.0 * a.masses.pair_reduced(comp.frame));
        let ky = KAPPA / (2.0 * a.masses.atom_pair_reduced(comp.frame));
        let tx = radial_kinetic(&a.x_basis, kx, ch.l);
        let ty = radial_kinetic(&a.y_basis, ky, ch.lambda);
        kron(&sy, &tx).add(1.0, &kron(&ty, &sx), 1.0)
    })
}

/// `s_y (x) [V(x_n) s_q(x_n)]`, diagonal in channels.
pub fn assemble_potential(a: &ProblemAssembly) -> Csr {
    let sy = a.y_basis.collocation_matrix(0);
    let v = radial_potential(&a.x_basis, &a.potential);
    let block = kron(&sy, &v);
    per_channel_blocks(a, |_, _| block.clone())
}

/// Diagnostics of the kernel assembly.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct KernelStats {
    /// Rotated points evaluated.
    pub evaluations: usize,
    /// Rotated points outside the box, dropped.
    pub dropped: usize,
    /// Largest `|V| * (dropped quadrature weight)` relative to the largest
    /// `|V|` over rows times the full weight.
    pub max_dropped_weight: f64,
}

fn merge_row(mut row: Vec<(u32, f64)>) -> Vec<(u32, f64)> {
    row.sort_unstable_by_key(|e| e.0);
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(row.len() / 4 + 1);
    for (c, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out
}

/// Jacobi kernel, including the reduction factors of `a.mode`.
///
/// For each row point `(x, y)` of component `c` and each quadrature angle,
/// the configuration with `x` along `z` and `y` at polar angle `theta` is
/// expressed in the target frame; the spline pairs alive there receive
/// `8 pi^2 V(x) w xy/(x' y') Y*_alpha(0,0,theta,0) Y_beta(x', y')`.
pub fn assemble_kernel(a: &ProblemAssembly) -> (Csr, KernelStats) {
    let quad = theta_quadrature(a.n_theta);
    let nx = a.nx();
    let ny = a.ny();
    let xs = a.x_basis.grid().nodes();
    let ys = a.y_basis.grid().nodes();
    let (x_max, y_max) = (a.x_basis.grid().x_max(), a.y_basis.grid().x_max());
    let v_scale = xs.iter().map(|&x| a.potential.value(x).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let evaluators: Vec<Vec<BipolarEvaluator>> =
        a.components.iter().map(|c| c.channels.channels().iter().map(|ch| BipolarEvaluator::new(*ch)).collect()).collect();
    // conj(Y_alpha(0, 0, theta_k, 0))
    let row_harm: Vec<Vec<Vec<f64>>> = evaluators
        .iter()
        .map(|evs| evs.iter().map(|ev| quad.theta.iter().map(|&t| ev.eval(0.0, 0.0, t, 0.0).conj().re).collect()).collect())
        .collect();

    let groups: Vec<(usize, usize, usize)> =
        (0..a.components.len()).flat_map(|c| (0..ny).flat_map(move |m| (0..nx).map(move |n| (c, m, n)))).collect();

    let results: Vec<(Vec<Vec<(u32, f64)>>, KernelStats)> = groups
        .par_iter()
        .map(|&(c, m, n)| {
            let comp = &a.components[c];
            let n_alpha = comp.channels.len();
            let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_alpha];
            let mut stats = KernelStats::default();
            let (x, y) = (xs[n], ys[m]);
            let v = a.potential.value(x);
            if v == 0.0 {
                return (rows, stats);
            }
            let mut dropped_weight = 0.0;
            for link in a.links.iter().filter(|l| l.component == c) {
                let target = &a.components[link.target_component];
                let tev = &evaluators[link.target_component];
                let mut yb = vec![0.0; tev.len()];
                for (k, &theta) in quad.theta.iter().enumerate() {
                    let w = quad.weights[k];
                    let xi = [0.0, 0.0, x];
                    let yi = [y * theta.sin(), 0.0, y * theta.cos()];
                    let (xv, yv) = rotate_vectors(comp.frame, &xi, &yi, link.target_frame, &a.masses);
                    let (rx, ry) = (norm(&xv), norm(&yv));
                    stats.evaluations += 1;
                    if rx > x_max || ry > y_max {
                        stats.dropped += 1;
                        dropped_weight += w;
                        continue;
                    }
                    if rx < 1e-12 * x_max || ry < 1e-12 * y_max {
                        continue;
                    }
                    let (Some(lx), Some(ly)) = (a.x_basis.local(rx, 0), a.y_basis.local(ry, 0)) else {
                        continue;
                    };
                    let (tx, px) = polar_angles(&xv, rx);
                    let (ty, py) = polar_angles(&yv, ry);
                    for (beta, ev) in tev.iter().enumerate() {
                        let sign = if link.exchange_sign && ev.channel().l % 2 == 1 { -1.0 } else { 1.0 };
                        yb[beta] = sign * ev.eval(tx, px, ty, py).re;
                    }
                    let pref = link.factor * 8.0 * PI * PI * v * w * x * y / (rx * ry);
                    for alpha in 0..n_alpha {
                        let ca = pref * row_harm[c][alpha][k];
                        if ca == 0.0 {
                            continue;
                        }
                        let row = &mut rows[alpha];
                        for (beta, &ybv) in yb.iter().enumerate() {
                            let cb = ca * ybv;
                            if cb == 0.0 {
                                continue;
                            }
                            let base = target.offset + beta * ny * nx;
                            for &(p, vy) in ly.iter().filter(|e| e.0 != usize::MAX) {
                                for &(q, vx) in lx.iter().filter(|e| e.0 != usize::MAX) {
                                    row.push(((base + p * nx + q) as u32, cb * vy * vx));
                                }
                            }
                        }
                    }
                }
            }
            stats.max_dropped_weight = v.abs() / v_scale * dropped_weight / 2.0;
            let rows = rows.into_iter().map(merge_row).collect();
            (rows, stats)
        })
        .collect();

    let mut all_rows = vec![Vec::new(); a.dim];
    let mut stats = KernelStats::default();
    for (&(c, m, n), (rows, s)) in groups.iter().zip(results) {
        stats.evaluations += s.evaluations;
        stats.dropped += s.dropped;
        stats.max_dropped_weight = stats.max_dropped_weight.max(s.max_dropped_weight);
        for (alpha, row) in rows.into_iter().enumerate() {
            all_rows[a.index(c, alpha, m, n)] = row;
        }
    }
    if stats.max_dropped_weight > 1e-8 {
        log::warn!(
            "kernel: {} of {} rotated points fell outside the box (max relative dropped weight {:.2e}); enlarge x_max/y_max if this matters",
            stats.dropped,
            stats.evaluations,
            stats.max_dropped_weight
        );
    }
    (Csr::from_rows(a.dim, all_rows), stats)
}

/// The assembled block system `(T + V + K - E 1) v = 0`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub indicator: Csr,
    /// `T + V`.
    pub local: Csr,
    pub kernel: Csr,
    pub kernel_stats: KernelStats,
    pub mode: ReductionMode,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.indicator.nrows()
    }

    /// `(T + V + K) v`.
    pub fn apply_hamiltonian(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.local.matvec(v);
        for (o, k) in out.iter_mut().zip(self.kernel.matvec(v)) {
            *o += k;
        }
        out
    }

    /// Dense `shift 1 - (T + V + K)`.
    pub fn shifted_dense(&self, shift: f64) -> Mat<f64> {
        let n = self.dim();
        let mut m = Mat::zeros(n, n);
        self.indicator.add_to_dense(shift, &mut m);
        self.local.add_to_dense(-1.0, &mut m);
        self.kernel.add_to_dense(-1.0, &mut m);
        m
    }

    /// Copy with the kernel removed (uncoupled components).
    pub fn without_kernel(&self) -> Self {
        Self { kernel: Csr::zeros(self.dim(), self.dim()), kernel_stats: KernelStats::default(), ..self.clone() }
    }
}

/// Assembles all operators of the block system selected by `a.mode`.
pub fn reduce_symmetry(a: &ProblemAssembly) -> ReducedSystem {
    let indicator = assemble_indicator(a);
    let local = assemble_kinetic(a).add(1.0, &assemble_potential(a), 1.0);
    let (kernel, kernel_stats) = assemble_kernel(a);
    ReducedSystem { indicator, local, kernel, kernel_stats, mode: a.mode }
}
