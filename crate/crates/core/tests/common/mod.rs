//! Oracles shared by the integration tests and the acceptance report.
#![allow(dead_code)]

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use faddeev::angular::{bipolar_harmonic, theta_quadrature};
use faddeev::basis::HermiteBasis;
use faddeev::dimer::DimerSpectrum;
use faddeev::operators::{assemble_kernel, ProblemAssembly};
use faddeev::scatter::{riccati, AsymptoticChannel, RiccatiKind};

fn positions(x: [f64; 3], y: [f64; 3], frame: usize, m: [f64; 3]) -> [[f64; 3]; 3] {
    let (i, j, k) = (frame, (frame + 1) % 3, (frame + 2) % 3);
    let total = m[0] + m[1] + m[2];
    let mjk = m[j] + m[k];
    let mut r = [[0.0; 3]; 3];
    for c in 0..3 {
        let centre = -m[i] / total * y[c];
        r[i][c] = mjk / total * y[c];
        r[j][c] = centre + m[k] / mjk * x[c];
        r[k][c] = centre - m[j] / mjk * x[c];
    }
    r
}

fn jacobi(r: &[[f64; 3]; 3], m: [f64; 3], frame: usize) -> ([f64; 3], [f64; 3]) {
    let (i, j, k) = (frame, (frame + 1) % 3, (frame + 2) % 3);
    let mut x = [0.0; 3];
    let mut y = [0.0; 3];
    for c in 0..3 {
        x[c] = r[j][c] - r[k][c];
        y[c] = r[i][c] - (m[j] * r[j][c] + m[k] * r[k][c]) / (m[j] + m[k]);
    }
    (x, y)
}

fn angles(v: [f64; 3]) -> (f64, f64, f64) {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (r, (v[2] / r).clamp(-1.0, 1.0).acos(), v[1].atan2(v[0]))
}

fn rotate(rot: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| (0..3).map(|j| rot[i][j] * v[j]).sum())
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let (a, b, c): (f64, f64, f64) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI));
    let rz = |t: f64| [[t.cos(), -t.sin(), 0.0], [t.sin(), t.cos(), 0.0], [0.0, 0.0, 1.0]];
    let ry = |t: f64| [[t.cos(), 0.0, t.sin()], [0.0, 1.0, 0.0], [-t.sin(), 0.0, t.cos()]];
    let mul = |p: [[f64; 3]; 3], q: [[f64; 3]; 3]| -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| p[i][k] * q[k][j]).sum()))
    };
    mul(rz(a), mul(ry(b), rz(c)))
}

/// `K c` by brute force: for each row point, integrate over both directions
/// (random overall orientation, explicit azimuth of `y` about `x`), rotate
/// through particle positions and evaluate the target expansion directly.
pub fn kernel_action_oracle(a: &ProblemAssembly, c: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quad = theta_quadrature(a.n_theta);
    let m = a.masses.masses();
    let nx = a.nx();
    let (xs, ys) = (a.x_basis.grid().nodes().to_vec(), a.y_basis.grid().nodes().to_vec());
    let (x_max, y_max) = (a.x_basis.grid().x_max(), a.y_basis.grid().x_max());
    let n_phi = 6;
    let mut out = vec![0.0; a.dim()];
    for (ci, comp) in a.components().iter().enumerate() {
        for (alpha, ch_a) in comp.channels.channels().iter().enumerate() {
            for (mi, &y) in ys.iter().enumerate() {
                for (ni, &x) in xs.iter().enumerate() {
                    let rot = random_rotation(&mut rng);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for link in a.links().iter().filter(|l| l.component == ci) {
                        let target = &a.components()[link.target_component];
                        for (k, &theta) in quad.theta.iter().enumerate() {
                            for p in 0..n_phi {
                                let phi = 2.0 * PI * p as f64 / n_phi as f64;
                                let xv = rotate(&rot, [0.0, 0.0, x]);
                                let yv = rotate(&rot, [y * theta.sin() * phi.cos(), y * theta.sin() * phi.sin(), y * theta.cos()]);
                                let (_, txa, pxa) = angles(xv);
                                let (_, tya, pya) = angles(yv);
                                let row_h = bipolar_harmonic(ch_a, txa, pxa, tya, pya).conj();
                                let r = positions(xv, yv, comp.frame, m);
                                let (xt, yt) = jacobi(&r, m, link.target_frame);
                                let (rx, tx, px) = angles(xt);
                                let (ry, ty, py) = angles(yt);
                                if rx > x_max || ry > y_max {
                                    continue;
                                }
                                let mut f = Complex64::new(0.0, 0.0);
                                for (beta, ch_b) in target.channels.channels().iter().enumerate() {
                                    let sign = if link.exchange_sign && ch_b.l % 2 == 1 { -1.0 } else { 1.0 };
                                    let base = a.index(link.target_component, beta, 0, 0);
                                    let mut radial = 0.0;
                                    a.y_basis.for_each_active(ry, 0, |pp, sy| {
                                        a.x_basis.for_each_active(rx, 0, |qq, sx| radial += c[base + pp * nx + qq] * sy * sx);
                                    });
                                    f += sign * radial / (rx * ry) * bipolar_harmonic(ch_b, tx, px, ty, py);
                                }
                                // d Omega_x d Omega_y = 4 pi * (2 pi / n_phi) * w_k
                                let w = 4.0 * PI * 2.0 * PI / n_phi as f64 * quad.weights[k];
                                acc += link.factor * w * row_h * f;
                            }
                        }
                    }
                    let v = a.potential.value(x);
                    out[a.index(ci, alpha, mi, ni)] = (v * x * y * acc).re;
                    assert!((v * x * y * acc).im.abs() < 1e-9 * (1.0 + acc.norm()));
                }
            }
        }
    }
    out
}

/// Largest deviation of the assembled kernel from the oracle on a random
/// vector, relative to the largest oracle entry.
pub fn kernel_oracle_error(a: &ProblemAssembly, seed: u64) -> f64 {
    let (k, _) = assemble_kernel(a);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let got = k.matvec(&c);
    let want = kernel_action_oracle(a, &c, seed + 1);
    let scale = want.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let err = got.iter().zip(&want).fold(0.0f64, |s, (g, w)| s.max((g - w).abs()));
    err / scale
}

/// Complex coefficients on the y basis reproducing `f` at the nodes.
pub fn nodal(basis: &HermiteBasis, f: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    use faer::linalg::solvers::Solve;
    let s = basis.collocation_matrix(0);
    let nodes = basis.grid().nodes();
    let rhs = Mat::from_fn(nodes.len(), 2, |m, k| {
        let v = f(nodes[m]);
        if k == 0 {
            v.re
        } else {
            v.im
        }
    });
    let c = s.partial_piv_lu().solve(&rhs);
    (0..nodes.len()).map(|p| Complex64::new(c[(p, 0)], c[(p, 1)])).collect()
}

/// Solutions whose projection on channel `c` is exactly
/// `x[s][c] j(q y) + y[s][c] h(q y)` at the y nodes.
pub fn synthetic_solutions(
    a: &ProblemAssembly,
    spectrum: &DimerSpectrum,
    channels: &[AsymptoticChannel],
    x: &[Vec<Complex64>],
    y: &[Vec<Complex64>],
) -> Vec<Vec<Complex64>> {
    (0..x.len())
        .map(|s| {
            let mut sol = vec![Complex64::new(0.0, 0.0); a.dim()];
            for (c, ch) in channels.iter().enumerate() {
                let phi = &spectrum.state(ch.v, ch.j).unwrap().coeffs;
                let radial = nodal(&a.y_basis, |r| {
                    let z = ch.q * r;
                    x[s][c] * riccati(ch.lambda, z, RiccatiKind::Regular).0 + y[s][c] * riccati(ch.lambda, z, RiccatiKind::Outgoing).0
                });
                for (p, rp) in radial.iter().enumerate() {
                    for (q, &pq) in phi.iter().enumerate() {
                        sol[a.index(0, ch.channel, p, q)] += rp * pq;
                    }
                }
            }
            sol
        })
        .collect()
}
