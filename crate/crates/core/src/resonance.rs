//! Isolated-resonance fit of an elastic S-matrix element,
//! `S(E) = exp(i (alpha q + beta)) (E - E_r*) / (E - E_r)`, with
//! `E_r = E_0 - i gamma`.

use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scatter::channel_momentum;
use crate::units::lifetime_seconds;

/// Maps total energy to the elastic channel momentum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ElasticKinematics {
    /// Elastic threshold, K.
    pub threshold: f64,
    /// Atom–dimer reduced mass, Da.
    pub mu: f64,
}

impl ElasticKinematics {
    pub fn q(&self, energy: f64) -> f64 {
        channel_momentum(energy, self.threshold, self.mu)
    }
}

/// `[E_0, gamma, alpha, beta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoleParameters {
    pub position: f64,
    /// `-Im E_r`, K.
    pub half_width: f64,
    /// Background slope, bohr.
    pub alpha: f64,
    pub beta: f64,
}

impl PoleParameters {
    fn to_array(self) -> [f64; 4] {
        [self.position, self.half_width, self.alpha, self.beta]
    }

    fn from_array(p: [f64; 4]) -> Self {
        Self { position: p[0], half_width: p[1].abs(), alpha: p[2], beta: p[3] }
    }
}

/// Model value at energy `e` with momentum `q`.
pub fn model_s(p: &PoleParameters, e: f64, q: f64) -> Complex64 {
    let bg = Complex64::from_polar(1.0, p.alpha * q + p.beta);
    let t = e - p.position;
    bg * Complex64::new(t, -p.half_width) / Complex64::new(t, p.half_width)
}

/// Derivatives of the model with respect to `[E_0, gamma, alpha, beta]`.
pub fn model_gradient(p: &PoleParameters, e: f64, q: f64) -> [Complex64; 4] {
    let s = model_s(p, e, q);
    let t = e - p.position;
    let den = Complex64::new(t, p.half_width);
    let bg = Complex64::from_polar(1.0, p.alpha * q + p.beta);
    let i = Complex64::new(0.0, 1.0);
    // d/dE0 (t - i g)/(t + i g) = -2 i g / (t + i g)^2, d/dg = -2 i t / (t + i g)^2
    let d0 = bg * (-2.0 * i * p.half_width) / (den * den);
    let dg = bg * (-2.0 * i * t) / (den * den);
    [d0, dg, i * q * s, i * s]
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceFit {
    pub params: PoleParameters,
    /// Complex resonance energy `E_0 - i gamma`, K (re, im).
    pub energy: (f64, f64),
    /// `Gamma = 2 gamma`, K.
    pub width: f64,
    /// `hbar / Gamma`, seconds.
    pub lifetime: f64,
    pub window: (f64, f64),
    /// RMS of `|S_model - S|` over the samples.
    pub residual: f64,
    /// One-sigma parameter uncertainties from the final Jacobian.
    pub uncertainty: [f64; 4],
    pub iterations: usize,
}

fn unwrap_phase(prev: f64, next: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    next + tau * ((prev - next) / tau).round()
}

/// Initial guess from the peak of `|dS/dE|` and the background phase at the
/// window ends.
pub fn initial_guess(samples: &[(f64, Complex64)], kin: &ElasticKinematics) -> Result<PoleParameters> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::InvalidInput("need at least 3 samples".into()));
    }
    let deriv: Vec<(f64, f64)> = (1..n - 1)
        .map(|k| {
            let (e0, s0) = samples[k - 1];
            let (e1, s1) = samples[k + 1];
            (samples[k].0, ((s1 - s0) / (e1 - e0)).norm())
        })
        .collect();
    let (kmax, &(e_peak, d_peak)) = deriv.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap();
    // half-maximum crossing on each side
    let left = deriv[..kmax].iter().rev().find(|d| d.1 < 0.5 * d_peak).map(|d| d.0);
    let right = deriv[kmax..].iter().find(|d| d.1 < 0.5 * d_peak).map(|d| d.0);
    let min_step = samples.windows(2).map(|w| w[1].0 - w[0].0).fold(f64::INFINITY, f64::min);
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (e_peak - l),
        (None, Some(r)) => 2.0 * (r - e_peak),
        // |dS/dE| peaks at 2/gamma for a unit-modulus pole factor
        (None, None) => 4.0 / d_peak,
    };
    let gamma = (0.5 * fwhm).max(0.5 * min_step);
    let trial = PoleParameters { position: e_peak, half_width: gamma, alpha: 0.0, beta: 0.0 };
    let (ea, sa) = samples[0];
    let (eb, sb) = samples[n - 1];
    let pa = sa / model_s(&trial, ea, 0.0);
    let pb = sb / model_s(&trial, eb, 0.0);
    let (qa, qb) = (kin.q(ea), kin.q(eb));
    let pha = pa.arg();
    let phb = unwrap_phase(pha, pb.arg());
    let alpha = if (qb - qa).abs() > 1e-12 { (phb - pha) / (qb - qa) } else { 0.0 };
    Ok(PoleParameters { alpha, beta: pha - alpha * qa, ..trial })
}

fn residuals(p: &PoleParameters, data: &[(f64, f64, Complex64)]) -> Vec<f64> {
    data.iter()
        .flat_map(|&(e, q, s)| {
            let d = model_s(p, e, q) - s;
            [d.re, d.im]
        })
        .collect()
}

fn solve4(a: &Mat<f64>, b: &[f64]) -> Option<Vec<f64>> {
    use faer::linalg::solvers::Solve;
    let rhs = Mat::from_fn(4, 1, |i, _| b[i]);
    let x = a.partial_piv_lu().solve(&rhs);
    let out: Vec<f64> = (0..4).map(|i| x[(i, 0)]).collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Levenberg–Marquardt fit of `samples` restricted to `window` (all samples
/// when `None`).
pub fn fit_resonance(samples: &[(f64, Complex64)], kin: &ElasticKinematics, window: Option<(f64, f64)>) -> Result<ResonanceFit> {
    let mut chosen: Vec<(f64, Complex64)> =
        samples.iter().copied().filter(|(e, _)| window.is_none_or(|(a, b)| *e >= a && *e <= b)).collect();
    chosen.sort_by(|a, b| a.0.total_cmp(&b.0));
    if chosen.len() < 8 {
        return Err(Error::InvalidInput(format!("resonance fit needs at least 8 samples in the window, got {}", chosen.len())));
    }
    let win = (chosen[0].0, chosen[chosen.len() - 1].0);
    let data: Vec<(f64, f64, Complex64)> = chosen.iter().map(|&(e, s)| (e, kin.q(e), s)).collect();
    let mut p = initial_guess(&chosen, kin)?.to_array();
    let cost = |p: &[f64; 4]| residuals(&PoleParameters::from_array(*p), &data).iter().map(|r| r * r).sum::<f64>();
    let mut c = cost(&p);
    let mut lambda = 1e-3;
    let mut history = vec![c];
    let max_iter = 500;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let pp = PoleParameters::from_array(p);
        let r = residuals(&pp, &data);
        let mut jtj = Mat::<f64>::zeros(4, 4);
        let mut jtr = [0.0; 4];
        for (k, &(e, q, _)) in data.iter().enumerate() {
            let g = model_gradient(&pp, e, q);
            for part in 0..2 {
                let row: [f64; 4] = std::array::from_fn(|a| if part == 0 { g[a].re } else { g[a].im });
                let rk = r[2 * k + part];
                for a in 0..4 {
                    jtr[a] += row[a] * rk;
                    for b in 0..4 {
                        jtj[(a, b)] += row[a] * row[b];
                    }
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let damped = Mat::from_fn(4, 4, |a, b| jtj[(a, b)] + if a == b { lambda * jtj[(a, a)].max(1e-300) } else { 0.0 });
            let neg: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = solve4(&damped, &neg) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p;
            for a in 0..4 {
                trial[a] += step[a];
            }
            trial[1] = trial[1].abs().max(1e-12);
            let ct = cost(&trial);
            if ct < c {
                let rel = (c - ct) / c.max(1e-300);
                p = trial;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-14 || c < 1e-28 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        history.push(c);
        if !improved || converged {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence { what: "resonance fit".into(), iterations, history });
    }
    let params = PoleParameters::from_array(p);
    if !(params.position > win.0 && params.position < win.1) || params.half_width > (win.1 - win.0) {
        return Err(Error::NoResonance(format!(
            "fitted pole at {:.4} - {:.4}i K does not describe a phase jump inside [{:.4}, {:.4}] K",
            params.position, params.half_width, win.0, win.1
        )));
    }
    // covariance from the final Jacobian
    let mut jtj = Mat::<f64>::zeros(4, 4);
    for &(e, q, _) in &data {
        let g = model_gradient(&params, e, q);
        for part in 0..2 {
            let row: [f64; 4] = std::array::from_fn(|a| if part == 0 { g[a].re } else { g[a].im });
            for a in 0..4 {
                for b in 0..4 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
    }
    let dof = (2 * data.len()).saturating_sub(4).max(1) as f64;
    let sigma2 = c / dof;
    let uncertainty: [f64; 4] = std::array::from_fn(|a| {
        let mut e = [0.0; 4];
        e[a] = 1.0;
        solve4(&jtj, &e).map_or(f64::INFINITY, |col| (col[a].abs() * sigma2).sqrt())
    });
    let width = 2.0 * params.half_width;
    Ok(ResonanceFit {
        params,
        energy: (params.position, -params.half_width),
        width,
        lifetime: lifetime_seconds(width),
        window: win,
        residual: (c / data.len() as f64).sqrt(),
        uncertainty,
        iterations,
    })
}
