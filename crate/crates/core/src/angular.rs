//! Angular channels, Clebsch–Gordan coefficients, bipolar spherical harmonics
//! and the polar-angle quadrature used by the kernel integral.
//!
//! Phases follow Condon–Shortley. Only products `Y* Y` of two bipolar
//! harmonics enter observables, so the overall convention cancels.

use std::f64::consts::PI;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(l: u32, lambda: u32) -> Self {
        if (l + lambda).is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }
}

/// One partial wave `(l, lambda)` coupled to total `(L, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Channel {
    /// Angular momentum conjugate to the pair axis `x`.
    pub l: u32,
    /// Angular momentum conjugate to the atom-pair axis `y`.
    pub lambda: u32,
    pub total_l: u32,
    pub total_m: i32,
    pub parity: Parity,
}

impl Channel {
    pub fn new(l: u32, lambda: u32, total_l: u32, total_m: i32) -> Option<Self> {
        let tri = l.abs_diff(lambda) <= total_l && total_l <= l + lambda;
        if !tri || total_m.unsigned_abs() > total_l {
            return None;
        }
        Some(Self { l, lambda, total_l, total_m, parity: Parity::of(l, lambda) })
    }
}

/// Ordered channel list, ascending in `(l, lambda)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChannelSet {
    channels: Vec<Channel>,
    pub l_max: u32,
    pub boson_filter: bool,
}

impl ChannelSet {
    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Position of the channel with the given `(l, lambda)`.
    pub fn index_of(&self, l: u32, lambda: u32) -> Option<usize> {
        self.channels.iter().position(|c| c.l == l && c.lambda == lambda)
    }

    /// Single `(0, 0)` channel for `L = 0`.
    pub fn s_wave() -> Self {
        enumerate_channels(0, Parity::Even, 0, false)
    }
}

/// All `(l, lambda)` with `l, lambda <= l_max` satisfying the triangle rule
/// and parity. With `identical_bosons`, only even `l` survives (exchange
/// symmetry of the identical pair).
pub fn enumerate_channels(total_l: u32, parity: Parity, l_max: u32, identical_bosons: bool) -> ChannelSet {
    let mut channels = Vec::new();
    for l in 0..=l_max {
        if identical_bosons && l % 2 == 1 {
            continue;
        }
        for lambda in 0..=l_max {
            if Parity::of(l, lambda) != parity {
                continue;
            }
            if let Some(c) = Channel::new(l, lambda, total_l, 0) {
                channels.push(c);
            }
        }
    }
    ChannelSet { channels, l_max, boson_filter: identical_bosons }
}

// ---------------------------------------------------------------------------
// Clebsch–Gordan coefficients

fn primes_upto(n: u32) -> Vec<u32> {
    (2..=n.max(2)).filter(|&p| (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0)).collect()
}

/// Exponent vector of a product/quotient of factorials over a fixed prime set.
struct FactorialRatio {
    primes: Vec<u32>,
    exps: Vec<i64>,
}

impl FactorialRatio {
    fn new(max_arg: u32) -> Self {
        let primes = primes_upto(max_arg);
        let exps = vec![0; primes.len()];
        Self { primes, exps }
    }

    /// Multiplies (sign = +1) or divides (sign = -1) by `n!`.
    fn apply(&mut self, n: u32, sign: i64) {
        for (p, e) in self.primes.iter().zip(self.exps.iter_mut()) {
            // Legendre's formula
            let mut q = n / p;
            while q > 0 {
                *e += sign * i64::from(q);
                q /= p;
            }
        }
    }

    fn mul_int(&mut self, mut n: u32) {
        for (p, e) in self.primes.iter().zip(self.exps.iter_mut()) {
            while n.is_multiple_of(*p) && n > 1 {
                n /= p;
                *e += 1;
            }
        }
        debug_assert_eq!(n, 1);
    }

    fn to_rational(&self) -> BigRational {
        let mut num = BigUint::one();
        let mut den = BigUint::one();
        for (&p, &e) in self.primes.iter().zip(&self.exps) {
            let pow = BigUint::from(p).pow(e.unsigned_abs() as u32);
            if e > 0 {
                num *= pow;
            } else if e < 0 {
                den *= pow;
            }
        }
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}

fn factorial(n: i64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // fall back on log-space division for extreme magnitudes
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

/// `<j1 m1; j2 m2 | J M>` for integer angular momenta, Condon–Shortley phase.
///
/// Evaluated with the Racah formula in exact rational arithmetic; the square
/// root is the only floating-point step.
pub fn clebsch_gordan(j1: u32, m1: i32, j2: u32, m2: i32, big_j: u32, big_m: i32) -> f64 {
    let (j1i, j2i, ji) = (j1 as i64, j2 as i64, big_j as i64);
    let (m1i, m2i, mi) = (m1 as i64, m2 as i64, big_m as i64);
    if m1i + m2i != mi || m1i.abs() > j1i || m2i.abs() > j2i || mi.abs() > ji {
        return 0.0;
    }
    if ji < (j1i - j2i).abs() || ji > j1i + j2i {
        return 0.0;
    }

    let mut pref = FactorialRatio::new((j1 + j2 + big_j + 1).max(2));
    pref.mul_int(2 * big_j + 1);
    pref.apply((j1i + j2i - ji) as u32, 1);
    pref.apply((j1i - j2i + ji) as u32, 1);
    pref.apply((-j1i + j2i + ji) as u32, 1);
    pref.apply((j1i + j2i + ji + 1) as u32, -1);
    for n in [j1i + m1i, j1i - m1i, j2i + m2i, j2i - m2i, ji + mi, ji - mi] {
        pref.apply(n as u32, 1);
    }

    let k_min = 0.max(j2i - ji - m1i).max(j1i - ji + m2i);
    let k_max = (j1i + j2i - ji).min(j1i - m1i).min(j2i + m2i);
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let den = factorial(k)
            * factorial(j1i + j2i - ji - k)
            * factorial(j1i - m1i - k)
            * factorial(j2i + m2i - k)
            * factorial(ji - j2i + m1i + k)
            * factorial(ji - j1i - m2i + k);
        let term = BigRational::new(if k % 2 == 0 { BigInt::one() } else { -BigInt::one() }, den);
        sum += term;
    }
    if sum.is_zero() {
        return 0.0;
    }
    let squared = pref.to_rational() * &sum * &sum;
    let magnitude = rational_to_f64(&squared).sqrt();
    if sum.is_negative() {
        -magnitude
    } else {
        magnitude
    }
}

// ---------------------------------------------------------------------------
// Spherical harmonics

/// Legendre polynomial `P_l(u)` by the three-term recurrence.
pub fn legendre(l: u32, u: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, u);
    if l == 0 {
        return p0;
    }
    for n in 1..l {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0) * u * p1 - nf * p0) / (nf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Normalised associated Legendre function
/// `sqrt((2l+1)/(4pi) (l-m)!/(l+m)!) P_l^m(u)` for `m >= 0`, including the
/// Condon–Shortley phase.
fn normalized_assoc_legendre(l: u32, m: u32, u: f64) -> f64 {
    if m > l {
        return 0.0;
    }
    let s = (1.0 - u * u).max(0.0).sqrt();
    // start from P_m^m
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for k in 1..=m {
        let kf = k as f64;
        pmm *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s;
    }
    if l == m {
        return pmm;
    }
    let mf = m as f64;
    let mut pm1 = (2.0 * mf + 3.0).sqrt() * u * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut pm0 = pmm;
    for n in (m + 2)..=l {
        let nf = n as f64;
        let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
        let b = (((nf - 1.0) * (nf - 1.0) - mf * mf) / (4.0 * (nf - 1.0) * (nf - 1.0) - 1.0)).sqrt();
        let p = a * (u * pm1 - b * pm0);
        pm0 = pm1;
        pm1 = p;
    }
    pm1
}

/// `Y_lm(theta, phi)` with the Condon–Shortley phase.
pub fn spherical_harmonic(l: u32, m: i32, theta: f64, phi: f64) -> Complex64 {
    if m.unsigned_abs() > l {
        return Complex64::zero();
    }
    let am = m.unsigned_abs();
    let plm = normalized_assoc_legendre(l, am, theta.cos());
    let y = Complex64::from_polar(plm, am as f64 * phi);
    if m >= 0 {
        y
    } else if am.is_multiple_of(2) {
        y.conj()
    } else {
        -y.conj()
    }
}

/// `[Y_l(x) (x) Y_lambda(y)]_{LM}` evaluated at the given polar/azimuthal
/// angles of the two unit vectors.
pub fn bipolar_harmonic(channel: &Channel, theta_x: f64, phi_x: f64, theta_y: f64, phi_y: f64) -> Complex64 {
    let (l, lambda, big_l, big_m) = (channel.l, channel.lambda, channel.total_l, channel.total_m);
    let mut acc = Complex64::zero();
    for m in -(l as i32)..=(l as i32) {
        let m2 = big_m - m;
        if m2.unsigned_abs() > lambda {
            continue;
        }
        let cg = clebsch_gordan(l, m, lambda, m2, big_l, big_m);
        if cg == 0.0 {
            continue;
        }
        acc += cg * spherical_harmonic(l, m, theta_x, phi_x) * spherical_harmonic(lambda, m2, theta_y, phi_y);
    }
    acc
}

/// Precomputed `[Y_l (x) Y_lambda]_{LM}` evaluator. The Clebsch–Gordan
/// weights are cached so that the kernel loop only evaluates harmonics.
#[derive(Debug, Clone)]
pub struct BipolarEvaluator {
    channel: Channel,
    terms: Vec<(i32, i32, f64)>,
}

impl BipolarEvaluator {
    pub fn new(channel: Channel) -> Self {
        let (l, lambda) = (channel.l as i32, channel.lambda as i32);
        let mut terms = Vec::new();
        for m in -l..=l {
            let m2 = channel.total_m - m;
            if m2.abs() > lambda {
                continue;
            }
            let cg = clebsch_gordan(channel.l, m, channel.lambda, m2, channel.total_l, channel.total_m);
            if cg != 0.0 {
                terms.push((m, m2, cg));
            }
        }
        Self { channel, terms }
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn eval(&self, theta_x: f64, phi_x: f64, theta_y: f64, phi_y: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|&(m, m2, cg)| {
                cg * spherical_harmonic(self.channel.l, m, theta_x, phi_x) * spherical_harmonic(self.channel.lambda, m2, theta_y, phi_y)
            })
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Quadrature

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut u = ((PI * (i as f64 + 0.75)) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, u);
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * u * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { u } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (u * pn - pn1) / (u * u - 1.0);
            let du = pn / dp;
            u -= du;
            if du.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - u * u) * dp * dp);
        nodes[i] = -u;
        nodes[n - 1 - i] = u;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Nodes `theta_k` and weights `w_k` with
/// `sum_k w_k g(theta_k) ~ int_0^pi g(theta) sin(theta) d theta`.
#[derive(Debug, Clone)]
pub struct ThetaQuadrature {
    pub theta: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn theta_quadrature(n_theta: usize) -> ThetaQuadrature {
    let (u, w) = gauss_legendre(n_theta);
    ThetaQuadrature { theta: u.iter().map(|c| c.acos()).collect(), cos_theta: u, weights: w }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neon_channel_set() {
        let set = enumerate_channels(0, Parity::Even, 10, true);
        let pairs: Vec<_> = set.channels().iter().map(|c| (c.l, c.lambda)).collect();
        assert_eq!(pairs, vec![(0, 0), (2, 2), (4, 4), (6, 6), (8, 8), (10, 10)]);
    }

    #[test]
    fn s_wave_only() {
        let set = enumerate_channels(0, Parity::Even, 0, false);
        assert_eq!(set.len(), 1);
        assert_eq!((set.channels()[0].l, set.channels()[0].lambda), (0, 0));
    }

    #[test]
    fn odd_parity_l1() {
        let set = enumerate_channels(1, Parity::Odd, 2, false);
        let pairs: Vec<_> = set.channels().iter().map(|c| (c.l, c.lambda)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 0), (1, 2), (2, 1)]);
        assert_eq!(set, enumerate_channels(1, Parity::Odd, 2, false));
    }

    #[test]
    fn odd_l_max_under_boson_filter_stays_even() {
        let set = enumerate_channels(0, Parity::Even, 5, true);
        assert!(set.channels().iter().all(|c| c.l % 2 == 0));
        assert_eq!(set.len(), 3);
    }

    /// Exact Racah sum, written independently with plain integers.
    fn cg_oracle_squared(j1: i64, m1: i64, j2: i64, m2: i64, j: i64, m: i64) -> (f64, f64) {
        fn f(n: i64) -> f64 {
            (1..=n).map(|k| k as f64).product()
        }
        let pre = (2 * j + 1) as f64 * f(j1 + j2 - j) * f(j1 - j2 + j) * f(-j1 + j2 + j) / f(j1 + j2 + j + 1)
            * f(j1 + m1)
            * f(j1 - m1)
            * f(j2 + m2)
            * f(j2 - m2)
            * f(j + m)
            * f(j - m);
        let mut s = 0.0;
        for k in 0..=(j1 + j2 + j) {
            let args = [k, j1 + j2 - j - k, j1 - m1 - k, j2 + m2 - k, j - j2 + m1 + k, j - j1 - m2 + k];
            if args.iter().any(|&a| a < 0) {
                continue;
            }
            let d: f64 = args.iter().map(|&a| f(a)).product();
            s += if k % 2 == 0 { 1.0 / d } else { -1.0 / d };
        }
        (pre, s)
    }

    #[test]
    fn cg_examples() {
        assert!((clebsch_gordan(0, 0, 0, 0, 0, 0) - 1.0).abs() < 1e-15);
        assert!((clebsch_gordan(1, 0, 1, 0, 0, 0) + 1.0 / 3f64.sqrt()).abs() < 1e-15);
        // <2 1; 1 -1 | 1 0> = sqrt(3/10) from the exact Racah sum
        let (pre, s) = cg_oracle_squared(2, 1, 1, -1, 1, 0);
        let oracle = s.signum() * (pre * s * s).sqrt();
        assert!((oracle - (3.0f64 / 10.0).sqrt()).abs() < 1e-14);
        assert!((clebsch_gordan(2, 1, 1, -1, 1, 0) - oracle).abs() < 1e-14);
        assert_eq!(clebsch_gordan(1, 1, 1, 1, 1, 0), 0.0);
        assert_eq!(clebsch_gordan(1, 0, 1, 0, 3, 0), 0.0);
    }

    #[test]
    fn cg_orthogonality() {
        for j1 in 0..=10u32 {
            for j2 in 0..=10u32 {
                let js: Vec<u32> = (j1.abs_diff(j2)..=j1 + j2).collect();
                for &ja in &js {
                    for &jb in &js {
                        for mm in -(ja.min(jb) as i32)..=(ja.min(jb) as i32) {
                            let mut s = 0.0;
                            for m1 in -(j1 as i32)..=(j1 as i32) {
                                let m2 = mm - m1;
                                if m2.unsigned_abs() > j2 {
                                    continue;
                                }
                                s += clebsch_gordan(j1, m1, j2, m2, ja, mm) * clebsch_gordan(j1, m1, j2, m2, jb, mm);
                            }
                            let expect = if ja == jb { 1.0 } else { 0.0 };
                            assert!((s - expect).abs() < 1e-12, "j1={j1} j2={j2} J={ja} J'={jb} M={mm}: {s}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn scalar_bipolar_is_constant() {
        let c = Channel::new(0, 0, 0, 0).unwrap();
        for &(a, b, cc, d) in &[(0.1, 0.2, 0.3, 0.4), (2.0, 1.0, 0.5, 3.0)] {
            let v = bipolar_harmonic(&c, a, b, cc, d);
            assert!((v.re - 1.0 / (4.0 * PI)).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn l0_bipolar_closed_form() {
        for l in 0..=10u32 {
            let c = Channel::new(l, l, 0, 0).unwrap();
            for &theta in &[0.0, 0.3, 1.1, 2.0, PI] {
                let v = bipolar_harmonic(&c, 0.0, 0.0, theta, 0.0);
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                let expect = sign * (2.0 * l as f64 + 1.0).sqrt() / (4.0 * PI) * legendre(l, theta.cos());
                assert!((v.re - expect).abs() < 1e-13, "l={l} theta={theta}");
                assert!(v.im.abs() < 1e-13);
            }
        }
    }

    fn sphere_integral(f: impl Fn(f64, f64, f64, f64) -> f64, n: usize) -> f64 {
        let (u, w) = gauss_legendre(n);
        let nphi = 2 * n;
        let dphi = 2.0 * PI / nphi as f64;
        let mut total = 0.0;
        for (a, wa) in u.iter().zip(&w) {
            for (b, wb) in u.iter().zip(&w) {
                for i in 0..nphi {
                    for j in 0..nphi {
                        total += wa * wb * dphi * dphi * f(a.acos(), i as f64 * dphi, b.acos(), j as f64 * dphi);
                    }
                }
            }
        }
        total
    }

    #[test]
    fn bipolar_normalization() {
        for (l, lambda, big_l, big_m) in [(0, 0, 0, 0), (2, 2, 0, 0), (1, 2, 1, 0), (2, 1, 2, 1), (3, 3, 0, 0)] {
            let c = Channel::new(l, lambda, big_l, big_m).unwrap();
            let ev = BipolarEvaluator::new(c);
            let norm = sphere_integral(|a, b, cc, d| ev.eval(a, b, cc, d).norm_sqr(), 10);
            assert!((norm - 1.0).abs() < 1e-10, "{c:?}: {norm}");
        }
    }

    #[test]
    fn bipolar_is_angular_laplacian_eigenfunction() {
        // -[1/sin d/dtheta (sin d/dtheta) + 1/sin^2 d^2/dphi^2] on each sphere
        let c = Channel::new(3, 2, 1, 1).unwrap();
        let ev = BipolarEvaluator::new(c);
        let h = 1e-4;
        let lap = |f: &dyn Fn(f64, f64) -> Complex64, t: f64, p: f64| {
            let s = t.sin();
            let dtt = (f(t + h, p) - 2.0 * f(t, p) + f(t - h, p)) / (h * h);
            let dt = (f(t + h, p) - f(t - h, p)) / (2.0 * h);
            let dpp = (f(t, p + h) - 2.0 * f(t, p) + f(t, p - h)) / (h * h);
            -(dtt + t.cos() / s * dt + dpp / (s * s))
        };
        for &(tx, px, ty, py) in &[(0.7, 0.3, 1.2, 2.0), (1.9, 4.0, 0.5, 1.0)] {
            let v = ev.eval(tx, px, ty, py);
            let lx = lap(&|t, p| ev.eval(t, p, ty, py), tx, px);
            let ly = lap(&|t, p| ev.eval(tx, px, t, p), ty, py);
            assert!((lx - 12.0 * v).norm() < 1e-6 * 12.0 * v.norm(), "{lx} vs {}", 12.0 * v);
            assert!((ly - 6.0 * v).norm() < 1e-6 * 6.0 * v.norm());
        }
    }

    #[test]
    fn quadrature_exactness() {
        for n in [1, 2, 5, 40] {
            let q = theta_quadrature(n);
            let total: f64 = q.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-14);
            if n >= 2 {
                let c2: f64 = q.weights.iter().zip(&q.theta).map(|(w, t)| w * t.cos().powi(2)).sum();
                assert!((c2 - 2.0 / 3.0).abs() < 1e-14);
            }
        }
        let q = theta_quadrature(11);
        for l in 0..=10u32 {
            for lp in 0..=10u32 {
                let s: f64 = q.weights.iter().zip(&q.cos_theta).map(|(w, u)| w * legendre(l, *u) * legendre(lp, *u)).sum();
                let expect = if l == lp { 2.0 / (2.0 * l as f64 + 1.0) } else { 0.0 };
                assert!((s - expect).abs() < 1e-13, "{l} {lp}: {s}");
            }
        }
    }
}
