//! Radial grids, Gauss collocation nodes and cubic Hermite splines.
//!
//! Each knot `x_n` carries two functions with support `[x_{n-1}, x_{n+1}]`:
//! Type I (`s(x_n) = 1`, `s'(x_n) = 0`) and Type II (`s(x_n) = 0`,
//! `s'(x_n) = 1`). On each subinterval they are the usual Hermite cubics, so
//! a function is represented by its values and slopes at the knots.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knot placement rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridDistribution {
    Uniform,
    /// `x_k = x_max (k / n)^p`.
    Power {
        p: f64,
    },
    /// One inner interval `[0, start]`, then steps growing geometrically from
    /// `first_step` so that the last knot lands on `x_max`. With `max_step`
    /// the growth stops at that step length.
    Geometric {
        start: f64,
        first_step: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_step: Option<f64>,
    },
    Custom {
        knots: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialGrid {
    knots: Vec<f64>,
    nodes: Vec<f64>,
    pub distribution: GridDistribution,
}

fn geometric_steps(first: f64, r: f64, cap: f64, steps: usize) -> Vec<f64> {
    let mut h = first;
    (0..steps)
        .map(|_| {
            let out = h.min(cap);
            h *= r;
            out
        })
        .collect()
}

fn geometric_ratio(span: f64, first: f64, cap: f64, steps: usize) -> Result<f64> {
    // growth ratio r with sum_k min(first r^k, cap) = span
    let total = |r: f64| geometric_steps(first, r, cap, steps).iter().sum::<f64>();
    if total(1.0) > span {
        return Err(Error::InvalidInput(format!("geometric grid: {steps} steps of at least {first} bohr overshoot the span {span}")));
    }
    if first + cap * (steps as f64 - 1.0) < span {
        return Err(Error::InvalidInput(format!("geometric grid: {steps} steps capped at {cap} bohr cannot cover the span {span}")));
    }
    let (mut lo, mut hi) = (1.0, 2.0);
    while total(hi) < span {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < span {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Builds the knot sequence `0 = x_0 < ... < x_{n_sub} = x_max` and the two
/// Gauss nodes of every subinterval.
pub fn build_grid(x_max: f64, n_sub: usize, distribution: GridDistribution) -> Result<RadialGrid> {
    let knots: Vec<f64> = match &distribution {
        GridDistribution::Custom { knots } => knots.clone(),
        _ if n_sub < 1 || !(x_max > 0.0) => {
            return Err(Error::InvalidInput(format!("grid needs n_sub >= 1 and x_max > 0 (got {n_sub}, {x_max})")));
        }
        GridDistribution::Uniform => (0..=n_sub).map(|k| x_max * k as f64 / n_sub as f64).collect(),
        GridDistribution::Power { p } => {
            if !(*p > 0.0) {
                return Err(Error::InvalidInput(format!("power grid exponent must be positive (got {p})")));
            }
            (0..=n_sub).map(|k| x_max * (k as f64 / n_sub as f64).powf(*p)).collect()
        }
        GridDistribution::Geometric { start, first_step, max_step } => {
            let cap = max_step.unwrap_or(f64::INFINITY);
            if n_sub < 2 || !(*start > 0.0 && *start < x_max && *first_step > 0.0 && cap >= *first_step) {
                return Err(Error::InvalidInput(format!(
                    "geometric grid needs n_sub >= 2, 0 < start < x_max and 0 < first_step <= max_step (got {start}, {first_step}, {max_step:?})"
                )));
            }
            let steps = n_sub - 1;
            let r = geometric_ratio(x_max - start, *first_step, cap, steps)?;
            let mut knots = vec![0.0, *start];
            for h in geometric_steps(*first_step, r, cap, steps) {
                let next = knots.last().unwrap() + h;
                knots.push(next);
            }
            *knots.last_mut().unwrap() = x_max;
            knots
        }
    };
    RadialGrid::from_knots(knots, distribution)
}

impl RadialGrid {
    pub fn from_knots(knots: Vec<f64>, distribution: GridDistribution) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidInput("grid needs at least two knots".into()));
        }
        if knots[0] != 0.0 {
            return Err(Error::InvalidInput(format!("first knot must be 0 (got {})", knots[0])));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidInput("knots must be finite and strictly increasing".into()));
        }
        let offset = 0.5 / 3f64.sqrt();
        let nodes = knots
            .windows(2)
            .flat_map(|w| {
                let (mid, h) = (0.5 * (w[0] + w[1]), w[1] - w[0]);
                [mid - offset * h, mid + offset * h]
            })
            .collect();
        Ok(Self { knots, nodes, distribution })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Collocation points, two per subinterval, ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_sub(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn x_max(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Subinterval containing `x`, or `None` outside `[0, x_max]`.
    pub fn interval_of(&self, x: f64) -> Option<usize> {
        if !(x >= 0.0 && x <= self.x_max()) {
            return None;
        }
        let i = self.knots.partition_point(|&k| k <= x);
        Some(i.saturating_sub(1).min(self.n_sub() - 1))
    }

    /// Copy with every subinterval split in two.
    pub fn refined(&self) -> Self {
        let mut knots = Vec::with_capacity(2 * self.knots.len());
        for w in self.knots.windows(2) {
            knots.push(w[0]);
            knots.push(0.5 * (w[0] + w[1]));
        }
        knots.push(self.x_max());
        Self::from_knots(knots, GridDistribution::Custom { knots: vec![] }).expect("refining keeps knots ordered")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplineKind {
    /// Unit value, zero slope at the knot.
    I,
    /// Zero value, unit slope at the knot.
    II,
}

/// Hermite cubics on the unit interval and their `t`-derivatives:
/// `[h00, h10, h01, h11]`.
fn hermite_unit(t: f64, d: u32) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    match d {
        0 => [2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + t, -2.0 * t3 + 3.0 * t2, t3 - t2],
        1 => [6.0 * t2 - 6.0 * t, 3.0 * t2 - 4.0 * t + 1.0, -6.0 * t2 + 6.0 * t, 3.0 * t2 - 2.0 * t],
        2 => [12.0 * t - 6.0, 6.0 * t - 4.0, -12.0 * t + 6.0, 6.0 * t - 2.0],
        _ => [0.0; 4],
    }
}

/// Values of the four raw functions alive on subinterval `i` at `x`:
/// `(i, I), (i, II), (i+1, I), (i+1, II)`.
fn local_raw(knots: &[f64], i: usize, x: f64, d: u32) -> [f64; 4] {
    let (xl, xr) = (knots[i], knots[i + 1]);
    let h = xr - xl;
    let t = (x - xl) / h;
    let [h00, h10, h01, h11] = hermite_unit(t, d);
    let scale = h.powi(-(d as i32));
    [h00 * scale, h10 * h * scale, h01 * scale, h11 * h * scale]
}

/// Value of the raw spline of `kind` at `knot`, derivative order `d`.
pub fn spline_eval(grid: &RadialGrid, knot: usize, kind: SplineKind, x: f64, d: u32) -> f64 {
    if d > 2 || knot >= grid.knots.len() {
        return 0.0;
    }
    let Some(i) = grid.interval_of(x) else { return 0.0 };
    let local = local_raw(&grid.knots, i, x, d);
    let k = match kind {
        SplineKind::I => 0,
        SplineKind::II => 1,
    };
    if knot == i {
        local[k]
    } else if knot == i + 1 {
        local[2 + k]
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryCondition {
    /// Drops Type I at `x = 0`.
    RegularOrigin,
    /// Drops Type I at `x_max`.
    DirichletOuter,
    /// Replaces the pair at `knot` by `s^I + b s^II`.
    LogDerivative { b: f64, knot: usize },
}

impl BoundaryCondition {
    fn knot(&self, last: usize) -> usize {
        match *self {
            Self::RegularOrigin => 0,
            Self::DirichletOuter => last,
            Self::LogDerivative { knot, .. } => knot,
        }
    }
}

/// Hermite basis on a grid with boundary conditions applied.
///
/// Raw function `2 n + k` is `(knot n, kind k)`. Active functions are the
/// survivors, each a raw function with weight 1 or, for a log-derivative
/// knot, the weighted pair.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    grid: RadialGrid,
    conditions: Vec<BoundaryCondition>,
    raw_to_active: Vec<Option<(usize, f64)>>,
    n_active: usize,
}

impl HermiteBasis {
    pub fn new(grid: RadialGrid, conditions: &[BoundaryCondition]) -> Result<Self> {
        let last = grid.n_sub();
        let mut seen = vec![false; last + 1];
        for c in conditions {
            let k = c.knot(last);
            if k > last {
                return Err(Error::InvalidInput(format!("boundary condition at knot {k} beyond the grid ({last})")));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidInput(format!("conflicting boundary conditions at knot {k}")));
            }
        }
        let mut raw_to_active = vec![None; 2 * (last + 1)];
        let mut n_active = 0;
        for knot in 0..=last {
            let cond = conditions.iter().find(|c| c.knot(last) == knot);
            match cond {
                Some(BoundaryCondition::RegularOrigin | BoundaryCondition::DirichletOuter) => {
                    raw_to_active[2 * knot + 1] = Some((n_active, 1.0));
                    n_active += 1;
                }
                Some(BoundaryCondition::LogDerivative { b, .. }) => {
                    raw_to_active[2 * knot] = Some((n_active, 1.0));
                    raw_to_active[2 * knot + 1] = Some((n_active, *b));
                    n_active += 1;
                }
                None => {
                    raw_to_active[2 * knot] = Some((n_active, 1.0));
                    raw_to_active[2 * knot + 1] = Some((n_active + 1, 1.0));
                    n_active += 2;
                }
            }
        }
        Ok(Self { grid, conditions: conditions.to_vec(), raw_to_active, n_active })
    }

    /// Regular at the origin and zero at `x_max`; square collocation.
    pub fn dirichlet(grid: RadialGrid) -> Self {
        Self::new(grid, &[BoundaryCondition::RegularOrigin, BoundaryCondition::DirichletOuter]).expect("distinct knots")
    }

    pub fn unconstrained(grid: RadialGrid) -> Self {
        Self::new(grid, &[]).expect("no conditions")
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn conditions(&self) -> &[BoundaryCondition] {
        &self.conditions
    }

    pub fn len(&self) -> usize {
        self.n_active
    }

    pub fn is_empty(&self) -> bool {
        self.n_active == 0
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.nodes.len()
    }

    /// Active function index of a raw `(knot, kind)` with its weight.
    pub fn active_of(&self, knot: usize, kind: SplineKind) -> Option<(usize, f64)> {
        let k = match kind {
            SplineKind::I => 0,
            SplineKind::II => 1,
        };
        self.raw_to_active.get(2 * knot + k).copied().flatten()
    }

    /// Calls `f(active index, value)` for every active function nonzero at
    /// `x`. A log-derivative function may be reported twice (once per kind).
    pub fn for_each_active(&self, x: f64, d: u32, mut f: impl FnMut(usize, f64)) {
        let Some(i) = self.grid.interval_of(x) else { return };
        let local = local_raw(&self.grid.knots, i, x, d);
        for (slot, v) in local.iter().enumerate() {
            if let Some((a, w)) = self.raw_to_active[2 * i + slot] {
                f(a, w * v);
            }
        }
    }

    /// Interval index and the four active contributions at `x`, merged; unused
    /// slots carry index `usize::MAX`.
    pub fn local(&self, x: f64, d: u32) -> Option<[(usize, f64); 4]> {
        let i = self.grid.interval_of(x)?;
        let local = local_raw(&self.grid.knots, i, x, d);
        let mut out = [(usize::MAX, 0.0); 4];
        let mut len = 0;
        for (slot, v) in local.iter().enumerate() {
            if let Some((a, w)) = self.raw_to_active[2 * i + slot] {
                if let Some(e) = out[..len].iter_mut().find(|e| e.0 == a) {
                    e.1 += w * v;
                } else {
                    out[len] = (a, w * v);
                    len += 1;
                }
            }
        }
        Some(out)
    }

    /// Value of the expansion `sum_a c_a s_a` at `x`.
    pub fn expand(&self, coeffs: &[f64], x: f64, d: u32) -> f64 {
        let mut s = 0.0;
        self.for_each_active(x, d, |a, v| s += coeffs[a] * v);
        s
    }

    /// `[s_a^{(d)}(node_n)]`, nodes by rows, active functions by columns.
    pub fn collocation_matrix(&self, d: u32) -> Mat<f64> {
        let mut m = Mat::zeros(self.n_nodes(), self.n_active);
        for (n, &x) in self.grid.nodes.iter().enumerate() {
            self.for_each_active(x, d, |a, v| m[(n, a)] += v);
        }
        m
    }

    /// Coefficients of the Hermite interpolant of `(f, f')` on the active
    /// functions. Constrained slots take no coefficient; for a log-derivative
    /// knot the value `f(x_n)` is used.
    pub fn interpolate(&self, f: impl Fn(f64) -> (f64, f64)) -> Vec<f64> {
        let mut c = vec![0.0; self.n_active];
        for (knot, &x) in self.grid.knots.iter().enumerate() {
            let (v, dv) = f(x);
            let i = self.active_of(knot, SplineKind::I);
            let ii = self.active_of(knot, SplineKind::II);
            match (i, ii) {
                (Some((a, _)), Some((b, _))) if a == b => c[a] = v,
                _ => {
                    if let Some((a, _)) = i {
                        c[a] = v;
                    }
                    if let Some((b, _)) = ii {
                        c[b] = dv;
                    }
                }
            }
        }
        c
    }
}

/// Gauss–Legendre rule with `order` points mapped to every subinterval of the
/// grid: `(points, weights)`.
pub fn composite_gauss(grid: &RadialGrid, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (u, w) = crate::angular::gauss_legendre(order);
    let mut pts = Vec::with_capacity(order * grid.n_sub());
    let mut wts = Vec::with_capacity(order * grid.n_sub());
    for win in grid.knots().windows(2) {
        let (mid, half) = (0.5 * (win[0] + win[1]), 0.5 * (win[1] - win[0]));
        for (ui, wi) in u.iter().zip(&w) {
            pts.push(mid + half * ui);
            wts.push(half * wi);
        }
    }
    (pts, wts)
}
