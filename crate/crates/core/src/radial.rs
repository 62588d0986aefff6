//! Radial functions on a uniform grid of `[0, R]`.
//!
//! A [`RadialGrid`] stores nodes `r_i = i R / M` together with the
//! quadrature weights of the measure `|S^{N-1}| r^{N-1} dr`.  The weight of
//! node `i` is the exact integral of its hat function against that measure,
//! so the rule is the product trapezoid rule: nonnegative and exact on
//! constants.  The Dirichlet energy is the exact energy of the piecewise
//! linear interpolant, i.e. a sum over cells of `k_c (u_{c+1} - u_c)^2`.
//! The far-field value `u_M` is pinned to zero.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{param, Error, Result};

/// Smallest accepted number of grid intervals.
pub const MIN_INTERVALS: usize = 16;

/// Surface area of the unit sphere in `R^N`.
pub fn sphere_area(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * (0.5 * n * std::f64::consts::PI.ln() - ln_gamma(0.5 * n)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    radius: f64,
    intervals: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    stiffness: Vec<f64>,
}

impl RadialGrid {
    pub fn new(dim: usize, radius: f64, intervals: usize) -> Result<Self> {
        if dim < 3 {
            return Err(param(format!("dimension must be at least 3, got {dim}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(param(format!("radius must be positive, got {radius}")));
        }
        if intervals < MIN_INTERVALS {
            return Err(param(format!(
                "need at least {MIN_INTERVALS} intervals, got {intervals}"
            )));
        }
        let m = intervals;
        let h = radius / m as f64;
        let omega = sphere_area(dim);
        let binom = binomials(dim - 1);
        let nodes: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
        let mut weights = vec![0.0; m + 1];
        let mut stiffness = vec![0.0; m];
        for c in 0..m {
            let a = nodes[c];
            let (mut left, mut right, mut whole) = (0.0, 0.0, 0.0);
            for (k, &b) in binom.iter().enumerate() {
                let kf = k as f64;
                let term = b * a.powi((dim - 1 - k) as i32) * h.powi(k as i32 + 1);
                left += term / ((kf + 1.0) * (kf + 2.0));
                right += term / (kf + 2.0);
                whole += term / (kf + 1.0);
            }
            weights[c] += omega * left;
            weights[c + 1] += omega * right;
            stiffness[c] = omega * whole / (h * h);
        }
        Ok(Self { dim, radius, intervals, nodes, weights, stiffness })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn spacing(&self) -> f64 {
        self.radius / self.intervals as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Per-cell coefficients of the Dirichlet energy.
    pub fn stiffness(&self) -> &[f64] {
        &self.stiffness
    }

    /// Quadrature of nodal values against `|S^{N-1}| r^{N-1} dr`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.nodes.len());
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Same node count on `[0, factor R]`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.dim, self.radius * factor, self.intervals)
    }
}

/// Builds the grid; see [`RadialGrid::new`].
pub fn make_grid(dim: usize, radius: f64, intervals: usize) -> Result<RadialGrid> {
    RadialGrid::new(dim, radius, intervals)
}

fn binomials(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    row
}

/// Nodal values on a shared grid; the last value is always zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "FunctionData", into = "FunctionData")]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.intervals + 1 {
            return Err(param(format!(
                "expected {} nodal values, got {}",
                grid.intervals + 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(param("nodal values must be finite"));
        }
        if values[grid.intervals] != 0.0 {
            return Err(param("value at the outer radius must vanish"));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the nodes and pins the outer value to zero.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values: Vec<f64> = grid.nodes.iter().map(|&r| f(r)).collect();
        *values.last_mut().unwrap() = 0.0;
        Self::new(grid, values)
    }

    pub(crate) fn from_raw(grid: Arc<RadialGrid>, mut values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.intervals + 1);
        *values.last_mut().unwrap() = 0.0;
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Nonnegative and nonincreasing.
    pub fn is_admissible(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0) && self.values.windows(2).all(|w| w[1] <= w[0])
    }

    /// Monotone cubic interpolant; zero beyond the grid.
    pub fn eval(&self, r: f64) -> f64 {
        pchip_eval(&self.values, self.grid.spacing(), r.abs())
    }

    /// The exact dilation `t^{N/2} u(t x)` carried on the grid `[0, R/t]`.
    pub fn rescaled(&self, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(param(format!("dilation factor must be positive, got {t}")));
        }
        let grid = Arc::new(self.grid.scaled(1.0 / t)?);
        let amp = t.powf(0.5 * self.grid.dim as f64);
        let values = self.values.iter().map(|v| amp * v).collect();
        Ok(Self { grid, values })
    }

    /// Radius enclosing half of the L^2 mass.
    pub fn half_mass_radius(&self) -> f64 {
        let g = &self.grid;
        let total: f64 = self.mass2();
        if total <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (i, (w, v)) in g.weights.iter().zip(&self.values).enumerate() {
            let next = acc + w * v * v;
            if next >= 0.5 * total {
                if i == 0 {
                    return 0.0;
                }
                let frac = (0.5 * total - acc) / (next - acc);
                return g.nodes[i - 1] + (0.5 + frac) * g.spacing();
            }
            acc = next;
        }
        g.radius
    }

    pub fn grad2(&self) -> f64 {
        dirichlet_energy(&self.grid, &self.values)
    }

    pub fn mass2(&self) -> f64 {
        self.power_integral(2.0)
    }

    /// `int |u|^k`.
    pub fn power_integral(&self, k: f64) -> f64 {
        power_integral(&self.grid, &self.values, k)
    }
}

/// Serialized form of a [`RadialFunction`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionData {
    pub dim: usize,
    pub radius: f64,
    pub intervals: usize,
    pub values: Vec<f64>,
}

impl From<RadialFunction> for FunctionData {
    fn from(u: RadialFunction) -> Self {
        Self {
            dim: u.grid.dim,
            radius: u.grid.radius,
            intervals: u.grid.intervals,
            values: u.values,
        }
    }
}

impl TryFrom<FunctionData> for RadialFunction {
    type Error = Error;

    fn try_from(d: FunctionData) -> Result<Self> {
        let grid = Arc::new(RadialGrid::new(d.dim, d.radius, d.intervals)?);
        RadialFunction::new(grid, d.values)
    }
}

/// Squared gradient norm, L^2 mass and the three Lebesgue powers in use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormProfile {
    pub grad2: f64,
    pub mass2: f64,
    pub massq: f64,
    pub massp: f64,
    pub mass2s: f64,
}

impl NormProfile {
    /// Profile from `(a, A, B, P)`; the critical slot is set to `P`.
    pub fn from_triple(mass2: f64, grad2: f64, massq: f64, massp: f64) -> Self {
        Self { grad2, mass2, massq, massp, mass2s: massp }
    }
}

/// Computes the norms of `u` for exponents `2 < q < p <= 2*`.
pub fn norms(u: &RadialFunction, q: f64, p: f64) -> Result<NormProfile> {
    let n = u.grid.dim as f64;
    let crit = 2.0 * n / (n - 2.0);
    if !(q > 2.0 && q < p && p <= crit) {
        return Err(param(format!("need 2 < q < p <= {crit}, got q = {q}, p = {p}")));
    }
    let mass2s = u.power_integral(crit);
    let massp = if p == crit { mass2s } else { u.power_integral(p) };
    Ok(NormProfile {
        grad2: u.grad2(),
        mass2: u.mass2(),
        massq: u.power_integral(q),
        massp,
        mass2s,
    })
}

/// Resamples `s^{N/2} u(s r)` onto the same grid.
///
/// Uses monotone cubic interpolation, so an admissible profile stays
/// admissible.  Warns when the dilated half-mass radius falls below four
/// grid cells.
pub fn dilate(u: &RadialFunction, s: f64) -> Result<RadialFunction> {
    if !(s.is_finite() && s > 0.0) {
        return Err(param(format!("dilation factor must be positive, got {s}")));
    }
    let g = &u.grid;
    let h = g.spacing();
    let amp = s.powf(0.5 * g.dim as f64);
    let values = g
        .nodes
        .iter()
        .map(|&r| (amp * pchip_eval(&u.values, h, s * r)).max(0.0))
        .collect();
    let out = RadialFunction::from_raw(u.grid.clone(), values);
    if out.half_mass_radius() < 4.0 * h {
        log::warn!("dilation by {s} leaves the profile under-resolved on this grid");
    }
    Ok(out)
}

/// Rescales `u` to L^2 mass `a`.
pub fn project_mass(u: &RadialFunction, a: f64) -> Result<RadialFunction> {
    if !(a.is_finite() && a > 0.0) {
        return Err(param(format!("mass must be positive, got {a}")));
    }
    let m = u.mass2();
    if m <= 0.0 {
        return Err(Error::DegenerateInput("cannot normalize the zero function".into()));
    }
    let c = (a / m).sqrt();
    Ok(RadialFunction::from_raw(u.grid.clone(), u.values.iter().map(|v| c * v).collect()))
}

/// `sum_c k_c (u_{c+1} - u_c)^2`, the Dirichlet energy of the interpolant.
pub fn dirichlet_energy(grid: &RadialGrid, values: &[f64]) -> f64 {
    values
        .windows(2)
        .zip(&grid.stiffness)
        .map(|(w, k)| k * (w[1] - w[0]).powi(2))
        .sum()
}

/// `sum_i w_i |u_i|^k`.
pub fn power_integral(grid: &RadialGrid, values: &[f64], k: f64) -> f64 {
    grid.weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * v.abs().powf(k))
        .sum()
}

/// Partial derivatives of the Dirichlet energy with respect to nodal values.
pub fn grad2_gradient(grid: &RadialGrid, values: &[f64]) -> Vec<f64> {
    let k = &grid.stiffness;
    let m = grid.intervals;
    let mut g = vec![0.0; m + 1];
    for c in 0..m {
        let flux = 2.0 * k[c] * (values[c + 1] - values[c]);
        g[c] -= flux;
        g[c + 1] += flux;
    }
    g
}

/// Partial derivatives of `int |u|^k`.
pub fn power_gradient(grid: &RadialGrid, values: &[f64], k: f64) -> Vec<f64> {
    grid.weights
        .iter()
        .zip(values)
        .map(|(w, &v)| k * w * v.abs().powf(k - 2.0) * v)
        .collect()
}

/// `(N/2) u + r u'`, the generator of L^2-preserving dilations.
pub fn dilation_generator(grid: &RadialGrid, values: &[f64]) -> Vec<f64> {
    let m = grid.intervals;
    let h = grid.spacing();
    let half_n = 0.5 * grid.dim as f64;
    let mut d = vec![0.0; m + 1];
    for i in 0..m {
        let du = if i == 0 { 0.0 } else { (values[i + 1] - values[i - 1]) / (2.0 * h) };
        d[i] = half_n * values[i] + grid.nodes[i] * du;
    }
    d
}

/// The H^1 Gram operator `L + W` restricted to the free nodes `0..M`.
///
/// `L` is the Dirichlet-energy matrix (half the Hessian of `grad2`) and `W`
/// the diagonal of quadrature weights.
#[derive(Debug, Clone)]
pub struct H1Operator {
    diag: Vec<f64>,
    off: Vec<f64>,
    shift: Vec<f64>,
}

impl H1Operator {
    pub fn new(grid: &RadialGrid) -> Self {
        let m = grid.intervals;
        let k = &grid.stiffness;
        let w = &grid.weights;
        let mut diag = vec![0.0; m];
        for i in 0..m {
            diag[i] = k[i] + if i > 0 { k[i - 1] } else { 0.0 } + w[i];
        }
        let off = (0..m.saturating_sub(1)).map(|i| -k[i]).collect();
        Self { diag, off, shift: w[..m].to_vec() }
    }

    /// Solves `(L + W) x = rhs` on the free nodes; `x_M = 0`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.diag.len();
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        let mut beta = self.diag[0];
        d[0] = rhs[0] / beta;
        for i in 1..m {
            c[i - 1] = self.off[i - 1] / beta;
            beta = self.diag[i] - self.off[i - 1] * c[i - 1];
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / beta;
        }
        for i in (0..m - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d.push(0.0);
        d
    }

    /// `(L + W) x` on the free nodes.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.diag.len();
        let mut y = vec![0.0; m + 1];
        for i in 0..m {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < m {
                v += self.off[i] * x[i + 1];
            }
            y[i] = v;
        }
        y
    }

    pub fn mass_weights(&self) -> &[f64] {
        &self.shift
    }
}

/// Weighted least-squares projection onto nonincreasing sequences (PAVA).
pub fn isotonic_nonincreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut level: Vec<f64> = Vec::with_capacity(values.len());
    let mut mass: Vec<f64> = Vec::with_capacity(values.len());
    let mut count: Vec<usize> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let w = w.max(f64::MIN_POSITIVE);
        level.push(v);
        mass.push(w);
        count.push(1);
        while level.len() > 1 && level[level.len() - 2] < level[level.len() - 1] {
            let (l1, m1, c1) = (level.pop().unwrap(), mass.pop().unwrap(), count.pop().unwrap());
            let j = level.len() - 1;
            let tot = mass[j] + m1;
            level[j] = (level[j] * mass[j] + l1 * m1) / tot;
            mass[j] = tot;
            count[j] += c1;
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (l, c) in level.iter().zip(&count) {
        out.extend(std::iter::repeat(*l).take(*c));
    }
    out
}

/// Projects nodal values onto the admissible cone (nonincreasing, >= 0).
pub fn project_admissible(grid: &RadialGrid, values: &[f64]) -> Vec<f64> {
    let m = grid.intervals;
    let mut out = isotonic_nonincreasing(&values[..m], &grid.weights[..m]);
    for v in out.iter_mut() {
        *v = v.max(0.0);
    }
    out.push(0.0);
    out
}

fn pchip_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let delta: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        if a * b > 0.0 {
            d[i] = 2.0 / (1.0 / a + 1.0 / b);
        }
    }
    if n >= 3 {
        let (d0, d1) = (delta[n - 2], delta[n - 3]);
        let mut e = 0.5 * (3.0 * d0 - d1);
        if e * d0 <= 0.0 {
            e = 0.0;
        } else if d0 * d1 < 0.0 && e.abs() > 3.0 * d0.abs() {
            e = 3.0 * d0;
        }
        d[n - 1] = e;
    }
    d
}

fn pchip_eval(y: &[f64], h: f64, x: f64) -> f64 {
    let m = y.len() - 1;
    let xmax = m as f64 * h;
    if x >= xmax {
        return 0.0;
    }
    let i = ((x / h) as usize).min(m - 1);
    let t = x / h - i as f64;
    let slope = |j: usize| -> f64 {
        let n = y.len();
        if j == 0 {
            return 0.0;
        }
        if j == n - 1 {
            let lo = j.saturating_sub(3);
            let s = pchip_slopes(&y[lo..], h);
            return s[s.len() - 1];
        }
        let (a, b) = ((y[j] - y[j - 1]) / h, (y[j + 1] - y[j]) / h);
        if a * b > 0.0 {
            2.0 / (1.0 / a + 1.0 / b)
        } else {
            0.0
        }
    };
    let (d0, d1) = (slope(i), slope(i + 1));
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y[i] + h10 * h * d0 + h01 * y[i + 1] + h11 * h * d1
}
