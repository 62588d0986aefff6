//! The extremal coupling `mu*_{a,p} = inf { mu_p(u) : |u|_2^2 = a }`.
//!
//! `log mu_p(u) = log C~ + alpha log A - log B - beta log P` with
//! `alpha = (y - x)/(y - 2)`, `beta = (2 - x)/(y - 2)`, `x = q g_q`,
//! `y = p g_p`.  The quotient is invariant under `(u)_s`, so descent runs
//! with the dilation direction removed and a fixed half-mass radius.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constants::mu_lower_bound;
use crate::descent::{Descent, DescentOptions, Objective};
use crate::error::{param, Error, Result};
use crate::fibering::{mu_threshold, s_star, threshold_constant};
use crate::functionals::{critical_exponent, Params};
use crate::radial::{
    dirichlet_energy, grad2_gradient, norms, power_gradient, power_integral, RadialFunction, RadialGrid,
};

/// Median radius of `exp(-r^2)` in three dimensions; used to size the
/// Gaussian initial guess.
const GAUSSIAN_HALF_MASS: f64 = 1.087_652_031_758_167;

#[derive(Debug, Clone)]
pub struct ExtremalOptions {
    pub max_iter: usize,
    /// Relative change of the quotient over `window` iterations that stops
    /// the descent.
    pub tol: f64,
    pub window: usize,
    /// Half-mass radius the iterate is held at; defaults to `R / 20`.
    pub gauge_radius: Option<f64>,
    pub initial: Option<RadialFunction>,
}

impl Default for ExtremalOptions {
    fn default() -> Self {
        Self { max_iter: 20_000, tol: 1e-10, window: 50, gauge_radius: None, initial: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtremalResult {
    pub params: Params,
    pub mu_star: f64,
    pub minimizer: RadialFunction,
    pub history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// History entries before this index precede the last gauge reset.
    pub burn_in: usize,
    /// Set for `p = 2*`, where the value is only an upper bound.
    pub upper_bound_only: bool,
}

struct LogQuotient<'a> {
    grid: &'a RadialGrid,
    q: f64,
    p: f64,
    alpha: f64,
    beta: f64,
    log_c: f64,
}

impl<'a> LogQuotient<'a> {
    fn new(grid: &'a RadialGrid, params: &Params) -> Self {
        let (x, y) = (params.q_gamma(), params.p_gamma());
        Self {
            grid,
            q: params.q,
            p: params.p,
            alpha: (y - x) / (y - 2.0),
            beta: (2.0 - x) / (y - 2.0),
            log_c: threshold_constant(params).ln(),
        }
    }

    fn parts(&self, u: &[f64]) -> (f64, f64, f64) {
        (
            dirichlet_energy(self.grid, u),
            power_integral(self.grid, u, self.q),
            power_integral(self.grid, u, self.p),
        )
    }
}

impl Objective for LogQuotient<'_> {
    fn value(&self, u: &[f64]) -> Option<f64> {
        let (a, b, c) = self.parts(u);
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return None;
        }
        Some(self.log_c + self.alpha * a.ln() - b.ln() - self.beta * c.ln())
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let (a, b, c) = self.parts(u);
        let ga = grad2_gradient(self.grid, u);
        let gb = power_gradient(self.grid, u, self.q);
        let gc = power_gradient(self.grid, u, self.p);
        ga.iter()
            .zip(&gb)
            .zip(&gc)
            .map(|((x, y), z)| self.alpha * x / a - y / b - self.beta * z / c)
            .collect()
    }
}

/// Gaussian of mass `a` whose half-mass radius is `radius`.
pub fn gaussian_start(grid: &Arc<RadialGrid>, mass: f64, radius: f64) -> Result<RadialFunction> {
    let sigma = radius / GAUSSIAN_HALF_MASS;
    let u = RadialFunction::from_fn(grid.clone(), |r| (-0.5 * r * r / (sigma * sigma)).exp())?;
    crate::radial::project_mass(&u, mass)
}

/// Resamples `u` onto `grid`, dilated so that its half-mass radius is
/// `radius`.
pub(crate) fn transfer(u: &RadialFunction, grid: &Arc<RadialGrid>, radius: f64) -> Result<RadialFunction> {
    let r = u.half_mass_radius();
    if !(r > 0.0) {
        return Err(Error::DegenerateInput("initial profile has no mass".into()));
    }
    let s = r / radius;
    let amp = s.powf(0.5 * grid.dim() as f64);
    let out = RadialFunction::from_fn(grid.clone(), |x| (amp * u.eval(s * x)).max(0.0))?;
    Ok(RadialFunction::from_raw(grid.clone(), crate::radial::project_admissible(grid, out.values())))
}

pub(crate) fn default_gauge(grid: &RadialGrid) -> f64 {
    grid.radius() / 20.0
}

/// Minimizes `mu_p` over the admissible part of the mass sphere.
///
/// `params.mu` is ignored.  Non-convergence is reported through
/// `converged = false`, not as an error.
pub fn minimize_mu(params: &Params, grid: &Arc<RadialGrid>, opts: &ExtremalOptions) -> Result<ExtremalResult> {
    if grid.dim() != params.dim {
        return Err(param("grid dimension differs from the problem dimension"));
    }
    let gauge = opts.gauge_radius.unwrap_or_else(|| default_gauge(grid));
    let start = match &opts.initial {
        Some(u) => transfer(u, grid, gauge)?.into_values(),
        None => gaussian_start(grid, params.mass, gauge)?.into_values(),
    };
    let obj = LogQuotient::new(grid, params);
    let descent = Descent::new(
        grid.clone(),
        DescentOptions {
            max_iter: opts.max_iter,
            window: opts.window,
            rel_tol: opts.tol,
            stall_tol: 1e-9,
            mass: Some(params.mass),
            gauge_radius: Some(gauge),
            admissible: true,
        },
    );
    let out = descent
        .run(&obj, start)
        .ok_or_else(|| Error::DegenerateInput("initial profile has a vanishing norm".into()))?;
    let minimizer = RadialFunction::from_raw(grid.clone(), out.values);
    let np = norms(&minimizer, params.q, params.p)?;
    let mu_star = mu_threshold(&np, params)?;
    Ok(ExtremalResult {
        params: *params,
        mu_star,
        minimizer,
        history: out.history.iter().map(|v| v.exp()).collect(),
        converged: out.converged,
        iterations: out.iterations,
        burn_in: out.last_reset,
        upper_bound_only: params.is_critical(),
    })
}

/// Exponent `e` with `(mu*_a)^{(y-2)/(y-x)} = (mu*_1)^{(y-2)/(y-x)} a^{-e}`.
pub fn mass_exponent(params: &Params) -> f64 {
    let n = params.dim as f64;
    let (q, p) = (params.q, params.p);
    let (x, y) = (params.q_gamma(), params.p_gamma());
    (2.0 * (1.0 - params.gamma_p()) + ((p - q) * n / p) * (y - 2.0) / (y - x)) * p / (n * (p - 2.0))
}

/// Exponent `k` with `mu*_a = mu*_1 a^{k}`.
pub fn mu_mass_exponent(params: &Params) -> f64 {
    let (x, y) = (params.q_gamma(), params.p_gamma());
    -mass_exponent(params) * (y - x) / (y - 2.0)
}

/// Transports `mu*_{a_from,p}` to `mu*_{a_to,p}`.
pub fn mass_scaling(params: &Params, a_from: f64, a_to: f64, mu_from: f64) -> Result<f64> {
    if !(a_from > 0.0 && a_to > 0.0) {
        return Err(param("masses must be positive"));
    }
    Ok(mu_from * (a_to / a_from).powf(mu_mass_exponent(params)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitRow {
    pub p: f64,
    pub mu_star: Option<f64>,
    pub converged: bool,
    /// Gagliardo-Nirenberg lower bound on `mu*_{a,p}`.
    pub lower_bound: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalLimit {
    pub dim: usize,
    pub q: f64,
    pub mass: f64,
    pub rows: Vec<LimitRow>,
    /// Linear extrapolation in `2* - p` from the last two converged rows.
    pub extrapolated: Option<f64>,
    /// Lower bound on `mu*_a` at `p = 2*`.
    pub critical_lower_bound: f64,
}

/// Runs [`minimize_mu`] along `p_seq` with warm starts and extrapolates to
/// `p = 2*`.
pub fn critical_limit(
    dim: usize,
    q: f64,
    mass: f64,
    p_seq: &[f64],
    grid: &Arc<RadialGrid>,
    opts: &ExtremalOptions,
) -> Result<CriticalLimit> {
    let crit = critical_exponent(dim)?;
    if p_seq.is_empty() || p_seq.windows(2).any(|w| w[1] <= w[0]) {
        return Err(param("p sequence must be nonempty and strictly increasing"));
    }
    let base = Params::critical(dim, q, mass, 0.0)?;
    let mut rows = Vec::with_capacity(p_seq.len());
    let mut warm = opts.initial.clone();
    for &p in p_seq {
        let params = base.with_p(p)?;
        let lower_bound = mu_lower_bound(&params)?;
        let run_opts = ExtremalOptions { initial: warm.clone(), ..opts.clone() };
        match minimize_mu(&params, grid, &run_opts) {
            Ok(res) => {
                warm = Some(res.minimizer.clone());
                rows.push(LimitRow {
                    p,
                    mu_star: Some(res.mu_star),
                    converged: res.converged,
                    lower_bound,
                    error: None,
                });
            }
            Err(e) => rows.push(LimitRow { p, mu_star: None, converged: false, lower_bound, error: Some(e.to_string()) }),
        }
    }
    let good: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.converged)
        .filter_map(|r| r.mu_star.map(|m| (crit - r.p, m)))
        .collect();
    let extrapolated = match good.as_slice() {
        [.., (d1, m1), (d2, m2)] if d1 != d2 => Some((d1 * m2 - d2 * m1) / (d1 - d2)),
        [(_, m)] => Some(*m),
        _ => None,
    };
    Ok(CriticalLimit {
        dim,
        q,
        mass,
        rows,
        extrapolated,
        critical_lower_bound: mu_lower_bound(&base)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElResidual {
    pub residual: f64,
    pub lambda: f64,
}

/// Residual of `-2 Lap u - mu* q g_q u^{q-1} - 2* u^{2*-1} = lambda u` at
/// the degenerate fiber point of `u`.
///
/// `u` is moved to `(u)_{s_*}` exactly (rescaled grid); `lambda` is the
/// weighted L^2 projection of the left side onto `u`, and the residual is
/// measured in the weighted L^2 norm relative to `-2 Lap u`.
pub fn degenerate_el_residual(u: &RadialFunction, mu_star: f64, params: &Params) -> Result<ElResidual> {
    if !params.is_critical() {
        return Err(param("the degenerate equation is posed at p = 2*"));
    }
    if u.values().iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateInput("zero function".into()));
    }
    let probe = params.with_mu(mu_star)?;
    let np = norms(u, params.q, params.p)?;
    let v = u.rescaled(s_star(&np, &probe)?)?;
    let g = v.grid();
    let vals = v.values();
    let ga = grad2_gradient(g, vals);
    let gb = power_gradient(g, vals, params.q);
    let gc = power_gradient(g, vals, params.p);
    let w = g.weights();
    let m = g.intervals();
    let gq = params.gamma_q();
    let lhs: Vec<f64> = (0..m).map(|i| ga[i] - mu_star * gq * gb[i] - gc[i]).collect();
    let num: f64 = (0..m).map(|i| lhs[i] * vals[i]).sum();
    let den: f64 = (0..m).map(|i| w[i] * vals[i] * vals[i]).sum();
    let lambda = num / den;
    let mut err = 0.0;
    let mut top = 0.0;
    for i in 0..m {
        let e = (lhs[i] - lambda * w[i] * vals[i]) / w[i];
        let k = ga[i] / w[i];
        err += w[i] * e * e;
        top += w[i] * k * k;
    }
    Ok(ElResidual { residual: (err / top).sqrt(), lambda })
}
