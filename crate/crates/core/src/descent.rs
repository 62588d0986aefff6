//! Projected H^1 gradient descent on nodal values.
//!
//! The descent direction is the Riesz representative of the Euclidean
//! gradient in the discrete H^1 inner product `(L + W)`, projected onto the
//! tangent space of the mass sphere (when a mass is prescribed) and made
//! H^1-orthogonal to the dilation generator (when a gauge radius is set).
//! Trial points are pushed back onto the admissible cone and retracted onto
//! the constraint before the objective is evaluated.

use std::sync::Arc;

use crate::radial::{
    dilate, dilation_generator, project_admissible, H1Operator, RadialFunction, RadialGrid,
};

/// Relative drift of the half-mass radius that triggers a gauge reset.
const GAUGE_SLACK: f64 = 0.02;
const STEP_GROWTH: f64 = 1.5;
const STEP_MAX: f64 = 1e8;

pub(crate) trait Objective {
    /// `None` marks an infeasible point.
    fn value(&self, u: &[f64]) -> Option<f64>;
    fn gradient(&self, u: &[f64]) -> Vec<f64>;
    /// Extra retraction applied after the mass projection.
    fn retract(&self, _u: &mut [f64]) -> bool {
        true
    }
    /// Whether the step length may grow after an accepted step.
    fn allow_growth(&self, _u: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DescentOptions {
    pub max_iter: usize,
    pub window: usize,
    pub rel_tol: f64,
    /// Stationarity `<g, d> / |f|` accepted as converged when steps stall.
    pub stall_tol: f64,
    pub mass: Option<f64>,
    pub gauge_radius: Option<f64>,
    pub admissible: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub values: Vec<f64>,
    pub history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// History index after the last gauge reset.
    pub last_reset: usize,
    pub stationarity: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) struct Descent {
    grid: Arc<RadialGrid>,
    h1: H1Operator,
    opts: DescentOptions,
}

impl Descent {
    pub fn new(grid: Arc<RadialGrid>, opts: DescentOptions) -> Self {
        let h1 = H1Operator::new(&grid);
        Self { grid, h1, opts }
    }

    fn mass_project(&self, u: &mut [f64]) -> bool {
        if let Some(a) = self.opts.mass {
            let m = crate::radial::power_integral(&self.grid, u, 2.0);
            if !(m > 0.0) {
                return false;
            }
            let c = (a / m).sqrt();
            u.iter_mut().for_each(|v| *v *= c);
        }
        true
    }

    /// Cone projection, mass projection and objective retraction.
    fn land(&self, obj: &dyn Objective, u: &mut Vec<f64>) -> bool {
        if self.opts.admissible {
            *u = project_admissible(&self.grid, u);
        } else {
            let m = self.grid.intervals();
            u[m] = 0.0;
        }
        self.mass_project(u) && obj.retract(u)
    }

    fn direction(&self, u: &[f64], g: &[f64]) -> Vec<f64> {
        let w = self.grid.weights();
        let mut d = self.h1.solve(g);
        let wu: Vec<f64> = u.iter().zip(w).map(|(a, b)| a * b).collect();
        let gm = if self.opts.mass.is_some() { Some(self.h1.solve(&wu)) } else { None };
        if let Some(gm) = &gm {
            let c = dot(&wu, &d) / dot(&wu, gm);
            d.iter_mut().zip(gm).for_each(|(x, y)| *x -= c * y);
        }
        if self.opts.gauge_radius.is_some() {
            let mut gen = dilation_generator(&self.grid, u);
            if let Some(gm) = &gm {
                let c = dot(&wu, &gen) / dot(&wu, gm);
                gen.iter_mut().zip(gm).for_each(|(x, y)| *x -= c * y);
            }
            let hg = self.h1.apply(&gen);
            let nrm = dot(&hg, &gen);
            if nrm > 0.0 {
                let c = dot(&hg, &d) / nrm;
                d.iter_mut().zip(&gen).for_each(|(x, y)| *x -= c * y);
            }
        }
        d
    }

    fn regauge(&self, obj: &dyn Objective, u: &[f64], f: f64) -> Option<(Vec<f64>, f64)> {
        let target = self.opts.gauge_radius?;
        let func = RadialFunction::from_raw(self.grid.clone(), u.to_vec());
        let r = func.half_mass_radius();
        if !(r > 0.0) || ((r / target) - 1.0).abs() <= GAUGE_SLACK {
            return None;
        }
        let moved = dilate(&func, r / target).ok()?;
        let mut v = moved.into_values();
        if !self.land(obj, &mut v) {
            return None;
        }
        let fv = obj.value(&v)?;
        // resets may raise the objective by at most 1e-6 relative
        if fv > f + 1e-6 * f.abs().max(1e-12) {
            return None;
        }
        Some((v, fv))
    }

    pub fn run(&self, obj: &dyn Objective, start: Vec<f64>) -> Option<Outcome> {
        let mut u = start;
        if !self.land(obj, &mut u) {
            return None;
        }
        let mut f = obj.value(&u)?;
        let mut history = vec![f];
        let mut tau = 1.0;
        let mut last_reset = 0;
        let mut converged = false;
        let mut stationarity = f64::INFINITY;
        let mut iterations = 0;
        while iterations < self.opts.max_iter {
            iterations += 1;
            if let Some((v, fv)) = self.regauge(obj, &u, f) {
                u = v;
                f = fv;
                history.push(f);
                last_reset = history.len() - 1;
            }
            let g = obj.gradient(&u);
            let d = self.direction(&u, &g);
            let slope = dot(&g, &d);
            stationarity = slope.abs() / f.abs().max(1e-300);
            let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !(slope > 0.0) || dmax == 0.0 {
                converged = stationarity <= self.opts.stall_tol;
                break;
            }
            let mut accepted = None;
            loop {
                if tau * dmax < 1e-15 * umax {
                    break;
                }
                let mut cand: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - tau * b).collect();
                if self.land(obj, &mut cand) {
                    if let Some(fc) = obj.value(&cand) {
                        if fc < f {
                            accepted = Some((cand, fc));
                            break;
                        }
                    }
                }
                tau *= 0.5;
            }
            let Some((cand, fc)) = accepted else {
                converged = stationarity <= self.opts.stall_tol;
                break;
            };
            u = cand;
            f = fc;
            history.push(f);
            if obj.allow_growth(&u) {
                tau = (tau * STEP_GROWTH).min(STEP_MAX);
            }
            let k = history.len() - 1;
            let w = self.opts.window;
            if k >= last_reset + w {
                let old = history[k - w];
                if (old - f).abs() <= self.opts.rel_tol * f.abs().max(1e-300) {
                    converged = true;
                    break;
                }
            }
        }
        Some(Outcome { values: u, history, converged, iterations, last_reset, stationarity })
    }
}
