//! Ground states, mountain-pass solutions and the dual scalar-field branch.
//!
//! Normalized solutions are found by minimizing the fibered energy
//! `J(u) = Psi((u)_{t(u)})` over the admissible mass sphere, where `t(u)` is
//! the lower (ground state) or upper (mountain pass) critical point of the
//! fiber.  By the envelope theorem
//! `grad J = t^2/2 grad A - mu t^{x}/q grad B - t^{y}/p grad P`.
//! `J` is dilation invariant, so the descent carries a gauge and the result
//! is reported as the exact dilation `(u)_t` on the grid `[0, R/t]`.
//!
//! The dual branch solves `-Lap v + v = t v^{q-1} + v^{2*-1}` by descent on
//! the Nehari manifold of its action.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constants::{sobolev_constant, talenti_bubble};
use crate::descent::{Descent, DescentOptions, Objective};
use crate::error::{param, Error, Result};
use crate::extremal::{default_gauge, gaussian_start, transfer};
use crate::fibering::{branch_point, mu_threshold, Branch};
use crate::functionals::{
    classify, critical_exponent, energy, gamma, ManifoldClass, ManifoldKind, Params,
};
use crate::radial::{
    dirichlet_energy, grad2_gradient, norms, power_gradient, power_integral, NormProfile,
    RadialFunction, RadialGrid,
};

/// Relative distance to `mu_p(u)` below which the iterate counts as having
/// reached the degenerate set.
const DEGENERATE_GAP: f64 = 1e-3;
/// `|D| / scale` below which step growth is frozen.
const GROWTH_FREEZE: f64 = 0.05;
/// Relative Pohozaev defect above which a scalar-field point is rejected.
const DUAL_POHOZAEV_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Relative energy change over `window` iterations that stops descent.
    pub energy_tol: f64,
    pub window: usize,
    /// Accepted relative Pohozaev residual of the reported solution.
    pub pohozaev_tol: f64,
    /// Stationarity accepted when the line search can no longer decrease.
    pub stall_tol: f64,
    pub gauge_radius: Option<f64>,
    pub initial: Option<RadialFunction>,
    /// When set, couplings above it are rejected as infeasible.
    pub mu_star_estimate: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            energy_tol: 1e-10,
            window: 100,
            pohozaev_tol: 1e-6,
            stall_tol: 1e-6,
            gauge_radius: None,
            initial: None,
            mu_star_estimate: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionBranch {
    Ground,
    MountainPass,
}

impl SolutionBranch {
    fn fiber(self) -> Branch {
        match self {
            SolutionBranch::Ground => Branch::Plus,
            SolutionBranch::MountainPass => Branch::Minus,
        }
    }

    fn expected(self) -> ManifoldKind {
        match self {
            SolutionBranch::Ground => ManifoldKind::Plus,
            SolutionBranch::MountainPass => ManifoldKind::Minus,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub params: Params,
    pub branch: SolutionBranch,
    pub u: RadialFunction,
    pub norms: NormProfile,
    pub energy: f64,
    /// `lambda a = A - mu B - P`.
    pub lambda: f64,
    /// `lambda a = mu (g_q - 1) B + (g_p - 1) P`, valid on the Pohozaev set.
    pub lambda_identity: f64,
    pub manifold: ManifoldClass,
    /// Relative Pohozaev residual `|G| / (A + mu B + P)`.
    pub pohozaev: f64,
    /// Weighted L^2 residual of the Euler-Lagrange equation relative to
    /// `-Lap u`.
    pub pde_residual: f64,
    /// Fiber scale that moved the descent iterate onto the Pohozaev set.
    pub fiber_scale: f64,
    /// Distance `mu_p(u) / mu - 1` of the solution to the degenerate set.
    pub threshold_gap: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `<g, d> / |J|` at the final iterate.
    pub stationarity: f64,
    pub history: Vec<f64>,
}

struct Reduced<'a> {
    grid: &'a RadialGrid,
    params: Params,
    branch: Branch,
}

impl Reduced<'_> {
    fn profile(&self, u: &[f64]) -> NormProfile {
        let b = power_integral(self.grid, u, self.params.q);
        let c = power_integral(self.grid, u, self.params.p);
        NormProfile::from_triple(self.params.mass, dirichlet_energy(self.grid, u), b, c)
    }

    fn point(&self, u: &[f64]) -> Option<(NormProfile, f64)> {
        let np = self.profile(u);
        let t = branch_point(&np, &self.params, self.branch).ok()??;
        Some((np, t))
    }
}

impl Objective for Reduced<'_> {
    fn value(&self, u: &[f64]) -> Option<f64> {
        let (np, t) = self.point(u)?;
        crate::functionals::fibering(&np, &self.params, t).ok().map(|f| f.phi)
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let (_, t) = self.point(u).expect("gradient requested at an infeasible point");
        let pr = &self.params;
        let ca = 0.5 * t * t;
        let cb = pr.mu * t.powf(pr.q_gamma()) / pr.q;
        let cc = t.powf(pr.p_gamma()) / pr.p;
        let ga = grad2_gradient(self.grid, u);
        let gb = power_gradient(self.grid, u, pr.q);
        let gc = power_gradient(self.grid, u, pr.p);
        (0..u.len()).map(|i| ca * ga[i] - cb * gb[i] - cc * gc[i]).collect()
    }

    fn allow_growth(&self, u: &[f64]) -> bool {
        let Some((np, t)) = self.point(u) else { return false };
        let pr = &self.params;
        let (x, y) = (pr.q_gamma(), pr.p_gamma());
        let (a, b, c) = (t * t * np.grad2, t.powf(x) * np.massq, t.powf(y) * np.massp);
        let d = 2.0 * a - pr.mu * x * pr.gamma_q() * b - y * pr.gamma_p() * c;
        d.abs() >= GROWTH_FREEZE * (a + pr.mu * b + c)
    }
}

/// The fibered energy `J(u) = Psi((u)_{t(u)})` and its gradient, or `None`
/// when the fiber of `u` has no critical point on the branch.
pub fn reduced_energy(u: &RadialFunction, params: &Params, branch: SolutionBranch) -> Option<(f64, Vec<f64>)> {
    let obj = Reduced { grid: u.grid(), params: *params, branch: branch.fiber() };
    let v = obj.value(u.values())?;
    Some((v, obj.gradient(u.values())))
}

fn check_grid(params: &Params, grid: &RadialGrid) -> Result<()> {
    params.validate()?;
    if grid.dim() != params.dim {
        return Err(param("grid dimension differs from the problem dimension"));
    }
    if !(params.mu > 0.0) {
        return Err(param("the coupling mu must be positive"));
    }
    Ok(())
}

fn start_values(grid: &Arc<RadialGrid>, mass: f64, gauge: f64, initial: &Option<RadialFunction>) -> Result<Vec<f64>> {
    match initial {
        Some(u) => Ok(transfer(u, grid, gauge)?.into_values()),
        None => Ok(gaussian_start(grid, mass, gauge)?.into_values()),
    }
}

fn solve_branch(params: &Params, grid: &Arc<RadialGrid>, branch: SolutionBranch, opts: &SolveOptions) -> Result<SolveResult> {
    check_grid(params, grid)?;
    if let Some(est) = opts.mu_star_estimate {
        if params.mu > est {
            return Err(Error::InfeasibleBranch(format!(
                "mu = {} exceeds the extremal estimate {est}",
                params.mu
            )));
        }
    }
    let gauge = opts.gauge_radius.unwrap_or_else(|| default_gauge(grid));
    let start = start_values(grid, params.mass, gauge, &opts.initial)?;
    let obj = Reduced { grid, params: *params, branch: branch.fiber() };
    let descent = Descent::new(
        grid.clone(),
        DescentOptions {
            max_iter: opts.max_iter,
            window: opts.window,
            rel_tol: opts.energy_tol,
            stall_tol: opts.stall_tol,
            mass: Some(params.mass),
            gauge_radius: Some(gauge),
            admissible: true,
        },
    );
    let out = descent.run(&obj, start).ok_or_else(|| {
        Error::InfeasibleBranch(format!(
            "the initial profile has no critical fiber point at mu = {}",
            params.mu
        ))
    })?;
    let iterate = RadialFunction::from_raw(grid.clone(), out.values);
    let (np0, t) = obj
        .point(iterate.values())
        .ok_or_else(|| Error::InfeasibleBranch("descent left the feasible set".into()))?;
    let threshold_gap = mu_threshold(&np0, params)? / params.mu - 1.0;
    if threshold_gap < DEGENERATE_GAP {
        return Err(Error::InfeasibleBranch(format!(
            "descent reached the degenerate set (mu_p(u)/mu - 1 = {threshold_gap:.3e})"
        )));
    }
    let u = iterate.rescaled(t)?;
    let np = norms(&u, params.q, params.p)?;
    let manifold = classify(&np, params, opts.pohozaev_tol);
    let a = np.mass2;
    let (b, c) = (np.massq, params.upper(&np));
    let lambda = (np.grad2 - params.mu * b - c) / a;
    let lambda_identity = (params.mu * (params.gamma_q() - 1.0) * b + (params.gamma_p() - 1.0) * c) / a;
    let pde_residual = strong_residual(&u, params, lambda);
    let converged = out.converged && manifold.residual <= opts.pohozaev_tol && manifold.kind == branch.expected();
    Ok(SolveResult {
        params: *params,
        branch,
        energy: energy(&np, params),
        norms: np,
        lambda,
        lambda_identity,
        pohozaev: manifold.residual,
        manifold,
        pde_residual,
        fiber_scale: t,
        threshold_gap,
        converged,
        iterations: out.iterations,
        stationarity: out.stationarity,
        history: out.history,
        u,
    })
}

/// `|| (-Lap u - lambda u - mu u^{q-1} - u^{p-1}) ||_w / || -Lap u ||_w` with
/// `-Lap u` taken as half the energy gradient divided by the weights.
fn strong_residual(u: &RadialFunction, params: &Params, lambda: f64) -> f64 {
    let g = u.grid();
    let v = u.values();
    let w = g.weights();
    let ga = grad2_gradient(g, v);
    let (mut err, mut top) = (0.0, 0.0);
    for i in 0..g.intervals() {
        let lap = 0.5 * ga[i] / w[i];
        let x = v[i];
        let e = lap - lambda * x - params.mu * x.powf(params.q - 1.0) - x.powf(params.p - 1.0);
        err += w[i] * e * e;
        top += w[i] * lap * lap;
    }
    (err / top).sqrt()
}

/// Minimizes `Psi` over `P+` (the ground state).
pub fn solve_ground(params: &Params, grid: &Arc<RadialGrid>, opts: &SolveOptions) -> Result<SolveResult> {
    solve_branch(params, grid, SolutionBranch::Ground, opts)
}

/// Minimizes `Psi` over `P-` for `p < 2*`.
pub fn solve_mp_subcritical(params: &Params, grid: &Arc<RadialGrid>, opts: &SolveOptions) -> Result<SolveResult> {
    if params.is_critical() {
        return Err(param("the subcritical mountain pass needs p < 2*"));
    }
    solve_branch(params, grid, SolutionBranch::MountainPass, opts)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainStep {
    pub p: f64,
    pub energy: Option<f64>,
    pub lambda: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalSolve {
    pub result: SolveResult,
    pub chain: Vec<ChainStep>,
    pub ground_energy: f64,
    /// `m+ + S^{N/2}/N`, the level below which compactness holds.
    pub compactness_level: f64,
    pub compactness_warning: bool,
}

/// Mountain pass at `p = 2*` reached through `p_n -> 2*` with warm starts.
///
/// The final step descends the critical functional from the last
/// subcritical solution.  A ground state is computed at the same parameters
/// to report the compactness level.
pub fn continue_to_critical(
    params: &Params,
    grid: &Arc<RadialGrid>,
    p_seq: &[f64],
    opts: &SolveOptions,
) -> Result<CriticalSolve> {
    check_grid(params, grid)?;
    if !params.is_critical() {
        return Err(param("continuation targets p = 2*"));
    }
    if p_seq.windows(2).any(|w| w[1] <= w[0]) || p_seq.iter().any(|&p| p >= params.p) {
        return Err(param("p sequence must increase strictly below 2*"));
    }
    let mut warm = opts.initial.clone();
    let mut chain = Vec::with_capacity(p_seq.len());
    for &p in p_seq {
        let sub = params.with_p(p)?;
        let step_opts = SolveOptions { initial: warm.clone(), mu_star_estimate: None, ..opts.clone() };
        match solve_mp_subcritical(&sub, grid, &step_opts) {
            Ok(r) => {
                chain.push(ChainStep {
                    p,
                    energy: Some(r.energy),
                    lambda: Some(r.lambda),
                    converged: r.converged,
                    error: None,
                });
                warm = Some(r.u);
            }
            Err(e) => chain.push(ChainStep { p, energy: None, lambda: None, converged: false, error: Some(e.to_string()) }),
        }
    }
    let final_opts = SolveOptions { initial: warm, ..opts.clone() };
    let result = solve_branch(params, grid, SolutionBranch::MountainPass, &final_opts)?;
    let ground = solve_ground(params, grid, &SolveOptions { initial: None, ..opts.clone() })?;
    let n = params.dim as f64;
    let compactness_level = ground.energy + sobolev_constant(params.dim)?.powf(0.5 * n) / n;
    let compactness_warning = result.energy >= compactness_level - 1e-8 * compactness_level.abs();
    if compactness_warning {
        log::warn!(
            "mountain-pass energy {} reached the compactness level {}",
            result.energy,
            compactness_level
        );
    }
    Ok(CriticalSolve { result, chain, ground_energy: ground.energy, compactness_level, compactness_warning })
}

/// Upper bound for `m-` from the bubble family `u+ + s W_eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapWitness {
    pub eps: f64,
    /// `sup_s Psi` over the normalized family.
    pub sup_energy: f64,
    pub argmax: f64,
    /// `m+ + S^{N/2}/N`.
    pub level: f64,
}

/// Evaluates `sup_s Psi(Wbar_{eps,s})` where `What = u+ + s W_eps` and
/// `Wbar = r^{(N-2)/2} What(r x)` with `r = |What|_2 / sqrt(a)`.
///
/// `u+` is resampled onto a grid of `intervals` cells over its own radius,
/// which must resolve the bubble width.
pub fn gap_witness(ground: &SolveResult, eps: f64, intervals: usize) -> Result<GapWitness> {
    let params = &ground.params;
    if !params.is_critical() {
        return Err(param("the bubble witness is posed at p = 2*"));
    }
    let old = ground.u.grid();
    let fine = Arc::new(RadialGrid::new(old.dim(), old.radius(), intervals)?);
    let base = RadialFunction::from_fn(fine.clone(), |r| ground.u.eval(r))?;
    let bubble = talenti_bubble(eps, &fine, fine.radius())?;
    let n = params.dim as f64;
    let kq = params.q * (n - 2.0) / 2.0 - n;
    let psi = |s: f64| -> f64 {
        let vals: Vec<f64> = base.values().iter().zip(bubble.values()).map(|(u, w)| u + s * w).collect();
        let a = dirichlet_energy(&fine, &vals);
        let m = power_integral(&fine, &vals, 2.0);
        let b = power_integral(&fine, &vals, params.q);
        let c = power_integral(&fine, &vals, params.p);
        let r = (m / params.mass).sqrt();
        0.5 * a - params.mu * r.powf(kq) * b / params.q - c / params.p
    };
    let mut best = (0.0, psi(0.0));
    let mut s = 0.0;
    let ds = 0.05;
    let mut last = best.1;
    let mut falling = 0;
    while s < 100.0 {
        s += ds;
        let v = psi(s);
        if v > best.1 {
            best = (s, v);
        }
        falling = if v < last { falling + 1 } else { 0 };
        last = v;
        if falling > 20 && v < best.1 - 1.0 {
            break;
        }
    }
    let (mut lo, mut hi) = ((best.0 - ds).max(0.0), best.0 + ds);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if psi(m1) < psi(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let arg = 0.5 * (lo + hi);
    let sup = psi(arg).max(best.1);
    let level = ground.energy + sobolev_constant(params.dim)?.powf(0.5 * n) / n;
    Ok(GapWitness { eps, sup_energy: sup, argmax: arg, level })
}

#[derive(Debug, Clone)]
pub struct ScalarFieldOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub window: usize,
    pub stall_tol: f64,
    pub initial: Option<RadialFunction>,
}

impl Default for ScalarFieldOptions {
    fn default() -> Self {
        Self { max_iter: 20_000, tol: 1e-11, window: 50, stall_tol: 1e-7, initial: None }
    }
}

/// Positive radial solution of `-Lap v + v = t v^{q-1} + v^{2*-1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarField {
    pub t: f64,
    pub v: RadialFunction,
    /// `|v|_q^q`.
    pub v_norm_q: f64,
    pub action: f64,
    /// `|V - (1 - g_q) t B| / V` with `V = |v|_2^2`; vanishes for exact
    /// solutions by the Pohozaev and Nehari identities.
    pub pohozaev_defect: f64,
    pub residual: f64,
    pub converged: bool,
}

impl ScalarField {
    /// Converged and passing the Pohozaev audit.
    pub fn is_valid(&self) -> bool {
        self.converged && self.v_norm_q > 0.0 && self.pohozaev_defect <= DUAL_POHOZAEV_TOL
    }
}

struct Nehari<'a> {
    grid: &'a RadialGrid,
    q: f64,
    crit: f64,
    t: f64,
}

impl Nehari<'_> {
    fn parts(&self, v: &[f64]) -> (f64, f64, f64) {
        let k = dirichlet_energy(self.grid, v) + power_integral(self.grid, v, 2.0);
        (k, power_integral(self.grid, v, self.q), power_integral(self.grid, v, self.crit))
    }

    /// Amplitude `s` with `K = t s^{q-2} B + s^{2*-2} C`.
    fn scale(&self, k: f64, b: f64, c: f64) -> Option<f64> {
        if !(k > 0.0 && (b > 0.0 || c > 0.0)) {
            return None;
        }
        let f = |s: f64| self.t * s.powf(self.q - 2.0) * b + s.powf(self.crit - 2.0) * c - k;
        let (mut lo, mut hi) = (1.0, 1.0);
        while f(lo) > 0.0 {
            lo *= 0.5;
        }
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }

    fn action(&self, k: f64, b: f64, c: f64) -> f64 {
        0.5 * k - self.t * b / self.q - c / self.crit
    }
}

impl Objective for Nehari<'_> {
    fn value(&self, v: &[f64]) -> Option<f64> {
        let (k, b, c) = self.parts(v);
        let s = self.scale(k, b, c)?;
        Some(self.action(s * s * k, s.powf(self.q) * b, s.powf(self.crit) * c))
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let ga = grad2_gradient(self.grid, v);
        let gb = power_gradient(self.grid, v, self.q);
        let gc = power_gradient(self.grid, v, self.crit);
        let w = self.grid.weights();
        (0..v.len())
            .map(|i| 0.5 * ga[i] + w[i] * v[i] - self.t * gb[i] / self.q - gc[i] / self.crit)
            .collect()
    }

    fn retract(&self, v: &mut [f64]) -> bool {
        let (k, b, c) = self.parts(v);
        match self.scale(k, b, c) {
            Some(s) => {
                v.iter_mut().for_each(|x| *x *= s);
                true
            }
            None => false,
        }
    }
}

/// Solves the scalar-field equation at coupling `t` by Nehari descent.
pub fn scalar_field_solve(dim: usize, q: f64, t: f64, grid: &Arc<RadialGrid>, opts: &ScalarFieldOptions) -> Result<ScalarField> {
    let crit = critical_exponent(dim)?;
    if !(q > 2.0 && q < crit) {
        return Err(param(format!("need 2 < q < {crit}, got {q}")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(param(format!("coupling t must be positive, got {t}")));
    }
    if grid.dim() != dim {
        return Err(param("grid dimension differs from the problem dimension"));
    }
    let start = match &opts.initial {
        Some(u) if **u.grid() == **grid => u.values().to_vec(),
        Some(u) => RadialFunction::from_fn(grid.clone(), |r| u.eval(r))?.into_values(),
        None => RadialFunction::from_fn(grid.clone(), |r| (-0.5 * r * r).exp())?.into_values(),
    };
    let obj = Nehari { grid, q, crit, t };
    let descent = Descent::new(
        grid.clone(),
        DescentOptions {
            max_iter: opts.max_iter,
            window: opts.window,
            rel_tol: opts.tol,
            stall_tol: opts.stall_tol,
            mass: None,
            gauge_radius: None,
            admissible: true,
        },
    );
    let out = descent
        .run(&obj, start)
        .ok_or_else(|| Error::DegenerateInput("initial profile has no Nehari point".into()))?;
    let v = RadialFunction::from_raw(grid.clone(), out.values);
    let vals = v.values();
    let (k, b, c) = obj.parts(vals);
    let mass = v.mass2();
    let g = gamma(dim, q);
    let pohozaev_defect = (mass - (1.0 - g) * t * b).abs() / mass;
    let ga = grad2_gradient(grid, vals);
    let w = grid.weights();
    let (mut err, mut top) = (0.0, 0.0);
    for i in 0..grid.intervals() {
        let lap = 0.5 * ga[i] / w[i];
        let x = vals[i];
        let e = lap + x - t * x.powf(q - 1.0) - x.powf(crit - 1.0);
        err += w[i] * e * e;
        top += w[i] * lap * lap;
    }
    Ok(ScalarField {
        t,
        action: obj.action(k, b, c),
        v_norm_q: b,
        pohozaev_defect,
        residual: (err / top).sqrt(),
        converged: out.converged,
        v,
    })
}

/// Solutions along `t_grid`, computed from the largest `t` downward with
/// warm starts from the last valid point.
pub fn scalar_field_family(
    dim: usize,
    q: f64,
    t_grid: &[f64],
    grid: &Arc<RadialGrid>,
    opts: &ScalarFieldOptions,
) -> Result<Vec<ScalarField>> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] <= 0.0 {
        return Err(param("t grid must be positive and strictly increasing"));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    let mut warm = opts.initial.clone();
    for &t in t_grid.iter().rev() {
        let sf = scalar_field_solve(dim, q, t, grid, &ScalarFieldOptions { initial: warm.clone(), ..opts.clone() })?;
        if sf.is_valid() {
            warm = Some(sf.v.clone());
        }
        out.push(sf);
    }
    out.reverse();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualBranchPoint {
    pub t: f64,
    pub v_norm_q: f64,
    /// `t^{2/(q g_q - q) - 1} - (1 - g_q) |v_t|_q^q / (a mu^{2/(q - q g_q)})`.
    pub h: f64,
    /// Coupling at which this `t` is a zero of `h`.
    pub mu_at_zero: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualBranchScan {
    pub dim: usize,
    pub q: f64,
    pub mass: f64,
    pub mu: f64,
    pub points: Vec<DualBranchPoint>,
    /// Adjacent valid `t` values between which `h` changes sign.
    pub brackets: Vec<(f64, f64)>,
    pub zeros: usize,
    /// Largest coupling with a zero on the scanned range.
    pub crossover_mu: Option<f64>,
    pub crossover_bracket: Option<(f64, f64)>,
}

/// Evaluates `h` on a computed family.
pub fn dual_branch_points(family: &[ScalarField], dim: usize, q: f64, mass: f64, mu: f64) -> Result<DualBranchScan> {
    if !(mass > 0.0 && mu > 0.0) {
        return Err(param("mass and mu must be positive"));
    }
    let g = gamma(dim, q);
    let x = q * g;
    let e = 2.0 / (x - q) - 1.0;
    let coef = (1.0 - g) / (mass * mu.powf(2.0 / (q - x)));
    let points: Vec<DualBranchPoint> = family
        .iter()
        .map(|sf| {
            let b = sf.v_norm_q;
            DualBranchPoint {
                t: sf.t,
                v_norm_q: b,
                h: sf.t.powf(e) - coef * b,
                mu_at_zero: ((1.0 - g) * b * sf.t.powf(-e) / mass).powf(0.5 * (q - x)),
                valid: sf.is_valid(),
            }
        })
        .collect();
    let valid: Vec<&DualBranchPoint> = points.iter().filter(|p| p.valid).collect();
    if valid.is_empty() {
        return Err(Error::Convergence("no scalar-field point passed the audit".into()));
    }
    let brackets: Vec<(f64, f64)> = valid
        .windows(2)
        .filter(|w| (w[0].h > 0.0) != (w[1].h > 0.0))
        .map(|w| (w[0].t, w[1].t))
        .collect();
    let (imax, top) = valid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.mu_at_zero.total_cmp(&b.1.mu_at_zero))
        .map(|(i, p)| (i, p.mu_at_zero))
        .expect("nonempty");
    let lo = valid[imax.saturating_sub(1)].t;
    let hi = valid[(imax + 1).min(valid.len() - 1)].t;
    Ok(DualBranchScan {
        dim,
        q,
        mass,
        mu,
        zeros: brackets.len(),
        brackets,
        points,
        crossover_mu: Some(top),
        crossover_bracket: Some((lo, hi)),
    })
}

/// Solves the scalar-field family on `t_grid` and scans `h` for zeros.
pub fn dual_branch_scan(
    dim: usize,
    q: f64,
    mass: f64,
    mu: f64,
    t_grid: &[f64],
    grid: &Arc<RadialGrid>,
    opts: &ScalarFieldOptions,
) -> Result<DualBranchScan> {
    let family = scalar_field_family(dim, q, t_grid, grid, opts)?;
    dual_branch_points(&family, dim, q, mass, mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::project_mass;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ground_params(mu: f64) -> Params {
        Params::critical(3, 8.0 / 3.0, 1.0, mu).unwrap()
    }

    #[test]
    fn reduced_gradient_matches_central_differences() {
        let grid = Arc::new(RadialGrid::new(3, 20.0, 400).unwrap());
        let params = ground_params(5.0);
        let u = gaussian_start(&grid, 1.0, 1.0).unwrap();
        let (_, g) = reduced_energy(&u, &params, SolutionBranch::Ground).unwrap();
        let w = grid.weights();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let (c1, c2, s1, s2): (f64, f64, f64, f64) =
                (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
            let mut phi: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&r| c1 * (-r * r / (s1 * s1)).exp() + c2 * r * (-r * r / (s2 * s2)).exp())
                .collect();
            *phi.last_mut().unwrap() = 0.0;
            let vals = u.values();
            let k = (0..phi.len()).map(|i| w[i] * vals[i] * phi[i]).sum::<f64>()
                / (0..phi.len()).map(|i| w[i] * vals[i] * vals[i]).sum::<f64>();
            phi.iter_mut().zip(vals).for_each(|(p, v)| *p -= k * v);
            let h = 1e-5;
            let at = |s: f64| {
                let v: Vec<f64> = vals.iter().zip(&phi).map(|(a, b)| a + s * b).collect();
                let f = RadialFunction::from_raw(grid.clone(), v);
                reduced_energy(&f, &params, SolutionBranch::Ground).unwrap().0
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let an: f64 = g.iter().zip(&phi).map(|(a, b)| a * b).sum();
            assert!((fd - an).abs() <= 1e-3 * an.abs(), "fd {fd} vs analytic {an}");
        }
    }

    /// Nelder-Mead on a smooth six-parameter ansatz family.
    fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], iters: usize) -> (Vec<f64>, f64) {
        let n = x0.len();
        let mut simplex: Vec<(Vec<f64>, f64)> = (0..=n)
            .map(|i| {
                let mut x = x0.to_vec();
                if i > 0 {
                    x[i - 1] += 0.3;
                }
                let v = f(&x);
                (x, v)
            })
            .collect();
        for _ in 0..iters {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64).collect();
            let along = |c: f64| -> Vec<f64> {
                (0..n).map(|j| centroid[j] + c * (simplex[n].0[j] - centroid[j])).collect()
            };
            let xr = along(-1.0);
            let fr = f(&xr);
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = f(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                if fc < simplex[n].1 {
                    simplex[n] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for p in simplex.iter_mut().skip(1) {
                        p.0 = p.0.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect();
                        p.1 = f(&p.0);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        simplex.swap_remove(0)
    }

    #[test]
    fn brute_force_ansatz_search_approaches_ground_energy() {
        let grid = Arc::new(RadialGrid::new(3, 10.0, 64).unwrap());
        let params = ground_params(8.0);
        let opts = SolveOptions { gauge_radius: Some(1.5), ..SolveOptions::default() };
        let solved = solve_ground(&params, &grid, &opts).unwrap();
        let energy = |x: &[f64]| -> f64 {
            let (a1, a2, a3) = (x[0].exp(), x[1].exp(), x[2].exp());
            let (b2, b3, k) = (x[3], x[4], x[5].exp());
            let r0 = grid.radius();
            let Ok(f) = RadialFunction::from_fn(grid.clone(), |r| {
                let cut = 1.0 - (r / r0).powi(2);
                cut * ((-a1 * r * r).exp() + b2 * (-a2 * r * r).exp() + b3 * (1.0 + a3 * r * r).powf(-k))
            }) else {
                return f64::INFINITY;
            };
            // same dilation gauge as the solver: J is only discretely scale invariant
            let Ok(f) = transfer(&f, &grid, 1.5).and_then(|f| project_mass(&f, 1.0)) else {
                return f64::INFINITY;
            };
            reduced_energy(&f, &params, SolutionBranch::Ground).map_or(f64::INFINITY, |v| v.0)
        };
        let (_, best) = nelder_mead(&energy, &[-0.5, -2.0, 0.0, 0.2, 0.2, 0.0], 3000);
        assert!(best >= solved.energy - 1e-9 * solved.energy.abs());
        assert!((best - solved.energy).abs() <= 0.05 * solved.energy.abs(), "{best} vs {}", solved.energy);
    }

    #[test]
    fn ground_state_identities() {
        let grid = Arc::new(RadialGrid::new(3, 40.0, 2000).unwrap());
        let r = solve_ground(&ground_params(8.0), &grid, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.energy < 0.0 && r.lambda < 0.0);
        assert_eq!(r.manifold.kind, ManifoldKind::Plus);
        assert!((r.norms.mass2 - 1.0).abs() < 1e-10);
        assert!((r.lambda - r.lambda_identity).abs() <= 1e-6 * r.lambda.abs());
    }

    #[test]
    fn coupling_above_estimate_is_infeasible() {
        let grid = Arc::new(RadialGrid::new(3, 40.0, 1000).unwrap());
        let opts = SolveOptions { mu_star_estimate: Some(10.0), ..SolveOptions::default() };
        let err = solve_ground(&ground_params(12.0), &grid, &opts).unwrap_err();
        assert!(matches!(err, Error::InfeasibleBranch(_)));
    }

    #[test]
    fn scalar_field_audit() {
        let grid = Arc::new(RadialGrid::new(3, 30.0, 12_000).unwrap());
        let s = scalar_field_solve(3, 8.0 / 3.0, 5.0, &grid, &ScalarFieldOptions::default()).unwrap();
        assert!(s.converged && s.is_valid());
        assert!(s.residual < 1e-6, "residual {}", s.residual);
        assert!(s.pohozaev_defect < 1e-6, "defect {}", s.pohozaev_defect);
        assert!(s.v_norm_q > 0.0);
    }

    #[test]
    fn dual_h_increases_with_mu() {
        let grid = Arc::new(RadialGrid::new(3, 30.0, 3000).unwrap());
        let fam = scalar_field_family(3, 8.0 / 3.0, &[3.0, 5.0, 8.0], &grid, &ScalarFieldOptions::default()).unwrap();
        let lo = dual_branch_points(&fam, 3, 8.0 / 3.0, 1.0, 5.0).unwrap();
        let hi = dual_branch_points(&fam, 3, 8.0 / 3.0, 1.0, 10.0).unwrap();
        for (a, b) in lo.points.iter().zip(&hi.points) {
            // the coefficient of |v_t|_q^q decays like mu^{-2/(q - q g_q)}
            assert!(b.h > a.h);
            assert!(a.h.is_finite());
        }
    }

    #[test]
    fn scalar_field_rejects_bad_coupling() {
        let grid = Arc::new(RadialGrid::new(3, 10.0, 100).unwrap());
        assert!(scalar_field_solve(3, 8.0 / 3.0, 0.0, &grid, &ScalarFieldOptions::default()).is_err());
        assert!(scalar_field_family(3, 8.0 / 3.0, &[2.0, 1.0], &grid, &ScalarFieldOptions::default()).is_err());
    }
}
