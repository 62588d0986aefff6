//! Numerical checklist of the inequalities and identities behind the
//! existence theory, at one `(N, q, a)`.
//!
//! Each [`Check`] compares a left and a right value.  Strict checks pass iff
//! `margin = right - left > 0`; identities pass iff `|left - right| <= tol`.
//! A failing or erroring check never aborts the run.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{
    alpha_threshold, c1_chain_bound, exponent_gain_ratio, gn_constant, sobolev_constant,
};
use crate::error::{param, Result};
use crate::extremal::{minimize_mu, ExtremalOptions};
use crate::fibering::{fiber_sensitivity, Branch};
use crate::functionals::{critical_exponent, gamma, Params};
use crate::radial::{norms, RadialFunction, RadialGrid};
use crate::solvers::{
    continue_to_critical, gap_witness, solve_ground, SolveOptions, SolveResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Relation {
    /// `left < right`.
    Strict,
    /// `|left - right| <= tol`.
    Identity { tol: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Which statement of the theory the check exercises.
    pub anchor: String,
    pub inequality: String,
    pub left: f64,
    pub right: f64,
    pub margin: f64,
    pub relation: Relation,
    pub pass: bool,
    pub runtime_s: f64,
    pub error: Option<String>,
}

impl Check {
    fn new(name: &str, anchor: &str, inequality: &str, left: f64, right: f64, relation: Relation) -> Self {
        let margin = right - left;
        let pass = match relation {
            Relation::Strict => margin > 0.0,
            Relation::Identity { tol } => margin.abs() <= tol,
        };
        Self {
            name: name.into(),
            anchor: anchor.into(),
            inequality: inequality.into(),
            left,
            right,
            margin,
            relation,
            pass,
            runtime_s: 0.0,
            error: None,
        }
    }

    fn failed(name: &str, anchor: &str, inequality: &str, err: impl ToString) -> Self {
        let mut c = Self::new(name, anchor, inequality, f64::NAN, f64::NAN, Relation::Strict);
        c.pass = false;
        c.error = Some(err.to_string());
        c
    }

    fn timed(mut self, start: Instant) -> Self {
        self.runtime_s = start.elapsed().as_secs_f64();
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub dim: usize,
    pub q: f64,
    pub mass: f64,
    /// Direct minimization of `mu_p(u)` at `p = 2*`; an upper estimate.
    pub mu_star_estimate: Option<f64>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub dim: usize,
    pub q: f64,
    pub mass: f64,
    pub grid_radius: f64,
    pub grid_intervals: usize,
    /// Continuation exponents below `2*` for the mountain-pass branch.
    pub p_seq: Vec<f64>,
    /// Couplings as fractions of the extremal estimate.
    pub mu_fractions: Vec<f64>,
    /// Masses for the monotonicity in `a`, at the coupling `mu_fractions[mid]`.
    pub masses: Vec<f64>,
    pub bubble_eps: f64,
    pub bubble_intervals: usize,
    /// Slack for the monotonicity checks.
    pub monotone_tol: f64,
    pub gn_samples: usize,
    pub seed: u64,
}

impl VerifyConfig {
    /// Defaults tuned for `N = 3`; `p_seq` is `2* - {0.4, 0.2, 0.1, 0.05}`.
    pub fn new(dim: usize, q: f64, mass: f64) -> Result<Self> {
        let crit = critical_exponent(dim)?;
        Ok(Self {
            dim,
            q,
            mass,
            grid_radius: 40.0,
            grid_intervals: 4000,
            p_seq: [0.4, 0.2, 0.1, 0.05].iter().map(|d| crit - d).collect(),
            mu_fractions: vec![0.2, 0.35, 0.5, 0.65, 0.8, 0.9],
            masses: vec![0.6, 0.8, 1.0, 1.2, 1.4],
            bubble_eps: 0.05,
            bubble_intervals: 16_000,
            monotone_tol: 1e-8,
            gn_samples: 100,
            seed: 0,
        })
    }
}

/// Largest increase `f[k+1] - f[k]`; nonpositive for nonincreasing data.
fn max_increase(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

/// `min (2/y)^{2-x} (2/x)^{y-2}` over an `n x n` grid of `q in (2, 2+4/N]`,
/// `p in (2+4/N, 2*]`.
pub fn ratio_grid_minimum(dim: usize, n: usize) -> Result<f64> {
    let crit = critical_exponent(dim)?;
    let mid = 2.0 + 4.0 / dim as f64;
    let mut best = f64::INFINITY;
    for i in 1..=n {
        let q = 2.0 + (mid - 2.0) * i as f64 / n as f64;
        for j in 1..=n {
            let p = mid + (crit - mid) * j as f64 / n as f64;
            best = best.min(exponent_gain_ratio(dim, q, p));
        }
    }
    Ok(best)
}

fn random_profile(grid: &Arc<RadialGrid>, rng: &mut ChaCha8Rng) -> Result<RadialFunction> {
    let terms: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..4))
        .map(|_| (rng.gen_range(0.1..2.0), rng.gen_range(0.2..4.0), rng.gen_range(1.0..3.0)))
        .collect();
    let r0 = grid.radius();
    RadialFunction::from_fn(grid.clone(), |r| {
        let cut = 1.0 - (r / r0).powi(2);
        cut * terms.iter().map(|(c, w, k)| c * (-(r / w).powf(*k)).exp()).sum::<f64>()
    })
}

/// Runs the checklist.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if !(cfg.mass > 0.0) || cfg.mu_fractions.is_empty() || cfg.masses.is_empty() {
        return Err(param("verify needs a positive mass and nonempty mu and mass grids"));
    }
    let base = Params::critical(cfg.dim, cfg.q, cfg.mass, 1.0)?;
    let grid = Arc::new(RadialGrid::new(cfg.dim, cfg.grid_radius, cfg.grid_intervals)?);
    let n = cfg.dim as f64;
    let (x, ts) = (base.q_gamma(), base.two_star());
    let level_quantum = sobolev_constant(cfg.dim)?.powf(0.5 * n) / n;
    let mut checks = Vec::new();

    let clock = Instant::now();
    let bundle = alpha_threshold(cfg.dim, cfg.q)?;
    let chain = c1_chain_bound(cfg.dim, cfg.q)?;
    let displayed = bundle.c1 * (2.0 / x) * (0.5 * ts).powf((2.0 - x) / (ts - 2.0));
    let scale = cfg.mass.powf(0.5 * cfg.q * (1.0 - base.gamma_q()));
    let extremal = minimize_mu(&base, &grid, &ExtremalOptions::default());
    let mu_star = extremal.as_ref().ok().map(|r| r.mu_star);
    let anchor = "extremal coupling bounded below through the sharp GN and Sobolev constants";
    match &extremal {
        Ok(r) => {
            checks.push(
                Check::new(
                    "extremal_above_chain",
                    anchor,
                    "C1 (2/(q g_q)) (2*/2)^{-(2-q g_q)/(2*-2)} < mu*_a a^{q(1-g_q)/2}",
                    chain,
                    r.mu_star * scale,
                    Relation::Strict,
                )
                .timed(clock),
            );
            checks.push(Check::new(
                "extremal_above_displayed_chain",
                anchor,
                "C1 (2/(q g_q)) (2*/2)^{(2-q g_q)/(2*-2)} < mu*_a a^{q(1-g_q)/2}",
                displayed,
                r.mu_star * scale,
                Relation::Strict,
            ));
        }
        Err(e) => checks.push(Check::failed("extremal_above_chain", anchor, "mu*_a estimate", e).timed(clock)),
    }
    checks.push(Check::new("chain_above_c1", anchor, "C1 < chain bound", bundle.c1, chain, Relation::Strict));
    checks.push(Check::new(
        "c1_at_least_alpha",
        anchor,
        "alpha_{N,q} = min(C1, C2) = C1",
        bundle.alpha,
        bundle.c1.min(bundle.c2),
        Relation::Identity { tol: 0.0 },
    ));

    let clock = Instant::now();
    let rmin = ratio_grid_minimum(cfg.dim, 40)?;
    checks.push(
        Check::new(
            "gain_ratio_at_least_one",
            "exponent gain of the subcritical bound over the critical one",
            "1 - 1e-12 < min over (p,q) of (2/(p g_p))^{2-q g_q} (2/(q g_q))^{p g_p-2}",
            1.0 - 1e-12,
            rmin,
            Relation::Strict,
        )
        .timed(clock),
    );
    checks.push(Check::new(
        "gain_ratio_corner",
        "exponent gain of the subcritical bound over the critical one",
        "ratio at p g_p = 2*, q g_q = 2 equals 1",
        exponent_gain_ratio(cfg.dim, 2.0 + 4.0 / n, ts),
        1.0,
        Relation::Identity { tol: 1e-14 },
    ));

    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cq = gn_constant(cfg.dim, cfg.q)?;
    let g = gamma(cfg.dim, cfg.q);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cfg.gn_samples {
        let u = random_profile(&grid, &mut rng)?;
        let np = norms(&u, cfg.q, ts)?;
        let bound = cq.powf(cfg.q) * np.grad2.powf(0.5 * cfg.q * g) * np.mass2.powf(0.5 * cfg.q * (1.0 - g));
        worst = worst.max(np.massq / bound);
    }
    checks.push(
        Check::new(
            "gn_inequality_random",
            "sharp Gagliardo-Nirenberg inequality",
            "max |u|_q^q / (C^q |grad u|^{q g_q} |u|_2^{q(1-g_q)}) < 1 + 1e-8",
            worst,
            1.0 + 1e-8,
            Relation::Strict,
        )
        .timed(clock),
    );

    let Some(mu_star) = mu_star else {
        return Ok(VerifyReport { dim: cfg.dim, q: cfg.q, mass: cfg.mass, mu_star_estimate: None, checks });
    };
    let mid = cfg.mu_fractions[cfg.mu_fractions.len() / 2];
    let params = base.with_mu(mid * mu_star)?;
    let opts = SolveOptions::default();

    let clock = Instant::now();
    let ground = solve_ground(&params, &grid, &opts);
    match &ground {
        Ok(gs) => {
            let anchor = "ground state on the P+ component";
            checks.push(
                Check::new("ground_energy_negative", anchor, "m+ < 0", gs.energy, 0.0, Relation::Strict).timed(clock),
            );
            checks.push(Check::new("ground_lambda_negative", anchor, "lambda+ < 0", gs.lambda, 0.0, Relation::Strict));
            push_solution_identities(&mut checks, "ground", gs);
        }
        Err(e) => checks.push(Check::failed("ground_energy_negative", "ground state", "m+ < 0", e).timed(clock)),
    }

    let clock = Instant::now();
    let mp = continue_to_critical(&params, &grid, &cfg.p_seq, &opts);
    match (&ground, &mp) {
        (Ok(gs), Ok(cs)) => {
            let anchor = "mountain-pass level below the compactness threshold";
            let r = &cs.result;
            checks.push(
                Check::new(
                    "mp_below_compactness_level",
                    anchor,
                    "m- < m+ + S^{N/2}/N",
                    r.energy,
                    gs.energy + level_quantum,
                    Relation::Strict,
                )
                .timed(clock),
            );
            checks.push(Check::new("mp_above_ground", anchor, "m+ < m-", gs.energy, r.energy, Relation::Strict));
            checks.push(Check::new("mp_lambda_negative", anchor, "lambda- < 0", r.lambda, 0.0, Relation::Strict));
            push_solution_identities(&mut checks, "mp", r);
        }
        (_, Err(e)) => checks.push(
            Check::failed("mp_below_compactness_level", "mountain-pass level", "m- < m+ + S^{N/2}/N", e).timed(clock),
        ),
        (Err(_), Ok(_)) => {}
    }

    if let Ok(gs) = &ground {
        let clock = Instant::now();
        let anchor = "bubble test family keeps the mountain-pass level below the threshold";
        let ineq = "sup_t Psi(W_{eps,t}) < m+ + S^{N/2}/N";
        match gap_witness(gs, cfg.bubble_eps, cfg.bubble_intervals) {
            Ok(w) => checks.push(
                Check::new("gap_witness", anchor, ineq, w.sup_energy, w.level, Relation::Strict).timed(clock),
            ),
            Err(e) => checks.push(Check::failed("gap_witness", anchor, ineq, e).timed(clock)),
        }

        let clock = Instant::now();
        let anchor = "fiber critical points and energy move monotonically in mu";
        let np = gs.norms;
        let probe = base.with_mu(params.mu)?;
        match (fiber_sensitivity(&np, &probe, Branch::Plus), fiber_sensitivity(&np, &probe, Branch::Minus)) {
            (Ok(sp), Ok(sm)) => {
                checks.push(
                    Check::new("dt_plus_dmu_positive", anchor, "0 < dt+/dmu", 0.0, sp.dt_dmu, Relation::Strict)
                        .timed(clock),
                );
                checks.push(Check::new("dt_minus_dmu_negative", anchor, "dt-/dmu < 0", sm.dt_dmu, 0.0, Relation::Strict));
                checks.push(Check::new("dpsi_dmu_negative", anchor, "dPsi/dmu < 0", sp.dpsi_dmu.max(sm.dpsi_dmu), 0.0, Relation::Strict));
            }
            (Err(e), _) | (_, Err(e)) => checks.push(Check::failed("dt_plus_dmu_positive", anchor, "sensitivity", e).timed(clock)),
        }
    }

    // monotonicity in mu, warm-starting each branch from the previous coupling
    let clock = Instant::now();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut errors = Vec::new();
    for &f in &cfg.mu_fractions {
        let pr = base.with_mu(f * mu_star)?;
        match solve_ground(&pr, &grid, &opts) {
            Ok(r) => plus.push(r.energy),
            Err(e) => errors.push(format!("m+ at mu = {}: {e}", pr.mu)),
        }
        match continue_to_critical(&pr, &grid, &cfg.p_seq, &opts) {
            Ok(r) => minus.push(r.result.energy),
            Err(e) => errors.push(format!("m- at mu = {}: {e}", pr.mu)),
        }
    }
    let anchor = "levels m+ and m- are nonincreasing in mu";
    if errors.is_empty() {
        checks.push(
            Check::new("m_plus_nonincreasing_mu", anchor, "max_k m+(mu_{k+1}) - m+(mu_k) < tol", max_increase(&plus), cfg.monotone_tol, Relation::Strict)
                .timed(clock),
        );
        checks.push(Check::new("m_minus_nonincreasing_mu", anchor, "max_k m-(mu_{k+1}) - m-(mu_k) < tol", max_increase(&minus), cfg.monotone_tol, Relation::Strict));
        let (last_p, last_m) = (plus[plus.len() - 1], minus[minus.len() - 1]);
        let anchor = "limits of m+ and m- as mu approaches mu*_a";
        checks.push(Check::new("limit_order", anchor, "m+ <= m- near mu*_a", last_p, last_m, Relation::Strict));
        checks.push(Check::new("limit_mp_negative", anchor, "m- < 0 near mu*_a", last_m, 0.0, Relation::Strict));
    } else {
        checks.push(Check::failed("m_plus_nonincreasing_mu", anchor, "monotone in mu", errors.join("; ")).timed(clock));
    }

    let clock = Instant::now();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut errors = Vec::new();
    for &a in &cfg.masses {
        let pr = params.with_mass(a)?;
        match solve_ground(&pr, &grid, &opts) {
            Ok(r) => plus.push(r.energy),
            Err(e) => errors.push(format!("m+ at a = {a}: {e}")),
        }
        match continue_to_critical(&pr, &grid, &cfg.p_seq, &opts) {
            Ok(r) => minus.push(r.result.energy),
            Err(e) => errors.push(format!("m- at a = {a}: {e}")),
        }
    }
    let anchor = "levels m+ and m- are nonincreasing in the mass";
    if errors.is_empty() {
        checks.push(
            Check::new("m_plus_nonincreasing_mass", anchor, "max_k m+(a_{k+1}) - m+(a_k) < tol", max_increase(&plus), cfg.monotone_tol, Relation::Strict)
                .timed(clock),
        );
        checks.push(Check::new("m_minus_nonincreasing_mass", anchor, "max_k m-(a_{k+1}) - m-(a_k) < tol", max_increase(&minus), cfg.monotone_tol, Relation::Strict));
    } else {
        checks.push(Check::failed("m_plus_nonincreasing_mass", anchor, "monotone in a", errors.join("; ")).timed(clock));
    }

    Ok(VerifyReport { dim: cfg.dim, q: cfg.q, mass: cfg.mass, mu_star_estimate: Some(mu_star), checks })
}

fn push_solution_identities(checks: &mut Vec<Check>, tag: &str, r: &SolveResult) {
    let anchor = "Lagrange multiplier and Pohozaev identities";
    let scale = r.lambda.abs().max(1e-300);
    checks.push(Check::new(
        &format!("{tag}_multiplier_identity"),
        anchor,
        "lambda a = A - mu B - P equals mu (g_q - 1) B + (g_p - 1) P within 1e-6 relative",
        r.lambda / scale,
        r.lambda_identity / scale,
        Relation::Identity { tol: 1e-6 },
    ));
    checks.push(Check::new(
        &format!("{tag}_pohozaev"),
        anchor,
        "relative Pohozaev residual < 1e-6",
        r.pohozaev,
        1e-6,
        Relation::Strict,
    ));
    checks.push(Check::new(
        &format!("{tag}_mass"),
        anchor,
        "|u|_2^2 = a within 1e-10",
        r.norms.mass2,
        r.params.mass,
        Relation::Identity { tol: 1e-10 },
    ));
}
