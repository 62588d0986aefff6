//! The five commands.  Single results are JSON documents wrapped in a
//! versioned envelope; sweeps are CSV with a `schema_version` column.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use pohozaev::extremal::{critical_limit, mass_scaling, minimize_mu, ExtremalOptions};
use pohozaev::fibering::{fiber_roots, mu_threshold};
use pohozaev::functionals::{critical_exponent, Params};
use pohozaev::radial::{norms, NormProfile, RadialFunction, RadialGrid};
use pohozaev::solvers::{
    continue_to_critical, dual_branch_points, scalar_field_family, solve_ground, solve_mp_subcritical,
    ScalarField, ScalarFieldOptions, SolveOptions, SolveResult,
};
use pohozaev::verify::{run_verify, VerifyConfig};

use crate::config::{BranchChoice, Command, RunConfig};
use crate::{CliError, Output, Status};

pub const SCHEMA_VERSION: u32 = 1;
/// Refinement factor for sweep rows that fail to converge.
const REFINE: usize = 4;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    version: u32,
    config: &'a RunConfig,
    result: T,
}

fn envelope<T: Serialize>(schema: &'static str, cfg: &RunConfig, result: T) -> String {
    let doc = Envelope { schema, version: SCHEMA_VERSION, config: cfg, result };
    let mut s = serde_json::to_string_pretty(&doc).expect("results serialize");
    s.push('\n');
    s
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run(cfg: &RunConfig) -> Result<Output, CliError> {
    match cfg.command {
        Command::Fiber => fiber(cfg),
        Command::Extremal => extremal(cfg),
        Command::Solve => solve(cfg),
        Command::Verify => verify(cfg),
        Command::Sweep => sweep(cfg),
    }
}

fn exponent_q(cfg: &RunConfig) -> Result<f64, CliError> {
    cfg.q.ok_or_else(|| usage("the exponent q is required (--q)"))
}

fn exponent_p(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.p {
        Some(p) => Ok(p),
        None => Ok(critical_exponent(cfg.dim)?),
    }
}

fn params(cfg: &RunConfig, mu: f64) -> Result<Params, CliError> {
    Ok(Params::new(cfg.dim, exponent_q(cfg)?, exponent_p(cfg)?, cfg.mass, mu)?)
}

fn grid(cfg: &RunConfig) -> Result<Arc<RadialGrid>, CliError> {
    Ok(Arc::new(RadialGrid::new(cfg.dim, cfg.grid_radius, cfg.grid_intervals)?))
}

fn extremal_options(cfg: &RunConfig) -> ExtremalOptions {
    ExtremalOptions { max_iter: cfg.max_iter, tol: cfg.tol, ..ExtremalOptions::default() }
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        max_iter: cfg.max_iter,
        energy_tol: cfg.tol,
        mu_star_estimate: cfg.mu_star,
        ..SolveOptions::default()
    }
}

fn continuation_seq(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    if !cfg.p_seq.is_empty() {
        return Ok(cfg.p_seq.clone());
    }
    let crit = critical_exponent(cfg.dim)?;
    Ok([0.4, 0.2, 0.1, 0.05].iter().map(|d| crit - d).collect())
}

#[derive(Serialize)]
struct FiberOut {
    norms: NormProfile,
    mu_threshold: f64,
    report: pohozaev::fibering::FiberingReport,
}

fn fiber(cfg: &RunConfig) -> Result<Output, CliError> {
    let mu = cfg.mu.ok_or_else(|| usage("fiber needs the coupling mu (--mu)"))?;
    let pr = params(cfg, mu)?;
    let np = match (&cfg.function, cfg.grad2, cfg.massq, cfg.massp) {
        (Some(path), None, None, None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            let u: RadialFunction = serde_json::from_str(&text)
                .map_err(|e| usage(format!("invalid function file: {e}")))?;
            if u.grid().dim() != cfg.dim {
                return Err(usage("function file dimension differs from --dim"));
            }
            norms(&u, pr.q, pr.p)?
        }
        (None, Some(a), Some(b), Some(c)) => NormProfile::from_triple(cfg.mass, a, b, c),
        (None, ..) => return Err(usage("fiber needs --A, --B and --C, or --function")),
        (Some(_), ..) => return Err(usage("give either --function or the triple, not both")),
    };
    let out = FiberOut { norms: np, mu_threshold: mu_threshold(&np, &pr)?, report: fiber_roots(&np, &pr)? };
    Ok(Output { body: envelope("pohozaev.fiber", cfg, out), status: Status::Ok })
}

#[derive(Serialize)]
struct ScalingRow {
    mass_from: f64,
    mass_to: f64,
    mu_star_from: f64,
    mu_star_to: f64,
    observed_ratio: f64,
    predicted_ratio: f64,
    relative_error: f64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum ExtremalOut {
    Single {
        runs: Vec<pohozaev::extremal::ExtremalResult>,
        scaling: Option<ScalingRow>,
    },
    Limit(pohozaev::extremal::CriticalLimit),
}

fn extremal(cfg: &RunConfig) -> Result<Output, CliError> {
    let pr = params(cfg, 0.0)?;
    let g = grid(cfg)?;
    let opts = extremal_options(cfg);
    if !cfg.p_seq.is_empty() {
        let lim = critical_limit(cfg.dim, pr.q, cfg.mass, &cfg.p_seq, &g, &opts)?;
        let status = if lim.rows.iter().all(|r| r.converged) { Status::Ok } else { Status::NotConverged };
        return Ok(Output { body: envelope("pohozaev.extremal.limit", cfg, ExtremalOut::Limit(lim)), status });
    }
    let masses = if cfg.masses.is_empty() { vec![cfg.mass] } else { cfg.masses.clone() };
    if masses.len() > 2 {
        return Err(usage("extremal takes one or two masses"));
    }
    let runs = masses
        .iter()
        .map(|&a| Ok(minimize_mu(&pr.with_mass(a)?, &g, &opts)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    let scaling = match runs.as_slice() {
        [r1, r2] => {
            let predicted = mass_scaling(&pr, masses[0], masses[1], 1.0)?;
            let observed = r2.mu_star / r1.mu_star;
            Some(ScalingRow {
                mass_from: masses[0],
                mass_to: masses[1],
                mu_star_from: r1.mu_star,
                mu_star_to: r2.mu_star,
                observed_ratio: observed,
                predicted_ratio: predicted,
                relative_error: (observed / predicted - 1.0).abs(),
            })
        }
        _ => None,
    };
    let status = if runs.iter().all(|r| r.converged) { Status::Ok } else { Status::NotConverged };
    Ok(Output { body: envelope("pohozaev.extremal", cfg, ExtremalOut::Single { runs, scaling }), status })
}

fn solve(cfg: &RunConfig) -> Result<Output, CliError> {
    let mu = cfg.mu.ok_or_else(|| usage("solve needs the coupling mu (--mu)"))?;
    let pr = params(cfg, mu)?;
    let g = grid(cfg)?;
    let opts = solve_options(cfg);
    match cfg.branch {
        BranchChoice::Ground => {
            let r = solve_ground(&pr, &g, &opts)?;
            let status = if r.converged { Status::Ok } else { Status::NotConverged };
            Ok(Output { body: envelope("pohozaev.solve", cfg, r), status })
        }
        BranchChoice::Mp if pr.is_critical() => {
            let r = continue_to_critical(&pr, &g, &continuation_seq(cfg)?, &opts)?;
            let status = if r.result.converged { Status::Ok } else { Status::NotConverged };
            Ok(Output { body: envelope("pohozaev.solve.critical", cfg, r), status })
        }
        BranchChoice::Mp => {
            let r = solve_mp_subcritical(&pr, &g, &opts)?;
            let status = if r.converged { Status::Ok } else { Status::NotConverged };
            Ok(Output { body: envelope("pohozaev.solve", cfg, r), status })
        }
    }
}

fn verify(cfg: &RunConfig) -> Result<Output, CliError> {
    let mut vc = VerifyConfig::new(cfg.dim, exponent_q(cfg)?, cfg.mass)?;
    vc.grid_radius = cfg.grid_radius;
    vc.grid_intervals = cfg.grid_intervals;
    vc.seed = cfg.seed;
    if !cfg.p_seq.is_empty() {
        vc.p_seq = cfg.p_seq.clone();
    }
    if !cfg.masses.is_empty() {
        vc.masses = cfg.masses.clone();
    }
    let report = run_verify(&vc)?;
    for c in &report.checks {
        eprintln!(
            "{} {:34} {} (left {:e}, right {:e}, margin {:e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.inequality,
            c.left,
            c.right,
            c.margin
        );
    }
    let status = if report.all_pass() { Status::Ok } else { Status::CheckFailed };
    Ok(Output { body: envelope("pohozaev.verify", cfg, report), status })
}

fn default_t_grid() -> Vec<f64> {
    let mut ts: Vec<f64> = (0..=20).map(|i| 2.10 + 0.01 * i as f64).collect();
    ts.extend((1..30).map(|i| 2.3 * (200.0f64 / 2.3).powf(i as f64 / 29.0)));
    ts
}

#[derive(Debug, Serialize)]
struct SweepRow {
    schema_version: u32,
    dim: usize,
    q: f64,
    p: f64,
    mass: f64,
    mu: f64,
    mu_star_estimate: Option<f64>,
    m_plus: Option<f64>,
    lambda_plus: Option<f64>,
    plus_converged: bool,
    plus_intervals: usize,
    m_minus: Option<f64>,
    lambda_minus: Option<f64>,
    minus_converged: bool,
    minus_intervals: usize,
    dual_zeros: Option<usize>,
    error: String,
}

fn sweep_row(
    cfg: &RunConfig,
    g: &Arc<RadialGrid>,
    family: Option<&[ScalarField]>,
    mass: f64,
    mu: f64,
    mu_star: Result<f64, String>,
) -> SweepRow {
    let mut errors = Vec::new();
    let mut row = SweepRow {
        schema_version: SCHEMA_VERSION,
        dim: cfg.dim,
        q: cfg.q.unwrap_or(f64::NAN),
        p: exponent_p(cfg).unwrap_or(f64::NAN),
        mass,
        mu,
        mu_star_estimate: mu_star.as_ref().ok().copied(),
        m_plus: None,
        lambda_plus: None,
        plus_converged: false,
        plus_intervals: g.intervals(),
        m_minus: None,
        lambda_minus: None,
        minus_converged: false,
        minus_intervals: g.intervals(),
        dual_zeros: None,
        error: String::new(),
    };
    if let Err(e) = &mu_star {
        errors.push(format!("extremal: {e}"));
    }
    let pr = match Params::new(cfg.dim, row.q, row.p, mass, mu) {
        Ok(p) => p,
        Err(e) => {
            row.error = e.to_string();
            return row;
        }
    };
    let opts = SolveOptions { mu_star_estimate: mu_star.ok(), ..solve_options(cfg) };
    let fine = RadialGrid::new(cfg.dim, cfg.grid_radius, REFINE * cfg.grid_intervals).map(Arc::new);
    // an unconverged branch is retried once on the refined grid
    let attempt = |solve: &dyn Fn(&Arc<RadialGrid>) -> Result<SolveResult, String>| {
        let first = solve(g);
        match (&first, &fine) {
            (Ok(r), Ok(f)) if !r.converged => match solve(f) {
                Ok(r2) if r2.converged => (Ok(r2), f.intervals()),
                _ => (first, g.intervals()),
            },
            _ => (first, g.intervals()),
        }
    };
    let (plus, plus_grid) = attempt(&|gr| solve_ground(&pr, gr, &opts).map_err(|e| e.to_string()));
    match plus {
        Ok(r) => {
            row.m_plus = Some(r.energy);
            row.lambda_plus = Some(r.lambda);
            row.plus_converged = r.converged;
            row.plus_intervals = plus_grid;
        }
        Err(e) => errors.push(format!("ground: {e}")),
    }
    let (minus, minus_grid) = attempt(&|gr| {
        if pr.is_critical() {
            let seq = continuation_seq(cfg).map_err(|e| e.to_string())?;
            continue_to_critical(&pr, gr, &seq, &opts).map(|c| c.result).map_err(|e| e.to_string())
        } else {
            solve_mp_subcritical(&pr, gr, &opts).map_err(|e| e.to_string())
        }
    });
    match minus {
        Ok(r) => {
            row.m_minus = Some(r.energy);
            row.lambda_minus = Some(r.lambda);
            row.minus_converged = r.converged;
            row.minus_intervals = minus_grid;
        }
        Err(e) => errors.push(format!("mountain pass: {e}")),
    }
    if let Some(fam) = family {
        match dual_branch_points(fam, cfg.dim, pr.q, mass, mu) {
            Ok(s) => row.dual_zeros = Some(s.zeros),
            Err(e) => errors.push(format!("dual: {e}")),
        }
    }
    row.error = errors.join("; ");
    row
}

fn sweep(cfg: &RunConfig) -> Result<Output, CliError> {
    if cfg.mus.is_empty() {
        return Err(usage("sweep needs a coupling list (--mus)"));
    }
    let base = params(cfg, 0.0)?;
    let g = grid(cfg)?;
    let masses = if cfg.masses.is_empty() { vec![cfg.mass] } else { cfg.masses.clone() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| usage(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| -> Result<Vec<SweepRow>, CliError> {
        let family = if base.is_critical() {
            let t_grid = if cfg.t_grid.is_empty() { default_t_grid() } else { cfg.t_grid.clone() };
            let dual = Arc::new(RadialGrid::new(cfg.dim, cfg.dual_radius, cfg.dual_intervals)?);
            Some(scalar_field_family(cfg.dim, base.q, &t_grid, &dual, &ScalarFieldOptions::default())?)
        } else {
            None
        };
        let stars: Vec<Result<f64, String>> = masses
            .par_iter()
            .map(|&a| {
                let pr = base.with_mass(a).map_err(|e| e.to_string())?;
                minimize_mu(&pr, &g, &extremal_options(cfg)).map(|r| r.mu_star).map_err(|e| e.to_string())
            })
            .collect();
        let jobs: Vec<(f64, f64, Result<f64, String>)> = masses
            .iter()
            .zip(&stars)
            .flat_map(|(&a, s)| cfg.mus.iter().map(move |&mu| (a, mu, s.clone())))
            .collect();
        Ok(jobs
            .into_par_iter()
            .map(|(a, mu, s)| sweep_row(cfg, &g, family.as_deref(), a, mu, s))
            .collect())
    })?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| usage(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| usage(format!("csv: {e}")))?;
    let status = if rows.iter().all(|r| !r.error.is_empty() && r.m_plus.is_none() && r.m_minus.is_none()) {
        Status::NotConverged
    } else {
        Status::Ok
    };
    Ok(Output { body: String::from_utf8(bytes).expect("csv is utf-8"), status })
}
