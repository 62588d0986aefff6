//! Sharp Sobolev and Gagliardo-Nirenberg constants and the thresholds built
//! from them.
//!
//! Conventions: `S |u|_{2*}^2 <= |grad u|_2^2` and
//! `|u|_q <= C_{N,q} |grad u|_2^{g_q} |u|_2^{1-g_q}`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{param, Error, Result};
use crate::fibering::threshold_constant;
use crate::functionals::{critical_exponent, gamma, Params};
use crate::radial::{sphere_area, RadialFunction, RadialGrid};

/// `S = pi N (N-2) (Gamma(N/2) / Gamma(N))^{2/N}`.
pub fn sobolev_constant(dim: usize) -> Result<f64> {
    if dim < 3 {
        return Err(param(format!("dimension must be at least 3, got {dim}")));
    }
    let n = dim as f64;
    let ratio = ((ln_gamma(0.5 * n) - ln_gamma(n)) * 2.0 / n).exp();
    Ok(std::f64::consts::PI * n * (n - 2.0) * ratio)
}

/// `chi(r) U_eps(r)` with `U_eps = [N(N-2)]^{(N-2)/4} (eps / (eps^2 + r^2))^{(N-2)/2}`.
///
/// `chi` is the quintic smoothstep (C^2) equal to 1 on `[0, c/2]` and 0 on
/// `[c, R]`.
pub fn talenti_bubble(eps: f64, grid: &Arc<RadialGrid>, cutoff: f64) -> Result<RadialFunction> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(param(format!("bubble width must be positive, got {eps}")));
    }
    if !(cutoff > 0.0 && cutoff <= grid.radius() * (1.0 + 1e-12)) {
        return Err(param(format!(
            "cut-off radius must lie in (0, {}], got {cutoff}",
            grid.radius()
        )));
    }
    let n = grid.dim() as f64;
    let amp = (n * (n - 2.0)).powf(0.25 * (n - 2.0));
    RadialFunction::from_fn(grid.clone(), |r| {
        amp * (eps / (eps * eps + r * r)).powf(0.5 * (n - 2.0)) * smooth_cutoff(r, cutoff)
    })
}

fn smooth_cutoff(r: f64, c: f64) -> f64 {
    let half = 0.5 * c;
    if r <= half {
        1.0
    } else if r >= c {
        0.0
    } else {
        let x = (r - half) / half;
        1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

/// Radial ground state of `-W'' - (N-1) W'/r + W = W^{q-1}` with its
/// integrals `|W|_q^q`, `|W|_2^2`, `|grad W|_2^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarGroundState {
    pub dim: usize,
    pub q: f64,
    pub center: f64,
    pub massq: f64,
    pub mass2: f64,
    pub grad2: f64,
    /// `C_{N,q}` from the Pohozaev form `C^q = B^{1-q/2} g^{-q g/2} (1-g)^{-q(1-g)/2}`.
    pub constant: f64,
    /// `C_{N,q}` as the direct quotient of the computed integrals.
    pub quotient: f64,
}

fn gn_cache() -> &'static RwLock<HashMap<(usize, u64), ScalarGroundState>> {
    static CACHE: OnceLock<RwLock<HashMap<(usize, u64), ScalarGroundState>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Sharp Gagliardo-Nirenberg constant `C_{N,q}`; equals 1 at `q = 2`.
pub fn gn_constant(dim: usize, q: f64) -> Result<f64> {
    if q == 2.0 {
        if dim < 3 {
            return Err(param(format!("dimension must be at least 3, got {dim}")));
        }
        return Ok(1.0);
    }
    Ok(gn_ground_state(dim, q)?.constant)
}

/// The shooting solution behind [`gn_constant`], memoized per `(N, q)`.
pub fn gn_ground_state(dim: usize, q: f64) -> Result<ScalarGroundState> {
    let crit = critical_exponent(dim)?;
    if !(q > 2.0 && q < crit) {
        return Err(param(format!("need 2 < q < {crit}, got {q}")));
    }
    let key = (dim, q.to_bits());
    if let Some(hit) = gn_cache().read().expect("cache poisoned").get(&key) {
        return Ok(*hit);
    }
    let state = shoot_ground_state(dim, q)?;
    gn_cache().write().expect("cache poisoned").insert(key, state);
    Ok(state)
}

#[derive(Clone, Copy)]
enum Shot {
    Over { r: f64 },
    Under { r: f64 },
    Undecided,
}

struct Trajectory {
    shot: Shot,
    massq: f64,
    mass2: f64,
    grad2: f64,
}

const SHOOT_RMAX: f64 = 80.0;

/// RK4 for `(w, w', int r^{N-1} w^q, int r^{N-1} w^2, int r^{N-1} w'^2)`.
fn shoot(dim: usize, q: f64, d: f64) -> Trajectory {
    let n = dim as f64;
    let core = d.powf(-0.5 * (q - 2.0));
    let h = (1e-3f64).min(core / 400.0);
    let rhs = |r: f64, y: &[f64; 5]| -> [f64; 5] {
        let w = y[0];
        let wp = y[1];
        let wpos = w.max(0.0);
        let rn = r.powf(n - 1.0);
        [
            wp,
            -(n - 1.0) / r * wp + w - wpos.powf(q - 1.0),
            rn * wpos.powf(q),
            rn * w * w,
            rn * wp * wp,
        ]
    };
    let c2 = (d - d.powf(q - 1.0)) / (2.0 * n);
    let r0 = h;
    let mut r = r0;
    let mut y = [
        d + c2 * r0 * r0,
        2.0 * c2 * r0,
        d.powf(q) * r0.powf(n) / n,
        d * d * r0.powf(n) / n,
        4.0 * c2 * c2 * r0.powf(n + 2.0) / (n + 2.0),
    ];
    let mut shot = Shot::Undecided;
    while r < SHOOT_RMAX {
        let k1 = rhs(r, &y);
        let mut t = y;
        for i in 0..5 {
            t[i] = y[i] + 0.5 * h * k1[i];
        }
        let k2 = rhs(r + 0.5 * h, &t);
        for i in 0..5 {
            t[i] = y[i] + 0.5 * h * k2[i];
        }
        let k3 = rhs(r + 0.5 * h, &t);
        for i in 0..5 {
            t[i] = y[i] + h * k3[i];
        }
        let k4 = rhs(r + h, &t);
        let mut next = y;
        for i in 0..5 {
            next[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if next[0] < 0.0 {
            shot = Shot::Over { r };
            break;
        }
        if next[1] > 0.0 {
            shot = Shot::Under { r };
            break;
        }
        y = next;
        r += h;
    }
    let omega = sphere_area(dim);
    Trajectory { shot, massq: omega * y[2], mass2: omega * y[3], grad2: omega * y[4] }
}

fn shoot_ground_state(dim: usize, q: f64) -> Result<ScalarGroundState> {
    let mut lo = 1.0 + 1e-9;
    let mut hi = 2.0;
    let mut tries = 0;
    loop {
        match shoot(dim, q, hi).shot {
            Shot::Over { .. } => break,
            _ => {
                lo = hi;
                hi *= 2.0;
            }
        }
        tries += 1;
        if tries > 40 {
            return Err(Error::Convergence(format!(
                "no overshoot found for N = {dim}, q = {q} up to w(0) = {hi}"
            )));
        }
    }
    if !matches!(shoot(dim, q, lo).shot, Shot::Under { .. }) {
        return Err(Error::Convergence(format!(
            "shooting bracket [{lo}, {hi}] is not an undershoot/overshoot pair"
        )));
    }
    let mut best = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let tr = shoot(dim, q, mid);
        let exit = match tr.shot {
            Shot::Over { r } => {
                hi = mid;
                r
            }
            Shot::Under { r } => {
                lo = mid;
                r
            }
            Shot::Undecided => {
                best = Some((mid, tr));
                break;
            }
        };
        if best.as_ref().map_or(true, |(_, b): &(f64, Trajectory)| exit > b.exit_radius()) {
            best = Some((mid, tr));
        }
    }
    let (center, tr) = best.ok_or_else(|| Error::Convergence("shooting produced no trajectory".into()))?;
    let g = gamma(dim, q);
    let b = tr.massq;
    let constant = (b.powf(1.0 - 0.5 * q)
        * g.powf(-0.5 * q * g)
        * (1.0 - g).powf(-0.5 * q * (1.0 - g)))
    .powf(1.0 / q);
    let quotient = b.powf(1.0 / q) / (tr.grad2.powf(0.5 * g) * tr.mass2.powf(0.5 * (1.0 - g)));
    Ok(ScalarGroundState {
        dim,
        q,
        center,
        massq: b,
        mass2: tr.mass2,
        grad2: tr.grad2,
        constant,
        quotient,
    })
}

impl Trajectory {
    fn exit_radius(&self) -> f64 {
        match self.shot {
            Shot::Over { r } | Shot::Under { r } => r,
            Shot::Undecided => f64::INFINITY,
        }
    }
}

/// `S`, `C_{N,q}`, `C1`, `C2`, `alpha = min(C1, C2)` and `C~` at `p = 2*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantBundle {
    pub dim: usize,
    pub q: f64,
    pub sobolev: f64,
    pub gn: f64,
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    pub ctilde: f64,
}

pub fn alpha_threshold(dim: usize, q: f64) -> Result<ConstantBundle> {
    let probe = Params::critical(dim, q, 1.0, 1.0)?;
    let n = dim as f64;
    let s = sobolev_constant(dim)?;
    let gn = gn_constant(dim, q)?;
    let cq = gn.powf(q);
    let g = probe.gamma_q();
    let x = q * g;
    let ts = probe.two_star();
    let c1 = (ts * s.powf(0.5 * ts) * (2.0 - x) / (2.0 * (ts - x))).powf((2.0 - x) / (ts - 2.0))
        * q
        * (ts - 2.0)
        / (2.0 * cq * (ts - x));
    let c2 = 2.0 * ts / (n * g * cq * (ts - x)) * (x * s.powf(0.5 * n) / (2.0 - x)).powf(0.5 * (2.0 - x));
    Ok(ConstantBundle {
        dim,
        q,
        sobolev: s,
        gn,
        c1,
        c2,
        alpha: c1.min(c2),
        ctilde: threshold_constant(&probe),
    })
}

/// Lower bound on `mu_p(u)` over the mass sphere, obtained by bounding `B`
/// with the Gagliardo-Nirenberg inequality and `P` with Sobolev (`p = 2*`)
/// or Gagliardo-Nirenberg (`p < 2*`).
///
/// Every `u` in the mass sphere satisfies `mu_p(u) >= mu_lower_bound`, so the
/// same holds for the extremal value.
pub fn mu_lower_bound(params: &Params) -> Result<f64> {
    let (x, y) = (params.q_gamma(), params.p_gamma());
    let beta = (2.0 - x) / (y - 2.0);
    let a = params.mass;
    let cq = gn_constant(params.dim, params.q)?.powf(params.q);
    let b_factor = cq * a.powf(0.5 * params.q * (1.0 - params.gamma_q()));
    let p_factor = if params.is_critical() {
        sobolev_constant(params.dim)?.powf(-0.5 * params.p)
    } else {
        gn_constant(params.dim, params.p)?.powf(params.p) * a.powf(0.5 * params.p * (1.0 - params.gamma_p()))
    };
    Ok(threshold_constant(params) / (b_factor * p_factor.powf(beta)))
}

/// `C1 (2/(q g_q)) (2/2*)^{(2-q g_q)/(2*-2)}`, the closed form of
/// [`mu_lower_bound`] at `p = 2*` and `a = 1` expressed through `C1`.
pub fn c1_chain_bound(dim: usize, q: f64) -> Result<f64> {
    let b = alpha_threshold(dim, q)?;
    let probe = Params::critical(dim, q, 1.0, 1.0)?;
    let x = probe.q_gamma();
    let ts = probe.two_star();
    Ok(b.c1 * (2.0 / x) * (2.0 / ts).powf((2.0 - x) / (ts - 2.0)))
}

/// `(2/(p g_p))^{2-q g_q} (2/(q g_q))^{p g_p - 2}`, which is at least one.
pub fn exponent_gain_ratio(dim: usize, q: f64, p: f64) -> f64 {
    let x = q * gamma(dim, q);
    let y = p * gamma(dim, p);
    (2.0 / y).powf(2.0 - x) * (2.0 / x).powf(y - 2.0)
}
