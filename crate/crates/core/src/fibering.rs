//! Critical points of the fiber map and the pointwise threshold `mu_p(u)`.
//!
//! Write `x = q g_q in (0, 2)` and `y = p g_p in (2, 2*]`.  Critical points of
//! `Phi` solve `h(s) = s^{2-x} A - g_p s^{y-x} P = mu g_q B`, where `h` rises
//! from zero to its maximum at `s_*` and then decreases to minus infinity.
//! Hence two roots `t+ < s_* < t-` exist exactly when `mu < mu_p(u)`, with
//! `mu_p(u) g_q B = h(s_*)`.  The lower root is a local minimum of `Phi`
//! and the upper root a global maximum.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::functionals::Params;
use crate::radial::NormProfile;

/// Relative width of the band around `mu_p(u)` treated as degenerate.
pub const DEGENERACY_BAND: f64 = 1e-10;

const BISECTION_TOL: f64 = 1e-6;
const NEWTON_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum FiberingReport {
    TwoCritical { t_plus: f64, t_minus: f64 },
    Degenerate { t_zero: f64 },
    NoCritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

struct Fiber {
    a: f64,
    b: f64,
    c: f64,
    x: f64,
    y: f64,
    gq: f64,
    gp: f64,
}

impl Fiber {
    fn new(np: &NormProfile, params: &Params) -> Result<Self> {
        let (a, b, c) = (np.grad2, np.massq, params.upper(np));
        if !(a > 0.0 && b > 0.0 && c > 0.0) || !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::DegenerateInput(format!(
                "norms must be positive and finite, got A = {a}, B = {b}, P = {c}"
            )));
        }
        Ok(Self {
            a,
            b,
            c,
            x: params.q_gamma(),
            y: params.p_gamma(),
            gq: params.gamma_q(),
            gp: params.gamma_p(),
        })
    }

    fn s_star(&self) -> f64 {
        let (x, y) = (self.x, self.y);
        ((2.0 - x) * self.a / ((y - x) * self.gp * self.c)).powf(1.0 / (y - 2.0))
    }

    fn mu_threshold(&self) -> f64 {
        let (x, y) = (self.x, self.y);
        let e1 = (y - x) / (y - 2.0);
        let e2 = (2.0 - x) / (y - 2.0);
        let log_ct = (y - 2.0).ln() + e2 * (2.0 - x).ln()
            - self.gq.ln()
            - e1 * (y - x).ln()
            - e2 * self.gp.ln();
        // e1 = 1 + e2; ratios keep the rounding independent of the scale of A, B, P
        log_ct.exp() * (self.a / self.b) * (self.a / self.c).powf(e2)
    }

    /// `h(s) - target` and its derivative.
    fn h(&self, s: f64, target: f64) -> (f64, f64) {
        let (x, y) = (self.x, self.y);
        let lo = s.powf(2.0 - x);
        let hi = s.powf(y - x);
        let val = lo * self.a - self.gp * hi * self.c - target;
        let der = ((2.0 - x) * lo * self.a - (y - x) * self.gp * hi * self.c) / s;
        (val, der)
    }

    /// Root of `h - target` in `[lo, hi]` given a sign change.
    fn root(&self, mut lo: f64, mut hi: f64, target: f64) -> f64 {
        let f_lo = self.h(lo, target).0;
        while (hi - lo) > BISECTION_TOL * hi {
            let mid = 0.5 * (lo + hi);
            let f_mid = self.h(mid, target).0;
            if (f_mid > 0.0) == (f_lo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (a, b) = (lo, hi);
        let mut s = 0.5 * (lo + hi);
        for _ in 0..50 {
            let (f, df) = self.h(s, target);
            if df == 0.0 {
                break;
            }
            let next = (s - f / df).clamp(a, b);
            let done = (next - s).abs() <= NEWTON_TOL * s;
            s = next;
            if done {
                break;
            }
        }
        s
    }
}

/// Location of the maximum of `h`; the degenerate fiber point on `P0`.
pub fn s_star(np: &NormProfile, params: &Params) -> Result<f64> {
    Ok(Fiber::new(np, params)?.s_star())
}

/// `mu_p(u) = C~ A^{(y-x)/(y-2)} / (B P^{(2-x)/(y-2)})`.
pub fn mu_threshold(np: &NormProfile, params: &Params) -> Result<f64> {
    Ok(Fiber::new(np, params)?.mu_threshold())
}

/// The constant `C~` of [`mu_threshold`], i.e. its value at `A = B = P = 1`.
pub fn threshold_constant(params: &Params) -> f64 {
    mu_threshold(&NormProfile::from_triple(1.0, 1.0, 1.0, 1.0), params)
        .expect("unit profile is nondegenerate")
}

/// Classifies the fiber of `u` and locates its critical points.
pub fn fiber_roots(np: &NormProfile, params: &Params) -> Result<FiberingReport> {
    if !(params.mu > 0.0) {
        return Err(param("fiber roots need mu > 0"));
    }
    let f = Fiber::new(np, params)?;
    let mu_p = f.mu_threshold();
    let mu = params.mu;
    if (mu - mu_p).abs() <= DEGENERACY_BAND * mu_p {
        return Ok(FiberingReport::Degenerate { t_zero: f.s_star() });
    }
    if mu > mu_p {
        return Ok(FiberingReport::NoCritical);
    }
    let target = mu * f.gq * f.b;
    let ss = f.s_star();
    let mut lo = 0.5 * ss;
    while f.h(lo, target).0 >= 0.0 {
        lo *= 0.5;
    }
    let t_plus = f.root(lo, ss, target);
    let mut hi = 2.0 * (f.a / (f.gp * f.c)).powf(1.0 / (f.y - 2.0));
    while f.h(hi, target).0 >= 0.0 {
        hi *= 2.0;
    }
    let t_minus = f.root(ss, hi, target);
    Ok(FiberingReport::TwoCritical { t_plus, t_minus })
}

/// Critical point on the requested branch, if the fiber has two.
pub fn branch_point(np: &NormProfile, params: &Params, branch: Branch) -> Result<Option<f64>> {
    Ok(match fiber_roots(np, params)? {
        FiberingReport::TwoCritical { t_plus, t_minus } => Some(match branch {
            Branch::Plus => t_plus,
            Branch::Minus => t_minus,
        }),
        _ => None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub t: f64,
    pub dt_dmu: f64,
    pub dpsi_dmu: f64,
}

/// Implicit derivatives of `t(mu)` and `Psi((u)_t)` along a branch.
pub fn fiber_sensitivity(np: &NormProfile, params: &Params, branch: Branch) -> Result<Sensitivity> {
    let f = Fiber::new(np, params)?;
    let t = branch_point(np, params, branch)?.ok_or_else(|| {
        Error::Singular("fiber has no critical point on the requested branch".into())
    })?;
    let mu = params.mu;
    let tx = t.powf(f.x);
    let ty = t.powf(f.y);
    let den = 2.0 * t * t * f.a - mu * f.x * f.gq * tx * f.b - f.y * f.gp * ty * f.c;
    let scale = t * t * f.a + mu * tx * f.b + ty * f.c;
    if den.abs() <= 1e-12 * scale {
        return Err(Error::Singular("fiber is degenerate at this mu".into()));
    }
    Ok(Sensitivity {
        t,
        dt_dmu: f.gq * tx * t * f.b / den,
        dpsi_dmu: -tx * f.b / params.q,
    })
}

/// `(t+, t-)` below the threshold, extended by `(s_*, s_*)` at it.
pub fn tau_extension(np: &NormProfile, params: &Params) -> Result<(f64, f64)> {
    match fiber_roots(np, params)? {
        FiberingReport::TwoCritical { t_plus, t_minus } => Ok((t_plus, t_minus)),
        FiberingReport::Degenerate { t_zero } => Ok((t_zero, t_zero)),
        FiberingReport::NoCritical => Err(Error::OutOfDomain(
            "mu exceeds the fiber threshold of this function".into(),
        )),
    }
}
