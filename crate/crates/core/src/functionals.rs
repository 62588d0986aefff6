//! Energy, fibering map and Pohozaev bookkeeping in terms of norm profiles.
//!
//! With `A = |grad u|^2`, `B = |u|_q^q`, `P = |u|_p^p` the energy is
//! `Psi(u) = A/2 - mu B/q - P/p` and the fiber `s -> Psi((u)_s)` of the
//! L^2-preserving dilation `(u)_s = s^{N/2} u(s x)` is
//!
//! `Phi(s) = s^2 A/2 - mu s^{q g_q} B/q - s^{p g_p} P/p`,  `g_k = N(k-2)/(2k)`.
//!
//! Every quantity here is a closed-form expression in `(A, B, P)`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::radial::NormProfile;

/// Default relative tolerance for manifold classification.
pub const CLASSIFY_TOL: f64 = 1e-8;

/// Problem data `(N, q, p, a, mu)` with `2 < q < 2 + 4/N < p <= 2*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub dim: usize,
    pub q: f64,
    pub p: f64,
    pub mass: f64,
    pub mu: f64,
}

impl Params {
    pub fn new(dim: usize, q: f64, p: f64, mass: f64, mu: f64) -> Result<Self> {
        let out = Self { dim, q, p, mass, mu };
        out.validate()?;
        Ok(out)
    }

    /// The critical problem `p = 2*`.
    pub fn critical(dim: usize, q: f64, mass: f64, mu: f64) -> Result<Self> {
        Self::new(dim, q, critical_exponent(dim)?, mass, mu)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 3 {
            return Err(param(format!("dimension must be at least 3, got {}", self.dim)));
        }
        let n = self.dim as f64;
        let bar = 2.0 + 4.0 / n;
        let crit = 2.0 * n / (n - 2.0);
        if !(self.q > 2.0 && self.q < bar) {
            return Err(param(format!("need 2 < q < {bar}, got q = {}", self.q)));
        }
        if !(self.p > bar && self.p <= crit) {
            return Err(param(format!("need {bar} < p <= {crit}, got p = {}", self.p)));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(param(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(param(format!("mu must be nonnegative, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        self.mu = mu;
        self.validate()?;
        Ok(self)
    }

    pub fn with_p(mut self, p: f64) -> Result<Self> {
        self.p = p;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mass(mut self, mass: f64) -> Result<Self> {
        self.mass = mass;
        self.validate()?;
        Ok(self)
    }

    pub fn two_star(&self) -> f64 {
        let n = self.dim as f64;
        2.0 * n / (n - 2.0)
    }

    pub fn is_critical(&self) -> bool {
        self.p == self.two_star()
    }

    pub fn gamma_q(&self) -> f64 {
        gamma(self.dim, self.q)
    }

    /// Exactly one in the critical case.
    pub fn gamma_p(&self) -> f64 {
        if self.is_critical() {
            1.0
        } else {
            gamma(self.dim, self.p)
        }
    }

    /// `q g_q`, which lies in `(0, 2)`.
    pub fn q_gamma(&self) -> f64 {
        self.q * self.gamma_q()
    }

    /// `p g_p`, which lies in `(2, 2*]`.
    pub fn p_gamma(&self) -> f64 {
        if self.is_critical() {
            self.p
        } else {
            self.p * self.gamma_p()
        }
    }

    /// The top-order Lebesgue term of a profile.
    pub fn upper(&self, np: &NormProfile) -> f64 {
        if self.is_critical() {
            np.mass2s
        } else {
            np.massp
        }
    }
}

/// `g_k = N (k - 2) / (2k)`.
pub fn gamma(dim: usize, k: f64) -> f64 {
    let n = dim as f64;
    n * (k - 2.0) / (2.0 * k)
}

pub fn critical_exponent(dim: usize) -> Result<f64> {
    if dim < 3 {
        return Err(param(format!("dimension must be at least 3, got {dim}")));
    }
    let n = dim as f64;
    Ok(2.0 * n / (n - 2.0))
}

/// `Psi(u) = A/2 - mu B/q - P/p`.
pub fn energy(np: &NormProfile, params: &Params) -> f64 {
    0.5 * np.grad2 - params.mu * np.massq / params.q - params.upper(np) / params.p
}

/// Value and first two derivatives of the fiber at `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberValue {
    pub phi: f64,
    pub dphi: f64,
    pub d2phi: f64,
}

pub fn fibering(np: &NormProfile, params: &Params, s: f64) -> Result<FiberValue> {
    if !(s.is_finite() && s > 0.0) {
        return Err(param(format!("fiber variable must be positive, got {s}")));
    }
    let (a, b, c) = (np.grad2, np.massq, params.upper(np));
    let (qg, pg, mu) = (params.q_gamma(), params.p_gamma(), params.mu);
    let (q, p) = (params.q, params.p);
    let sq = s.powf(qg);
    let sp = s.powf(pg);
    Ok(FiberValue {
        phi: 0.5 * s * s * a - mu * sq * b / q - sp * c / p,
        dphi: s * a - mu * qg * sq * b / (q * s) - pg * sp * c / (p * s),
        d2phi: a - mu * qg * (qg - 1.0) * sq * b / (q * s * s) - pg * (pg - 1.0) * sp * c / (p * s * s),
    })
}

/// `G(u) = A - mu g_q B - g_p P`; vanishes on the Pohozaev set.
pub fn pohozaev_residual(np: &NormProfile, params: &Params) -> f64 {
    np.grad2 - params.mu * params.gamma_q() * np.massq - params.gamma_p() * params.upper(np)
}

/// `A + mu B + P`, the natural size of `G` and `D`.
pub fn residual_scale(np: &NormProfile, params: &Params) -> f64 {
    np.grad2 + params.mu * np.massq + params.upper(np)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Plus,
    Zero,
    Minus,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldClass {
    pub kind: ManifoldKind,
    /// `D = 2A - mu q g_q^2 B - p g_p^2 P`, the sign that splits the set.
    pub discriminant: f64,
    /// Relative Pohozaev residual `|G| / (A + mu B + P)`.
    pub residual: f64,
}

/// Places `u` in `P+`, `P0`, `P-`, or off the Pohozaev set.
pub fn classify(np: &NormProfile, params: &Params, tol: f64) -> ManifoldClass {
    let scale = residual_scale(np, params);
    let g = pohozaev_residual(np, params);
    let gq = params.gamma_q();
    let gp = params.gamma_p();
    let d = 2.0 * np.grad2
        - params.mu * params.q * gq * gq * np.massq
        - params.p * gp * gp * params.upper(np);
    let residual = if scale > 0.0 { g.abs() / scale } else { g.abs() };
    let kind = if residual > tol {
        ManifoldKind::Off
    } else if d.abs() <= tol * scale {
        ManifoldKind::Zero
    } else if d > 0.0 {
        ManifoldKind::Plus
    } else {
        ManifoldKind::Minus
    };
    ManifoldClass { kind, discriminant: d, residual }
}
