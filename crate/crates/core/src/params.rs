//! Problem constants and the exponent algebra derived from them.
//!
//! Everything downstream is a function of the dimension `N` and the gradient
//! exponent `p` with `N >= 3` and `N/(N-1) < p < 2` (strict). The derived
//! quantities are
//!
//! ```text
//! xi    = (p-1)(N-1)            (> 1)
//! beta  = (p-1)/(xi-1)          (> 0)
//! sigma = (2-p)/(p-1)           (> 0, blow-up rate r^{-sigma})
//! C_beta = beta^{-1/(p-1)}
//! ```
//!
//! together with the sphere-Laplacian eigenvalues `lambda_k = k(k+N-2)` and
//! the indicial roots `gamma_k^{+/-}` of `g^2 + (N-2-kappa/beta) g - lambda_k`
//! for the drift strengths `kappa = +p` and `kappa = -p`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs this close to an excluded endpoint are rejected: `beta` diverges as
/// `xi -> 1`, so clamping here keeps every derived quantity finite.
pub const BOUNDARY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n_dim: u32,
    pub p: f64,
    pub xi: f64,
    pub beta: f64,
    pub sigma: f64,
    pub c_beta: f64,
}

/// Sign of the first-order drift term: `Plus` is the operator with `+p`,
/// `Minus` the one with `-p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KappaSign {
    Plus,
    Minus,
}

impl KappaSign {
    pub fn kappa(self, p: f64) -> f64 {
        match self {
            KappaSign::Plus => p,
            KappaSign::Minus => -p,
        }
    }

    /// +1 for `Plus`, -1 for `Minus`.
    pub fn factor(self) -> f64 {
        match self {
            KappaSign::Plus => 1.0,
            KappaSign::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            KappaSign::Plus => "+",
            KappaSign::Minus => "-",
        }
    }
}

impl std::str::FromStr for KappaSign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" | "p" => Ok(KappaSign::Plus),
            "-" | "minus" | "m" => Ok(KappaSign::Minus),
            other => Err(Error::Domain(format!("unknown operator sign `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeExponents {
    pub k: u32,
    pub lambda_k: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub kappa_sign: KappaSign,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SignCertificate {
    pub value_direct: f64,
    pub value_closed_form: f64,
    pub rel_err: f64,
}

/// Relative error guarded against tiny scales: `|a-b| / max(1, |a|, |b|)`.
pub fn rel_err_guarded(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs())
}

pub fn derive_params(n_dim: u32, p: f64) -> Result<Params> {
    if n_dim < 3 {
        return Err(Error::Domain(format!("N = {n_dim} violates N >= 3")));
    }
    let n = f64::from(n_dim);
    let lo = n / (n - 1.0);
    if !p.is_finite() || p <= lo + BOUNDARY_MARGIN {
        return Err(Error::Domain(format!(
            "p = {p} violates p > N/(N-1) = {lo} (strict, margin {BOUNDARY_MARGIN:.0e})"
        )));
    }
    if p >= 2.0 - BOUNDARY_MARGIN {
        return Err(Error::Domain(format!(
            "p = {p} violates p < 2 (strict, margin {BOUNDARY_MARGIN:.0e})"
        )));
    }
    let xi = (p - 1.0) * (n - 1.0);
    let beta = (p - 1.0) / (xi - 1.0);
    let sigma = (2.0 - p) / (p - 1.0);
    let c_beta = beta.powf(-1.0 / (p - 1.0));
    Ok(Params {
        n_dim,
        p,
        xi,
        beta,
        sigma,
        c_beta,
    })
}

impl Params {
    pub fn n(&self) -> f64 {
        f64::from(self.n_dim)
    }

    /// Sphere-Laplacian eigenvalue `lambda_k = k (k + N - 2)`.
    pub fn lambda_k(&self, k: u32) -> f64 {
        let kf = f64::from(k);
        kf * (kf + self.n() - 2.0)
    }

    /// Linear coefficient of the indicial polynomial,
    /// `N - 2 - kappa/beta` for the requested drift sign.
    pub fn indicial_coeff(&self, sign: KappaSign) -> f64 {
        self.n() - 2.0 - sign.kappa(self.p) / self.beta
    }

    /// Value of `g^2 + (N-2-kappa/beta) g - lambda` at `g = gamma`.
    pub fn indicial_poly(&self, sign: KappaSign, lambda: f64, gamma: f64) -> f64 {
        gamma * gamma + self.indicial_coeff(sign) * gamma - lambda
    }

    /// The eight algebraic identities the exponents satisfy; each entry holds
    /// both evaluations and the guarded relative error between them.
    pub fn identity_checks(&self) -> Vec<IdentityCheck> {
        let (n, p) = (self.n(), self.p);
        let (xi, beta, sigma, c_beta) = (self.xi, self.beta, self.sigma, self.c_beta);
        let mk = |name, lhs: f64, rhs: f64| IdentityCheck {
            name,
            lhs,
            rhs,
            rel_err: rel_err_guarded(lhs, rhs),
        };
        vec![
            mk("sigma+1 = 1/(p-1)", sigma + 1.0, 1.0 / (p - 1.0)),
            mk("(sigma+1)p = sigma+2", (sigma + 1.0) * p, sigma + 2.0),
            mk("beta(xi-1) = p-1", beta * (xi - 1.0), p - 1.0),
            mk("N-2-sigma = 1/beta", n - 2.0 - sigma, 1.0 / beta),
            mk(
                "sigma+2-N-p/beta = (xi-1)(-1-p)/(p-1)",
                sigma + 2.0 - n - p / beta,
                (xi - 1.0) * (-1.0 - p) / (p - 1.0),
            ),
            mk(
                "(N-1)p-sigma-2 = (xi-1)p/(p-1)",
                (n - 1.0) * p - sigma - 2.0,
                (xi - 1.0) * p / (p - 1.0),
            ),
            mk("C_beta^(p-1) = 1/beta", c_beta.powf(p - 1.0), 1.0 / beta),
            mk("sigma+3-N+p/beta = xi", sigma + 3.0 - n + p / beta, xi),
        ]
    }

    pub fn max_identity_error(&self) -> f64 {
        self.identity_checks()
            .iter()
            .map(|c| c.rel_err)
            .fold(0.0, f64::max)
    }
}

/// Both indicial roots for mode `k`, ordered `gamma_minus <= gamma_plus`.
///
/// Uses the cancellation-free quadratic formula (larger-magnitude root first,
/// companion root from the product `gamma_plus * gamma_minus = -lambda_k`).
pub fn mode_exponents(params: &Params, k: u32, sign: KappaSign) -> ModeExponents {
    let lambda = params.lambda_k(k);
    let b = params.indicial_coeff(sign);
    let disc = (b * b + 4.0 * lambda).sqrt();
    let (gamma_minus, gamma_plus) = if b >= 0.0 {
        let gm = (-b - disc) / 2.0;
        let gp = if gm == 0.0 { 0.0 } else { -lambda / gm };
        (gm, gp)
    } else {
        let gp = (-b + disc) / 2.0;
        let gm = if gp == 0.0 { 0.0 } else { -lambda / gp };
        (gm, gp)
    };
    ModeExponents {
        k,
        lambda_k: lambda,
        gamma_plus,
        gamma_minus,
        kappa_sign: sign,
    }
}

/// Evaluates `f(-sigma-1)` for `f(g) = g^2 + (N-2+p/beta) g - lambda_1` two
/// ways (direct substitution and the closed form `2p(1-xi)/(p-1)^2`) and
/// requires both to be negative and to agree to 1e-10.
pub fn sign_certificate(params: &Params) -> Result<SignCertificate> {
    let gamma = -(params.sigma + 1.0);
    let lambda_1 = params.lambda_k(1);
    let direct = params.indicial_poly(KappaSign::Minus, lambda_1, gamma);
    let p = params.p;
    let closed = 2.0 * p * (1.0 - params.xi) / ((p - 1.0) * (p - 1.0));
    let rel = rel_err_guarded(direct, closed);
    if !(direct < 0.0) || !(closed < 0.0) {
        return Err(Error::Certificate(format!(
            "f(-sigma-1) must be negative: direct {direct:.6e}, closed form {closed:.6e}"
        )));
    }
    if rel > 1e-10 {
        return Err(Error::Certificate(format!(
            "f(-sigma-1) evaluations disagree: direct {direct:.6e}, closed form {closed:.6e}, \
             rel err {rel:.3e}"
        )));
    }
    Ok(SignCertificate {
        value_direct: direct,
        value_closed_form: closed,
        rel_err: rel,
    })
}
