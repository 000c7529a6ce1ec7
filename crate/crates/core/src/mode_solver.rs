//! Solvers for the radial mode problems
//!
//! ```text
//! -a'' - (N-1) a'/r + lambda_k a / r^2  +-  p a' / (beta r + t r^xi) = b(r),
//! a(1) = 0,
//! ```
//!
//! on `0 < r <= 1`, in the weighted space where `r^sigma |a| + r^(sigma+1) |a'|`
//! stays bounded.
//!
//! Three routes are provided:
//!
//! * `solve_k0` — `k = 0`, any `t >= 0`, both drift signs, via the
//!   integrating factor `mu_t` and nested integrals. The remaining
//!   homogeneous degree of freedom is pinned per sign: for the `-p` drift the
//!   `1/mu` mode grows like `r^(sigma+2-N-p/beta)` and is inadmissible, so the
//!   flux `mu a'` is anchored at the origin; for the `+p` drift the flux is
//!   anchored at `R_t = t^(-1/(xi-1))` (clamped to 1 for `t <= 1`), which is
//!   the choice that keeps the bound uniform in `t`. The anchor in use is
//!   recorded on every solution.
//! * `solve_mode_t0` — `k >= 1`, `t = 0`: the equidimensional equation,
//!   solved by variation of parameters on the homogeneous pair `r^(gamma+-)`,
//!   with the integration constants forced by `a(1) = 0` and admissibility at
//!   the origin.
//! * `solve_mode_bvp` — `k >= 1`, any `t >= 0`: second-order finite
//!   differences in `x = ln r` on refined grids with Richardson
//!   extrapolation; the inner boundary is closed by a Robin condition on the
//!   deviation from a local particular solution, which excludes the
//!   inadmissible decaying-side exponent.
//!
//! Fields supplied on the grid are extended below `r_min` (where an anchor
//! requires it) by the critical-rate power law `b(r0) (r/r0)^(-(sigma+2))`;
//! the extension is linear in `b`, exact for the critical family, and its
//! contribution is bounded by the local weighted size of `b` at the inner
//! edge.

use std::sync::Arc;

use serde::Serialize;

use crate::cumint::{self, LogWeight};
use crate::error::{Error, Result};
use crate::grid::{self, DerivKind, RadialField, RadialGrid};
use crate::params::{mode_exponents, KappaSign, Params};
use crate::quad;

#[derive(Debug, Clone, Copy)]
pub struct ModeSpec {
    pub params: Params,
    pub k: u32,
    pub sign: KappaSign,
    pub t: f64,
}

impl ModeSpec {
    pub fn new(params: Params, k: u32, sign: KappaSign, t: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Domain(format!("mode parameter t = {t} must be finite and >= 0")));
        }
        Ok(ModeSpec { params, k, sign, t })
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda_k(self.k)
    }

    /// Drift denominator `beta r + t r^xi`.
    pub fn drift_denom(&self, r: f64) -> f64 {
        r * (self.params.beta + self.t * ((self.params.xi - 1.0) * r.ln()).exp())
    }

    fn weight(&self) -> LogWeight<'_> {
        LogWeight::IntegratingFactor {
            params: &self.params,
            sign: self.sign,
            t: self.t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    IntegratingFactor,
    VariationOfParameters,
    BvpCollocation,
}

/// Where the flux `mu a'` is pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    Origin,
    Radius(f64),
    Boundary,
}

#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub spec: ModeSpec,
    pub a: RadialField,
    pub rhs: RadialField,
    pub method: SolveMethod,
    pub anchor: Option<Anchor>,
}

/// `ln mu_t(r)`; exact sum of two logarithm terms, safe for all `r >= r_min`
/// and `t <= 1e6`.
pub fn log_mu(spec: &ModeSpec, r: f64) -> f64 {
    spec.weight().log_w(r)
}

pub fn mu_factor(spec: &ModeSpec, r: f64) -> f64 {
    log_mu(spec, r).exp()
}

/// Logarithmic derivative of the integrating factor,
/// `d ln mu / dr = (N-1)/r - s_kappa p/(beta r + t r^xi)`.
pub fn log_mu_prime(spec: &ModeSpec, r: f64) -> f64 {
    (spec.params.n() - 1.0) / r - spec.sign.factor() * spec.params.p / spec.drift_denom(r)
}

fn anchor_for(params: &Params, sign: KappaSign, t: f64) -> Anchor {
    match sign {
        KappaSign::Minus => Anchor::Origin,
        KappaSign::Plus => {
            if t <= 1.0 {
                return Anchor::Boundary;
            }
            let rt = t.powf(-1.0 / (params.xi - 1.0));
            if rt >= 1.0 {
                Anchor::Boundary
            } else {
                Anchor::Radius(rt)
            }
        }
    }
}

/// `(1/w(r0)) * Integral_{lower}^{r0} w(tau) btilde(tau) dtau` where `btilde`
/// is the critical-rate extension of `b` below the grid; `lower = None`
/// integrates from the origin.
fn subgrid_seed(
    spec: &ModeSpec,
    weight: &LogWeight<'_>,
    b0: f64,
    r0: f64,
    lower: Option<f64>,
) -> Result<f64> {
    if b0 == 0.0 {
        return Ok(0.0);
    }
    let q = &spec.params;
    let x0 = r0.ln();
    let lw0 = weight.log_w(r0);
    let sig2 = q.sigma + 2.0;
    let mut f = |x: f64| {
        let r = x.exp();
        (weight.log_w(r) - lw0 - sig2 * (x - x0) + x).exp() * b0
    };
    let x_lo = match lower {
        Some(rt) => rt.ln(),
        None => {
            // integrand decays like e^{q_dec (x - x0)} toward the origin
            let s1 = q.p / (q.p - 1.0);
            let q_dec = q.n() + q.p / q.beta - q.sigma - 2.0;
            x0 - (45.0 + s1 * ((spec.t + q.beta) / q.beta).ln()) / q_dec.max(0.01)
        }
    };
    if x_lo >= x0 {
        return Ok(0.0);
    }
    let (coarse, _) = quad::gk15(&mut f, x_lo, x0);
    let tol = 1e-13 * (1.0 + coarse.abs());
    Ok(quad::adaptive_gk(&mut f, x_lo, x0, tol, 4096)?.value)
}

/// k = 0 solve by the integrating factor: `a'(r) = -(1/mu) Int_anchor^r mu b`,
/// `a(r) = Int_r^1 (1/mu(s)) Int_anchor^s mu b ds`.
pub fn solve_k0(spec: &ModeSpec, b: &RadialField) -> Result<ModeSolution> {
    if spec.k != 0 {
        return Err(Error::Domain(format!(
            "integrating-factor solver handles k = 0 only, got k = {}",
            spec.k
        )));
    }
    let grid = b.grid().clone();
    let r = grid.nodes();
    let h = grid.log_step();
    let n = grid.len();
    let weight = spec.weight();
    let lw = weight.logs_on(&grid);
    let bv = b.values();
    let anchor = anchor_for(&spec.params, spec.sign, spec.t);

    // flux[k] = (1/mu_k) Int_anchor^{r_k} mu b = -a'(r_k)
    let flux: Vec<f64> = match anchor {
        Anchor::Origin => {
            let seed = subgrid_seed(spec, &weight, bv[0], r[0], None)?;
            cumint::prefix_scaled(r, &lw, bv, h, seed)
        }
        Anchor::Boundary => cumint::suffix_scaled(r, &lw, bv, h, 0.0)
            .iter()
            .map(|v| -v)
            .collect(),
        Anchor::Radius(rt) if rt <= r[0] => {
            let seed = subgrid_seed(spec, &weight, bv[0], r[0], Some(rt))?;
            cumint::prefix_scaled(r, &lw, bv, h, seed)
        }
        Anchor::Radius(rt) => {
            let xs: Vec<f64> = (0..n).map(|j| grid.log_node(j)).collect();
            let x_rt = rt.ln();
            let m = (((x_rt - xs[0]) / h).floor() as usize).min(n - 2);
            let partial = cumint::partial_segment_tail(r, &lw, bv, &xs, m, x_rt);
            let low = cumint::suffix_scaled(&r[..=m + 1], &lw[..=m + 1], &bv[..=m + 1], h, 0.0);
            let high = cumint::prefix_scaled(&r[m + 1..], &lw[m + 1..], &bv[m + 1..], h, partial);
            let mut out = vec![0.0; n];
            for k in 0..=m {
                out[k] = partial * (lw[m + 1] - lw[k]).exp() - low[k];
            }
            out[m + 1..n].copy_from_slice(&high);
            out
        }
    };

    let aprime: Vec<f64> = flux.iter().map(|v| -v).collect();
    // a(r_k) = Int_{r_k}^1 (-a') ds, so a(1) = 0 exactly
    let neg_ap: Vec<f64> = aprime.iter().map(|v| -v).collect();
    let zeros = vec![0.0; n];
    let avals = cumint::suffix_scaled(r, &zeros, &neg_ap, h, 0.0);
    let a = RadialField::with_deriv(grid, avals, aprime, DerivKind::Quadrature)?;
    Ok(ModeSolution {
        spec: *spec,
        a,
        rhs: b.clone(),
        method: SolveMethod::IntegratingFactor,
        anchor: Some(anchor),
    })
}

/// k >= 1, t = 0: variation of parameters on the homogeneous pair
/// `r^(gamma+-)`. With `D = gamma_plus - gamma_minus`,
///
/// ```text
/// a(r) = (1/D) [ r^g+ Int_r^1 b tau^(1-g+) dtau
///              + r^g- Int_0^r b tau^(1-g-) dtau
///              - r^g+ Int_0^1 b tau^(1-g-) dtau ].
/// ```
pub fn solve_mode_t0(spec: &ModeSpec, b: &RadialField) -> Result<ModeSolution> {
    if spec.k == 0 {
        return Err(Error::Domain("variation-of-parameters solver requires k >= 1".into()));
    }
    if spec.t != 0.0 {
        return Err(Error::Domain(format!("variation-of-parameters solver requires t = 0, got t = {}", spec.t)));
    }
    let exps = mode_exponents(&spec.params, spec.k, spec.sign);
    let (gp, gm) = (exps.gamma_plus, exps.gamma_minus);
    let d = gp - gm;
    let grid = b.grid().clone();
    let r = grid.nodes();
    let h = grid.log_step();
    let n = grid.len();
    let bv = b.values();
    let sigma = spec.params.sigma;

    let wp = LogWeight::Power { exponent: 1.0 - gp };
    let wm = LogWeight::Power { exponent: 1.0 - gm };
    let lwp = wp.logs_on(&grid);
    let lwm = wm.logs_on(&grid);

    // u1[k] = r^(g+ - 1) Int_{r_k}^1 b tau^(1-g+)
    let u1 = cumint::suffix_scaled(r, &lwp, bv, h, 0.0);
    // u2[k] = r^(g- - 1) Int_0^{r_k} b tau^(1-g-); closed-form seed for the
    // critical-rate extension below the grid
    let seed = bv[0] * r[0] / (-(sigma + gm));
    let u2 = cumint::prefix_scaled(r, &lwm, bv, h, seed);
    let ctil = u2[n - 1]; // Int_0^1 b tau^(1-g-)

    let mut avals = vec![0.0; n];
    let mut aprime = vec![0.0; n];
    for j in 0..n {
        let x = grid.log_node(j);
        let hom = (gp * x).exp() * ctil;
        avals[j] = (r[j] * (u1[j] + u2[j]) - hom) / d;
        aprime[j] = (gp * u1[j] + gm * u2[j] - gp * ((gp - 1.0) * x).exp() * ctil) / d;
    }
    // boundary value cancels exactly
    avals[n - 1] = 0.0;
    let a = RadialField::with_deriv(grid, avals, aprime, DerivKind::Quadrature)?;
    Ok(ModeSolution {
        spec: *spec,
        a,
        rhs: b.clone(),
        method: SolveMethod::VariationOfParameters,
        anchor: None,
    })
}

fn thomas_solve(
    mut sub: Vec<f64>,
    mut diag: Vec<f64>,
    sup: Vec<f64>,
    mut rhs: Vec<f64>,
) -> Result<Vec<f64>> {
    let n = diag.len();
    for i in 1..n {
        let pivot = diag[i - 1];
        if !pivot.is_finite() || pivot.abs() < 1e-300 {
            return Err(Error::SingularMatrix(format!(
                "zero pivot at row {} of {}",
                i - 1,
                n
            )));
        }
        let w = sub[i] / pivot;
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
        sub[i] = 0.0;
    }
    if diag[n - 1].abs() < 1e-300 {
        return Err(Error::SingularMatrix(format!("zero pivot at last row of {n}")));
    }
    let mut x = vec![0.0; n];
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
    }
    Ok(x)
}

/// Cubic interpolation of field samples onto a `factor`-times refined grid,
/// in the uniform log coordinate.
fn interp_log_cubic(b: &RadialField, fine: &Arc<RadialGrid>, factor: usize) -> Vec<f64> {
    let coarse = b.grid();
    let bv = b.values();
    let nc = coarse.len();
    let hc = coarse.log_step();
    let x0 = coarse.log_node(0);
    fine.nodes()
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if i % factor == 0 {
                return bv[i / factor];
            }
            let x = fine.log_node(i);
            let pos = (x - x0) / hc;
            let j = (pos.floor() as usize).min(nc - 2);
            let js = j.saturating_sub(1).min(nc - 4);
            let mut acc = 0.0;
            for a in 0..4 {
                let mut l = 1.0;
                for c in 0..4 {
                    if c != a {
                        let xa = x0 + (js + a) as f64 * hc;
                        let xc = x0 + (js + c) as f64 * hc;
                        l *= (x - xc) / (xa - xc);
                    }
                }
                acc += l * bv[js + a];
            }
            acc
        })
        .collect()
}

/// Robin data for the inner closure: the deviation of the solution from a
/// reference particular solution must follow the admissible exponent
/// `gplus`. The reference is the admissible variation-of-parameters solution
/// of the operator with the drift coefficient frozen at the inner node
/// (exactly the true operator when `t = 0`), so the map `b -> datum` is
/// linear and the closure is exact in the equidimensional case.
///
/// Returns the right-hand side of `a_x(x0) - gplus a(x0) = f0` (derivative in
/// `x = ln r`).
fn robin_data(
    gi: &RadialGrid,
    bi: &[f64],
    sigma: f64,
    gplus: f64,
    gminus: f64,
) -> f64 {
    let r = gi.nodes();
    let h = gi.log_step();
    let d = gplus - gminus;
    let wp = LogWeight::Power {
        exponent: 1.0 - gplus,
    };
    let wm = LogWeight::Power {
        exponent: 1.0 - gminus,
    };
    let lwp = wp.logs_on(gi);
    let lwm = wm.logs_on(gi);
    // u1 = r0^(g+ - 1) Int_{r0}^1 b tau^(1-g+)
    let u1 = cumint::suffix_scaled(r, &lwp, bi, h, 0.0)[0];
    // u2 at r0 is the critical-rate sub-grid seed; the full prefix closes
    // Int_0^1 b tau^(1-g-)
    let seed = bi[0] * r[0] / (-(sigma + gminus));
    let ctil = *cumint::prefix_scaled(r, &lwm, bi, h, seed)
        .last()
        .expect("nonempty grid");
    let x0 = gi.log_node(0);
    let r0 = r[0];
    let ap_val = (r0 * (u1 + seed) - (gplus * x0).exp() * ctil) / d;
    let ap_slope = (gplus * u1 + gminus * seed - gplus * ((gplus - 1.0) * x0).exp() * ctil) / d;
    // slope in x is r a'
    r0 * ap_slope - gplus * ap_val
}

fn bvp_solve_at(spec: &ModeSpec, b: &RadialField, factor: usize) -> Result<Vec<f64>> {
    let q = &spec.params;
    let fine = b.grid().refined(factor)?;
    let bi = interp_log_cubic(b, &fine, factor);
    let n = fine.len();
    let h = fine.log_step();
    let lambda = spec.lambda();
    let sk = spec.sign.factor();
    let qcoef = |x: f64| -> f64 {
        -(q.n() - 2.0) + sk * q.p / (q.beta + spec.t * ((q.xi - 1.0) * x).exp())
    };

    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for j in 1..n - 1 {
        let x = fine.log_node(j);
        let qj = qcoef(x);
        sub[j] = -1.0 / (h * h) - qj / (2.0 * h);
        diag[j] = 2.0 / (h * h) + lambda;
        sup[j] = -1.0 / (h * h) + qj / (2.0 * h);
        let rj = fine.node(j);
        rhs[j] = rj * rj * bi[j];
    }
    diag[n - 1] = 1.0;
    rhs[n - 1] = 0.0;

    let x0 = fine.log_node(0);
    let q0 = qcoef(x0);
    let disc = (q0 * q0 + 4.0 * lambda).sqrt();
    let gplus = 0.5 * (q0 + disc);
    let gminus = 0.5 * (q0 - disc);
    let f0 = robin_data(&fine, &bi, q.sigma, gplus, gminus);
    // (-3 a0 + 4 a1 - a2)/(2h) - gplus a0 = f0
    let c0 = -3.0 / (2.0 * h) - gplus;
    let c1 = 4.0 / (2.0 * h);
    let c2 = -1.0 / (2.0 * h);
    if sup[1].abs() < 1e-300 {
        return Err(Error::SingularMatrix("degenerate superdiagonal at inner closure".into()));
    }
    let fac = c2 / sup[1];
    diag[0] = c0 - fac * sub[1];
    sup[0] = c1 - fac * diag[1];
    rhs[0] = f0 - fac * rhs[1];

    let x = thomas_solve(sub, diag, sup, rhs)?;
    Ok(x.iter().step_by(factor).copied().collect())
}

/// k >= 1, any t: finite-difference collocation (Richardson-extrapolated 2x /
/// 4x refinements) with the admissible inner closure.
pub fn solve_mode_bvp(spec: &ModeSpec, b: &RadialField) -> Result<ModeSolution> {
    if spec.k == 0 {
        return Err(Error::Domain("collocation solver requires k >= 1".into()));
    }
    let grid = b.grid().clone();
    let a2 = bvp_solve_at(spec, b, 2)?;
    let a4 = bvp_solve_at(spec, b, 4)?;
    let avals: Vec<f64> = a2.iter().zip(&a4).map(|(c, f)| (4.0 * f - c) / 3.0).collect();
    let dlog = grid::deriv_log_hi(&avals, grid.log_step());
    let aprime: Vec<f64> = dlog.iter().zip(grid.nodes()).map(|(d, &r)| d / r).collect();
    let a = RadialField::with_deriv(grid, avals, aprime, DerivKind::Quadrature)?;
    Ok(ModeSolution {
        spec: *spec,
        a,
        rhs: b.clone(),
        method: SolveMethod::BvpCollocation,
        anchor: None,
    })
}

impl ModeSolution {
    /// Residual of the mode equation with `a''` reconstructed by
    /// finite-differencing the stored `a'` sequence.
    pub fn residual(&self) -> RadialField {
        let grid = self.a.grid();
        let r = grid.nodes();
        let ap = self.a.deriv().expect("solutions carry derivatives");
        let av = self.a.values();
        let bv = self.rhs.values();
        let dap = grid::deriv_log_hi(ap, grid.log_step());
        let q = &self.spec.params;
        let lambda = self.spec.lambda();
        let sk = self.spec.sign.factor();
        let values: Vec<f64> = (0..grid.len())
            .map(|j| {
                let rj = r[j];
                let second = dap[j] / rj;
                -second - (q.n() - 1.0) * ap[j] / rj + lambda * av[j] / (rj * rj)
                    + sk * q.p * ap[j] / self.spec.drift_denom(rj)
                    - bv[j]
            })
            .collect();
        RadialField::new(grid.clone(), values).expect("residual finite")
    }

    /// `||residual||_Y / max(||b||_Y, eps)`, measured over the nodes where
    /// centered differencing applies (the one-sided edge rows differentiate
    /// accumulated quadrature output and only report stencil noise).
    pub fn weighted_residual(&self) -> f64 {
        let sigma = self.spec.params.sigma;
        let res = self.residual();
        let denom = grid::norm_y(&self.rhs, sigma).max(1e-30);
        let grid_arc = self.a.grid();
        let n = grid_arc.len();
        let worst = (3..n - 3)
            .map(|j| grid_arc.node(j).powf(sigma + 2.0) * res.values()[j].abs())
            .fold(0.0, f64::max);
        worst / denom
    }

    pub fn norm_x(&self) -> f64 {
        grid::norm_x(&self.a, self.spec.params.sigma).expect("solution has derivative")
    }

    pub fn norm_y_rhs(&self) -> f64 {
        grid::norm_y(&self.rhs, self.spec.params.sigma)
    }

    /// Largest node value of `r^(sigma+1) |a'|`.
    pub fn sup_scaled_deriv(&self) -> f64 {
        let s = self.spec.params.sigma;
        self.a
            .grid()
            .nodes()
            .iter()
            .zip(self.a.deriv().expect("derivative"))
            .map(|(&r, &d)| r.powf(s + 1.0) * d.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub k: u32,
    pub sign: KappaSign,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma_plus_plus_sigma: f64,
    pub gamma_minus_plus_sigma: f64,
    /// Exponents of the drift-free limit operator (roots of
    /// `g^2 + (N-2) g - lambda_k`).
    pub limit_gamma_plus: f64,
    pub limit_gamma_minus: f64,
    pub limit_straddles_minus_sigma: bool,
    /// k = 0 only: growth exponent `sigma+2-N-p/beta` of the weighted
    /// `1/mu` mode for the `-p` drift, and its algebraic identity value.
    pub k0_flux_exponent: Option<f64>,
    pub k0_flux_identity: Option<f64>,
    /// k = 0 only: `sigma+2-N`, the analogous exponent of the limit operator.
    pub k0_limit_exponent: Option<f64>,
    pub trivial_in_admissible_class: bool,
}

/// Classifies the kernel of the mode operator on the admissible class from
/// the indicial exponents alone.
pub fn kernel_classification(params: &Params, k: u32, sign: KappaSign) -> KernelReport {
    let e = mode_exponents(params, k, sign);
    let sigma = params.sigma;
    let lambda = params.lambda_k(k);
    // drift-free limit exponents
    let bcoef = params.n() - 2.0;
    let disc = (bcoef * bcoef + 4.0 * lambda).sqrt();
    let lim_minus = (-bcoef - disc) / 2.0;
    let lim_plus = if lim_minus == 0.0 { 0.0 } else { -lambda / lim_minus };
    let straddles = lim_minus + sigma < 0.0 && lim_plus + sigma > 0.0;
    let (k0_flux, k0_id, k0_lim, trivial) = if k == 0 {
        let flux = sigma + 2.0 - params.n() - params.p / params.beta;
        let ident = (params.xi - 1.0) * (-1.0 - params.p) / (params.p - 1.0);
        let lim = sigma + 2.0 - params.n();
        let trivial = match sign {
            // weighted 1/mu mode grows (exponent < 0): excluded, so only the
            // constant remains and the boundary condition kills it
            KappaSign::Minus => flux < 0.0,
            // the 1/mu mode is admissible here; the solver pins it by anchor
            KappaSign::Plus => false,
        };
        (Some(flux), Some(ident), Some(lim), trivial)
    } else {
        let trivial = e.gamma_minus + sigma <= -1.0 && e.gamma_plus + sigma > 0.0;
        (None, None, None, trivial)
    };
    KernelReport {
        k,
        sign,
        gamma_plus: e.gamma_plus,
        gamma_minus: e.gamma_minus,
        gamma_plus_plus_sigma: e.gamma_plus + sigma,
        gamma_minus_plus_sigma: e.gamma_minus + sigma,
        limit_gamma_plus: lim_plus,
        limit_gamma_minus: lim_minus,
        limit_straddles_minus_sigma: straddles,
        k0_flux_exponent: k0_flux,
        k0_flux_identity: k0_id,
        k0_limit_exponent: k0_lim,
        trivial_in_admissible_class: trivial,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{deriv_log6, norm_x, RadialGrid};
    use crate::oracles;
    use crate::params::{derive_params, rel_err_guarded};

    fn params() -> Params {
        derive_params(3, 1.6).unwrap()
    }

    #[test]
    fn mu_normalization_and_t0_degeneration() {
        let q = params();
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            for t in [0.0, 2.0, 1e4] {
                let spec = ModeSpec::new(q, 0, sign, t).unwrap();
                assert_eq!(mu_factor(&spec, 1.0), 1.0);
                assert!(mu_factor(&spec, 1e-6) > 0.0);
            }
        }
        let spec = ModeSpec::new(q, 0, KappaSign::Minus, 0.0).unwrap();
        let r = 0.37_f64;
        let want = r.powf(q.n() - 1.0 + q.p / q.beta);
        assert!((mu_factor(&spec, r) - want).abs() < 1e-14 * want);
    }

    #[test]
    fn mu_log_derivative_matches_drift() {
        // independent FD check that d ln mu / dr equals the ODE drift
        let g = RadialGrid::geometric(1e-6, 512).unwrap();
        let q = params();
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            for t in [0.0, 7.0, 1e3] {
                let spec = ModeSpec::new(q, 0, sign, t).unwrap();
                let lm: Vec<f64> = g.nodes().iter().map(|&r| log_mu(&spec, r)).collect();
                let d = deriv_log6(&lm, g.log_step());
                for j in 3..g.len() - 3 {
                    let r = g.node(j);
                    let want = log_mu_prime(&spec, r) * r; // d/dx = r d/dr
                    assert!(
                        (d[j] - want).abs() <= 1e-8 * (1.0 + want.abs()),
                        "sign {:?} t {t} r {r}: {} vs {want}",
                        sign,
                        d[j]
                    );
                }
            }
        }
    }

    #[test]
    fn mu_product_rule_oracle() {
        // (mu a')' must reproduce -mu * (mode operator applied to a) for a
        // manufactured smooth a, weighted by r^{sigma+2}
        let g = RadialGrid::geometric(1e-6, 1024).unwrap();
        let q = params();
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            for t in [0.0, 50.0] {
                let defect = crate::verify::mu_product_rule_defect(&q, sign, t, &g).unwrap();
                assert!(defect <= 1e-8, "sign {sign:?} t {t}: {defect:.3e}");
            }
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let g = RadialGrid::geometric(1e-6, 128).unwrap();
        let q = params();
        let b = RadialField::zero(g.clone());
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            let spec = ModeSpec::new(q, 0, sign, 3.0).unwrap();
            let sol = solve_k0(&spec, &b).unwrap();
            assert!(sol.norm_x() == 0.0);
            let spec1 = ModeSpec::new(q, 2, sign, 0.0).unwrap();
            assert!(solve_mode_t0(&spec1, &b).unwrap().norm_x() == 0.0);
            assert!(solve_mode_bvp(&spec1, &b).unwrap().norm_x() <= 1e-14);
        }
    }

    #[test]
    fn k0_rejects_wrong_mode() {
        let g = RadialGrid::geometric(1e-4, 64).unwrap();
        let q = params();
        let b = RadialField::zero(g);
        let spec = ModeSpec::new(q, 1, KappaSign::Plus, 0.0).unwrap();
        assert!(matches!(solve_k0(&spec, &b), Err(Error::Domain(_))));
        let spec0 = ModeSpec::new(q, 0, KappaSign::Plus, 0.0).unwrap();
        assert!(matches!(solve_mode_t0(&spec0, &b), Err(Error::Domain(_))));
        let spec_t = ModeSpec::new(q, 1, KappaSign::Plus, 2.0).unwrap();
        assert!(matches!(solve_mode_t0(&spec_t, &b), Err(Error::Domain(_))));
    }

    #[test]
    fn k0_power_rhs_matches_closed_forms_at_t0() {
        let g = RadialGrid::geometric(1e-6, 2048).unwrap();
        let q = params();
        let b = RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 2.0)).unwrap();
        for sign in [KappaSign::Minus, KappaSign::Plus] {
            let spec = ModeSpec::new(q, 0, sign, 0.0).unwrap();
            let sol = solve_k0(&spec, &b).unwrap();
            let mut worst = 0.0_f64;
            for (j, &r) in g.nodes().iter().enumerate() {
                let (a_exact, ap_exact) = oracles::k0_power_solution_t0(&q, sign, r);
                let weff = rel_err_guarded(sol.a.values()[j], a_exact)
                    .max(rel_err_guarded(sol.a.deriv().unwrap()[j], ap_exact));
                worst = worst.max(weff);
            }
            assert!(worst <= 1e-8, "sign {sign:?}: worst rel err {worst:.3e}");
        }
    }

    #[test]
    fn k0_manufactured_recovery() {
        let g = RadialGrid::geometric(1e-6, 2048).unwrap();
        let q = params();
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            for t in [0.0, 10.0, 1e3] {
                let mm = oracles::manufactured_mode(&q, 0, sign, t, &g).unwrap();
                let spec = ModeSpec::new(q, 0, sign, t).unwrap();
                let sol = solve_k0(&spec, &mm.b).unwrap();
                let diff = sol.a.axpy(-1.0, &mm.a).unwrap();
                let err = norm_x(&diff, q.sigma).unwrap();
                assert!(err <= 1e-6, "sign {sign:?} t {t}: norm_X err {err:.3e}");
            }
        }
    }

    #[test]
    fn no_overflow_for_extreme_t() {
        let g = RadialGrid::geometric(1e-6, 256).unwrap();
        let q = params();
        let b = RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 2.0)).unwrap();
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            let spec = ModeSpec::new(q, 0, sign, 1e6).unwrap();
            for r in [1e-6, 1e-3, 1.0] {
                assert!(log_mu(&spec, r).is_finite());
            }
            let sol = solve_k0(&spec, &b).unwrap();
            assert!(sol.norm_x().is_finite());
            assert!(sol.a.values().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn k0_boundary_condition_and_tsweep_bracket() {
        let g = RadialGrid::geometric(1e-6, 1024).unwrap();
        let q = params();
        let b = RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 2.0)).unwrap();
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            let mut sups = Vec::new();
            for t in [2.0, 10.0, 1e2, 1e3, 1e4] {
                let spec = ModeSpec::new(q, 0, sign, t).unwrap();
                let sol = solve_k0(&spec, &b).unwrap();
                assert!(sol.a.values()[g.len() - 1].abs() <= 1e-10);
                sups.push(sol.sup_scaled_deriv());
            }
            let max = sups.iter().cloned().fold(0.0, f64::max);
            let min = sups.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(
                max / min < 10.0 && max.is_finite() && min > 0.0,
                "sign {sign:?}: sups {sups:?}"
            );
        }
    }

    #[test]
    fn t0_power_rhs_closed_form() {
        let g = RadialGrid::geometric(1e-6, 2048).unwrap();
        let q = params();
        let b = RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 2.0)).unwrap();
        for sign in [KappaSign::Minus, KappaSign::Plus] {
            for k in [1u32, 2, 5] {
                let spec = ModeSpec::new(q, k, sign, 0.0).unwrap();
                let sol = solve_mode_t0(&spec, &b).unwrap();
                let mut worst = 0.0_f64;
                for (j, &r) in g.nodes().iter().enumerate() {
                    let (ae, ape) = oracles::mode_k_power_solution_t0(&q, k, sign, r);
                    worst = worst
                        .max(rel_err_guarded(sol.a.values()[j], ae))
                        .max(rel_err_guarded(sol.a.deriv().unwrap()[j], ape));
                }
                assert!(worst <= 1e-8, "k {k} sign {sign:?}: rel err {worst:.3e}");
            }
        }
    }

    #[test]
    fn t0_manufactured_recovery_and_tail_exponent() {
        let g = RadialGrid::geometric(1e-6, 2048).unwrap();
        let q = params();
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            for k in [1u32, 2, 5] {
                let mm = oracles::manufactured_mode(&q, k, sign, 0.0, &g).unwrap();
                let spec = ModeSpec::new(q, k, sign, 0.0).unwrap();
                let sol = solve_mode_t0(&spec, &mm.b).unwrap();
                let diff = sol.a.axpy(-1.0, &mm.a).unwrap();
                let err = norm_x(&diff, q.sigma).unwrap();
                assert!(err <= 1e-6, "k {k} sign {sign:?}: {err:.3e}");
            }
        }
        // small-r tail of the power-rhs solution is r^{-sigma}: no gamma_minus
        // component (log-log slope within 0.01 of the admissible rate)
        let b = RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 2.0)).unwrap();
        let spec = ModeSpec::new(q, 1, KappaSign::Minus, 0.0).unwrap();
        let sol = solve_mode_t0(&spec, &b).unwrap();
        let v = sol.a.values();
        let slope = (v[40].abs().ln() - v[0].abs().ln()) / (40.0 * g.log_step());
        assert!(
            (slope + q.sigma).abs() < 0.01,
            "tail slope {slope} vs -sigma = {}",
            -q.sigma
        );
    }

    #[test]
    fn bvp_matches_t0_solver() {
        let g = RadialGrid::geometric(1e-6, 1024).unwrap();
        let q = params();
        let shapes: Vec<Box<dyn Fn(f64) -> f64>> = vec![
            Box::new(move |r: f64| r.powf(-q.sigma - 2.0)),
            Box::new(move |r: f64| r.powf(-q.sigma - 1.5) * (1.0 + 0.3 * r)),
            Box::new(move |r: f64| r.powf(-q.sigma - 2.0) * (1.0 - 0.5 * r + 0.25 * r * r)),
            Box::new(|r: f64| 1.0 + r),
            Box::new(move |r: f64| r.powf(-q.sigma) * (2.0 - r)),
        ];
        for (i, shape) in shapes.iter().enumerate() {
            let b = RadialField::from_fn(g.clone(), shape).unwrap();
            let spec = ModeSpec::new(q, 1, KappaSign::Minus, 0.0).unwrap();
            let exact = solve_mode_t0(&spec, &b).unwrap();
            let approx = solve_mode_bvp(&spec, &b).unwrap();
            let diff = approx.a.axpy(-1.0, &exact.a).unwrap();
            let err = norm_x(&diff, q.sigma).unwrap();
            let scale = exact.norm_x().max(1.0);
            assert!(err / scale <= 1e-5, "field {i}: {err:.3e} (scale {scale:.3e})");
        }
    }

    #[test]
    fn bvp_residual_and_positive_t() {
        let g = RadialGrid::geometric(1e-6, 1024).unwrap();
        let q = params();
        let b = RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 2.0)).unwrap();
        for t in [0.0, 10.0, 1e3] {
            for sign in [KappaSign::Plus, KappaSign::Minus] {
                let spec = ModeSpec::new(q, 2, sign, t).unwrap();
                let sol = solve_mode_bvp(&spec, &b).unwrap();
                let wr = sol.weighted_residual();
                assert!(wr <= 1e-6, "t {t} sign {sign:?}: residual {wr:.3e}");
                assert!(sol.a.values()[g.len() - 1].abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn bvp_refinement_convergence() {
        let q = params();
        let b_of = |g: &std::sync::Arc<RadialGrid>| {
            RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 2.0) * (1.0 - 0.7 * r)).unwrap()
        };
        let err_at = |m: usize| {
            let g = RadialGrid::geometric(1e-4, m).unwrap();
            let b = b_of(&g);
            let spec = ModeSpec::new(q, 1, KappaSign::Minus, 0.0).unwrap();
            let exact = solve_mode_t0(&spec, &b).unwrap();
            let approx = solve_mode_bvp(&spec, &b).unwrap();
            let diff = approx.a.axpy(-1.0, &exact.a).unwrap();
            norm_x(&diff, q.sigma).unwrap()
        };
        let e1 = err_at(128);
        let e2 = err_at(256);
        assert!(
            e1 / e2 > 3.0,
            "expected at least 4x-ish error reduction per doubling: {e1:.3e} -> {e2:.3e}"
        );
    }

    #[test]
    fn solver_linearity() {
        let g = RadialGrid::geometric(1e-6, 512).unwrap();
        let q = params();
        let b1 = RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 2.0)).unwrap();
        let b2 = RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 1.0) * (1.0 - r)).unwrap();
        let mix = b1.scaled(2.0).axpy(-3.0, &b2).unwrap();
        let check = |sa: &RadialField, sb: &RadialField, sm: &RadialField| {
            let combo = sa.scaled(2.0).axpy(-3.0, sb).unwrap();
            let diff = combo.axpy(-1.0, sm).unwrap();
            let scale = norm_x(&combo, q.sigma).unwrap().max(1.0);
            norm_x(&diff, q.sigma).unwrap() / scale
        };
        let spec0 = ModeSpec::new(q, 0, KappaSign::Minus, 5.0).unwrap();
        let e0 = check(
            &solve_k0(&spec0, &b1).unwrap().a,
            &solve_k0(&spec0, &b2).unwrap().a,
            &solve_k0(&spec0, &mix).unwrap().a,
        );
        assert!(e0 <= 1e-10, "k0 linearity {e0:.3e}");
        let spec1 = ModeSpec::new(q, 1, KappaSign::Plus, 0.0).unwrap();
        let e1 = check(
            &solve_mode_t0(&spec1, &b1).unwrap().a,
            &solve_mode_t0(&spec1, &b2).unwrap().a,
            &solve_mode_t0(&spec1, &mix).unwrap().a,
        );
        assert!(e1 <= 1e-10, "t0 linearity {e1:.3e}");
        let e2 = check(
            &solve_mode_bvp(&spec1, &b1).unwrap().a,
            &solve_mode_bvp(&spec1, &b2).unwrap().a,
            &solve_mode_bvp(&spec1, &mix).unwrap().a,
        );
        assert!(e2 <= 1e-10, "bvp linearity {e2:.3e}");
    }

    #[test]
    fn kernel_classification_reports() {
        let q = params();
        let r1 = kernel_classification(&q, 1, KappaSign::Minus);
        assert!(r1.gamma_minus_plus_sigma <= -1.0 && r1.gamma_plus_plus_sigma > 0.0);
        assert!((r1.gamma_minus_plus_sigma - (-1.71)).abs() < 0.02);
        assert!((r1.gamma_plus_plus_sigma - 1.51).abs() < 0.02);
        assert!(r1.trivial_in_admissible_class);
        assert!(r1.limit_straddles_minus_sigma);

        let r0 = kernel_classification(&q, 0, KappaSign::Minus);
        let flux = r0.k0_flux_exponent.unwrap();
        assert!(flux < 0.0);
        assert!((flux - r0.k0_flux_identity.unwrap()).abs() < 1e-12);
        assert!(r0.k0_limit_exponent.unwrap() < 0.0);
        assert!(r0.trivial_in_admissible_class);

        let r0p = kernel_classification(&q, 0, KappaSign::Plus);
        assert!(!r0p.trivial_in_admissible_class);
    }
}
