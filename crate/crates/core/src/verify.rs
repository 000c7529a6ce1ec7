//! Independent certification of constructed solutions and of the standalone
//! pointwise inequalities: full-system residuals, positivity and blow-up
//! windows, decay in `t`, the three gradient-power inequalities, and the
//! explicit lower bound on the scaled profile.
//!
//! Every check here avoids the construction path it certifies: residual
//! second derivatives come from finite differences of sampled data, the
//! inequality suite uses seeded random sampling, and the profile bounds are
//! evaluated from closed forms.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::{picard, KappaSpec, SolutionPair};
use crate::grid::{self, RadialField, RadialGrid};
use crate::params::Params;
use crate::profile::{LimitEstimate, ProfileSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualMode {
    /// Analytic profile part plus finite differences of the stored
    /// correction derivative; reduces to the closed-form scalar residual
    /// when the corrections vanish.
    CorrectionFd,
    /// Second derivative of the assembled solution values by the 3-point
    /// nonuniform stencil.
    FullFd,
}

#[derive(Debug)]
pub struct SystemResidualReport {
    pub residual_u: RadialField,
    pub residual_v: RadialField,
    pub weighted_u: f64,
    pub weighted_v: f64,
    pub mode: ResidualMode,
}

/// Residuals of both equations of the system at a constructed pair:
/// `-u'' - (N-1) u'/r - (1+kappa_1)|v'|^p` and symmetrically.
pub fn system_residual(
    params: &Params,
    pair: &SolutionPair,
    kappa1: &KappaSpec,
    kappa2: &KappaSpec,
    mode: ResidualMode,
) -> Result<SystemResidualReport> {
    let grid_arc = pair.u.grid().clone();
    let r = grid_arc.nodes();
    let n = grid_arc.len();
    let spec = ProfileSpec::new(*params, pair.t)?;
    let up = pair.u.deriv().ok_or(Error::MissingDerivative("u'"))?;
    let vp = pair.v.deriv().ok_or(Error::MissingDerivative("v'"))?;

    let second_of = |field: &RadialField, corr: &RadialField| -> Result<Vec<f64>> {
        match mode {
            ResidualMode::FullFd => Ok(grid::fd_second_derivative(field).values().to_vec()),
            ResidualMode::CorrectionFd => {
                let cd = corr.deriv().ok_or(Error::MissingDerivative("correction'"))?;
                let dlog = grid::deriv_log_hi(cd, grid_arc.log_step());
                Ok((0..n)
                    .map(|j| spec.w_second(r[j]) + dlog[j] / r[j])
                    .collect())
            }
        }
    };
    let udd = second_of(&pair.u, &pair.phi)?;
    let vdd = second_of(&pair.v, &pair.psi)?;

    let n1 = params.n() - 1.0;
    let p = params.p;
    let mut res_u = Vec::with_capacity(n);
    let mut res_v = Vec::with_capacity(n);
    let mut rhs_u = Vec::with_capacity(n);
    let mut rhs_v = Vec::with_capacity(n);
    for j in 0..n {
        let rj = r[j];
        let src_u = (1.0 + kappa1.eval(rj)) * vp[j].abs().powf(p);
        let src_v = (1.0 + kappa2.eval(rj)) * up[j].abs().powf(p);
        res_u.push(-udd[j] - n1 * up[j] / rj - src_u);
        res_v.push(-vdd[j] - n1 * vp[j] / rj - src_v);
        rhs_u.push(src_u);
        rhs_v.push(src_v);
    }
    let sigma = params.sigma;
    let res_u = RadialField::new(grid_arc.clone(), res_u)?;
    let res_v = RadialField::new(grid_arc.clone(), res_v)?;
    let den_u = grid::norm_y(&RadialField::new(grid_arc.clone(), rhs_u)?, sigma).max(1e-30);
    let den_v = grid::norm_y(&RadialField::new(grid_arc.clone(), rhs_v)?, sigma).max(1e-30);
    // the classical residual is undefined where the coefficients have
    // corners; skip nodes whose stencil spans one
    let mut knots = kappa1.breakpoints();
    knots.extend(kappa2.breakpoints());
    let h = grid_arc.log_step();
    let keep = |j: usize| {
        let x = grid_arc.log_node(j);
        knots.iter().all(|&k| (x - k.ln()).abs() > 4.0 * h)
    };
    let norm_kept = |f: &RadialField| {
        (0..grid_arc.len())
            .filter(|&j| keep(j))
            .map(|j| grid_arc.node(j).powf(sigma + 2.0) * f.values()[j].abs())
            .fold(0.0, f64::max)
    };
    Ok(SystemResidualReport {
        weighted_u: norm_kept(&res_u) / den_u,
        weighted_v: norm_kept(&res_v) / den_v,
        residual_u: res_u,
        residual_v: res_v,
        mode,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub min_u: f64,
    pub min_v: f64,
    /// Scaled-profile window over the first two decades, widened by the ball
    /// radius and the limit bracket.
    pub c_window_low: f64,
    pub c_window_high: f64,
    pub limit_estimate: f64,
    pub limit_bracket: f64,
    pub scaled_u_min: f64,
    pub scaled_u_max: f64,
    pub sup_scaled_diff_u: f64,
    pub sup_scaled_diff_v: f64,
}

/// Positivity of `u, v` at every node, the blow-up window check that
/// `r^sigma u` stays inside the scaled-profile range over the first two
/// decades widened by the ball radius (the gap `|r^sigma u - r^sigma w_t|`
/// is at most `R` by the construction; the profile range itself carries the
/// limit estimate toward the origin), and `sup r^sigma |u - w| <= R`.
pub fn positivity_and_blowup(
    params: &Params,
    pair: &SolutionPair,
    profile_limit: &LimitEstimate,
) -> Result<PositivityReport> {
    let grid_arc = pair.u.grid();
    let r = grid_arc.nodes();
    let sigma = params.sigma;
    for (field, _name) in [(&pair.u, "u"), (&pair.v, "v")] {
        for (j, &val) in field.values().iter().enumerate().take(grid_arc.len() - 1) {
            if val <= 0.0 {
                return Err(Error::PositivityViolation { r: r[j], value: val });
            }
        }
    }
    let min_u = pair.u.values()[..grid_arc.len() - 1]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let min_v = pair.v.values()[..grid_arc.len() - 1]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);

    let spec = ProfileSpec::new(*params, pair.t)?;
    let w = spec.w_field(grid_arc)?;

    let r_hi = grid_arc.r_min() * 100.0;
    let mut smin = f64::INFINITY;
    let mut smax = f64::NEG_INFINITY;
    let mut wmin = f64::INFINITY;
    let mut wmax = f64::NEG_INFINITY;
    for (j, &rj) in r.iter().enumerate() {
        if rj > r_hi {
            break;
        }
        let s = rj.powf(sigma) * pair.u.values()[j];
        smin = smin.min(s);
        smax = smax.max(s);
        let ws = rj.powf(sigma) * w.values()[j];
        wmin = wmin.min(ws);
        wmax = wmax.max(ws);
    }
    let c_lo = wmin.min(profile_limit.estimate - profile_limit.bracket) - pair.r_ball;
    let c_hi = wmax.max(profile_limit.estimate + profile_limit.bracket) + pair.r_ball;
    if !(c_lo > 0.0) {
        return Err(Error::Certificate(format!(
            "blow-up window lower edge {c_lo:.6e} is not positive"
        )));
    }
    if smin < c_lo || smax > c_hi {
        return Err(Error::Certificate(format!(
            "scaled solution [{smin:.6e}, {smax:.6e}] outside window [{c_lo:.6e}, {c_hi:.6e}]"
        )));
    }
    let du = pair.u.axpy(-1.0, &w)?;
    let dv = pair.v.axpy(-1.0, &w)?;
    let sup_diff = |d: &RadialField| {
        d.grid()
            .nodes()
            .iter()
            .zip(d.values())
            .map(|(&rr, &vv)| rr.powf(sigma) * vv.abs())
            .fold(0.0, f64::max)
    };
    let sup_scaled_diff_u = sup_diff(&du);
    let sup_scaled_diff_v = sup_diff(&dv);
    let slack = pair.r_ball + 1e-12;
    if sup_scaled_diff_u > slack || sup_scaled_diff_v > slack {
        return Err(Error::Certificate(format!(
            "corrections exceed the ball: {sup_scaled_diff_u:.3e} / {sup_scaled_diff_v:.3e} > {slack:.3e}"
        )));
    }
    Ok(PositivityReport {
        min_u,
        min_v,
        c_window_low: c_lo,
        c_window_high: c_hi,
        limit_estimate: profile_limit.estimate,
        limit_bracket: profile_limit.bracket,
        scaled_u_min: smin,
        scaled_u_max: smax,
        sup_scaled_diff_u,
        sup_scaled_diff_v,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayEntry {
    pub t: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    pub profile_bound: f64,
    pub bound_total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub rho: f64,
    pub entries: Vec<DecayEntry>,
    pub strictly_decreasing: bool,
    pub below_bound: bool,
}

/// Closed-form tail bound `sup_{r>=rho} w_t <= t^(-1/(p-1)) Int_rho^1 y^(-xi/(p-1)) dy`.
pub fn profile_tail_bound(params: &Params, t: f64, rho: f64) -> f64 {
    let e1 = params.xi * (params.sigma + 1.0);
    let integral = (rho.powf(1.0 - e1) - 1.0) / (e1 - 1.0);
    t.powf(-(params.sigma + 1.0)) * integral
}

/// Decay report assembled from already-constructed pairs (in increasing `t`
/// order).
pub fn decay_from_pairs(params: &Params, rho: f64, pairs: &[SolutionPair]) -> Result<DecayReport> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("rho = {rho} must lie in (0, 1)")));
    }
    let entries: Vec<DecayEntry> = pairs
        .iter()
        .map(|pair| {
            let sup_of = |f: &RadialField| {
                f.grid()
                    .nodes()
                    .iter()
                    .zip(f.values())
                    .filter(|(&rr, _)| rr >= rho)
                    .map(|(_, &v)| v.abs())
                    .fold(0.0, f64::max)
            };
            let profile_bound = profile_tail_bound(params, pair.t, rho);
            DecayEntry {
                t: pair.t,
                sup_u: sup_of(&pair.u),
                sup_v: sup_of(&pair.v),
                profile_bound,
                bound_total: profile_bound + pair.r_ball * rho.powf(-params.sigma),
            }
        })
        .collect();
    let strictly_decreasing = entries
        .windows(2)
        .all(|w| w[1].sup_u < w[0].sup_u && w[1].sup_v < w[0].sup_v);
    let below_bound = entries
        .iter()
        .all(|e| e.sup_u <= e.bound_total && e.sup_v <= e.bound_total);
    Ok(DecayReport {
        rho,
        entries,
        strictly_decreasing,
        below_bound,
    })
}

/// Constructs pairs for each `t` and checks `sup_{r>=rho}` of both components
/// decreases strictly and stays below the explicit profile bound plus the
/// ball contribution `R rho^(-sigma)`.
#[allow(clippy::too_many_arguments)]
pub fn decay_in_t(
    params: &Params,
    grid: &Arc<RadialGrid>,
    kappa1: &KappaSpec,
    kappa2: &KappaSpec,
    rho: f64,
    t_list: &[f64],
    r_ball: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DecayReport> {
    if t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("t list must increase".into()));
    }
    let pairs: Vec<Result<SolutionPair>> = t_list
        .par_iter()
        .map(|&t| Ok(picard(params, grid, t, kappa1, kappa2, r_ball, tol, max_iter)?.0))
        .collect();
    let pairs: Result<Vec<SolutionPair>> = pairs.into_iter().collect();
    decay_from_pairs(params, rho, &pairs?)
}

// ---------------------------------------------------------------------------
// pointwise gradient-power inequalities
// ---------------------------------------------------------------------------

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `|x+y|^p - |x|^p - p |x|^(p-2) x . y`, scale-stably: factored as
/// `|x|^p [ (1+S)^(p/2) - 1 - p w ]` with `S = 2w + |u|^2`, `u = y/|x|`,
/// `w = x.y/|x|^2`. The term with exponent exactly one is evaluated
/// algebraically, which keeps the `p = 2` identity exact.
fn remainder_lhs(p: f64, x: &[f64], y: &[f64]) -> f64 {
    let nx2 = dot(x, x);
    if nx2 == 0.0 {
        return norm(y).powf(p);
    }
    let w = dot(x, y) / nx2;
    let u2 = dot(y, y) / nx2;
    let s = 2.0 * w + u2;
    let g = if p == 2.0 {
        u2
    } else if 1.0 + s > 0.0 {
        f64::exp_m1(0.5 * p * f64::ln_1p(s)) - p * w
    } else {
        -1.0 - p * w
    };
    nx2.powf(0.5 * p) * g
}

/// `|x+y|^p - |x+z|^p` via the exact difference-of-squares factorization of
/// the norms, stable when `y` and `z` are close.
fn shift_difference_lhs(p: f64, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    let xz: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
    let nxz2 = dot(&xz, &xz);
    if nxz2 == 0.0 {
        let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
        return norm(&xy).powf(p);
    }
    let diff: Vec<f64> = y.iter().zip(z).map(|(a, b)| a - b).collect();
    let two_x_y_z: Vec<f64> = x
        .iter()
        .zip(y.iter().zip(z))
        .map(|(a, (b, c))| 2.0 * a + b + c)
        .collect();
    let num = dot(&two_x_y_z, &diff); // |x+y|^2 - |x+z|^2 exactly
    nxz2.powf(0.5 * p) * f64::exp_m1(0.5 * p * f64::ln_1p(num / nxz2))
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityCase {
    pub p: f64,
    pub dim: usize,
    pub samples: usize,
    pub sup_remainder: f64,
    pub sup_difference: f64,
    pub sup_shift: f64,
    pub sup_remainder_doubled: f64,
    pub sup_difference_doubled: f64,
    pub sup_shift_doubled: f64,
    pub skipped: usize,
}

impl InequalityCase {
    pub fn max_change_on_doubling(&self) -> f64 {
        let rel = |a: f64, b: f64| if a > 0.0 { (b - a) / a } else { 0.0 };
        rel(self.sup_remainder, self.sup_remainder_doubled)
            .max(rel(self.sup_difference, self.sup_difference_doubled))
            .max(rel(self.sup_shift, self.sup_shift_doubled))
    }

    pub fn all_finite(&self) -> bool {
        [
            self.sup_remainder_doubled,
            self.sup_difference_doubled,
            self.sup_shift_doubled,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub cases: Vec<InequalityCase>,
}

fn sample_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    // direction by normalized Gaussian components (Box-Muller), magnitude
    // log-uniform over [1e-6, 1e6]
    let mut v: Vec<f64> = (0..dim)
        .map(|_| {
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect();
    let n = norm(&v).max(1e-300);
    let scale = 10f64.powf(rng.random_range(-6.0..6.0)) / n;
    for c in &mut v {
        *c *= scale;
    }
    v
}

/// Empirical suprema of the three inequality ratios over `n_samples` seeded
/// triples per dimension, with the doubled-sample suprema for the stability
/// check. Degenerate denominators are skipped and counted.
pub fn inequality_suite(
    p: f64,
    dims: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<InequalityReport> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::Domain(format!("inequality suite needs 1 < p <= 2, got {p}")));
    }
    if n_samples < 1000 {
        return Err(Error::Domain("need at least 1e3 samples".into()));
    }
    let cases: Vec<InequalityCase> = dims
        .par_iter()
        .map(|&dim| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (dim as u64).wrapping_mul(0x9e37_79b9));
            let mut first = [0.0f64; 3];
            let mut full = [0.0f64; 3];
            let mut skipped = 0usize;
            for i in 0..2 * n_samples {
                let x = sample_vector(&mut rng, dim);
                let y = sample_vector(&mut rng, dim);
                let z = sample_vector(&mut rng, dim);
                let ny = norm(&y);
                let nz = norm(&z);
                let dyz = norm(&y.iter().zip(&z).map(|(a, b)| a - b).collect::<Vec<_>>());
                let mut ratios = [f64::NAN; 3];
                if ny > 0.0 {
                    ratios[0] = remainder_lhs(p, &x, &y).abs() / ny.powf(p);
                } else {
                    skipped += 1;
                }
                if dyz > 0.0 {
                    let lhs2 = (remainder_lhs(p, &x, &y) - remainder_lhs(p, &x, &z)).abs();
                    ratios[1] = lhs2 / ((ny.powf(p - 1.0) + nz.powf(p - 1.0)) * dyz);
                    let nx = norm(&x);
                    let lhs3 = shift_difference_lhs(p, &x, &y, &z).abs();
                    ratios[2] = lhs3
                        / ((nx.powf(p - 1.0) + ny.powf(p - 1.0) + nz.powf(p - 1.0)) * dyz);
                } else {
                    skipped += 1;
                }
                for (slot, r) in ratios.iter().enumerate() {
                    if r.is_nan() {
                        continue;
                    }
                    full[slot] = full[slot].max(*r);
                    if i < n_samples {
                        first[slot] = first[slot].max(*r);
                    }
                }
            }
            InequalityCase {
                p,
                dim,
                samples: n_samples,
                sup_remainder: first[0],
                sup_difference: first[1],
                sup_shift: first[2],
                sup_remainder_doubled: full[0],
                sup_difference_doubled: full[1],
                sup_shift_doubled: full[2],
                skipped,
            }
        })
        .collect();
    Ok(InequalityReport { cases })
}

/// Direct access to the three stable left-hand sides, for the exact-case
/// checks.
pub fn inequality_lhs(p: f64, x: &[f64], y: &[f64], z: &[f64]) -> (f64, f64, f64) {
    (
        remainder_lhs(p, x, y),
        remainder_lhs(p, x, y) - remainder_lhs(p, x, z),
        shift_difference_lhs(p, x, y, z),
    )
}

/// Worst weighted defect of the product rule `(mu a')' = -mu L(a)` for a
/// manufactured smooth `a`, with the left side reconstructed by high-order
/// finite differences of the flux sequence. Certifies the integrating-factor
/// exponents against the mode operator itself.
pub fn mu_product_rule_defect(
    params: &Params,
    sign: crate::params::KappaSign,
    t: f64,
    grid: &Arc<RadialGrid>,
) -> Result<f64> {
    use crate::mode_solver::{log_mu, ModeSpec};
    let spec = ModeSpec::new(*params, 0, sign, t)?;
    let mm = crate::oracles::manufactured_mode(params, 0, sign, t, grid)?;
    let ap = mm.a.deriv().expect("manufactured derivative");
    let n = grid.len();
    let lm: Vec<f64> = grid.nodes().iter().map(|&r| log_mu(&spec, r)).collect();
    let mid = lm[n / 2];
    let scaled_flux: Vec<f64> = (0..n).map(|j| ap[j] * (lm[j] - mid).exp()).collect();
    let dflux = grid::deriv_log6(&scaled_flux, grid.log_step());
    let denom = 1.0 + grid::norm_y(&mm.b, params.sigma);
    let mut worst = 0.0_f64;
    for j in 3..n - 3 {
        let r = grid.node(j);
        let lhs = dflux[j] / r * (mid - lm[j]).exp();
        let rhs = -mm.b.values()[j];
        worst = worst.max(r.powf(params.sigma + 2.0) * (lhs - rhs).abs());
    }
    Ok(worst / denom)
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    pub t: f64,
    pub z_cut: f64,
    pub c_star: f64,
    pub min_margin: f64,
}

/// Default cut radius `min(1, t^(-1/(xi-1)))/2`, inside which
/// `t y^(xi-1) < 1` holds with room to spare.
pub fn default_z_cut(params: &Params, t: f64) -> f64 {
    if t <= 1.0 {
        0.5
    } else {
        t.powf(-1.0 / (params.xi - 1.0)).min(1.0) / 2.0
    }
}

/// Verifies `r^sigma w_t(r) >= C* (1 - (r/z)^sigma)` on `(r_lo, z_cut)` with
/// the explicit constant `C* = (1+beta)^(-1/(p-1)) / sigma`. When the cut
/// radius sits below `r_lo` (large `t`), the check interval follows it
/// downward: the quadrature does not need grid support.
pub fn profile_lower_bound(
    params: &Params,
    t: f64,
    z_cut: f64,
    r_lo: f64,
) -> Result<LowerBoundReport> {
    let r_lo = r_lo.min(z_cut * 1e-6);
    if !(z_cut > r_lo && z_cut <= 1.0) {
        return Err(Error::Domain(format!("z_cut = {z_cut} out of range")));
    }
    let spec = ProfileSpec::new(*params, t)?;
    let sigma = params.sigma;
    let c_star = (1.0 + params.beta).powf(-1.0 / (params.p - 1.0)) / sigma;
    let mut min_margin = f64::INFINITY;
    let steps = 200;
    for i in 0..steps {
        let r = r_lo * (z_cut / r_lo).powf(i as f64 / steps as f64);
        let lhs = r.powf(sigma) * spec.w_value(r)?;
        let rhs = c_star * (1.0 - (r / z_cut).powf(sigma));
        let margin = lhs - rhs;
        if margin < -1e-12 * (1.0 + rhs.abs()) {
            return Err(Error::BoundViolation { r, margin });
        }
        min_margin = min_margin.min(margin);
    }
    Ok(LowerBoundReport {
        t,
        z_cut,
        c_star,
        min_margin,
    })
}
