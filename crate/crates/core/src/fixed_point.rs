//! The nonlinear construction: given nonnegative radial coefficients
//! `kappa_1`, `kappa_2` vanishing at the origin, find corrections
//! `(phi, psi)` with
//!
//! ```text
//! T(phi, psi) = coupled solve of  f = kappa_1 |w' + psi'|^p + I(psi),
//!                                 g = kappa_2 |w' + phi'|^p + I(phi),
//! I(zeta) = |w' + zeta'|^p - |w'|^p + p |w'|^(p-1) zeta',
//! ```
//!
//! iterated from `(0, 0)` until it fixes, and assemble `u = w_t + phi`,
//! `v = w_t + psi`. Parameter selection probes the map directly: the
//! sufficient conditions
//!
//! ```text
//! C (R^p + sup_{B_delta}(k1+k2) + t^(-p/(p-1)) delta^(-(xi-1)p/(p-1))) <= R
//! C (sup_{B_delta}(k1+k2) + 2 R^(p-1) + (t delta^(xi-1))^(-1))        <= 1/2
//! ```
//!
//! are certified with the constant `C` measured from probe applications of
//! the map (the inequalities then reduce to `max ||T|| <= R` and measured
//! contraction `<= 1/2`), and the reported `delta` is the minimizer of the
//! left-hand sides over the search grid.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, RadialField, RadialGrid};
use crate::linear_system::{solve_coupled, CoupledRhs};
use crate::params::Params;
use crate::profile::ProfileSpec;

/// Radial coefficient family: `kappa >= 0`, continuous, `kappa(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KappaSpec {
    /// `kappa(r) = c r^alpha`
    Power { c: f64, alpha: f64 },
    /// `kappa(r) = c min(r/alpha, 1)`
    Ramp { c: f64, alpha: f64 },
    /// piecewise-linear through `(r_i, v_i)`, scaled linearly to 0 below the
    /// first point
    Table { radii: Vec<f64>, values: Vec<f64> },
}

impl KappaSpec {
    pub fn zero() -> Self {
        KappaSpec::Power { c: 0.0, alpha: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KappaSpec::Power { c, alpha } | KappaSpec::Ramp { c, alpha } => {
                if !(*c >= 0.0 && c.is_finite()) {
                    return Err(Error::Domain(format!("kappa amplitude c = {c} must be >= 0")));
                }
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::Domain(format!("kappa exponent alpha = {alpha} must be > 0")));
                }
            }
            KappaSpec::Table { radii, values } => {
                if radii.len() != values.len() || radii.len() < 2 {
                    return Err(Error::Domain("kappa table needs >= 2 matching points".into()));
                }
                if radii.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Domain("kappa table radii must increase".into()));
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Domain("kappa table values must be >= 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            KappaSpec::Power { c, alpha } => c * r.powf(*alpha),
            KappaSpec::Ramp { c, alpha } => c * (r / alpha).min(1.0),
            KappaSpec::Table { radii, values } => {
                if r <= radii[0] {
                    return values[0] * (r / radii[0]);
                }
                if r >= radii[radii.len() - 1] {
                    return values[values.len() - 1];
                }
                let i = radii.partition_point(|&x| x < r).max(1);
                let (r0, r1) = (radii[i - 1], radii[i]);
                let (v0, v1) = (values[i - 1], values[i]);
                v0 + (v1 - v0) * (r - r0) / (r1 - r0)
            }
        }
    }

    /// `sup_{0 < r <= delta} kappa(r)`; exact for the monotone built-ins,
    /// a table maximum otherwise.
    pub fn sup_ball(&self, delta: f64) -> f64 {
        match self {
            KappaSpec::Power { .. } | KappaSpec::Ramp { .. } => self.eval(delta),
            KappaSpec::Table { radii, .. } => {
                let mut best = self.eval(delta);
                for &r in radii.iter().take_while(|&&r| r <= delta) {
                    best = best.max(self.eval(r));
                }
                best
            }
        }
    }

    /// Radii where the coefficient is not differentiable (piecewise-linear
    /// knots, ramp corner); the classical equation residual is undefined
    /// there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            KappaSpec::Power { .. } => Vec::new(),
            KappaSpec::Ramp { alpha, .. } => {
                if *alpha < 1.0 {
                    vec![*alpha]
                } else {
                    Vec::new()
                }
            }
            KappaSpec::Table { radii, .. } => {
                radii.iter().copied().filter(|r| *r < 1.0).collect()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            KappaSpec::Power { c, .. } | KappaSpec::Ramp { c, .. } => *c == 0.0,
            KappaSpec::Table { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }
}

/// Second-order remainder `|1+x|^p - 1 - p x`, evaluated without losing the
/// quadratic leading term for small `x`.
fn power_remainder(p: f64, x: f64) -> f64 {
    let base = 1.0 + x;
    if base > 0.0 {
        f64::exp_m1(p * f64::ln_1p(x)) - p * x
    } else {
        (-base).powf(p) - 1.0 - p * x
    }
}

/// `I(zeta)(r) = |w' + zeta'|^p - |w'|^p + p |w'|^(p-1) zeta'` on the grid;
/// `zeta` must carry a derivative.
pub fn nonlinearity_i(spec: &ProfileSpec, zeta: &RadialField) -> Result<RadialField> {
    let zp = zeta
        .deriv()
        .ok_or(Error::MissingDerivative("nonlinearity needs zeta'"))?;
    let p = spec.params.p;
    let values = zeta
        .grid()
        .nodes()
        .iter()
        .zip(zp)
        .map(|(&r, &d)| {
            let wp = spec.w_prime(r);
            let x = d / wp;
            spec.w_prime_abs_p(r) * power_remainder(p, x)
        })
        .collect();
    RadialField::new(zeta.grid().clone(), values)
}

/// One right-hand side of the map: `kappa |w' + zeta'|^p + I(zeta)`.
pub fn h_field(spec: &ProfileSpec, kappa: &KappaSpec, zeta: &RadialField) -> Result<RadialField> {
    let zp = zeta
        .deriv()
        .ok_or(Error::MissingDerivative("nonlinear data needs zeta'"))?;
    let p = spec.params.p;
    let values = zeta
        .grid()
        .nodes()
        .iter()
        .zip(zp)
        .map(|(&r, &d)| {
            let wp = spec.w_prime(r);
            let grad_p = (wp + d).abs().powf(p);
            let x = d / wp;
            kappa.eval(r) * grad_p + spec.w_prime_abs_p(r) * power_remainder(p, x)
        })
        .collect();
    RadialField::new(zeta.grid().clone(), values)
}

#[derive(Debug, Clone)]
pub struct MapOutput {
    pub phi_hat: RadialField,
    pub psi_hat: RadialField,
    pub norm_y_f: f64,
    pub norm_y_g: f64,
}

/// One application of the nonlinear map.
pub fn apply_map(
    spec: &ProfileSpec,
    kappa1: &KappaSpec,
    kappa2: &KappaSpec,
    phi: &RadialField,
    psi: &RadialField,
) -> Result<MapOutput> {
    let f = h_field(spec, kappa1, psi)?;
    let g = h_field(spec, kappa2, phi)?;
    let sigma = spec.params.sigma;
    let norm_y_f = grid::norm_y(&f, sigma);
    let norm_y_g = grid::norm_y(&g, sigma);
    let sol = solve_coupled(&spec.params, spec.t, &CoupledRhs::new(f, g)?)?;
    Ok(MapOutput {
        phi_hat: sol.phi,
        psi_hat: sol.psi,
        norm_y_f,
        norm_y_g,
    })
}

/// Fixed deterministic probe shapes of unit X-norm on the grid.
fn probe_shapes(params: &Params, grid: &Arc<RadialGrid>) -> Result<Vec<RadialField>> {
    let s = params.sigma;
    let raw = vec![
        RadialField::from_fn_with_deriv(
            grid.clone(),
            move |r| r.powf(-s) * (1.0 - r),
            move |r| -r.powf(-s - 1.0) * (s * (1.0 - r) + r),
        )?,
        RadialField::from_fn_with_deriv(
            grid.clone(),
            move |r| r.powf(-s) * (1.0 - r * r),
            move |r| -r.powf(-s - 1.0) * (s * (1.0 - r * r) + 2.0 * r * r),
        )?,
        RadialField::from_fn_with_deriv(grid.clone(), |r| (1.0 - r) * (1.0 - r), |r| {
            -2.0 * (1.0 - r)
        })?,
    ];
    raw.into_iter()
        .map(|f| {
            let n = grid::norm_x(&f, s)?;
            Ok(f.scaled(1.0 / n))
        })
        .collect()
}

/// Random element of the radius-`scale` ball spanned by the probe shapes.
fn random_ball_member(
    shapes: &[RadialField],
    sigma: f64,
    scale: f64,
    rng: &mut impl Rng,
) -> Result<RadialField> {
    let mut acc = shapes[0].scaled(0.0);
    for s in shapes {
        let c: f64 = rng.random_range(-1.0..1.0);
        acc = acc.axpy(c, s)?;
    }
    let n = grid::norm_x(&acc, sigma)?;
    if n == 0.0 {
        return Ok(acc);
    }
    let u: f64 = rng.random_range(0.3..1.0);
    Ok(acc.scaled(scale * u / n))
}

/// Max ratio of output distance to input distance over sampled pairs in the
/// radius-`r_ball` ball (product X-norm); identical pairs are skipped.
pub fn empirical_contraction(
    spec: &ProfileSpec,
    kappa1: &KappaSpec,
    kappa2: &KappaSpec,
    grid: &Arc<RadialGrid>,
    r_ball: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    let sigma = spec.params.sigma;
    let shapes = probe_shapes(&spec.params, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..n_pairs.max(1) {
        let phi1 = random_ball_member(&shapes, sigma, r_ball, &mut rng)?;
        let psi1 = random_ball_member(&shapes, sigma, r_ball, &mut rng)?;
        let phi2 = random_ball_member(&shapes, sigma, r_ball, &mut rng)?;
        let psi2 = random_ball_member(&shapes, sigma, r_ball, &mut rng)?;
        let din = grid::norm_x(&phi2.axpy(-1.0, &phi1)?, sigma)?
            + grid::norm_x(&psi2.axpy(-1.0, &psi1)?, sigma)?;
        if din < 1e-14 {
            continue;
        }
        let o1 = apply_map(spec, kappa1, kappa2, &phi1, &psi1)?;
        let o2 = apply_map(spec, kappa1, kappa2, &phi2, &psi2)?;
        let dout = grid::norm_x(&o2.phi_hat.axpy(-1.0, &o1.phi_hat)?, sigma)?
            + grid::norm_x(&o2.psi_hat.axpy(-1.0, &o1.psi_hat)?, sigma)?;
        worst = worst.max(dout / din);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub r_ball: f64,
    pub delta: f64,
    pub t: f64,
    /// `R - max ||T(probe)||_X`
    pub into_margin: f64,
    pub contraction: f64,
    /// `1/2 - contraction`
    pub contraction_margin: f64,
    /// measured constants in the two displayed conditions at the reported
    /// `(R, delta, t)`
    pub c_into: f64,
    pub c_contraction: f64,
    pub q_into: f64,
    pub q_contraction: f64,
    /// strict positivity of the assembled pair follows from
    /// `R < min_s s^(sigma+1)|w'(s)| = (t+beta)^(-1/(p-1))`
    pub positivity_cap: f64,
}

/// Largest ball radius compatible with pointwise positivity of `w + phi`:
/// `u(r) = Int_r^1 (|w'| - |phi'|) ds` stays positive when
/// `R < s^(sigma+1) |w'(s)|` for every `s`, whose minimum over `(0, 1]` is
/// `(t + beta)^(-1/(p-1))`.
pub fn positivity_radius_cap(params: &Params, t: f64) -> f64 {
    (t + params.beta).powf(-1.0 / (params.p - 1.0))
}

#[derive(Debug, Clone)]
pub struct SearchBox {
    pub r_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub n_pairs: usize,
    pub seed: u64,
}

impl Default for SearchBox {
    fn default() -> Self {
        SearchBox {
            // half-octave radii: the feasibility window between the
            // positivity cap and the data-driven floor can be narrow
            r_grid: (4..=40).map(|j| 2f64.powf(-0.5 * j as f64)).collect(),
            delta_grid: (2..=24).map(|j| 2f64.powi(-j)).collect(),
            // the sufficient conditions assume t > 1
            t_grid: vec![2.0, 5.0, 10.0, 30.0, 1e2, 3e2, 1e3, 3e3, 1e4, 1e5, 1e6],
            n_pairs: 4,
            seed: 7,
        }
    }
}

fn q_into(params: &Params, k1: &KappaSpec, k2: &KappaSpec, r: f64, delta: f64, t: f64) -> f64 {
    let p = params.p;
    let s1 = p / (p - 1.0);
    r.powf(p)
        + k1.sup_ball(delta)
        + k2.sup_ball(delta)
        + t.powf(-s1) * delta.powf(-(params.xi - 1.0) * s1)
}

fn q_contraction(params: &Params, k1: &KappaSpec, k2: &KappaSpec, r: f64, delta: f64, t: f64) -> f64 {
    k1.sup_ball(delta) + k2.sup_ball(delta) + 2.0 * r.powf(params.p - 1.0)
        + 1.0 / (t * delta.powf(params.xi - 1.0))
}

/// Smallest `t` in the box admitting a certified `(R, delta)`. Within a
/// feasible `t`, the smallest ball radius with comfortable margins wins
/// (`max ||T|| <= 0.8 R`, contraction `<= 0.45`); with no comfortable radius
/// the plainly feasible one with the best margins is kept.
pub fn choose_parameters(
    params: &Params,
    grid: &Arc<RadialGrid>,
    kappa1: &KappaSpec,
    kappa2: &KappaSpec,
    search: &SearchBox,
) -> Result<Certificate> {
    kappa1.validate()?;
    kappa2.validate()?;
    let sigma = params.sigma;
    let shapes = probe_shapes(params, grid)?;
    let mut best_into = f64::NEG_INFINITY;
    let mut best_contr = f64::INFINITY;
    let mut radii = search.r_grid.clone();
    radii.sort_by(f64::total_cmp); // ascending: prefer small balls
    // radii under the positivity cap are strongly preferred (they make
    // pointwise positivity of w + phi automatic); when no capped radius is
    // feasible the search falls back to the into/contraction gates alone and
    // positivity is certified post hoc on the constructed pair
    for respect_cap in [true, false] {
        for &t in &search.t_grid {
            let spec = ProfileSpec::new(*params, t)?;
            let cap = positivity_radius_cap(params, t);
            let mut fallback: Option<Certificate> = None;
            for &r_ball in &radii {
                if respect_cap && r_ball > 0.9 * cap {
                    continue;
                }
                // probe pairs on the boundary of the ball plus the center
            let mut into_max = 0.0_f64;
                let pairs: Vec<(RadialField, RadialField)> = vec![
                    (shapes[0].scaled(0.0), shapes[0].scaled(0.0)),
                    (shapes[0].scaled(r_ball), shapes[0].scaled(r_ball)),
                    (shapes[0].scaled(r_ball), shapes[0].scaled(-r_ball)),
                    (shapes[1].scaled(r_ball), shapes[2].scaled(r_ball)),
                    (shapes[2].scaled(-r_ball), shapes[0].scaled(r_ball)),
                ];
                for (phi, psi) in &pairs {
                    let out = apply_map(&spec, kappa1, kappa2, phi, psi)?;
                    into_max = into_max
                        .max(grid::norm_x(&out.phi_hat, sigma)?)
                        .max(grid::norm_x(&out.psi_hat, sigma)?);
                }
                best_into = best_into.max(r_ball - into_max);
                if into_max > r_ball {
                    continue;
                }
                let contraction = empirical_contraction(
                    &spec,
                    kappa1,
                    kappa2,
                    grid,
                    r_ball,
                    search.n_pairs,
                    search.seed,
                )?;
                best_contr = best_contr.min(contraction);
                if contraction > 0.5 {
                    continue;
                }
                let delta = search
                    .delta_grid
                    .iter()
                    .copied()
                    .min_by(|a, b| {
                        q_contraction(params, kappa1, kappa2, r_ball, *a, t)
                            .total_cmp(&q_contraction(params, kappa1, kappa2, r_ball, *b, t))
                    })
                    .expect("nonempty delta grid");
                let qi = q_into(params, kappa1, kappa2, r_ball, delta, t);
                let qc = q_contraction(params, kappa1, kappa2, r_ball, delta, t);
                let cert = Certificate {
                    r_ball,
                    delta,
                    t,
                    into_margin: r_ball - into_max,
                    contraction,
                    contraction_margin: 0.5 - contraction,
                    c_into: into_max / qi,
                    c_contraction: contraction / qc,
                    q_into: qi,
                    q_contraction: qc,
                    positivity_cap: cap,
                };
                if into_max <= 0.8 * r_ball && contraction <= 0.45 {
                    return Ok(cert);
                }
                let better = match &fallback {
                    None => true,
                    Some(w) => {
                        cert.into_margin.min(cert.contraction_margin)
                            > w.into_margin.min(w.contraction_margin)
                    }
                };
                if better {
                    fallback = Some(cert);
                }
            }
            if let Some(cert) = fallback {
                return Ok(cert);
            }
        }
    }
    Err(Error::SearchExhausted {
        best_into_margin: best_into,
        best_contraction: best_contr,
    })
}

#[derive(Debug, Clone)]
pub struct SolutionPair {
    pub phi: RadialField,
    pub psi: RadialField,
    pub u: RadialField,
    pub v: RadialField,
    pub t: f64,
    pub r_ball: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationEntry {
    pub index: usize,
    pub norm_x_phi: f64,
    pub norm_x_psi: f64,
    pub step_norm: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    pub iterations: Vec<IterationEntry>,
    pub converged: bool,
    pub empirical_contraction: f64,
    pub r_ball: f64,
    pub delta: Option<f64>,
    pub t: f64,
    pub tolerance: f64,
}

/// Picard iteration from `(0, 0)`; errors with `BallEscape` if an iterate
/// leaves the ball and `MaxIterations` if `tol` is not reached.
#[allow(clippy::too_many_arguments)]
pub fn picard(
    params: &Params,
    grid: &Arc<RadialGrid>,
    t: f64,
    kappa1: &KappaSpec,
    kappa2: &KappaSpec,
    r_ball: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(SolutionPair, IterationReport)> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    kappa1.validate()?;
    kappa2.validate()?;
    let spec = ProfileSpec::new(*params, t)?;
    let sigma = params.sigma;
    let mut phi = RadialField::zero(grid.clone());
    let mut psi = RadialField::zero(grid.clone());
    let mut entries: Vec<IterationEntry> = Vec::new();
    let mut prev_step: Option<f64> = None;
    let mut converged = false;
    for index in 1..=max_iter {
        let out = apply_map(&spec, kappa1, kappa2, &phi, &psi)?;
        let step = grid::norm_x(&out.phi_hat.axpy(-1.0, &phi)?, sigma)?
            + grid::norm_x(&out.psi_hat.axpy(-1.0, &psi)?, sigma)?;
        let nphi = grid::norm_x(&out.phi_hat, sigma)?;
        let npsi = grid::norm_x(&out.psi_hat, sigma)?;
        entries.push(IterationEntry {
            index,
            norm_x_phi: nphi,
            norm_x_psi: npsi,
            step_norm: step,
            ratio: prev_step.map(|p| if p > 0.0 { step / p } else { 0.0 }),
        });
        if nphi > r_ball || npsi > r_ball {
            return Err(Error::BallEscape {
                iteration: index,
                norm: nphi.max(npsi),
                r_ball,
            });
        }
        phi = out.phi_hat;
        psi = out.psi_hat;
        prev_step = Some(step);
        if step <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::MaxIterations {
            iterations: max_iter,
            last_step: prev_step.unwrap_or(f64::NAN),
        });
    }
    // contraction estimate: worst tail ratio of successive steps
    let ratios: Vec<f64> = entries.iter().filter_map(|e| e.ratio).collect();
    let tail = ratios.len().saturating_sub(5);
    let empirical = ratios[tail..].iter().copied().fold(0.0, f64::max);
    let w = spec.w_field(grid)?;
    let u = w.axpy(1.0, &phi)?;
    let v = w.axpy(1.0, &psi)?;
    let report = IterationReport {
        iterations: entries,
        converged,
        empirical_contraction: empirical,
        r_ball,
        delta: None,
        t,
        tolerance: tol,
    };
    Ok((
        SolutionPair {
            phi,
            psi,
            u,
            v,
            t,
            r_ball,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{norm_x, norm_y, RadialGrid};
    use crate::params::derive_params;

    fn params() -> Params {
        derive_params(3, 1.6).unwrap()
    }

    fn grid() -> Arc<RadialGrid> {
        RadialGrid::geometric(1e-6, 512).unwrap()
    }

    #[test]
    fn kappa_families() {
        let pw = KappaSpec::Power { c: 0.5, alpha: 0.5 };
        pw.validate().unwrap();
        assert_eq!(pw.eval(0.0), 0.0);
        assert!((pw.eval(0.25) - 0.25).abs() < 1e-15);
        assert_eq!(pw.sup_ball(0.04), pw.eval(0.04));

        let ramp = KappaSpec::Ramp { c: 2.0, alpha: 0.5 };
        assert_eq!(ramp.eval(1.0), 2.0);
        assert_eq!(ramp.eval(0.25), 1.0);

        let tab = KappaSpec::Table {
            radii: vec![0.1, 0.5, 1.0],
            values: vec![0.2, 0.1, 0.3],
        };
        tab.validate().unwrap();
        assert!((tab.eval(0.05) - 0.1).abs() < 1e-15); // linear to zero
        assert!((tab.eval(0.3) - 0.15).abs() < 1e-15);
        assert_eq!(tab.sup_ball(0.6), 0.2);

        assert!(KappaSpec::Power { c: -1.0, alpha: 1.0 }.validate().is_err());
        assert!(KappaSpec::Table {
            radii: vec![0.5, 0.1],
            values: vec![0.0, 0.0]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn nonlinearity_zero_and_pointwise_bound() {
        let q = params();
        let g = grid();
        let spec = ProfileSpec::new(q, 10.0).unwrap();
        let zero = RadialField::zero(g.clone());
        let i0 = nonlinearity_i(&spec, &zero).unwrap();
        assert!(i0.values().iter().all(|&v| v == 0.0));

        // |I| <= C |zeta'|^p with C independent of the field
        let zeta = RadialField::from_fn_with_deriv(
            g.clone(),
            |r| (1.0 - r) * r.powf(-q.sigma),
            |r| -r.powf(-q.sigma - 1.0) * (q.sigma * (1.0 - r) + r),
        )
        .unwrap()
        .scaled(0.05);
        let i = nonlinearity_i(&spec, &zeta).unwrap();
        let zp = zeta.deriv().unwrap();
        // remainder bound constant for 1 < p <= 2 is modest; use 4
        for (j, &v) in i.values().iter().enumerate() {
            let cap = 4.0 * zp[j].abs().powf(q.p);
            assert!(v.abs() <= cap + 1e-300, "node {j}: |I| = {v:.3e} cap {cap:.3e}");
        }
    }

    #[test]
    fn nonlinearity_scaling_is_superlinear() {
        // ||I(eps zeta)||_Y / eps -> 0 with rate eps^(p-1); probed at large t
        // where the increment dominates the profile gradient on the grid
        let q = params();
        let g = grid();
        let spec = ProfileSpec::new(q, 1e6).unwrap();
        let zeta = RadialField::from_fn_with_deriv(
            g.clone(),
            |r| (1.0 - r) * r.powf(-q.sigma),
            |r| -r.powf(-q.sigma - 1.0) * (q.sigma * (1.0 - r) + r),
        )
        .unwrap();
        let ratio_at = |eps: f64| {
            let i = nonlinearity_i(&spec, &zeta.scaled(eps)).unwrap();
            norm_y(&i, q.sigma) / eps
        };
        let r3 = ratio_at(1e-3);
        let r4 = ratio_at(1e-4);
        let drop = r3 / r4;
        let expected = 10f64.powf(q.p - 1.0);
        assert!(
            (drop / expected - 1.0).abs() < 0.2,
            "drop {drop} vs 10^(p-1) = {expected}"
        );
    }

    #[test]
    fn map_fixes_origin_without_kappa() {
        let q = params();
        let g = grid();
        let spec = ProfileSpec::new(q, 100.0).unwrap();
        let zero = KappaSpec::zero();
        let out = apply_map(
            &spec,
            &zero,
            &zero,
            &RadialField::zero(g.clone()),
            &RadialField::zero(g.clone()),
        )
        .unwrap();
        assert_eq!(norm_x(&out.phi_hat, q.sigma).unwrap(), 0.0);
        assert_eq!(norm_x(&out.psi_hat, q.sigma).unwrap(), 0.0);
    }

    #[test]
    fn map_preserves_swap_symmetry() {
        let q = params();
        let g = grid();
        let spec = ProfileSpec::new(q, 100.0).unwrap();
        let k = KappaSpec::Power { c: 0.3, alpha: 1.0 };
        let phi = RadialField::from_fn_with_deriv(g.clone(), |r| 0.01 * (1.0 - r), |_| -0.01)
            .unwrap();
        let out = apply_map(&spec, &k, &k, &phi, &phi).unwrap();
        for j in 0..g.len() {
            assert!(
                (out.phi_hat.values()[j] - out.psi_hat.values()[j]).abs() <= 1e-14,
                "symmetric input maps to symmetric output"
            );
        }
    }

    #[test]
    fn picard_with_zero_kappa_converges_immediately() {
        let q = params();
        let g = grid();
        let zero = KappaSpec::zero();
        let (pair, report) = picard(&q, &g, 100.0, &zero, &zero, 0.125, 1e-8, 10).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations.len(), 1);
        assert_eq!(norm_x(&pair.phi, q.sigma).unwrap(), 0.0);
        // u = v = w
        for j in 0..g.len() {
            assert_eq!(pair.u.values()[j], pair.v.values()[j]);
        }
        assert!(pair.u.values()[g.len() - 1].abs() <= 1e-10);
    }

    #[test]
    fn choose_then_picard_converges_geometrically() {
        let q = params();
        let g = grid();
        let k = KappaSpec::Power { c: 0.5, alpha: 0.5 };
        let cert = choose_parameters(&q, &g, &k, &k, &SearchBox::default()).unwrap();
        assert!(cert.into_margin > 0.0 && cert.contraction <= 0.5);
        let (pair, report) = picard(&q, &g, cert.t, &k, &k, cert.r_ball, 1e-8, 50).unwrap();
        assert!(report.converged);
        assert!(report.empirical_contraction <= 0.9);
        // step norms of a converged run are eventually decreasing
        let steps: Vec<f64> = report.iterations.iter().map(|e| e.step_norm).collect();
        for w in steps[steps.len().saturating_sub(4)..].windows(2) {
            assert!(w[1] <= w[0], "tail steps decrease: {steps:?}");
        }
        let last = report.iterations.last().unwrap();
        assert!(last.step_norm <= 1e-8);
        assert!(norm_x(&pair.phi, q.sigma).unwrap() <= cert.r_ball);
        // fixed point property: ||T(x*) - x*|| <= 2 tol
        let spec = ProfileSpec::new(q, cert.t).unwrap();
        let out = apply_map(&spec, &k, &k, &pair.phi, &pair.psi).unwrap();
        let d = norm_x(&out.phi_hat.axpy(-1.0, &pair.phi).unwrap(), q.sigma).unwrap()
            + norm_x(&out.psi_hat.axpy(-1.0, &pair.psi).unwrap(), q.sigma).unwrap();
        assert!(d <= 2e-8, "fixed point defect {d:.3e}");
    }

    #[test]
    fn contraction_decreases_with_t() {
        // with kappa present the coefficient difference term decays in t
        let q = params();
        let g = RadialGrid::geometric(1e-6, 256).unwrap();
        let k = KappaSpec::Power { c: 2.0, alpha: 1.0 };
        let r_ball = 1.0 / 256.0;
        let c_at = |t: f64| {
            let spec = ProfileSpec::new(q, t).unwrap();
            empirical_contraction(&spec, &k, &k, &g, r_ball, 3, 11).unwrap()
        };
        let c1 = c_at(2.0);
        let c2 = c_at(2e3);
        assert!(c2 < c1, "contraction should shrink with t: {c1} -> {c2}");
        assert!(c2 < 1.0);
    }

    #[test]
    fn contraction_small_for_zero_kappa_and_large_t() {
        let q = params();
        let g = RadialGrid::geometric(1e-6, 256).unwrap();
        let k = KappaSpec::zero();
        let spec = ProfileSpec::new(q, 1e3).unwrap();
        let c = empirical_contraction(&spec, &k, &k, &g, 1.0 / 64.0, 3, 11).unwrap();
        assert!(c < 0.25, "tiny ball, zero kappa: ratio {c}");
    }

    #[test]
    fn search_exhaustion_with_capped_t() {
        let q = params();
        let g = RadialGrid::geometric(1e-6, 256).unwrap();
        let k = KappaSpec::Power { c: 1000.0, alpha: 0.5 };
        let mut bx = SearchBox::default();
        bx.t_grid = vec![1.0, 10.0, 100.0];
        let r = choose_parameters(&q, &g, &k, &k, &bx);
        assert!(matches!(r, Err(Error::SearchExhausted { .. })));
    }

    #[test]
    fn tolerance_halving_scales_final_step() {
        let q = params();
        let g = RadialGrid::geometric(1e-6, 256).unwrap();
        let k = KappaSpec::Power { c: 0.5, alpha: 0.5 };
        let (_, rep1) = picard(&q, &g, 1e3, &k, &k, 0.01, 1e-8, 60).unwrap();
        let (_, rep2) = picard(&q, &g, 1e3, &k, &k, 0.01, 5e-9, 60).unwrap();
        let s1 = rep1.iterations.last().unwrap().step_norm;
        let s2 = rep2.iterations.last().unwrap().step_norm;
        assert!(s2 <= s1);
        assert!(rep2.iterations.len() >= rep1.iterations.len());
        // geometric convergence: extra iterations consistent with the ratio
        let ratio = rep2.empirical_contraction;
        if ratio > 0.0 && ratio < 1.0 {
            let extra = rep2.iterations.len() - rep1.iterations.len();
            let predicted = (0.5f64.ln() / ratio.ln()).ceil() as usize;
            assert!(extra <= predicted + 2, "extra {extra} vs predicted {predicted}");
        }
    }
}
