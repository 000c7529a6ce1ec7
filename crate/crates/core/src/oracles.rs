//! Independent oracles for the solvers: manufactured solutions whose
//! right-hand sides are produced by analytic differentiation, and closed-form
//! solutions for power-law data at `t = 0`.
//!
//! Nothing here calls a solver; every formula is derived by hand from the
//! mode equation
//! `-a'' - (N-1) a'/r + lambda a/r^2 + s p a'/(beta r + t r^xi) = b`
//! and the coupled system, so agreement certifies the integration path
//! rather than restating it.

use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::grid::{RadialField, RadialGrid};
use crate::params::{derive_params, mode_exponents, KappaSign, Params};

pub struct ManufacturedMode {
    pub a: RadialField,
    pub b: RadialField,
}

/// Anchor radius of the `+p` zero-mode solve: `min(t^(-1/(xi-1)), 1)`,
/// clamped to the boundary for `t <= 1`.
pub fn plus_anchor_radius(params: &Params, t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else {
        t.powf(-1.0 / (params.xi - 1.0)).min(1.0)
    }
}

/// Cubic-correction coefficient making `d/dr[(1-r)^2 + c (1-r)^3]` vanish at
/// the anchor radius, so the manufactured zero-mode solution lies on the
/// branch the `+p` solver selects (that solve has a one-dimensional
/// admissible solution family; the anchor picks the member).
fn plus_branch_coefficient(params: &Params, t: f64) -> f64 {
    let rt = plus_anchor_radius(params, t);
    if rt <= 0.9 {
        -2.0 / (3.0 * (1.0 - rt))
    } else {
        0.0 // boundary anchor: the derivative already vanishes at r = 1
    }
}

/// Manufactured solution for any mode `(k, sign, t)` with `b` the mode
/// operator applied to it, evaluated analytically. For `k = 0` the shape is
/// `(1-r)^2` plus, for the `+p` drift, the cubic correction aligning it with
/// the anchored branch; for `k >= 1` it is `r (1-r)^2`, which vanishes at
/// the origin the way angular mode coefficients do (so the data stays
/// integrable against the origin-anchored admissibility integrals).
pub fn manufactured_mode(
    params: &Params,
    k: u32,
    sign: KappaSign,
    t: f64,
    grid: &Arc<RadialGrid>,
) -> Result<ManufacturedMode> {
    let lambda = params.lambda_k(k);
    let (n, p, beta, xi) = (params.n(), params.p, params.beta, params.xi);
    let sk = sign.factor();
    let (a, b) = if k == 0 {
        let c = match sign {
            KappaSign::Plus => plus_branch_coefficient(params, t),
            KappaSign::Minus => 0.0,
        };
        let a = RadialField::from_fn_with_deriv(
            grid.clone(),
            move |r| {
                let one = 1.0 - r;
                one * one + c * one * one * one
            },
            move |r| {
                let one = 1.0 - r;
                -2.0 * one - 3.0 * c * one * one
            },
        )?;
        let b = RadialField::from_fn(grid.clone(), move |r| {
            let one = 1.0 - r;
            let ap = -2.0 * one - 3.0 * c * one * one;
            let app = 2.0 + 6.0 * c * one;
            let denom = r * (beta + t * ((xi - 1.0) * r.ln()).exp());
            -app - (n - 1.0) * ap / r + sk * p * ap / denom
        })?;
        (a, b)
    } else {
        let a = RadialField::from_fn_with_deriv(
            grid.clone(),
            |r| r * (1.0 - r) * (1.0 - r),
            |r| 1.0 - 4.0 * r + 3.0 * r * r,
        )?;
        let b = RadialField::from_fn(grid.clone(), |r| {
            let av = r * (1.0 - r) * (1.0 - r);
            let ap = 1.0 - 4.0 * r + 3.0 * r * r;
            let app = -4.0 + 6.0 * r;
            let denom = r * (beta + t * ((xi - 1.0) * r.ln()).exp());
            -app - (n - 1.0) * ap / r + lambda * av / (r * r) + sk * p * ap / denom
        })?;
        (a, b)
    };
    Ok(ManufacturedMode { a, b })
}

/// Closed-form solution of the `k = 0` problem at `t = 0` with
/// `b = r^(-sigma-2)`, for the anchor each sign uses (origin for the `-p`
/// drift, boundary for `+p`). Returns `(a, a')`.
pub fn k0_power_solution_t0(params: &Params, sign: KappaSign, r: f64) -> (f64, f64) {
    let (n, p, beta, xi, sigma) = (params.n(), params.p, params.beta, params.xi, params.sigma);
    match sign {
        KappaSign::Minus => {
            // mu b = tau^(q-1), q = N + p/beta - sigma - 2 > 0
            let q = n + p / beta - sigma - 2.0;
            let ap = -r.powf(-sigma - 1.0) / q;
            let a = (r.powf(-sigma) - 1.0) / (sigma * q);
            (a, ap)
        }
        KappaSign::Plus => {
            // mu b = tau^(-xi), anchored at r = 1
            let ap = (r.powf(-sigma - 1.0) - r.powf(xi - sigma - 2.0)) / (xi - 1.0);
            let e = xi - sigma - 1.0;
            assert!(e.abs() > 1e-9, "degenerate exponent in closed form");
            let a =
                ((1.0 - r.powf(e)) / e - (r.powf(-sigma) - 1.0) / sigma) / (xi - 1.0);
            (a, ap)
        }
    }
}

/// Closed-form solution of the `k >= 1`, `t = 0` problem with
/// `b = r^(-sigma-2)`:
/// `a = (r^(-sigma) - r^(gamma_plus)) / kstar`,
/// `kstar = -(sigma+gamma_plus)(sigma+gamma_minus)`. Returns `(a, a')`.
pub fn mode_k_power_solution_t0(params: &Params, k: u32, sign: KappaSign, r: f64) -> (f64, f64) {
    let e = mode_exponents(params, k, sign);
    let sigma = params.sigma;
    let kstar = -(sigma + e.gamma_plus) * (sigma + e.gamma_minus);
    let a = (r.powf(-sigma) - r.powf(e.gamma_plus)) / kstar;
    let ap = (-sigma * r.powf(-sigma - 1.0) - e.gamma_plus * r.powf(e.gamma_plus - 1.0)) / kstar;
    (a, ap)
}

pub struct ManufacturedCoupled {
    pub phi: RadialField,
    pub psi: RadialField,
    pub f: RadialField,
    pub g: RadialField,
}

/// Manufactured pair `phi* = (1-r)^2`, `psi* = c (1-r)^3` for the coupled
/// linear system; `c` makes the sum `phi* + psi*` lie on the branch the `+p`
/// scalar solve anchors (zero slope at the anchor radius, which degenerates
/// to `c = 1` near the boundary).
pub fn manufactured_coupled(
    params: &Params,
    t: f64,
    grid: &Arc<RadialGrid>,
) -> Result<ManufacturedCoupled> {
    let (n, p, beta, xi) = (params.n(), params.p, params.beta, params.xi);
    let rt = plus_anchor_radius(params, t);
    let c = if rt <= 0.9 {
        -2.0 / (3.0 * (1.0 - rt))
    } else {
        1.0
    };
    let phi = RadialField::from_fn_with_deriv(
        grid.clone(),
        |r| (1.0 - r) * (1.0 - r),
        |r| -2.0 * (1.0 - r),
    )?;
    let psi = RadialField::from_fn_with_deriv(
        grid.clone(),
        move |r| c * (1.0 - r) * (1.0 - r) * (1.0 - r),
        move |r| -3.0 * c * (1.0 - r) * (1.0 - r),
    )?;
    let denom = move |r: f64| r * (beta + t * ((xi - 1.0) * r.ln()).exp());
    // -phi'' - (N-1) phi'/r + p psi'/(beta r + t r^xi) = f
    let f = RadialField::from_fn(grid.clone(), move |r| {
        let one = 1.0 - r;
        -2.0 + 2.0 * (n - 1.0) * one / r - 3.0 * c * p * one * one / denom(r)
    })?;
    // -psi'' - (N-1) psi'/r + p phi'/(beta r + t r^xi) = g
    let g = RadialField::from_fn(grid.clone(), move |r| {
        let one = 1.0 - r;
        -6.0 * c * one + 3.0 * c * (n - 1.0) * one * one / r - 2.0 * p * one / denom(r)
    })?;
    Ok(ManufacturedCoupled { phi, psi, f, g })
}

/// Five right-hand sides normalized to unit Y-norm, spanning the critical
/// rate, sub-critical rates, and smooth data.
pub fn stability_family(params: &Params, grid: &Arc<RadialGrid>) -> Result<Vec<RadialField>> {
    let s = params.sigma;
    let shapes: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(move |r: f64| r.powf(-s - 2.0)),
        Box::new(move |r: f64| r.powf(-s - 1.0)),
        Box::new(move |r: f64| r.powf(-s - 2.0) * (1.0 - r + r * r)),
        Box::new(|_| 1.0),
        Box::new(move |r: f64| r.powf(-s - 2.0) * 0.5 * (1.0 + r)),
    ];
    shapes
        .into_iter()
        .map(|sh| {
            let f = RadialField::from_fn(grid.clone(), &sh)?;
            let ny = crate::grid::norm_y(&f, s);
            Ok(f.scaled(1.0 / ny))
        })
        .collect()
}

/// Seeded random right-hand sides `r^(-sigma-2) (c0 + c1 r + c2 r^2)` with
/// coefficients in `[0.5, 2]`, smooth on the log scale.
pub fn random_rhs_family(
    params: &Params,
    grid: &Arc<RadialGrid>,
    count: usize,
    seed: u64,
) -> Result<Vec<RadialField>> {
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let s = params.sigma;
    (0..count)
        .map(|_| {
            let c0: f64 = rng.random_range(0.5..2.0);
            let c1: f64 = rng.random_range(0.5..2.0);
            let c2: f64 = rng.random_range(0.5..2.0);
            RadialField::from_fn(grid.clone(), move |r| {
                r.powf(-s - 2.0) * (c0 + c1 * r + c2 * r * r)
            })
        })
        .collect()
}

/// A random admissible `(N, p)` pair, bounded away from the excluded
/// endpoints so the derived constants stay well-scaled.
pub fn sample_params(rng: &mut impl Rng) -> Params {
    let n: u32 = rng.random_range(3..=12);
    let lo = f64::from(n) / (f64::from(n) - 1.0);
    let u: f64 = rng.random_range(1e-3..0.999);
    derive_params(n, lo + u * (2.0 - lo)).expect("sampled parameters are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params;

    #[test]
    fn closed_forms_satisfy_the_ode() {
        // verify the k >= 1 closed form against the raw equation by direct
        // substitution at scattered radii
        let q = derive_params(3, 1.6).unwrap();
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            for k in [1u32, 2, 5] {
                let e = mode_exponents(&q, k, sign);
                let lambda = e.lambda_k;
                for &r in &[1e-5, 1e-3, 0.1, 0.9] {
                    let (a, ap) = mode_k_power_solution_t0(&q, k, sign, r);
                    // second derivative of (r^{-sigma} - r^{g+})/kstar
                    let kstar = -(q.sigma + e.gamma_plus) * (q.sigma + e.gamma_minus);
                    let app = (-q.sigma * (-q.sigma - 1.0) * r.powf(-q.sigma - 2.0)
                        - e.gamma_plus * (e.gamma_plus - 1.0) * r.powf(e.gamma_plus - 2.0))
                        / kstar;
                    let lhs = -app - (q.n() - 1.0) * ap / r + lambda * a / (r * r)
                        + sign.factor() * q.p * ap / (q.beta * r);
                    let b = r.powf(-q.sigma - 2.0);
                    assert!(
                        (lhs - b).abs() <= 1e-9 * b,
                        "k {k} sign {sign:?} r {r}: {lhs} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn k0_closed_forms_satisfy_the_ode() {
        let q = derive_params(3, 1.6).unwrap();
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            for &r in &[1e-5, 1e-2, 0.5, 0.99] {
                let dr = 1e-6 * r;
                let (_, ap_m) = k0_power_solution_t0(&q, sign, r - dr);
                let (_, ap_p) = k0_power_solution_t0(&q, sign, r + dr);
                let (_, ap) = k0_power_solution_t0(&q, sign, r);
                let app = (ap_p - ap_m) / (2.0 * dr);
                let lhs = -app - (q.n() - 1.0) * ap / r + sign.factor() * q.p * ap / (q.beta * r);
                let b = r.powf(-q.sigma - 2.0);
                assert!((lhs - b).abs() <= 1e-6 * b, "sign {sign:?} r {r}: {lhs} vs {b}");
            }
        }
    }

    #[test]
    fn boundary_values_vanish() {
        let q = derive_params(3, 1.6).unwrap();
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            let (a, _) = k0_power_solution_t0(&q, sign, 1.0);
            assert!(a.abs() < 1e-14);
            let (ak, _) = mode_k_power_solution_t0(&q, 3, sign, 1.0);
            assert!(ak.abs() < 1e-14);
        }
    }

    #[test]
    fn stability_family_is_normalized() {
        let q = derive_params(3, 1.6).unwrap();
        let g = RadialGrid::geometric(1e-6, 256).unwrap();
        let fam = stability_family(&q, &g).unwrap();
        assert_eq!(fam.len(), 5);
        for f in &fam {
            let ny = crate::grid::norm_y(f, q.sigma);
            assert!((ny - 1.0).abs() < 1e-12);
        }
    }
}
