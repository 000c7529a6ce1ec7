//! The coupled linearized system for radial data
//!
//! ```text
//! -phi'' - (N-1) phi'/r + p psi'/(beta r + t r^xi) = f
//! -psi'' - (N-1) psi'/r + p phi'/(beta r + t r^xi) = g
//! phi(1) = psi(1) = 0,
//! ```
//!
//! solved by the sum/difference decoupling: `zeta1` solves the `+p` scalar
//! problem with data `F = f + g`, `zeta2` the `-p` problem with `G = f - g`,
//! and `phi = (zeta1+zeta2)/2`, `psi = (zeta1-zeta2)/2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, same_grid, RadialField};
use crate::mode_solver::{solve_k0, Anchor, ModeSpec};
use crate::params::{KappaSign, Params};

#[derive(Debug, Clone)]
pub struct CoupledRhs {
    pub f: RadialField,
    pub g: RadialField,
}

impl CoupledRhs {
    pub fn new(f: RadialField, g: RadialField) -> Result<Self> {
        if !same_grid(f.grid(), g.grid()) {
            return Err(Error::GridMismatch);
        }
        Ok(CoupledRhs { f, g })
    }
}

#[derive(Debug, Clone)]
pub struct CoupledSolution {
    pub phi: RadialField,
    pub psi: RadialField,
    pub zeta1: RadialField,
    pub zeta2: RadialField,
    pub stability_ratio: f64,
    /// Weighted residuals of the two coupled equations, relative to the
    /// weighted data magnitude.
    pub residual_f: f64,
    pub residual_g: f64,
    pub anchor_plus: Option<Anchor>,
    pub anchor_minus: Option<Anchor>,
}

/// Stats of one solve, in the shape emitted by reports.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoupledStats {
    pub t: f64,
    #[serde(rename = "norm_Y_f")]
    pub norm_y_f: f64,
    #[serde(rename = "norm_Y_g")]
    pub norm_y_g: f64,
    #[serde(rename = "norm_X_phi")]
    pub norm_x_phi: f64,
    #[serde(rename = "norm_X_psi")]
    pub norm_x_psi: f64,
    pub ratio: f64,
    pub residual_1: f64,
    pub residual_2: f64,
}

pub fn solve_coupled(params: &Params, t: f64, rhs: &CoupledRhs) -> Result<CoupledSolution> {
    let grid = rhs.f.grid().clone();
    let big_f = rhs.f.axpy(1.0, &rhs.g)?;
    let big_g = rhs.f.axpy(-1.0, &rhs.g)?;
    let spec_plus = ModeSpec::new(*params, 0, KappaSign::Plus, t)?;
    let spec_minus = ModeSpec::new(*params, 0, KappaSign::Minus, t)?;
    let z1 = solve_k0(&spec_plus, &big_f)?;
    let z2 = solve_k0(&spec_minus, &big_g)?;
    let phi = z1.a.axpy(1.0, &z2.a)?.scaled(0.5);
    let psi = z1.a.axpy(-1.0, &z2.a)?.scaled(0.5);

    let sigma = params.sigma;
    let denom = grid::norm_y(&rhs.f, sigma)
        .max(grid::norm_y(&rhs.g, sigma))
        .max(1e-30);
    let h = grid.log_step();
    let phid = phi.deriv().expect("solver output has derivatives");
    let psid = psi.deriv().expect("solver output has derivatives");
    let dphi = grid::deriv_log_hi(phid, h);
    let dpsi = grid::deriv_log_hi(psid, h);
    let n1 = params.n() - 1.0;
    let mut res_f = Vec::with_capacity(grid.len());
    let mut res_g = Vec::with_capacity(grid.len());
    for (j, &r) in grid.nodes().iter().enumerate() {
        let drift = params.p / spec_plus.drift_denom(r);
        res_f.push(-dphi[j] / r - n1 * phid[j] / r + drift * psid[j] - rhs.f.values()[j]);
        res_g.push(-dpsi[j] / r - n1 * psid[j] / r + drift * phid[j] - rhs.g.values()[j]);
    }
    // norms over centered-stencil nodes; edge rows differentiate accumulated
    // quadrature output and only report stencil noise
    let interior_norm = |vals: &[f64]| -> f64 {
        (3..grid.len() - 3)
            .map(|j| grid.node(j).powf(sigma + 2.0) * vals[j].abs())
            .fold(0.0, f64::max)
    };
    let residual_f = interior_norm(&res_f) / denom;
    let residual_g = interior_norm(&res_g) / denom;

    let nx_phi = grid::norm_x(&phi, sigma)?;
    let nx_psi = grid::norm_x(&psi, sigma)?;
    let ny = grid::norm_y(&rhs.f, sigma) + grid::norm_y(&rhs.g, sigma);
    let stability_ratio = if ny > 0.0 { (nx_phi + nx_psi) / ny } else { 0.0 };

    Ok(CoupledSolution {
        phi,
        psi,
        zeta1: z1.a,
        zeta2: z2.a,
        stability_ratio,
        residual_f,
        residual_g,
        anchor_plus: z1.anchor,
        anchor_minus: z2.anchor,
    })
}

impl CoupledSolution {
    pub fn stats(&self, params: &Params, t: f64, rhs: &CoupledRhs) -> CoupledStats {
        let s = params.sigma;
        CoupledStats {
            t,
            norm_y_f: grid::norm_y(&rhs.f, s),
            norm_y_g: grid::norm_y(&rhs.g, s),
            norm_x_phi: grid::norm_x(&self.phi, s).unwrap_or(f64::NAN),
            norm_x_psi: grid::norm_x(&self.psi, s).unwrap_or(f64::NAN),
            ratio: self.stability_ratio,
            residual_1: self.residual_f,
            residual_2: self.residual_g,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub entries: Vec<CoupledStats>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// Per right-hand side: (max over t) / (min over t) of the ratio. The
    /// uniformity statement fixes the data and varies `t`, so this is the
    /// certified quantity.
    pub per_rhs_spread: Vec<f64>,
    pub spread: f64,
}

/// Ratio table over a `t` grid and a family of right-hand sides.
pub fn stability_sweep(
    params: &Params,
    t_list: &[f64],
    family: &[CoupledRhs],
) -> Result<StabilityReport> {
    if t_list.is_empty() || family.is_empty() {
        return Err(Error::Domain("stability sweep needs nonempty inputs".into()));
    }
    let mut entries = Vec::new();
    for &t in t_list {
        for rhs in family {
            let sol = solve_coupled(params, t, rhs)?;
            entries.push(sol.stats(params, t, rhs));
        }
    }
    let max_ratio = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    let min_ratio = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    let per_rhs_spread: Vec<f64> = (0..family.len())
        .map(|i| {
            let ratios = entries
                .iter()
                .skip(i)
                .step_by(family.len())
                .map(|e| e.ratio);
            let max = ratios.clone().fold(0.0, f64::max);
            let min = ratios.fold(f64::INFINITY, f64::min);
            max / min
        })
        .collect();
    let spread = per_rhs_spread.iter().cloned().fold(0.0, f64::max);
    Ok(StabilityReport {
        entries,
        max_ratio,
        min_ratio,
        per_rhs_spread,
        spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{norm_x, RadialGrid};
    use crate::oracles;
    use crate::params::derive_params;

    fn params() -> Params {
        derive_params(3, 1.6).unwrap()
    }

    #[test]
    fn symmetric_data_forces_symmetric_solution() {
        let q = params();
        let g = RadialGrid::geometric(1e-6, 512).unwrap();
        let b = RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 2.0) * (1.0 - r)).unwrap();
        let rhs = CoupledRhs::new(b.clone(), b.clone()).unwrap();
        let sol = solve_coupled(&q, 5.0, &rhs).unwrap();
        // G = 0 -> zeta2 = 0 -> phi = psi = zeta1/2
        assert!(norm_x(&sol.zeta2, q.sigma).unwrap() == 0.0);
        for j in 0..g.len() {
            assert_eq!(sol.phi.values()[j], sol.psi.values()[j]);
            assert!((sol.phi.values()[j] - 0.5 * sol.zeta1.values()[j]).abs() <= 1e-15);
        }
    }

    #[test]
    fn antisymmetric_data_forces_antisymmetric_solution() {
        let q = params();
        let g = RadialGrid::geometric(1e-6, 512).unwrap();
        let b = RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 2.0)).unwrap();
        let rhs = CoupledRhs::new(b.scaled(1.0), b.scaled(-1.0)).unwrap();
        let sol = solve_coupled(&q, 5.0, &rhs).unwrap();
        assert!(norm_x(&sol.zeta1, q.sigma).unwrap() == 0.0);
        for j in 0..g.len() {
            assert_eq!(sol.phi.values()[j], -sol.psi.values()[j]);
        }
    }

    #[test]
    fn grid_mismatch_detected() {
        let q = params();
        let g1 = RadialGrid::geometric(1e-6, 64).unwrap();
        let g2 = RadialGrid::geometric(1e-6, 128).unwrap();
        let f = RadialField::zero(g1);
        let gfield = RadialField::zero(g2);
        assert!(matches!(CoupledRhs::new(f, gfield), Err(Error::GridMismatch)));
        let _ = q;
    }

    #[test]
    fn manufactured_pair_recovery() {
        let q = params();
        let g = RadialGrid::geometric(1e-6, 2048).unwrap();
        for t in [0.0, 10.0, 1e3] {
            let mc = oracles::manufactured_coupled(&q, t, &g).unwrap();
            let rhs = CoupledRhs::new(mc.f.clone(), mc.g.clone()).unwrap();
            let sol = solve_coupled(&q, t, &rhs).unwrap();
            let ephi = norm_x(&sol.phi.axpy(-1.0, &mc.phi).unwrap(), q.sigma).unwrap();
            let epsi = norm_x(&sol.psi.axpy(-1.0, &mc.psi).unwrap(), q.sigma).unwrap();
            assert!(ephi <= 1e-6 && epsi <= 1e-6, "t {t}: {ephi:.3e} / {epsi:.3e}");
            assert!(sol.residual_f <= 1e-6 && sol.residual_g <= 1e-6);
        }
    }

    #[test]
    fn involution_recombination() {
        // rebuilding (F, G) from (phi+psi, phi-psi) returns the inputs
        let q = params();
        let g = RadialGrid::geometric(1e-6, 256).unwrap();
        let f = RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 2.0) * (2.0 - r)).unwrap();
        let gg = RadialField::from_fn(g.clone(), |r| r.powf(-q.sigma - 1.0)).unwrap();
        let rhs = CoupledRhs::new(f, gg).unwrap();
        let sol = solve_coupled(&q, 100.0, &rhs).unwrap();
        for j in 0..g.len() {
            let z1 = sol.phi.values()[j] + sol.psi.values()[j];
            let z2 = sol.phi.values()[j] - sol.psi.values()[j];
            assert!((z1 - sol.zeta1.values()[j]).abs() <= 1e-12 * (1.0 + z1.abs()));
            assert!((z2 - sol.zeta2.values()[j]).abs() <= 1e-12 * (1.0 + z2.abs()));
        }
    }

    #[test]
    fn sweep_ratios_bounded_and_scale_invariant() {
        let q = params();
        let g = RadialGrid::geometric(1e-6, 512).unwrap();
        let fam: Vec<CoupledRhs> = oracles::stability_family(&q, &g)
            .unwrap()
            .into_iter()
            .map(|b| CoupledRhs::new(b.clone(), b.scaled(0.0)).unwrap())
            .collect();
        let rep = stability_sweep(&q, &[0.0, 1.0, 10.0, 1e2, 1e3, 1e4], &fam).unwrap();
        assert!(rep.spread < 10.0, "spread {}", rep.spread);

        // scaling the data leaves ratios unchanged
        let one = &fam[0];
        let scaled = CoupledRhs::new(one.f.scaled(7.0), one.g.scaled(7.0)).unwrap();
        let a = solve_coupled(&q, 10.0, one).unwrap().stability_ratio;
        let b = solve_coupled(&q, 10.0, &scaled).unwrap().stability_ratio;
        assert!((a - b).abs() <= 1e-10 * a.abs());

        // singleton sweep equals the single solve's ratio
        let rep1 = stability_sweep(&q, &[10.0], &fam[..1]).unwrap();
        assert_eq!(rep1.entries.len(), 1);
        assert!((rep1.entries[0].ratio - a).abs() <= 1e-14);
    }
}
