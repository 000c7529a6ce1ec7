//! Acceptance battery: one test per criterion, each printing a PASS/FAIL
//! line. Everything runs on the default geometric grid (r_min = 1e-6,
//! 2048 intervals) unless stated otherwise.

use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use singular_elliptic::config::RunConfig;
use singular_elliptic::fixed_point::{choose_parameters, picard, KappaSpec, SearchBox};
use singular_elliptic::grid::{norm_x, RadialGrid};
use singular_elliptic::linear_system::{stability_sweep, CoupledRhs};
use singular_elliptic::mode_solver::{
    solve_k0, solve_mode_bvp, solve_mode_t0, ModeSpec,
};
use singular_elliptic::oracles;
use singular_elliptic::params::{
    derive_params, mode_exponents, sign_certificate, KappaSign, Params,
};
use singular_elliptic::profile::{sigma_limit_constant, weighted_residual, ProfileSpec};
use singular_elliptic::verify;
use singular_elliptic::{cli, Result};

fn base() -> Params {
    derive_params(3, 1.6).unwrap()
}

fn default_grid() -> Arc<RadialGrid> {
    RadialGrid::geometric(1e-6, 2048).unwrap()
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion} failed: {detail}");
}

#[test]
fn c01_identity_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0_f64;
    let mut all_ok = true;
    for _ in 0..50 {
        let q = oracles::sample_params(&mut rng);
        worst = worst.max(q.max_identity_error());
        match sign_certificate(&q) {
            Ok(c) => {
                worst = worst.max(c.rel_err);
                all_ok &= c.value_direct < 0.0 && c.value_closed_form < 0.0;
            }
            Err(_) => all_ok = false,
        }
    }
    report(
        "C1 (identity suite)",
        all_ok && worst <= 1e-10,
        &format!("worst relative error {worst:.3e}, tolerance 1e-10"),
    );
}

#[test]
fn c02_profile_oracle() {
    let q = base();
    let g = default_grid();
    let spec0 = ProfileSpec::new(q, 0.0).unwrap();
    let w0 = spec0.w_field(&g).unwrap();
    let mut worst_node = 0.0_f64;
    for (&r, &v) in g.nodes().iter().zip(w0.values()) {
        let exact = ProfileSpec::w0_closed(&q, r);
        worst_node = worst_node.max((v - exact).abs() / (1.0 + exact.abs()));
    }
    let mut worst_res = 0.0_f64;
    for t in [0.0, 1.0, 1e2, 1e4] {
        let spec = ProfileSpec::new(q, t).unwrap();
        worst_res = worst_res.max(weighted_residual(&spec, &g).unwrap());
    }
    report(
        "C2 (profile oracle)",
        worst_node <= 1e-9 && worst_res <= 1e-8,
        &format!("t=0 oracle err {worst_node:.3e} (tol 1e-9), residual {worst_res:.3e} (tol 1e-8)"),
    );
}

#[test]
fn c03_scaled_derivative_identity() {
    let q = base();
    let g = default_grid();
    let mut worst = 0.0_f64;
    let mut monotone = true;
    for t in [0.0, 1.0, 1e2, 1e4] {
        let spec = ProfileSpec::new(q, t).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for &r in g.nodes() {
            let lhs = r.powf(q.sigma + 1.0) * spec.w_prime(r);
            let rhs = spec.scaled_w_prime(r);
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
            monotone &= rhs >= prev - 1e-15 && rhs >= -q.c_beta - 1e-12;
            prev = rhs;
        }
    }
    report(
        "C3 (scaled derivative identity)",
        worst <= 1e-13 && monotone,
        &format!("identity defect {worst:.3e} (rounding), monotone toward -C_beta: {monotone}"),
    );
}

#[test]
fn c04_mode_solver_oracles() {
    let q = base();
    let g = default_grid();
    let mut worst_k0 = 0.0_f64;
    for sign in [KappaSign::Plus, KappaSign::Minus] {
        for t in [0.0, 10.0, 1e3] {
            let mm = oracles::manufactured_mode(&q, 0, sign, t, &g).unwrap();
            let spec = ModeSpec::new(q, 0, sign, t).unwrap();
            let sol = solve_k0(&spec, &mm.b).unwrap();
            let diff = sol.a.axpy(-1.0, &mm.a).unwrap();
            worst_k0 = worst_k0.max(norm_x(&diff, q.sigma).unwrap());
        }
    }
    let mut worst_t0 = 0.0_f64;
    for sign in [KappaSign::Plus, KappaSign::Minus] {
        for k in [1u32, 2, 5] {
            let mm = oracles::manufactured_mode(&q, k, sign, 0.0, &g).unwrap();
            let spec = ModeSpec::new(q, k, sign, 0.0).unwrap();
            let sol = solve_mode_t0(&spec, &mm.b).unwrap();
            let diff = sol.a.axpy(-1.0, &mm.a).unwrap();
            worst_t0 = worst_t0.max(norm_x(&diff, q.sigma).unwrap());
        }
    }
    let fields = oracles::random_rhs_family(&q, &g, 5, 404).unwrap();
    let mut worst_bvp = 0.0_f64;
    for b in &fields {
        let spec = ModeSpec::new(q, 1, KappaSign::Minus, 0.0).unwrap();
        let exact = solve_mode_t0(&spec, b).unwrap();
        let approx = solve_mode_bvp(&spec, b).unwrap();
        let diff = approx.a.axpy(-1.0, &exact.a).unwrap();
        let scale = exact.norm_x().max(1.0);
        worst_bvp = worst_bvp.max(norm_x(&diff, q.sigma).unwrap() / scale);
    }
    report(
        "C4 (mode solver oracles)",
        worst_k0 <= 1e-6 && worst_t0 <= 1e-6 && worst_bvp <= 1e-5,
        &format!(
            "k0 manufactured {worst_k0:.3e} (tol 1e-6), t0 manufactured {worst_t0:.3e} (tol 1e-6), \
             bvp agreement {worst_bvp:.3e} (tol 1e-5)"
        ),
    );
}

#[test]
fn c05_t_uniform_stability() {
    let q = base();
    let g = default_grid();
    let family = oracles::stability_family(&q, &g).unwrap();
    let t_list = [0.0, 1.0, 10.0, 1e2, 1e3, 1e4];
    let spread_of = |ratios: &[f64]| {
        ratios.iter().cloned().fold(0.0, f64::max)
            / ratios.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let mut worst = 0.0_f64;
    for sign in [KappaSign::Plus, KappaSign::Minus] {
        for b in &family {
            let ratios: Vec<f64> = t_list
                .iter()
                .map(|&t| {
                    let spec = ModeSpec::new(q, 0, sign, t).unwrap();
                    let sol = solve_k0(&spec, b).unwrap();
                    sol.norm_x() / sol.norm_y_rhs()
                })
                .collect();
            worst = worst.max(spread_of(&ratios));
        }
    }
    for b in &family {
        let ratios: Vec<f64> = t_list
            .iter()
            .map(|&t| {
                let spec = ModeSpec::new(q, 1, KappaSign::Minus, t).unwrap();
                let sol = solve_mode_bvp(&spec, b).unwrap();
                sol.norm_x() / sol.norm_y_rhs()
            })
            .collect();
        worst = worst.max(spread_of(&ratios));
    }
    let rhs_family: Vec<CoupledRhs> = family
        .iter()
        .map(|b| CoupledRhs::new(b.clone(), b.scaled(0.0)).unwrap())
        .collect();
    let rep = stability_sweep(&q, &t_list, &rhs_family).unwrap();
    worst = worst.max(rep.spread);
    report(
        "C5 (t-uniform stability)",
        worst < 10.0,
        &format!("worst max/min ratio spread {worst:.3} (tolerance 10)"),
    );
}

#[test]
fn c06_kernel_exponents() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut gaps = true;
    let mut worst_poly = 0.0_f64;
    for _ in 0..20 {
        let q = oracles::sample_params(&mut rng);
        for k in 1..=50 {
            let e = mode_exponents(&q, k, KappaSign::Minus);
            gaps &= e.gamma_minus + q.sigma <= -1.0 + 1e-12 && e.gamma_plus + q.sigma > 0.0;
            for gamma in [e.gamma_minus, e.gamma_plus] {
                let v = q.indicial_poly(KappaSign::Minus, e.lambda_k, gamma).abs();
                worst_poly = worst_poly.max(v / (1.0 + e.lambda_k));
            }
        }
    }
    report(
        "C6 (kernel exponents)",
        gaps && worst_poly <= 1e-10,
        &format!("exponent gaps hold: {gaps}, indicial residual {worst_poly:.3e} (tol 1e-10)"),
    );
}

fn construct_for_acceptance() -> Result<(
    Params,
    Arc<RadialGrid>,
    KappaSpec,
    singular_elliptic::fixed_point::Certificate,
    singular_elliptic::fixed_point::SolutionPair,
    singular_elliptic::fixed_point::IterationReport,
)> {
    let q = base();
    let g = default_grid();
    let k = KappaSpec::Power { c: 0.5, alpha: 0.5 };
    let cert = choose_parameters(&q, &g, &k, &k, &SearchBox::default())?;
    let (pair, rep) = picard(&q, &g, cert.t, &k, &k, cert.r_ball, 1e-8, 50)?;
    Ok((q, g, k, cert, pair, rep))
}

#[test]
fn c07_fixed_point_construction() {
    let (q, g, k, cert, pair, rep) = construct_for_acceptance().unwrap();
    let contraction_ok = rep.empirical_contraction <= 0.9;
    let step = rep.iterations.last().unwrap().step_norm;
    let iter_ok = rep.converged && rep.iterations.len() <= 50 && step <= 1e-8;

    let res = verify::system_residual(&q, &pair, &k, &k, verify::ResidualMode::CorrectionFd)
        .unwrap();
    let res_ok = res.weighted_u <= 1e-4 && res.weighted_v <= 1e-4;

    let spec = ProfileSpec::new(q, pair.t).unwrap();
    let limit = sigma_limit_constant(&spec, g.r_min()).unwrap();
    let positivity = verify::positivity_and_blowup(&q, &pair, &limit);
    let pos_ok = positivity.is_ok();
    let window_detail = match &positivity {
        Ok(p) => format!(
            "window [{:.3e}, {:.3e}] holds scaled u in [{:.3e}, {:.3e}]",
            p.c_window_low, p.c_window_high, p.scaled_u_min, p.scaled_u_max
        ),
        Err(e) => format!("{e}"),
    };
    report(
        "C7 (fixed-point construction)",
        contraction_ok && iter_ok && res_ok && pos_ok,
        &format!(
            "t = {}, R = {}, contraction {:.3} (tol 0.9), final step {:.3e} (tol 1e-8), \
             {} iterations (tol 50), residual {:.3e}/{:.3e} (tol 1e-4), {}",
            cert.t,
            cert.r_ball,
            rep.empirical_contraction,
            step,
            rep.iterations.len(),
            res.weighted_u,
            res.weighted_v,
            window_detail
        ),
    );
}

#[test]
fn c08_decay_in_t() {
    let q = base();
    let g = default_grid();
    let k = KappaSpec::Power { c: 0.5, alpha: 0.5 };
    let cert = choose_parameters(&q, &g, &k, &k, &SearchBox::default()).unwrap();
    let rep = verify::decay_in_t(&q, &g, &k, &k, 0.1, &[1e2, 1e3, 1e4], cert.r_ball, 1e-8, 60)
        .unwrap();
    report(
        "C8 (decay in t)",
        rep.strictly_decreasing && rep.below_bound,
        &format!(
            "sup u over r >= 0.1: {:?} strictly decreasing {}, below profile bound {}",
            rep.entries.iter().map(|e| e.sup_u).collect::<Vec<_>>(),
            rep.strictly_decreasing,
            rep.below_bound
        ),
    );
}

#[test]
fn c09_inequality_suite() {
    // zero cases are exact
    let x = [2.0, -1.0, 0.5];
    let y0 = [0.0, 0.0, 0.0];
    let (z1, _, _) = verify::inequality_lhs(1.5, &x, &y0, &y0);
    let yy = [0.3, 1.0, -0.2];
    let (_, z2, z3) = verify::inequality_lhs(1.3, &x, &yy, &yy);
    let zero_ok = z1 == 0.0 && z2 == 0.0 && z3 == 0.0;

    // p = 2 remainder is exactly |y|^2 across extreme scale gaps
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut p2_worst = 0.0_f64;
    for _ in 0..2000 {
        use rand::Rng;
        let sx = 10f64.powf(rng.random_range(-6.0..6.0));
        let sy = 10f64.powf(rng.random_range(-6.0..6.0));
        let x = [sx, 0.33 * sx];
        let y = [sy, -0.71 * sy];
        let (lhs, _, _) = verify::inequality_lhs(2.0, &x, &y, &[0.0, 0.0]);
        let want = y[0] * y[0] + y[1] * y[1];
        p2_worst = p2_worst.max((lhs - want).abs() / want);
    }

    let mut worst_change = 0.0_f64;
    let mut finite = true;
    for (i, &p) in [1.1, 1.5, 2.0].iter().enumerate() {
        let rep = verify::inequality_suite(p, &[1, 2, 3, 5], 100_000, 900 + i as u64).unwrap();
        for case in &rep.cases {
            finite &= case.all_finite() && case.sup_remainder > 0.0;
            worst_change = worst_change.max(case.max_change_on_doubling());
        }
    }
    report(
        "C9 (inequality suite)",
        zero_ok && p2_worst <= 1e-12 && finite && worst_change < 0.05,
        &format!(
            "zero cases exact: {zero_ok}, p=2 identity defect {p2_worst:.3e} (tol 1e-12), \
             sups finite: {finite}, doubling change {worst_change:.4} (tol 0.05)"
        ),
    );
}

#[test]
fn c10_determinism() {
    // two runs with the identical configuration (same out_dir) and seed;
    // every emitted file must agree byte-for-byte apart from the labeled
    // timestamp metadata
    let dir = tempfile::tempdir().unwrap();
    let run_once = || -> (bool, Vec<u8>) {
        let mut cfg = RunConfig::minimal(3, 1.6);
        cfg.kappa1.c = 0.5;
        cfg.kappa1.alpha = 0.5;
        cfg.kappa2.c = 0.5;
        cfg.kappa2.alpha = 0.5;
        cfg.seed = 777;
        cfg.output.out_dir = dir.path().to_string_lossy().into_owned();
        let pass = cli::run(&cfg, &cli::Command::VerifyAll).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != "run_metadata.json")
            .collect();
        names.sort();
        let mut blob = Vec::new();
        for n in names {
            blob.extend_from_slice(n.as_bytes());
            blob.extend_from_slice(&std::fs::read(dir.path().join(n)).unwrap());
        }
        (pass, blob)
    };
    let (pass1, b1) = run_once();
    let (pass2, b2) = run_once();
    report(
        "C10 (determinism)",
        b1 == b2 && pass1 && pass2,
        &format!(
            "verdicts pass: {}/{}; result files byte-identical across runs: {} ({} bytes)",
            pass1,
            pass2,
            b1 == b2,
            b1.len()
        ),
    );
}
