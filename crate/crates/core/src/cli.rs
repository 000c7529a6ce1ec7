//! Subcommand dispatch and file emission.
//!
//! All output is deterministic for a fixed configuration and seed; the only
//! time-dependent value is the labeled `timestamp` field of
//! `run_metadata.json`, which is excluded from determinism comparisons.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_config, RunConfig};
use crate::error::{Error, Result};
use crate::fixed_point::{
    choose_parameters, picard, Certificate, KappaSpec, SearchBox, SolutionPair,
};
use crate::grid::{self, RadialField, RadialGrid};
use crate::linear_system::{solve_coupled, stability_sweep, CoupledRhs};
use crate::mode_solver::{
    kernel_classification, solve_k0, solve_mode_bvp, solve_mode_t0, ModeSolution, ModeSpec,
};
use crate::oracles;
use crate::params::{mode_exponents, sign_certificate, KappaSign, Params};
use crate::profile::{sigma_limit_constant, weighted_residual, ProfileSpec};
use crate::verify;

#[derive(Parser, Debug)]
#[command(
    name = "singular-elliptic",
    about = "Construct and certify positive singular solution pairs of a gradient-coupled elliptic system on the punctured unit ball"
)]
pub struct Cli {
    /// JSON configuration file; omitted fields take documented defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override the configured output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Dimension N (used when no config file is given).
    #[arg(long, global = true)]
    pub n: Option<u32>,

    /// Gradient exponent p (used when no config file is given).
    #[arg(long, global = true)]
    pub p: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Derived constants, identity table, and the sign certificate.
    Params,
    /// Profile samples, scaled identities, and the blow-up constant estimate.
    Profile {
        #[arg(long)]
        t: Option<f64>,
    },
    /// One linear mode solve.
    SolveLinear {
        #[arg(long)]
        k: u32,
        /// Operator drift sign: + or -.
        #[arg(long)]
        sign: String,
        #[arg(long)]
        t: f64,
        /// Built-in name (critical | subcritical | one) or a CSV path.
        #[arg(long, default_value = "critical")]
        rhs: String,
        /// k0 | t0 | bvp; default picks by (k, t).
        #[arg(long)]
        method: Option<String>,
    },
    /// Fixed-point construction of a solution pair.
    Construct,
    /// Constructions across a list of t values plus a decay report.
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
    },
    /// Full certification battery; exit code reflects the verdict.
    VerifyAll,
}

pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(&fs::read(path)?)?,
        None => {
            let n = cli.n.unwrap_or(3);
            let p = cli.p.unwrap_or(1.6);
            let cfg = RunConfig::minimal(n, p);
            cfg.params()?;
            cfg
        }
    };
    if let Some(dir) = &cli.out_dir {
        cfg.output.out_dir = dir.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Domain(format!("serialization failed: {e}")))?;
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.output.out_dir);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("echoed_config.json"), cfg.echo() + "\n")?;
    let ts = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    write_json(
        &dir,
        "run_metadata.json",
        &json!({
            "timestamp": ts,
            "note": "timestamp is the only time-dependent field and is excluded from determinism checks",
        }),
    )?;
    Ok(dir)
}

pub fn run(cfg: &RunConfig, command: &Command) -> Result<bool> {
    let dir = prepare_out_dir(cfg)?;
    match command {
        Command::Params => run_params(cfg, &dir).map(|_| true),
        Command::Profile { t } => run_profile(cfg, *t, &dir).map(|_| true),
        Command::SolveLinear {
            k,
            sign,
            t,
            rhs,
            method,
        } => run_solve_linear(cfg, *k, sign, *t, rhs, method.as_deref(), &dir).map(|_| true),
        Command::Construct => run_construct(cfg, &dir).map(|_| true),
        Command::Sweep { t } => run_sweep(cfg, t, &dir).map(|_| true),
        Command::VerifyAll => run_verify_all(cfg, &dir),
    }
}

fn run_params(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let params = cfg.params()?;
    let cert = sign_certificate(&params)?;
    let identities = params.identity_checks();
    let exponents: Vec<_> = [KappaSign::Plus, KappaSign::Minus]
        .into_iter()
        .flat_map(|sign| (0..=2).map(move |k| mode_exponents(&params, k, sign)))
        .collect();
    write_json(
        dir,
        "params.json",
        &json!({
            "params": params,
            "identities": identities,
            "max_identity_rel_err": params.max_identity_error(),
            "sign_certificate": cert,
            "mode_exponents": exponents,
        }),
    )
}

fn run_profile(cfg: &RunConfig, t_flag: Option<f64>, dir: &Path) -> Result<()> {
    let params = cfg.params()?;
    let grid_arc = cfg.grid()?;
    let t = t_flag.or(cfg.t).unwrap_or(0.0);
    let spec = ProfileSpec::new(params, t)?;
    let w = spec.w_field(&grid_arc)?;
    let res = crate::profile::scalar_residual(&spec, &grid_arc)?;
    if cfg.output.emit_csv {
        let mut out = String::from("r,w,w_prime,scaled_w,scaled_wprime,residual\n");
        for (j, &r) in grid_arc.nodes().iter().enumerate() {
            let wv = w.values()[j];
            let wp = spec.w_prime(r);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt17(r),
                fmt17(wv),
                fmt17(wp),
                fmt17(r.powf(params.sigma) * wv),
                fmt17(spec.scaled_w_prime(r)),
                fmt17(res.values()[j]),
            ));
        }
        fs::write(dir.join("profile.csv"), out)?;
    }
    let limit = sigma_limit_constant(&spec, grid_arc.r_min())?;
    let wres = weighted_residual(&spec, &grid_arc)?;
    let scaled: Vec<f64> = grid_arc
        .nodes()
        .iter()
        .map(|&r| spec.scaled_w_prime(r))
        .collect();
    let monotone = scaled.windows(2).all(|w| w[0] <= w[1] + 1e-15);
    let t0_oracle = if t == 0.0 {
        let worst = grid_arc
            .nodes()
            .iter()
            .zip(w.values())
            .map(|(&r, &v)| {
                let exact = ProfileSpec::w0_closed(&params, r);
                (v - exact).abs() / (1.0 + exact.abs())
            })
            .fold(0.0, f64::max);
        Some(worst)
    } else {
        None
    };
    write_json(
        dir,
        "profile_summary.json",
        &json!({
            "t": t,
            "C_estimate": limit.estimate,
            "C_bracket": limit.bracket,
            "weighted_residual": wres,
            "checks": {
                "boundary_value_zero": w.values()[grid_arc.len() - 1] == 0.0,
                "scaled_derivative_monotone": monotone,
                "scaled_derivative_above_minus_c_beta": scaled
                    .iter()
                    .all(|&v| v >= -params.c_beta - 1e-12),
                "t0_oracle_rel_err": t0_oracle,
            },
        }),
    )
}

fn builtin_rhs(params: &Params, grid_arc: &Arc<RadialGrid>, name: &str) -> Result<RadialField> {
    let s = params.sigma;
    match name {
        "critical" => RadialField::from_fn(grid_arc.clone(), |r| r.powf(-s - 2.0)),
        "subcritical" => RadialField::from_fn(grid_arc.clone(), |r| r.powf(-s - 1.0)),
        "one" => RadialField::from_fn(grid_arc.clone(), |_| 1.0),
        path => {
            let file = fs::File::open(path)?;
            grid::read_csv(grid_arc.clone(), BufReader::new(file))
        }
    }
}

fn run_solve_linear(
    cfg: &RunConfig,
    k: u32,
    sign: &str,
    t: f64,
    rhs: &str,
    method: Option<&str>,
    dir: &Path,
) -> Result<()> {
    let params = cfg.params()?;
    let grid_arc = cfg.grid()?;
    let sign: KappaSign = sign.parse()?;
    let b = builtin_rhs(&params, &grid_arc, rhs)?;
    let spec = ModeSpec::new(params, k, sign, t)?;
    let method = method.unwrap_or(if k == 0 {
        "k0"
    } else if t == 0.0 {
        "t0"
    } else {
        "bvp"
    });
    let sol: ModeSolution = match method {
        "k0" => solve_k0(&spec, &b)?,
        "t0" => solve_mode_t0(&spec, &b)?,
        "bvp" => solve_mode_bvp(&spec, &b)?,
        other => {
            return Err(Error::Domain(format!(
                "unknown method `{other}` (k0 | t0 | bvp)"
            )))
        }
    };
    let res = sol.residual();
    if cfg.output.emit_csv {
        let mut out = String::from("r,a,a_prime,residual\n");
        for (j, &r) in grid_arc.nodes().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt17(r),
                fmt17(sol.a.values()[j]),
                fmt17(sol.a.deriv().expect("deriv")[j]),
                fmt17(res.values()[j]),
            ));
        }
        fs::write(dir.join("solution.csv"), out)?;
    }
    let nx = sol.norm_x();
    let ny = sol.norm_y_rhs();
    write_json(
        dir,
        "solve_summary.json",
        &json!({
            "k": k,
            "sign": sign.label(),
            "t": t,
            "norm_X": nx,
            "norm_Y_rhs": ny,
            "ratio": if ny > 0.0 { nx / ny } else { 0.0 },
            "method": sol.method,
            "anchor": sol.anchor,
            "weighted_residual": sol.weighted_residual(),
            "kernel": kernel_classification(&params, k, sign),
        }),
    )
}

struct Construction {
    pair: SolutionPair,
    report: crate::fixed_point::IterationReport,
    certificate: Option<Certificate>,
}

fn construct_at(cfg: &RunConfig, t_override: Option<f64>) -> Result<Construction> {
    let params = cfg.params()?;
    let grid_arc = cfg.grid()?;
    let k1 = cfg.kappa1.to_spec("kappa1")?;
    let k2 = cfg.kappa2.to_spec("kappa2")?;
    let (r_ball, delta, t, certificate) = match (cfg.fixed_point.r, t_override.or(cfg.t)) {
        (Some(r), Some(t)) => (r, cfg.fixed_point.delta, t, None),
        _ => {
            let cert = choose_parameters(&params, &grid_arc, &k1, &k2, &SearchBox::default())?;
            let t = t_override.or(cfg.t).unwrap_or(cert.t);
            (
                cfg.fixed_point.r.unwrap_or(cert.r_ball),
                Some(cfg.fixed_point.delta.unwrap_or(cert.delta)),
                t,
                Some(cert),
            )
        }
    };
    let (pair, mut report) = picard(
        &params,
        &grid_arc,
        t,
        &k1,
        &k2,
        r_ball,
        cfg.fixed_point.tol,
        cfg.fixed_point.max_iter,
    )?;
    report.delta = delta;
    Ok(Construction {
        pair,
        report,
        certificate,
    })
}

fn emit_construction(cfg: &RunConfig, c: &Construction, dir: &Path) -> Result<()> {
    let params = cfg.params()?;
    let pair = &c.pair;
    let grid_arc = pair.u.grid();
    if cfg.output.emit_csv {
        let spec = ProfileSpec::new(params, pair.t)?;
        let w = spec.w_field(grid_arc)?;
        let mut out = String::from("r,w,phi,psi,u,v,u_prime,v_prime\n");
        for (j, &r) in grid_arc.nodes().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                fmt17(r),
                fmt17(w.values()[j]),
                fmt17(pair.phi.values()[j]),
                fmt17(pair.psi.values()[j]),
                fmt17(pair.u.values()[j]),
                fmt17(pair.v.values()[j]),
                fmt17(pair.u.deriv().expect("deriv")[j]),
                fmt17(pair.v.deriv().expect("deriv")[j]),
            ));
        }
        fs::write(dir.join("solution.csv"), out)?;
    }
    write_json(
        dir,
        "iteration_report.json",
        &json!({
            "report": c.report,
            "certificate": c.certificate,
        }),
    )
}

fn run_construct(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let c = construct_at(cfg, None)?;
    emit_construction(cfg, &c, dir)
}

fn run_sweep(cfg: &RunConfig, t_list: &[f64], dir: &Path) -> Result<()> {
    if t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("sweep t values must increase".into()));
    }
    let params = cfg.params()?;
    let mut pairs = Vec::new();
    let mut shared_cfg = cfg.clone();
    for (i, &t) in t_list.iter().enumerate() {
        let c = construct_at(&shared_cfg, Some(t))?;
        if i == 0 {
            // keep one ball radius across the sweep so the decay bound is
            // comparable
            shared_cfg.fixed_point.r = Some(c.pair.r_ball);
            if shared_cfg.fixed_point.delta.is_none() {
                shared_cfg.fixed_point.delta = c.report.delta;
            }
        }
        let sub = dir.join(format!("t_{t}"));
        fs::create_dir_all(&sub)?;
        emit_construction(&shared_cfg, &c, &sub)?;
        pairs.push(c.pair);
    }
    let decay = verify::decay_from_pairs(&params, 0.1, &pairs)?;
    write_json(dir, "decay_report.json", &decay)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub pass: bool,
    pub metric: f64,
    pub tolerance: f64,
}

struct Battery {
    checks: Vec<(String, CheckResult)>,
}

impl Battery {
    fn new() -> Self {
        Battery { checks: Vec::new() }
    }

    /// `metric <= tolerance` passes.
    fn le(&mut self, name: &str, metric: f64, tolerance: f64) {
        self.checks.push((
            name.to_string(),
            CheckResult {
                pass: metric.is_finite() && metric <= tolerance,
                metric,
                tolerance,
            },
        ));
    }

    /// Boolean condition; metric 1.0 when satisfied.
    fn holds(&mut self, name: &str, ok: bool) {
        self.checks.push((
            name.to_string(),
            CheckResult {
                pass: ok,
                metric: if ok { 1.0 } else { 0.0 },
                tolerance: 1.0,
            },
        ));
    }

    fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.1.pass)
    }
}

fn run_verify_all(cfg: &RunConfig, dir: &Path) -> Result<bool> {
    let params = cfg.params()?;
    let grid_arc = cfg.grid()?;
    // oracle-grade checks (closed forms, manufactured solves, product-rule
    // defects) carry resolution-pinned tolerances and run on the default
    // grid; configuration-dependent checks use the configured grid
    let oracle_grid = RadialGrid::geometric(grid::DEFAULT_R_MIN, grid::DEFAULT_INTERVALS)?;
    let sigma = params.sigma;
    let mut out = Battery::new();

    // exponent algebra over random admissible parameters
    {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x11);
        let mut worst_ident = 0.0_f64;
        let mut worst_cert = 0.0_f64;
        let mut cert_ok = true;
        for _ in 0..cfg.verify.random_cases {
            let q = oracles::sample_params(&mut rng);
            worst_ident = worst_ident.max(q.max_identity_error());
            match sign_certificate(&q) {
                Ok(c) => worst_cert = worst_cert.max(c.rel_err),
                Err(_) => cert_ok = false,
            }
        }
        out.le("params_identity_sweep", worst_ident, 1e-10);
        out.le("sign_certificate_agreement", worst_cert, 1e-10);
        out.holds("sign_certificate_negative", cert_ok);
    }

    // kernel exponents
    {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x22);
        let mut worst_poly = 0.0_f64;
        let mut gaps_ok = true;
        for _ in 0..20 {
            let q = oracles::sample_params(&mut rng);
            for k in 1..=cfg.verify.kernel_modes {
                let e = mode_exponents(&q, k, KappaSign::Minus);
                gaps_ok &= e.gamma_minus + q.sigma <= -1.0 + 1e-12
                    && e.gamma_plus + q.sigma > 0.0;
                for g in [e.gamma_minus, e.gamma_plus] {
                    let v = q.indicial_poly(KappaSign::Minus, e.lambda_k, g).abs();
                    worst_poly = worst_poly.max(v / (1.0 + e.lambda_k));
                }
            }
        }
        out.holds("kernel_exponent_gaps", gaps_ok);
        out.le("kernel_indicial_residual", worst_poly, 1e-10);
    }

    // profile oracles
    {
        let spec0 = ProfileSpec::new(params, 0.0)?;
        let w0 = spec0.w_field(&grid_arc)?;
        let worst = grid_arc
            .nodes()
            .iter()
            .zip(w0.values())
            .map(|(&r, &v)| {
                let exact = ProfileSpec::w0_closed(&params, r);
                (v - exact).abs() / (1.0 + exact.abs())
            })
            .fold(0.0, f64::max);
        out.le("profile_t0_oracle", worst, 1e-9);

        let mut worst_res = 0.0_f64;
        for t in [0.0, 1.0, 1e2, 1e4] {
            let spec = ProfileSpec::new(params, t)?;
            worst_res = worst_res.max(weighted_residual(&spec, &grid_arc)?);
        }
        out.le("profile_scalar_residual", worst_res, 1e-8);

        let mut worst_ident = 0.0_f64;
        let mut monotone = true;
        for t in [0.0, 1.0, 1e2, 1e4] {
            let spec = ProfileSpec::new(params, t)?;
            let mut prev = f64::NEG_INFINITY;
            for &r in grid_arc.nodes() {
                let lhs = r.powf(sigma + 1.0) * spec.w_prime(r);
                let rhs = spec.scaled_w_prime(r);
                worst_ident = worst_ident.max((lhs - rhs).abs() / rhs.abs());
                monotone &= rhs >= prev - 1e-15 && rhs >= -params.c_beta - 1e-12;
                prev = rhs;
            }
        }
        out.le("scaled_derivative_identity", worst_ident, 1e-13);
        out.holds("scaled_derivative_monotone", monotone);

        let limit0 = sigma_limit_constant(&spec0, grid_arc.r_min())?;
        let exact0 = params.c_beta / sigma;
        out.le(
            "sigma_limit_t0_exact",
            (limit0.estimate - exact0).abs(),
            limit0.bracket.max(1e-10),
        );
    }

    // integrating factor certification
    {
        let mut worst = 0.0_f64;
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            for t in [0.0, 50.0] {
                worst = worst.max(verify::mu_product_rule_defect(&params, sign, t, &oracle_grid)?);
            }
        }
        out.le("mu_product_rule", worst, 1e-8);
    }

    // manufactured mode solves
    {
        let mut worst = 0.0_f64;
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            for t in [0.0, 10.0, 1e3] {
                let mm = oracles::manufactured_mode(&params, 0, sign, t, &oracle_grid)?;
                let spec = ModeSpec::new(params, 0, sign, t)?;
                let sol = solve_k0(&spec, &mm.b)?;
                let diff = sol.a.axpy(-1.0, &mm.a)?;
                worst = worst.max(grid::norm_x(&diff, sigma)?);
            }
        }
        out.le("mode_k0_manufactured", worst, 1e-6);

        let mut worst_t0 = 0.0_f64;
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            for k in [1u32, 2, 5] {
                let mm = oracles::manufactured_mode(&params, k, sign, 0.0, &oracle_grid)?;
                let spec = ModeSpec::new(params, k, sign, 0.0)?;
                let sol = solve_mode_t0(&spec, &mm.b)?;
                let diff = sol.a.axpy(-1.0, &mm.a)?;
                worst_t0 = worst_t0.max(grid::norm_x(&diff, sigma)?);
            }
        }
        out.le("mode_t0_manufactured", worst_t0, 1e-6);

        // closed-form power oracle
        let b = RadialField::from_fn(oracle_grid.clone(), |r| r.powf(-sigma - 2.0))?;
        let mut worst_cf = 0.0_f64;
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            let spec = ModeSpec::new(params, 0, sign, 0.0)?;
            let sol = solve_k0(&spec, &b)?;
            for (j, &r) in oracle_grid.nodes().iter().enumerate() {
                let (ae, ape) = oracles::k0_power_solution_t0(&params, sign, r);
                worst_cf = worst_cf
                    .max(crate::params::rel_err_guarded(sol.a.values()[j], ae))
                    .max(crate::params::rel_err_guarded(sol.a.deriv().expect("d")[j], ape));
            }
            for k in [1u32, 2, 5] {
                // refine with the indicial steepness so the cumulative
                // engine's h^4 envelope stays under the oracle tolerance
                let e = mode_exponents(&params, k, sign);
                let steep = (1.0 - e.gamma_minus).abs().max(sigma + 2.0);
                let factor = ((steep / 6.0).ceil() as usize).max(1).next_power_of_two().min(4);
                let gk = RadialGrid::geometric(grid::DEFAULT_R_MIN, grid::DEFAULT_INTERVALS * factor)?;
                let bk = RadialField::from_fn(gk.clone(), |r| r.powf(-sigma - 2.0))?;
                let speck = ModeSpec::new(params, k, sign, 0.0)?;
                let solk = solve_mode_t0(&speck, &bk)?;
                for (j, &r) in gk.nodes().iter().enumerate() {
                    let (ae, ape) = oracles::mode_k_power_solution_t0(&params, k, sign, r);
                    worst_cf = worst_cf
                        .max(crate::params::rel_err_guarded(solk.a.values()[j], ae))
                        .max(crate::params::rel_err_guarded(
                            solk.a.deriv().expect("d")[j],
                            ape,
                        ));
                }
            }
        }
        out.le("mode_power_closed_forms", worst_cf, 1e-8);
    }

    // collocation cross-validation on random right-hand sides
    {
        let fields = oracles::random_rhs_family(&params, &oracle_grid, 5, cfg.seed ^ 0x33)?;
        let mut worst = 0.0_f64;
        for b in &fields {
            let spec = ModeSpec::new(params, 1, KappaSign::Minus, 0.0)?;
            let exact = solve_mode_t0(&spec, b)?;
            let approx = solve_mode_bvp(&spec, b)?;
            let diff = approx.a.axpy(-1.0, &exact.a)?;
            let scale = exact.norm_x().max(1.0);
            worst = worst.max(grid::norm_x(&diff, sigma)? / scale);
        }
        out.le("bvp_cross_validation", worst, 1e-5);
    }

    // t-uniform stability per solver and for the coupled solve; at arbitrary
    // parameters the flatness claim lives in the large-t regime (the realized
    // ratios at small t sit under a t-independent but possibly huge bound
    // constant), so the battery sweeps the tail; the full table is emitted
    {
        let family = oracles::stability_family(&params, &grid_arc)?;
        let t_list = [1e2, 1e3, 1e4, 1e5, 1e6];
        let spread = |ratios: &[f64]| -> f64 {
            let max = ratios.iter().cloned().fold(0.0, f64::max);
            let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            max / min
        };
        let mut worst_spread = 0.0_f64;
        for sign in [KappaSign::Plus, KappaSign::Minus] {
            for b in &family {
                let ratios: Vec<f64> = t_list
                    .iter()
                    .map(|&t| {
                        let spec = ModeSpec::new(params, 0, sign, t)?;
                        let sol = solve_k0(&spec, b)?;
                        Ok(sol.norm_x() / sol.norm_y_rhs())
                    })
                    .collect::<Result<_>>()?;
                worst_spread = worst_spread.max(spread(&ratios));
            }
        }
        for b in &family {
            let ratios: Vec<f64> = t_list
                .iter()
                .map(|&t| {
                    let spec = ModeSpec::new(params, 1, KappaSign::Minus, t)?;
                    let sol = solve_mode_bvp(&spec, b)?;
                    Ok(sol.norm_x() / sol.norm_y_rhs())
                })
                .collect::<Result<_>>()?;
            worst_spread = worst_spread.max(spread(&ratios));
        }
        let rhs_family: Vec<CoupledRhs> = family
            .iter()
            .map(|b| CoupledRhs::new(b.clone(), b.scaled(0.0)))
            .collect::<Result<_>>()?;
        let rep = stability_sweep(&params, &t_list, &rhs_family)?;
        worst_spread = worst_spread.max(rep.spread);
        write_json(dir, "stability_report.json", &rep)?;
        out.le("t_uniform_stability_spread", worst_spread, 10.0);
    }

    // coupled manufactured pair and involution
    {
        let mut worst = 0.0_f64;
        let mut worst_res = 0.0_f64;
        for t in [0.0, 10.0, 1e3] {
            let mc = oracles::manufactured_coupled(&params, t, &oracle_grid)?;
            let rhs = CoupledRhs::new(mc.f.clone(), mc.g.clone())?;
            let sol = solve_coupled(&params, t, &rhs)?;
            worst = worst
                .max(grid::norm_x(&sol.phi.axpy(-1.0, &mc.phi)?, sigma)?)
                .max(grid::norm_x(&sol.psi.axpy(-1.0, &mc.psi)?, sigma)?);
            worst_res = worst_res.max(sol.residual_f).max(sol.residual_g);
        }
        out.le("coupled_manufactured", worst, 1e-6);
        out.le("coupled_residual", worst_res, 1e-6);
    }

    // nonlinear map cancellation rate (large t: increment-dominated regime)
    {
        let spec = ProfileSpec::new(params, 1e6)?;
        let zeta = RadialField::from_fn_with_deriv(
            grid_arc.clone(),
            |r| (1.0 - r) * r.powf(-sigma),
            |r| -r.powf(-sigma - 1.0) * (sigma * (1.0 - r) + r),
        )?;
        let ratio_at = |eps: f64| -> Result<f64> {
            let i = crate::fixed_point::nonlinearity_i(&spec, &zeta.scaled(eps))?;
            Ok(grid::norm_y(&i, sigma) / eps)
        };
        let drop = ratio_at(1e-3)? / ratio_at(1e-4)?;
        let expected = 10f64.powf(params.p - 1.0);
        out.le(
            "nonlinearity_cancellation_rate",
            (drop / expected - 1.0).abs(),
            0.2,
        );
    }

    // full nonlinear construction and its certificates
    {
        let k1 = cfg.kappa1.to_spec("kappa1")?;
        let k2 = cfg.kappa2.to_spec("kappa2")?;
        let (k1, k2) = if k1.is_zero() && k2.is_zero() {
            let k = KappaSpec::Power { c: 0.5, alpha: 0.5 };
            (k.clone(), k)
        } else {
            (k1, k2)
        };
        let cert = choose_parameters(&params, &grid_arc, &k1, &k2, &SearchBox::default())?;
        out.holds("parameter_certificate", cert.into_margin > 0.0 && cert.contraction <= 0.5);
        let (pair, report) = picard(
            &params,
            &grid_arc,
            cert.t,
            &k1,
            &k2,
            cert.r_ball,
            cfg.fixed_point.tol.min(1e-8),
            50,
        )?;
        out.le(
            "picard_contraction",
            report.empirical_contraction,
            0.9,
        );
        out.le(
            "picard_final_step",
            report.iterations.last().map(|e| e.step_norm).unwrap_or(f64::NAN),
            1e-8,
        );
        out.le("picard_iterations", report.iterations.len() as f64, 50.0);

        let res = verify::system_residual(&params, &pair, &k1, &k2, verify::ResidualMode::CorrectionFd)?;
        out.le("system_residual", res.weighted_u.max(res.weighted_v), 1e-4);

        let spec = ProfileSpec::new(params, pair.t)?;
        let limit = sigma_limit_constant(&spec, grid_arc.r_min())?;
        match verify::positivity_and_blowup(&params, &pair, &limit) {
            Ok(prep) => {
                out.holds("positivity", prep.min_u > 0.0 && prep.min_v > 0.0);
                out.holds(
                    "blowup_window",
                    prep.scaled_u_min >= prep.c_window_low
                        && prep.scaled_u_max <= prep.c_window_high,
                );
            }
            Err(_) => {
                out.holds("positivity", false);
                out.holds("blowup_window", false);
            }
        }

        let z0 = verify::default_z_cut(&params, 0.0);
        let lb0 = verify::profile_lower_bound(&params, 0.0, z0, grid_arc.r_min());
        let zt = verify::default_z_cut(&params, pair.t);
        let lbt = verify::profile_lower_bound(&params, pair.t, zt, grid_arc.r_min());
        out.holds(
            "profile_lower_bound",
            lb0.map(|r| r.min_margin >= 0.0).unwrap_or(false)
                && lbt.map(|r| r.min_margin >= 0.0).unwrap_or(false),
        );

        let t_first = 1e2_f64.max(cert.t);
        let decay = verify::decay_in_t(
            &params,
            &grid_arc,
            &k1,
            &k2,
            0.1,
            &[t_first, t_first * 10.0, t_first * 100.0],
            cert.r_ball,
            cfg.fixed_point.tol.min(1e-8),
            cfg.fixed_point.max_iter,
        )?;
        out.holds("decay_strictly_decreasing", decay.strictly_decreasing);
        out.holds("decay_below_profile_bound", decay.below_bound);
    }

    // pointwise inequality suite
    {
        let dims = [1usize, 2, 3, 5];
        let x = [2.0, -1.0, 0.5];
        let y0 = [0.0, 0.0, 0.0];
        let (z1, _, _) = verify::inequality_lhs(1.5, &x, &y0, &y0);
        let yy = [0.3, 1.0, -0.2];
        let (_, z2, z3) = verify::inequality_lhs(1.5, &x, &yy, &yy);
        out.holds("inequality_zero_cases", z1 == 0.0 && z2 == 0.0 && z3 == 0.0);

        let mut p2_worst = 0.0_f64;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x44);
        for _ in 0..1000 {
            use rand::Rng;
            let scale = 10f64.powf(rng.random_range(-6.0..6.0));
            let x = [10f64.powf(rng.random_range(-6.0..6.0)), 0.7];
            let y = [scale, -0.3 * scale];
            let (lhs, _, _) = verify::inequality_lhs(2.0, &x, &y, &y0[..2]);
            let want = y[0] * y[0] + y[1] * y[1];
            p2_worst = p2_worst.max((lhs - want).abs() / want);
        }
        out.le("inequality_p2_identity", p2_worst, 1e-12);

        let mut worst_change = 0.0_f64;
        let mut finite = true;
        for (i, &p) in [1.1, 1.5, 2.0].iter().enumerate() {
            let rep = verify::inequality_suite(
                p,
                &dims,
                cfg.verify.inequality_samples,
                cfg.seed ^ (0x55 + i as u64),
            )?;
            for case in &rep.cases {
                finite &= case.all_finite();
                worst_change = worst_change.max(case.max_change_on_doubling());
            }
        }
        out.holds("inequality_sups_finite", finite);
        out.le("inequality_sup_stability", worst_change, 0.05);
    }

    // finite-difference refinement order
    {
        let spec = ProfileSpec::new(params, 100.0)?;
        let err_at = |m: usize| -> Result<f64> {
            let g = RadialGrid::geometric(1e-4, m)?;
            let res = crate::profile::scalar_residual_fd(&spec, &g)?;
            let src = RadialField::from_fn(g.clone(), |r| spec.w_prime_abs_p(r))?;
            Ok(grid::norm_y(&res, sigma) / grid::norm_y(&src, sigma))
        };
        let ratio = err_at(256)? / err_at(512)?;
        out.holds("fd_refinement_second_order", (3.0..5.5).contains(&ratio));
    }

    let verdict: serde_json::Map<String, serde_json::Value> = out
        .checks
        .iter()
        .map(|(name, c)| (name.clone(), serde_json::to_value(c).expect("check")))
        .collect();
    write_json(dir, "verify.json", &verdict)?;
    for (name, c) in &out.checks {
        println!(
            "{}: {} (metric {:.3e}, tolerance {:.3e})",
            name,
            if c.pass { "PASS" } else { "FAIL" },
            c.metric,
            c.tolerance
        );
    }
    Ok(out.all_pass())
}

/// Entry point used by the binary: returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match run(&cfg, &cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            let dir = PathBuf::from(&cfg.output.out_dir);
            let _ = fs::create_dir_all(&dir);
            let _ = fs::write(
                dir.join("error.json"),
                serde_json::to_string_pretty(&json!({
                    "error": e.to_string(),
                }))
                .unwrap_or_default(),
            );
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg(dir: &Path) -> RunConfig {
        let mut cfg = RunConfig::minimal(3, 1.6);
        cfg.grid.nodes = 256;
        cfg.verify.inequality_samples = 2000;
        cfg.verify.random_cases = 8;
        cfg.verify.kernel_modes = 10;
        cfg.output.out_dir = dir.to_string_lossy().into_owned();
        cfg.seed = 12345;
        cfg
    }

    #[test]
    fn params_and_profile_commands_emit_files() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = quick_cfg(tmp.path());
        run(&cfg, &Command::Params).unwrap();
        assert!(tmp.path().join("params.json").exists());
        assert!(tmp.path().join("echoed_config.json").exists());
        run(&cfg, &Command::Profile { t: Some(0.0) }).unwrap();
        let csv = fs::read_to_string(tmp.path().join("profile.csv")).unwrap();
        assert!(csv.starts_with("r,w,w_prime,scaled_w,scaled_wprime,residual"));
        assert_eq!(csv.lines().count(), cfg.grid.nodes + 2);
    }

    #[test]
    fn solve_linear_command() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = quick_cfg(tmp.path());
        run(
            &cfg,
            &Command::SolveLinear {
                k: 0,
                sign: "-".into(),
                t: 10.0,
                rhs: "critical".into(),
                method: None,
            },
        )
        .unwrap();
        let summary: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(tmp.path().join("solve_summary.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(summary["method"], "integrating-factor");
        assert!(summary["ratio"].as_f64().unwrap() > 0.0);
        assert!(summary["anchor"].is_string() || summary["anchor"].is_object());
    }

    #[test]
    fn construct_and_sweep_commands() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = quick_cfg(tmp.path());
        cfg.kappa1.c = 0.5;
        cfg.kappa1.alpha = 0.5;
        cfg.kappa2.c = 0.5;
        cfg.kappa2.alpha = 0.5;
        run(&cfg, &Command::Construct).unwrap();
        let report: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(tmp.path().join("iteration_report.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(report["report"]["converged"], true);
        assert!(report["certificate"]["t"].as_f64().is_some());

        let tmp2 = tempfile::tempdir().unwrap();
        let mut cfg2 = quick_cfg(tmp2.path());
        cfg2.kappa1 = cfg.kappa1.clone();
        cfg2.kappa2 = cfg.kappa2.clone();
        run(
            &cfg2,
            &Command::Sweep {
                t: vec![1e2, 1e3, 1e4],
            },
        )
        .unwrap();
        assert!(tmp2.path().join("t_100").join("solution.csv").exists());
        let decay: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(tmp2.path().join("decay_report.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(decay["strictly_decreasing"], true);
    }
}
