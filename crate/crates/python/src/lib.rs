//! Python bindings: problem constants, the singular profile, the linear mode
//! solvers, the nonlinear construction, and the inequality sampler.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use singular_elliptic::config::parse_config;
use singular_elliptic::fixed_point::{choose_parameters, picard, SearchBox};
use singular_elliptic::grid::{RadialField, RadialGrid};
use singular_elliptic::mode_solver::{solve_k0, solve_mode_bvp, solve_mode_t0, ModeSpec};
use singular_elliptic::params;
use singular_elliptic::profile::ProfileSpec;
use singular_elliptic::verify;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass]
struct Params {
    #[pyo3(get)]
    n: u32,
    #[pyo3(get)]
    p: f64,
    #[pyo3(get)]
    xi: f64,
    #[pyo3(get)]
    beta: f64,
    #[pyo3(get)]
    sigma: f64,
    #[pyo3(get)]
    c_beta: f64,
    #[pyo3(get)]
    max_identity_error: f64,
}

#[pyfunction]
fn derive_params(n: u32, p: f64) -> PyResult<Params> {
    let q = params::derive_params(n, p).map_err(err)?;
    Ok(Params {
        n: q.n_dim,
        p: q.p,
        xi: q.xi,
        beta: q.beta,
        sigma: q.sigma,
        c_beta: q.c_beta,
        max_identity_error: q.max_identity_error(),
    })
}

/// Indicial roots for mode `k`: returns `(gamma_minus, gamma_plus, lambda_k)`.
#[pyfunction]
fn mode_exponents(n: u32, p: f64, k: u32, sign: &str) -> PyResult<(f64, f64, f64)> {
    let q = params::derive_params(n, p).map_err(err)?;
    let s: params::KappaSign = sign.parse().map_err(err)?;
    let e = params::mode_exponents(&q, k, s);
    Ok((e.gamma_minus, e.gamma_plus, e.lambda_k))
}

#[pyfunction]
fn w_value(n: u32, p: f64, t: f64, r: f64) -> PyResult<f64> {
    let q = params::derive_params(n, p).map_err(err)?;
    let spec = ProfileSpec::new(q, t).map_err(err)?;
    spec.w_value(r).map_err(err)
}

#[pyfunction]
fn w_prime(n: u32, p: f64, t: f64, r: f64) -> PyResult<f64> {
    let q = params::derive_params(n, p).map_err(err)?;
    let spec = ProfileSpec::new(q, t).map_err(err)?;
    Ok(spec.w_prime(r))
}

/// Profile samples on the geometric grid: `(r, w, w_prime)`.
#[pyfunction]
#[pyo3(signature = (n, p, t, r_min = 1e-6, nodes = 2048))]
fn profile_curve(
    n: u32,
    p: f64,
    t: f64,
    r_min: f64,
    nodes: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let q = params::derive_params(n, p).map_err(err)?;
    let grid = RadialGrid::geometric(r_min, nodes).map_err(err)?;
    let spec = ProfileSpec::new(q, t).map_err(err)?;
    let w = spec.w_field(&grid).map_err(err)?;
    Ok((
        grid.nodes().to_vec(),
        w.values().to_vec(),
        w.deriv().expect("analytic derivative").to_vec(),
    ))
}

#[pyclass]
struct ModeSolve {
    #[pyo3(get)]
    r: Vec<f64>,
    #[pyo3(get)]
    a: Vec<f64>,
    #[pyo3(get)]
    a_prime: Vec<f64>,
    #[pyo3(get)]
    norm_x: f64,
    #[pyo3(get)]
    norm_y_rhs: f64,
    #[pyo3(get)]
    weighted_residual: f64,
    #[pyo3(get)]
    method: String,
}

/// One linear mode solve. `rhs` gives values on the grid nodes; the method is
/// picked from `(k, t)` unless forced.
#[pyfunction]
#[pyo3(signature = (n, p, k, sign, t, rhs, r_min = 1e-6, nodes = 2048, method = None))]
#[allow(clippy::too_many_arguments)]
fn solve_mode(
    n: u32,
    p: f64,
    k: u32,
    sign: &str,
    t: f64,
    rhs: Vec<f64>,
    r_min: f64,
    nodes: usize,
    method: Option<&str>,
) -> PyResult<ModeSolve> {
    let q = params::derive_params(n, p).map_err(err)?;
    let grid = RadialGrid::geometric(r_min, nodes).map_err(err)?;
    let b = RadialField::new(grid.clone(), rhs).map_err(err)?;
    let s: params::KappaSign = sign.parse().map_err(err)?;
    let spec = ModeSpec::new(q, k, s, t).map_err(err)?;
    let chosen = method.unwrap_or(if k == 0 {
        "k0"
    } else if t == 0.0 {
        "t0"
    } else {
        "bvp"
    });
    let sol = match chosen {
        "k0" => solve_k0(&spec, &b).map_err(err)?,
        "t0" => solve_mode_t0(&spec, &b).map_err(err)?,
        "bvp" => solve_mode_bvp(&spec, &b).map_err(err)?,
        other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    };
    Ok(ModeSolve {
        r: grid.nodes().to_vec(),
        a: sol.a.values().to_vec(),
        a_prime: sol.a.deriv().expect("solver derivative").to_vec(),
        norm_x: sol.norm_x(),
        norm_y_rhs: sol.norm_y_rhs(),
        weighted_residual: sol.weighted_residual(),
        method: format!("{:?}", sol.method),
    })
}

#[pyclass]
struct Construction {
    #[pyo3(get)]
    r: Vec<f64>,
    #[pyo3(get)]
    w: Vec<f64>,
    #[pyo3(get)]
    phi: Vec<f64>,
    #[pyo3(get)]
    psi: Vec<f64>,
    #[pyo3(get)]
    u: Vec<f64>,
    #[pyo3(get)]
    v: Vec<f64>,
    #[pyo3(get)]
    t: f64,
    #[pyo3(get)]
    r_ball: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    empirical_contraction: f64,
    #[pyo3(get)]
    converged: bool,
}

/// Nonlinear construction from a JSON configuration document (same schema as
/// the command-line tool). Missing `R`/`t` trigger the parameter search.
#[pyfunction]
fn construct(config_json: &str) -> PyResult<Construction> {
    let cfg = parse_config(config_json.as_bytes()).map_err(err)?;
    let q = cfg.params().map_err(err)?;
    let grid = cfg.grid().map_err(err)?;
    let k1 = cfg.kappa1.to_spec("kappa1").map_err(err)?;
    let k2 = cfg.kappa2.to_spec("kappa2").map_err(err)?;
    let (r_ball, t) = match (cfg.fixed_point.r, cfg.t) {
        (Some(r), Some(t)) => (r, t),
        _ => {
            let cert =
                choose_parameters(&q, &grid, &k1, &k2, &SearchBox::default()).map_err(err)?;
            (
                cfg.fixed_point.r.unwrap_or(cert.r_ball),
                cfg.t.unwrap_or(cert.t),
            )
        }
    };
    let (pair, rep) = picard(
        &q,
        &grid,
        t,
        &k1,
        &k2,
        r_ball,
        cfg.fixed_point.tol,
        cfg.fixed_point.max_iter,
    )
    .map_err(err)?;
    let spec = ProfileSpec::new(q, t).map_err(err)?;
    let w = spec.w_field(&grid).map_err(err)?;
    Ok(Construction {
        r: grid.nodes().to_vec(),
        w: w.values().to_vec(),
        phi: pair.phi.values().to_vec(),
        psi: pair.psi.values().to_vec(),
        u: pair.u.values().to_vec(),
        v: pair.v.values().to_vec(),
        t,
        r_ball,
        iterations: rep.iterations.len(),
        empirical_contraction: rep.empirical_contraction,
        converged: rep.converged,
    })
}

/// Empirical suprema of the three pointwise inequality ratios:
/// `(remainder, difference, shift)`.
#[pyfunction]
fn inequality_sups(p: f64, dim: usize, n_samples: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
    let rep = verify::inequality_suite(p, &[dim], n_samples, seed).map_err(err)?;
    let c = &rep.cases[0];
    Ok((
        c.sup_remainder_doubled,
        c.sup_difference_doubled,
        c.sup_shift_doubled,
    ))
}

#[pymodule]
fn singular_elliptic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(derive_params, m)?)?;
    m.add_function(wrap_pyfunction!(mode_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(w_value, m)?)?;
    m.add_function(wrap_pyfunction!(w_prime, m)?)?;
    m.add_function(wrap_pyfunction!(profile_curve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mode, m)?)?;
    m.add_function(wrap_pyfunction!(construct, m)?)?;
    m.add_function(wrap_pyfunction!(inequality_sups, m)?)?;
    m.add_class::<Params>()?;
    m.add_class::<ModeSolve>()?;
    m.add_class::<Construction>()?;
    Ok(())
}
