//! Geometric radial grids on `(r_min, 1]`, sampled fields with derivatives,
//! the weighted sup norms, and nonuniform finite differences used for
//! independent residual checks.
//!
//! Nodes are `r_j = r_min^(1 - j/M)` for `j = 0..=M`, i.e. uniform in
//! `x = ln r` with step `h = -ln(r_min)/M` and `r_M = 1` exactly. Sup norms
//! are evaluated as maxima over the nodes; the truncation at `r_min` and the
//! `O(h^2)` under-estimation of true suprema are inherent to the sampling and
//! are reported, not hidden.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_R_MIN: f64 = 1e-6;
pub const DEFAULT_INTERVALS: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    r_min: f64,
    intervals: usize,
    nodes: Vec<f64>,
    log_step: f64,
}

impl RadialGrid {
    /// Geometric grid with `intervals >= 16` subintervals (so `intervals + 1`
    /// nodes) between `r_min` and 1.
    pub fn geometric(r_min: f64, intervals: usize) -> Result<Arc<Self>> {
        if !(r_min > 0.0 && r_min < 1.0) {
            return Err(Error::Domain(format!(
                "r_min = {r_min} must lie in (0, 1)"
            )));
        }
        if intervals < 16 {
            return Err(Error::Domain(format!(
                "node count M = {intervals} violates M >= 16"
            )));
        }
        let ln_rmin = r_min.ln();
        let m = intervals as f64;
        let nodes: Vec<f64> = (0..=intervals)
            .map(|j| (ln_rmin * ((intervals - j) as f64) / m).exp())
            .collect();
        Ok(Arc::new(RadialGrid {
            r_min,
            intervals,
            nodes,
            log_step: -ln_rmin / m,
        }))
    }

    pub fn default_grid() -> Arc<Self> {
        Self::geometric(DEFAULT_R_MIN, DEFAULT_INTERVALS).expect("default grid is valid")
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    /// Number of subintervals M.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of nodes, `M + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Uniform spacing in `x = ln r`.
    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    /// `x_j = ln r_j`, computed from the closed form rather than `ln(node)`.
    pub fn log_node(&self, j: usize) -> f64 {
        self.r_min.ln() * ((self.intervals - j) as f64) / (self.intervals as f64)
    }

    /// Same geometry with `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Result<Arc<Self>> {
        Self::geometric(self.r_min, self.intervals * factor)
    }
}

pub fn same_grid(a: &Arc<RadialGrid>, b: &Arc<RadialGrid>) -> bool {
    Arc::ptr_eq(a, b) || (a.r_min == b.r_min && a.intervals == b.intervals)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivKind {
    Analytic,
    Quadrature,
    FiniteDifference,
}

/// A radial function sampled on a grid, optionally with its radial derivative.
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    deriv: Option<Vec<f64>>,
    deriv_kind: Option<DerivKind>,
}

fn check_finite(vs: &[f64], what: &str) -> Result<()> {
    if let Some(v) = vs.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite {what} entry {v}")));
    }
    Ok(())
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "field has {} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        check_finite(&values, "value")?;
        Ok(RadialField {
            grid,
            values,
            deriv: None,
            deriv_kind: None,
        })
    }

    pub fn with_deriv(
        grid: Arc<RadialGrid>,
        values: Vec<f64>,
        deriv: Vec<f64>,
        kind: DerivKind,
    ) -> Result<Self> {
        if deriv.len() != grid.len() {
            return Err(Error::Domain("derivative length mismatch".into()));
        }
        check_finite(&deriv, "derivative")?;
        let mut f = Self::new(grid, values)?;
        f.deriv = Some(deriv);
        f.deriv_kind = Some(kind);
        Ok(f)
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn from_fn_with_deriv(
        grid: Arc<RadialGrid>,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        let deriv = grid.nodes().iter().map(|&r| df(r)).collect();
        Self::with_deriv(grid, values, deriv, DerivKind::Analytic)
    }

    pub fn zero(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        RadialField {
            grid,
            values: vec![0.0; n],
            deriv: Some(vec![0.0; n]),
            deriv_kind: Some(DerivKind::Analytic),
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn deriv(&self) -> Option<&[f64]> {
        self.deriv.as_deref()
    }

    pub fn deriv_kind(&self) -> Option<DerivKind> {
        self.deriv_kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Attach a 3-point nonuniform finite-difference derivative.
    pub fn with_fd_deriv(&self) -> Self {
        let d = fd_first(self.grid.nodes(), &self.values);
        RadialField {
            grid: self.grid.clone(),
            values: self.values.clone(),
            deriv: Some(d),
            deriv_kind: Some(DerivKind::FiniteDifference),
        }
    }

    /// `self + c * other`, combining derivatives when both carry them.
    pub fn axpy(&self, c: f64, other: &RadialField) -> Result<Self> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        let deriv = match (&self.deriv, &other.deriv) {
            (Some(da), Some(db)) => Some(da.iter().zip(db).map(|(a, b)| a + c * b).collect()),
            _ => None,
        };
        let deriv_kind = if deriv.is_some() {
            match (self.deriv_kind, other.deriv_kind) {
                (Some(a), Some(b)) if a == b => Some(a),
                _ => Some(DerivKind::Quadrature),
            }
        } else {
            None
        };
        Ok(RadialField {
            grid: self.grid.clone(),
            values,
            deriv,
            deriv_kind,
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        RadialField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            deriv: self
                .deriv
                .as_ref()
                .map(|d| d.iter().map(|v| c * v).collect()),
            deriv_kind: self.deriv_kind,
        }
    }
}

/// `max_j { r^sigma |f| + r^(sigma+1) |f'| }`; requires derivative data.
pub fn norm_x(field: &RadialField, sigma: f64) -> Result<f64> {
    let deriv = field
        .deriv()
        .ok_or(Error::MissingDerivative("norm_x needs f'"))?;
    let mut best = 0.0_f64;
    for ((&r, &v), &d) in field
        .grid()
        .nodes()
        .iter()
        .zip(field.values())
        .zip(deriv.iter())
    {
        let w = r.powf(sigma) * v.abs() + r.powf(sigma + 1.0) * d.abs();
        best = best.max(w);
    }
    Ok(best)
}

/// `max_j { r^(sigma+2) |f| }`.
pub fn norm_y(field: &RadialField, sigma: f64) -> f64 {
    field
        .grid()
        .nodes()
        .iter()
        .zip(field.values())
        .map(|(&r, &v)| r.powf(sigma + 2.0) * v.abs())
        .fold(0.0, f64::max)
}

/// First and second derivative at `x[0]` of the cubic through four nodes
/// (any ordering), by Newton divided differences.
fn cubic_derivs_at_first(x: [f64; 4], f: [f64; 4]) -> (f64, f64) {
    let d01 = (f[1] - f[0]) / (x[1] - x[0]);
    let d12 = (f[2] - f[1]) / (x[2] - x[1]);
    let d23 = (f[3] - f[2]) / (x[3] - x[2]);
    let d012 = (d12 - d01) / (x[2] - x[0]);
    let d123 = (d23 - d12) / (x[3] - x[1]);
    let d0123 = (d123 - d012) / (x[3] - x[0]);
    let fp = d01 + d012 * (x[0] - x[1]) + d0123 * (x[0] - x[1]) * (x[0] - x[2]);
    let fpp = 2.0 * d012 + 2.0 * ((x[0] - x[1]) + (x[0] - x[2])) * d0123;
    (fp, fpp)
}

fn end_derivs(r: &[f64], f: &[f64]) -> ((f64, f64), (f64, f64)) {
    let n = r.len();
    let lo = cubic_derivs_at_first([r[0], r[1], r[2], r[3]], [f[0], f[1], f[2], f[3]]);
    let hi = cubic_derivs_at_first(
        [r[n - 1], r[n - 2], r[n - 3], r[n - 4]],
        [f[n - 1], f[n - 2], f[n - 3], f[n - 4]],
    );
    (lo, hi)
}

/// 3-point nonuniform first difference, one-sided at the ends.
pub(crate) fn fd_first(r: &[f64], f: &[f64]) -> Vec<f64> {
    let n = r.len();
    let mut out = vec![0.0; n];
    for j in 1..n - 1 {
        let h1 = r[j] - r[j - 1];
        let h2 = r[j + 1] - r[j];
        out[j] = -h2 / (h1 * (h1 + h2)) * f[j - 1] + (h2 - h1) / (h1 * h2) * f[j]
            + h1 / (h2 * (h1 + h2)) * f[j + 1];
    }
    let ((lo, _), (hi, _)) = end_derivs(r, f);
    out[0] = lo;
    out[n - 1] = hi;
    out
}

/// 3-point nonuniform second difference of `field`'s values, one-sided at the
/// ends; exact for quadratics in `r`.
pub fn fd_second_derivative(field: &RadialField) -> RadialField {
    let r = field.grid().nodes();
    let f = field.values();
    let n = r.len();
    let mut out = vec![0.0; n];
    for j in 1..n - 1 {
        let h1 = r[j] - r[j - 1];
        let h2 = r[j + 1] - r[j];
        out[j] = 2.0
            * (f[j - 1] / (h1 * (h1 + h2)) - f[j] / (h1 * h2) + f[j + 1] / (h2 * (h1 + h2)));
    }
    let ((_, lo), (_, hi)) = end_derivs(r, f);
    out[0] = lo;
    out[n - 1] = hi;
    RadialField {
        grid: field.grid().clone(),
        values: out,
        deriv: None,
        deriv_kind: Some(DerivKind::FiniteDifference),
    }
}

/// 5-point 4th-order derivative with respect to `x = ln r` on the uniform
/// log grid (one-sided near the edges).
pub(crate) fn deriv_log4(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 5, "need at least 5 nodes");
    let mut out = vec![0.0; n];
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
    for j in 2..n - 2 {
        out[j] = (f[j - 2] - 8.0 * f[j - 1] + 8.0 * f[j + 1] - f[j + 2]) / (12.0 * h);
    }
    out[n - 2] =
        (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5])
            / (12.0 * h);
    out[n - 1] =
        (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5])
            / (12.0 * h);
    out
}

/// 7-point 6th-order derivative with respect to `x = ln r`; falls back to the
/// 4th-order stencil within three nodes of either edge.
pub(crate) fn deriv_log6(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = deriv_log4(f, h);
    if n >= 7 {
        for j in 3..n - 3 {
            out[j] = (-f[j - 3] + 9.0 * f[j - 2] - 45.0 * f[j - 1] + 45.0 * f[j + 1]
                - 9.0 * f[j + 2]
                + f[j + 3])
                / (60.0 * h);
        }
    }
    out
}

// 6-point one-sided / offset stencils, fifth order, for the three rows
// nearest an edge.
const EDGE6: [[f64; 6]; 3] = [
    [
        -137.0 / 60.0,
        5.0,
        -5.0,
        10.0 / 3.0,
        -5.0 / 4.0,
        1.0 / 5.0,
    ],
    [
        -1.0 / 5.0,
        -13.0 / 12.0,
        2.0,
        -1.0,
        1.0 / 3.0,
        -1.0 / 20.0,
    ],
    [
        1.0 / 20.0,
        -1.0 / 2.0,
        -1.0 / 3.0,
        1.0,
        -1.0 / 4.0,
        1.0 / 30.0,
    ],
];

/// Derivative with respect to `x = ln r`: 7-point sixth-order interior,
/// 6-point fifth-order rows at the edges. Used by the residual evaluators,
/// which differentiate already-differentiated data and need the extra edge
/// accuracy.
pub(crate) fn deriv_log_hi(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    if n < 8 {
        return deriv_log4(f, h);
    }
    let mut out = deriv_log6(f, h);
    for (row, coef) in EDGE6.iter().enumerate() {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (k, c) in coef.iter().enumerate() {
            lo += c * f[k];
            hi -= c * f[n - 1 - k];
        }
        out[row] = lo / h;
        out[n - 1 - row] = hi / h;
    }
    out
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV serialization: columns `r,value,deriv` with 17 significant digits.
pub fn write_csv<W: Write>(field: &RadialField, mut w: W) -> Result<()> {
    writeln!(w, "r,value,deriv")?;
    let deriv = field.deriv();
    for (j, (&r, &v)) in field
        .grid()
        .nodes()
        .iter()
        .zip(field.values())
        .enumerate()
    {
        match deriv {
            Some(d) => writeln!(w, "{},{},{}", fmt17(r), fmt17(v), fmt17(d[j]))?,
            None => writeln!(w, "{},{},", fmt17(r), fmt17(v))?,
        }
    }
    Ok(())
}

/// Reads `r,value[,deriv]` rows and resamples nothing: the radii must match
/// the supplied grid nodes to 1e-12 relative.
pub fn read_csv<R: BufRead>(grid: Arc<RadialGrid>, reader: R) -> Result<RadialField> {
    let mut values = Vec::with_capacity(grid.len());
    let mut deriv = Vec::with_capacity(grid.len());
    let mut have_deriv = true;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || (lineno == 0 && t.starts_with('r')) {
            continue;
        }
        let cols: Vec<&str> = t.split(',').collect();
        if cols.len() < 2 {
            return Err(Error::Domain(format!("csv line {} malformed: {t}", lineno + 1)));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Domain(format!("csv line {}: {e}", lineno + 1)))
        };
        let r = parse(cols[0])?;
        let idx = values.len();
        if idx >= grid.len() {
            return Err(Error::Domain("csv has more rows than grid nodes".into()));
        }
        let expected = grid.node(idx);
        if (r - expected).abs() > 1e-12 * (1.0 + expected) {
            return Err(Error::Domain(format!(
                "csv radius {r} does not match grid node {expected}"
            )));
        }
        values.push(parse(cols[1])?);
        if cols.len() >= 3 && !cols[2].trim().is_empty() {
            deriv.push(parse(cols[2])?);
        } else {
            have_deriv = false;
        }
    }
    if values.len() != grid.len() {
        return Err(Error::Domain(format!(
            "csv has {} rows, grid has {} nodes",
            values.len(),
            grid.len()
        )));
    }
    if have_deriv {
        RadialField::with_deriv(grid, values, deriv, DerivKind::Quadrature)
    } else {
        RadialField::new(grid, values)
    }
}
