//! Run configuration: JSON schema with strict key checking, defaults
//! materialized on parse, and a byte-stable echo for reproducibility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::KappaSpec;
use crate::params::{derive_params, Params};

fn d_r_min() -> f64 {
    crate::grid::DEFAULT_R_MIN
}
fn d_nodes() -> usize {
    crate::grid::DEFAULT_INTERVALS
}
fn d_tol() -> f64 {
    1e-8
}
fn d_max_iter() -> usize {
    200
}
fn d_out_dir() -> String {
    "out".into()
}
fn d_true() -> bool {
    true
}
fn d_ineq_samples() -> usize {
    100_000
}
fn d_random_cases() -> usize {
    50
}
fn d_kernel_modes() -> u32 {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "d_r_min")]
    pub r_min: f64,
    #[serde(default = "d_nodes")]
    pub nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            r_min: d_r_min(),
            nodes: d_nodes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaConfig {
    #[serde(default = "KappaConfig::default_family")]
    pub family: String,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "KappaConfig::default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

impl KappaConfig {
    fn default_family() -> String {
        "power".into()
    }
    fn default_alpha() -> f64 {
        1.0
    }

    pub fn to_spec(&self, path: &str) -> Result<KappaSpec> {
        let spec = match self.family.as_str() {
            "power" => KappaSpec::Power {
                c: self.c,
                alpha: self.alpha,
            },
            "ramp" => KappaSpec::Ramp {
                c: self.c,
                alpha: self.alpha,
            },
            "table" => {
                let pts = self.table.clone().ok_or_else(|| Error::Config {
                    path: format!("{path}.table"),
                    reason: "table family needs sample points".into(),
                })?;
                KappaSpec::Table {
                    radii: pts.iter().map(|p| p.0).collect(),
                    values: pts.iter().map(|p| p.1).collect(),
                }
            }
            other => {
                return Err(Error::Config {
                    path: format!("{path}.family"),
                    reason: format!("unknown family `{other}` (power | ramp | table)"),
                })
            }
        };
        spec.validate().map_err(|e| Error::Config {
            path: path.into(),
            reason: e.to_string(),
        })?;
        Ok(spec)
    }
}

impl Default for KappaConfig {
    fn default() -> Self {
        KappaConfig {
            family: Self::default_family(),
            c: 0.0,
            alpha: Self::default_alpha(),
            table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointConfig {
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            r: None,
            delta: None,
            tol: d_tol(),
            max_iter: d_max_iter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "d_ineq_samples")]
    pub inequality_samples: usize,
    #[serde(default = "d_random_cases")]
    pub random_cases: usize,
    #[serde(default = "d_kernel_modes")]
    pub kernel_modes: u32,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            inequality_samples: d_ineq_samples(),
            random_cases: d_random_cases(),
            kernel_modes: d_kernel_modes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "d_out_dir")]
    pub out_dir: String,
    #[serde(default = "d_true")]
    pub emit_csv: bool,
    #[serde(default = "d_true")]
    pub emit_json: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            out_dir: d_out_dir(),
            emit_csv: true,
            emit_json: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub n: u32,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub kappa1: KappaConfig,
    #[serde(default)]
    pub kappa2: KappaConfig,
    #[serde(default)]
    pub fixed_point: FixedPointConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn minimal(n: u32, p: f64) -> Self {
        RunConfig {
            n,
            p,
            t: None,
            grid: GridConfig::default(),
            kappa1: KappaConfig::default(),
            kappa2: KappaConfig::default(),
            fixed_point: FixedPointConfig::default(),
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
            seed: 0,
        }
    }

    pub fn params(&self) -> Result<Params> {
        derive_params(self.n, self.p).map_err(|e| Error::Config {
            path: if self.p >= 2.0 || self.p <= self.n as f64 / (self.n as f64 - 1.0) {
                "params.p".into()
            } else {
                "params.N".into()
            },
            reason: e.to_string(),
        })
    }

    pub fn grid(&self) -> Result<std::sync::Arc<crate::grid::RadialGrid>> {
        crate::grid::RadialGrid::geometric(self.grid.r_min, self.grid.nodes).map_err(|e| {
            Error::Config {
                path: "grid".into(),
                reason: e.to_string(),
            }
        })
    }

    /// Fully-defaulted echo of the configuration.
    pub fn echo(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a configuration document. Unknown keys are rejected;
/// semantic range checks run immediately so nothing downstream sees bad
/// parameters.
pub fn parse_config(text: &[u8]) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_slice(text).map_err(|e| Error::Config {
        path: "$".into(),
        reason: e.to_string(),
    })?;
    cfg.params()?;
    cfg.grid()?;
    if let Some(t) = cfg.t {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Config {
                path: "t".into(),
                reason: format!("t = {t} must be finite and >= 0"),
            });
        }
    }
    cfg.kappa1.to_spec("kappa1")?;
    cfg.kappa2.to_spec("kappa2")?;
    if !(cfg.fixed_point.tol > 0.0) {
        return Err(Error::Config {
            path: "fixed_point.tol".into(),
            reason: "tolerance must be positive".into(),
        });
    }
    Ok(cfg)
}
