//! Run configuration: TOML text plus `--section.key=value` overrides.

use crate::adiabatic::ProductPhase;
use crate::dynamics::{Boundary, ExactOptions};
use crate::error::{Error, Result};
use crate::fields::{
    make_berry, make_constant, make_nikitin, make_rational, make_sech, make_tanh, FieldModel,
};
use crate::numerics::{Rect, Tolerance};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "TWOLEVEL_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub t: TGrid,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub region: Option<RegionConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub interference: InterferenceConfig,
    #[serde(default)]
    pub berry: BerryConfig,
}

/// Model name, `mu` and the parameters its constructor needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default = "one")]
    pub mu: f64,
    pub b: Option<f64>,
    pub delta_eps: Option<f64>,
    pub b0: Option<f64>,
    pub b1: Option<f64>,
    pub alpha: Option<f64>,
    /// Field vector of the constant model.
    pub field: Option<[f64; 3]>,
    /// Rational model: ascending coefficients per component.
    pub num: Option<[Vec<f64>; 3]>,
    pub den: Option<[Vec<f64>; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// Either `value`, an explicit `values` list, or `min`/`max`/`count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TGrid {
    pub value: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub count: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Default for TGrid {
    fn default() -> Self {
        TGrid {
            value: Some(10.0),
            values: None,
            min: None,
            max: None,
            count: None,
            spacing: Spacing::Linear,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Fixed truncation point; absent means grow from the model default.
    pub cutoff: Option<f64>,
    #[serde(default = "default_rel")]
    pub rel_tol: f64,
    #[serde(default = "default_abs")]
    pub abs_tol: f64,
    #[serde(default = "default_subdiv")]
    pub max_subdivisions: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_tail_rel")]
    pub tail_rel: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cutoff: None,
            rel_tol: default_rel(),
            abs_tol: default_abs(),
            max_subdivisions: default_subdiv(),
            boundary: default_boundary(),
            tail_rel: default_tail_rel(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Adds wall-clock seconds per row; rows are then no longer reproducible byte for byte.
    #[serde(default)]
    pub timings: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Overrides the worker count from the environment.
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    /// Also trace the full `q-` with Langer terms at the first `T`.
    #[serde(default)]
    pub full: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceConfig {
    #[serde(default)]
    pub phase: ProductPhase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BerryConfig {
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
}

impl Default for BerryConfig {
    fn default() -> Self {
        BerryConfig {
            alphas: default_alphas(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_rel() -> f64 {
    1e-11
}
fn default_abs() -> f64 {
    1e-15
}
fn default_subdiv() -> usize {
    2000
}
fn default_boundary() -> Boundary {
    Boundary::Dressed
}
fn default_tail_rel() -> f64 {
    1e-3
}
fn default_alphas() -> Vec<f64> {
    vec![1.43, 1.5, 1.6]
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        message: message.into(),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parses `text`, applies `overrides` of the form `section.key=value` and validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg = RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| {
        let msg = e.message().to_string();
        // serde names the offending field in backquotes.
        let field = msg.split('`').nth(1).unwrap_or("config").to_string();
        invalid(&field, msg)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let spec = spec.trim_start_matches("--");
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(spec, "override needs the form section.key=value"))?;
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(invalid(path, "empty key in override"));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| invalid(path, format!("'{k}' is not a section")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if !(self.model.mu > 0.0) {
            return Err(invalid("model.mu", "must be positive"));
        }
        if let Some(c) = self.solver.cutoff {
            if !(c > 0.0) {
                return Err(invalid("cutoff", "must be positive"));
            }
        }
        if !(self.solver.rel_tol > 0.0) || !(self.solver.abs_tol >= 0.0) {
            return Err(invalid("solver.rel_tol", "tolerances must be positive"));
        }
        if self.run.workers == Some(0) {
            return Err(invalid("run.workers", "must be at least 1"));
        }
        if let Some(r) = &self.region {
            Rect::new(r.re_min, r.re_max, r.im_min, r.im_max)
                .map_err(|e| invalid("region", e.to_string()))?;
        }
        self.t_values()?;
        self.build_model()?;
        Ok(())
    }

    /// The `T` grid in increasing order.
    pub fn t_values(&self) -> Result<Vec<f64>> {
        let g = &self.t;
        let mut out = if let Some(v) = &g.values {
            v.clone()
        } else if let (Some(a), Some(b)) = (g.min, g.max) {
            let n = g.count.unwrap_or(10);
            if n == 0 {
                return Err(invalid("t.count", "grid count must be at least 1"));
            }
            if !(a > 0.0 && b >= a) {
                return Err(invalid("t.min", "need 0 < min <= max"));
            }
            (0..n)
                .map(|i| {
                    let f = if n == 1 {
                        0.0
                    } else {
                        i as f64 / (n - 1) as f64
                    };
                    match g.spacing {
                        Spacing::Linear => a + (b - a) * f,
                        Spacing::Log => (a.ln() + (b.ln() - a.ln()) * f).exp(),
                    }
                })
                .collect()
        } else if let Some(v) = g.value {
            vec![v]
        } else {
            return Err(invalid("t", "give value, values, or min and max"));
        };
        if out.is_empty() || out.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(invalid("t", "values must be positive"));
        }
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    pub fn build_model(&self) -> Result<FieldModel> {
        self.build_model_with(|m| m.alpha)
    }

    pub(crate) fn build_model_with(
        &self,
        alpha: impl Fn(&ModelConfig) -> Option<f64>,
    ) -> Result<FieldModel> {
        let m = &self.model;
        let need = |v: Option<f64>, k: &str| {
            v.ok_or_else(|| invalid(&format!("model.{k}"), "required for this model"))
        };
        match m.name.as_str() {
            "nikitin" => make_nikitin(need(m.b, "b")?, need(m.delta_eps, "delta_eps")?, m.mu),
            "sech" => make_sech(need(m.b0, "b0")?, need(m.b1, "b1")?, m.mu),
            "tanh" => make_tanh(need(m.b0, "b0")?, m.mu),
            "berry" => make_berry(need(m.b0, "b0")?, need(alpha(m), "alpha")?, m.mu),
            "constant" => make_constant(
                m.field
                    .ok_or_else(|| invalid("model.field", "required for this model"))?,
                m.mu,
            ),
            "rational" => make_rational(
                m.num
                    .clone()
                    .ok_or_else(|| invalid("model.num", "required for this model"))?,
                m.den
                    .clone()
                    .ok_or_else(|| invalid("model.den", "required for this model"))?,
                m.mu,
            ),
            other => Err(invalid("model.name", format!("unknown model '{other}'"))),
        }
    }

    /// Region for graphs: the configured one or a per-model default.
    pub fn region(&self) -> Rect {
        if let Some(r) = &self.region {
            return Rect {
                re_min: r.re_min,
                re_max: r.re_max,
                im_min: r.im_min,
                im_max: r.im_max,
            };
        }
        let (re, im) = match self.model.name.as_str() {
            "tanh" => (4.0, 1.2),
            "berry" => (3.0, 2.0),
            "constant" => (2.0, 1.0),
            _ => (5.0, 2.0),
        };
        Rect {
            re_min: -re,
            re_max: re,
            im_min: -im,
            im_max: im,
        }
    }

    pub fn exact_options(&self) -> Result<ExactOptions> {
        let s = &self.solver;
        Ok(ExactOptions {
            cutoff: s.cutoff,
            tol: Tolerance::new(s.rel_tol, s.abs_tol, s.max_subdivisions)
                .map_err(|e| invalid("solver", e.to_string()))?,
            boundary: s.boundary,
            tail_rel: s.tail_rel,
            ..ExactOptions::default()
        })
    }

    /// Config value, else the environment, else the number of CPUs.
    pub fn workers(&self) -> usize {
        self.run
            .workers
            .or_else(|| {
                std::env::var(WORKERS_ENV)
                    .ok()
                    .and_then(|v| v.parse().ok())
                    .filter(|n| *n > 0)
            })
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}
