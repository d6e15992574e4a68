//! Batch experiments behind the `twolevel` binary.
//!
//! Every command reads a [`RunConfig`], fans the `T` grid out over a worker
//! pool and writes its artifacts in `T` order, so the output bytes do not
//! depend on the worker count.

mod config;

pub use config::{
    parse_config, BerryConfig, InterferenceConfig, ModelConfig, OutputConfig, RegionConfig,
    RunConfig, RunOptions, SolverConfig, Spacing, TGrid, TraceConfig, WORKERS_ENV,
};

use crate::adiabatic::{
    adiabatic_probability, berry_contribution, berry_printed_constant, dykhne_exponent,
    fit_edge_constants, fit_log_probability, naive_product_probability_with, EdgeFit, FormulaId,
};
use crate::dynamics::{transition_probability_exact_with, Potential, PotentialKind};
use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::stokes::{
    build_stokes_graph, graph_csv, graph_svg, potential_singularities, GraphOptions, StokesGraph,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Trace,
    Exact,
    Adiabatic,
    Sweep,
    Interference,
    Berry,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Trace => "trace",
            Experiment::Exact => "exact",
            Experiment::Adiabatic => "adiabatic",
            Experiment::Sweep => "sweep",
            Experiment::Interference => "interference",
            Experiment::Berry => "berry",
        }
    }
}

/// One row of `rows.csv` for `exact`, `adiabatic` and `sweep`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub p_exact: Option<f64>,
    pub phase: Option<f64>,
    pub p_adiabatic: Option<f64>,
    pub kappa: Option<f64>,
    pub prefactor: Option<f64>,
    pub formula: Option<FormulaId>,
    pub runtime_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub fit: Option<EdgeFit>,
    /// Fit failure, if any; the rows are still written.
    pub fit_error: Option<String>,
    pub dykhne_kappa: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterferenceRow {
    pub t: f64,
    pub p_exact: f64,
    pub p_single: f64,
    pub p_naive: f64,
}

/// Smooth fit of one curve and its residual oscillation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveFit {
    pub curve: String,
    pub fit: Option<EdgeFit>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterferenceReport {
    pub rows: Vec<InterferenceRow>,
    pub crossings: usize,
    pub fits: Vec<CurveFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BerryRow {
    pub alpha: f64,
    pub t: f64,
    pub p_full: f64,
    pub p_no_geometric: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BerryAlpha {
    pub alpha: f64,
    pub mean_ratio: f64,
    /// `(max - min) / mean` of the ratio over the `T` grid.
    pub spread: f64,
    pub contribution_factor: f64,
    pub printed_constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BerryReport {
    pub rows: Vec<BerryRow>,
    pub alphas: Vec<BerryAlpha>,
    pub monotone_in_alpha: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphSummary {
    pub source: String,
    pub turning_points: usize,
    pub stokes_lines: usize,
    pub lines: usize,
    pub failed_traces: usize,
    pub linking_line: bool,
    pub crossings: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct Meta<'a> {
    experiment: &'a str,
    version: &'a str,
    model: &'a str,
    params: &'a std::collections::BTreeMap<String, f64>,
    config: &'a RunConfig,
    /// No command draws random numbers.
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<serde_json::Value>,
}

/// Runs `exp` and writes its artifacts under `out_dir` (or `output.dir`, or the working directory).
pub fn run(exp: Experiment, cfg: &RunConfig, out_dir: Option<&Path>) -> Result<serde_json::Value> {
    let dir: PathBuf = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let model = cfg.build_model()?;
    log::info!(
        "{} on {} with {} workers",
        exp.name(),
        model.name(),
        cfg.workers()
    );
    let (summary, failure) = match exp {
        Experiment::Trace => (to_json(&cmd_trace(cfg, &model, &dir)?), None),
        Experiment::Exact => (to_json(&cmd_exact(cfg, &model, &dir)?), None),
        Experiment::Adiabatic => (to_json(&cmd_adiabatic(cfg, &model, &dir)?), None),
        Experiment::Sweep => {
            let r = cmd_sweep(cfg, &model, &dir)?;
            let fail = r.fit_error.clone();
            (fit_summary(&r), fail)
        }
        Experiment::Interference => {
            let r = cmd_interference(cfg, &model, &dir)?;
            (json!({ "crossings": r.crossings, "fits": r.fits }), None)
        }
        Experiment::Berry => {
            let r = cmd_berry(cfg, &dir)?;
            (
                json!({ "alphas": r.alphas, "monotone_in_alpha": r.monotone_in_alpha }),
                None,
            )
        }
    };
    let meta = Meta {
        experiment: exp.name(),
        version: env!("CARGO_PKG_VERSION"),
        model: model.name(),
        params: model.params(),
        config: cfg,
        seed: None,
        summary: Some(summary.clone()),
    };
    write_json(&dir.join("meta.json"), &meta)?;
    match failure {
        Some(msg) => Err(Error::RegimeViolation(msg)),
        None => Ok(summary),
    }
}

fn fit_summary(r: &SweepReport) -> serde_json::Value {
    json!({ "fit": r.fit, "fit_error": r.fit_error, "dykhne_kappa": r.dykhne_kappa })
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Maps `f` over `items` on `workers` threads, keeping the input order.
pub fn par_map<T, R, F>(workers: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}

fn leading_graph(cfg: &RunConfig, model: &FieldModel) -> Result<StokesGraph> {
    build_stokes_graph(
        &Potential::leading(model),
        &cfg.region(),
        &GraphOptions::default(),
    )
}

fn summarize(g: &StokesGraph) -> GraphSummary {
    GraphSummary {
        source: format!("{:?}", g.source).to_lowercase(),
        turning_points: g.turning_points.len(),
        stokes_lines: g.stokes_lines().count(),
        lines: g.lines.len(),
        failed_traces: g.failed.len(),
        linking_line: g.closest.is_some(),
        crossings: g
            .closest
            .iter()
            .flat_map(|l| l.crossings.iter().map(|c| [c.location.re, c.location.im]))
            .collect(),
    }
}

pub fn cmd_trace(cfg: &RunConfig, model: &FieldModel, dir: &Path) -> Result<Vec<GraphSummary>> {
    let g = leading_graph(cfg, model)?;
    std::fs::write(dir.join("graph.csv"), graph_csv(&g))?;
    std::fs::write(dir.join("graph.svg"), graph_svg(&g))?;
    let mut out = vec![summarize(&g)];
    if cfg.trace.full {
        let t = cfg.t_values()?[0];
        let region = cfg.region();
        let pot = Potential::new(model, PotentialKind::Minus, t);
        let (_, langer) = potential_singularities(&pot, &region);
        let full =
            build_stokes_graph(&pot.with_langer(&langer), &region, &GraphOptions::default())?;
        std::fs::write(dir.join("graph_full.csv"), graph_csv(&full))?;
        std::fs::write(dir.join("graph_full.svg"), graph_svg(&full))?;
        out.push(summarize(&full));
    }
    Ok(out)
}

fn exact_rows(cfg: &RunConfig, model: &FieldModel, ts: &[f64]) -> Result<Vec<SweepRow>> {
    let opts = cfg.exact_options()?;
    par_map(cfg.workers(), ts, |&t| {
        let clock = Instant::now();
        let r = transition_probability_exact_with(model, t, &opts)?;
        let secs = clock.elapsed().as_secs_f64();
        log::debug!("T = {t}: P = {:e} in {secs:.3} s, cutoff {}", r.p, r.cutoff);
        Ok(SweepRow {
            t,
            p_exact: Some(r.p),
            phase: Some(r.phase),
            runtime_s: cfg.output.timings.then_some(secs),
            ..SweepRow::default()
        })
    })
}

fn fill_adiabatic(
    row: &mut SweepRow,
    model: &FieldModel,
    g: &StokesGraph,
    edge: Option<&EdgeFit>,
) -> Result<()> {
    let a = adiabatic_probability(model, row.t, g, edge)?;
    row.p_adiabatic = Some(a.p);
    row.kappa = Some(a.exponent_kappa);
    row.prefactor = Some(a.prefactor);
    row.formula = Some(a.formula_id);
    Ok(())
}

pub fn cmd_exact(cfg: &RunConfig, model: &FieldModel, dir: &Path) -> Result<SweepReport> {
    let rows = exact_rows(cfg, model, &cfg.t_values()?)?;
    write_rows(&dir.join("rows.csv"), &rows)?;
    Ok(SweepReport {
        rows,
        fit: None,
        fit_error: None,
        dykhne_kappa: None,
    })
}

pub fn cmd_adiabatic(cfg: &RunConfig, model: &FieldModel, dir: &Path) -> Result<SweepReport> {
    let g = leading_graph(cfg, model)?;
    let mut rows: Vec<SweepRow> = cfg
        .t_values()?
        .into_iter()
        .map(|t| SweepRow {
            t,
            ..SweepRow::default()
        })
        .collect();
    for r in &mut rows {
        fill_adiabatic(r, model, &g, None)?;
    }
    write_rows(&dir.join("rows.csv"), &rows)?;
    let report = SweepReport {
        rows,
        fit: None,
        fit_error: None,
        dykhne_kappa: Some(dykhne_exponent(model, &g)?),
    };
    Ok(report)
}

/// Exact rows, edge-constant fit, and adiabatic values with the fitted constants.
pub fn cmd_sweep(cfg: &RunConfig, model: &FieldModel, dir: &Path) -> Result<SweepReport> {
    let ts = cfg.t_values()?;
    let mut rows = exact_rows(cfg, model, &ts)?;
    let g = leading_graph(cfg, model)?;
    let records: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.t, r.p_exact.unwrap_or(f64::NAN)))
        .collect();
    let (fit, fit_error) = match fit_edge_constants(model, &records, &g) {
        Ok(f) => (Some(f), None),
        Err(e) => {
            log::warn!("edge-constant fit failed: {e}");
            (None, Some(e.to_string()))
        }
    };
    for r in &mut rows {
        fill_adiabatic(r, model, &g, fit.as_ref())?;
    }
    let report = SweepReport {
        rows,
        fit,
        fit_error,
        dykhne_kappa: Some(dykhne_exponent(model, &g)?),
    };
    write_rows(&dir.join("rows.csv"), &report.rows)?;
    write_json(&dir.join("fit.json"), &fit_summary(&report))?;
    Ok(report)
}

fn curve_fit(
    name: &str,
    rows: &[InterferenceRow],
    pick: impl Fn(&InterferenceRow) -> f64,
) -> CurveFit {
    let recs: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, pick(r))).collect();
    match fit_log_probability(&recs) {
        Ok(f) => CurveFit {
            curve: name.into(),
            fit: Some(f),
            error: None,
        },
        Err(e) => CurveFit {
            curve: name.into(),
            fit: None,
            error: Some(e.to_string()),
        },
    }
}

/// Exact, single-line adiabatic and naive product curves over the `T` grid.
pub fn cmd_interference(
    cfg: &RunConfig,
    model: &FieldModel,
    dir: &Path,
) -> Result<InterferenceReport> {
    let ts = cfg.t_values()?;
    let g = leading_graph(cfg, model)?;
    let crossings = g.closest.as_ref().map_or(0, |l| l.crossings.len());
    if crossings < 2 {
        log::warn!("closest line has {crossings} crossing(s); the product baseline is trivial");
    }
    let exact = exact_rows(cfg, model, &ts)?;
    let mut rows = Vec::with_capacity(ts.len());
    for r in exact {
        rows.push(InterferenceRow {
            t: r.t,
            p_exact: r.p_exact.unwrap_or(f64::NAN),
            p_single: adiabatic_probability(model, r.t, &g, None)?.p,
            p_naive: naive_product_probability_with(model, r.t, &g, cfg.interference.phase)?,
        });
    }
    let fits = vec![
        curve_fit("exact", &rows, |r| r.p_exact),
        curve_fit("single_line", &rows, |r| r.p_single),
        curve_fit("naive_product", &rows, |r| r.p_naive),
    ];
    let report = InterferenceReport {
        rows,
        crossings,
        fits,
    };
    write_rows(&dir.join("rows.csv"), &report.rows)?;
    write_json(
        &dir.join("fit.json"),
        &json!({ "crossings": report.crossings, "fits": report.fits }),
    )?;
    Ok(report)
}

/// Exact `P` with and without the geometric frequency term for each `α`.
pub fn cmd_berry(cfg: &RunConfig, dir: &Path) -> Result<BerryReport> {
    if cfg.model.name != "berry" {
        return Err(Error::GeometricTermZero);
    }
    let ts = cfg.t_values()?;
    let full = cfg.exact_options()?;
    let plain = crate::dynamics::ExactOptions {
        geometric: false,
        ..full.clone()
    };
    let mut rows = Vec::new();
    let mut alphas = Vec::new();
    for &alpha in &cfg.berry.alphas {
        let model = cfg.build_model_with(|_| Some(alpha))?;
        let pairs = par_map(cfg.workers(), &ts, |&t| {
            Ok((
                transition_probability_exact_with(&model, t, &full)?.p,
                transition_probability_exact_with(&model, t, &plain)?.p,
            ))
        })?;
        let ratios: Vec<f64> = pairs.iter().map(|(a, b)| a / b).collect();
        for (&t, &(pf, pn)) in ts.iter().zip(&pairs) {
            rows.push(BerryRow {
                alpha,
                t,
                p_full: pf,
                p_no_geometric: pn,
                ratio: pf / pn,
            });
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| {
                (l.min(*r), h.max(*r))
            });
        let g = leading_graph(cfg, &model)?;
        alphas.push(BerryAlpha {
            alpha,
            mean_ratio: mean,
            spread: (hi - lo) / mean,
            contribution_factor: berry_contribution(&model, ts[0], &g)?.0,
            printed_constant: berry_printed_constant(alpha),
        });
    }
    let mut sorted = alphas.clone();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let monotone_in_alpha = sorted.windows(2).all(|w| w[1].mean_ratio > w[0].mean_ratio);
    let report = BerryReport {
        rows,
        alphas,
        monotone_in_alpha,
    };
    write_rows(&dir.join("rows.csv"), &report.rows)?;
    write_json(
        &dir.join("fit.json"),
        &json!({ "alphas": report.alphas, "monotone_in_alpha": report.monotone_in_alpha }),
    )?;
    Ok(report)
}
