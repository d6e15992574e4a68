//! Adiabatic-limit formulas: Dykhne exponents, family prefactors, edge-constant
//! fits, the Berry-phase factor, the per-crossing product baseline and the
//! semiclassical amplitude.

mod semiclassical;

pub use semiclassical::{
    semiclassical_amplitude, semiclassical_amplitude_with, semiclassical_candidates,
    SemiclassicalOptions, SemiclassicalResult,
};

use crate::dynamics::{coefficient_jets_branch, Potential};
use crate::error::{Error, Result};
use crate::fields::{asymptotic_data, AsymptoticData, FieldModel, ModelKind};
use crate::numerics::ComplexPath;
use crate::stokes::track::{march, MarchOptions, Sample};
use crate::stokes::{action_w, closest_stokes_line, PotentialSource, StokesGraph};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    Nikitin,
    Algebraic,
    Sech,
    Tanh,
    Berry,
    GenericDykhne,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdiabaticResult {
    pub p: f64,
    /// `P ∝ e^{-2Tκ}`.
    pub exponent_kappa: f64,
    /// Everything multiplying `e^{-2Tκ}`, edge constants included.
    pub prefactor: f64,
    /// `a_L²a_R²` used in the prefactor.
    pub edge_constants: f64,
    /// False when the edge constants defaulted to 1.
    pub edge_fitted: bool,
    pub formula_id: FormulaId,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeFit {
    pub kappa_fitted: f64,
    pub power_fitted: f64,
    /// Intercept of the fit of `ln P`.
    pub const_fitted: f64,
    /// `a_L²a_R²`: mean of `P e^{2κT}` over the family's printed prefactor, in log space.
    pub edge_product: Option<f64>,
    pub residual_rms: f64,
    /// Largest absolute residual of `ln P`.
    pub oscillation_amplitude: f64,
    pub r_squared: f64,
    pub samples: usize,
}

fn require_leading(graph: &StokesGraph) -> Result<()> {
    if graph.source != PotentialSource::Leading {
        return Err(Error::InvalidInput(
            "graph must be built from the leading potential".into(),
        ));
    }
    Ok(())
}

/// The crossing of the closest linking line nearest the real axis.
pub fn closest_crossing(graph: &StokesGraph) -> Result<C64> {
    let line = closest_stokes_line(graph)?;
    line.crossings
        .iter()
        .map(|c| c.location)
        .min_by(|a, b| {
            a.im.abs()
                .total_cmp(&b.im.abs())
                .then(a.re.total_cmp(&b.re))
        })
        .ok_or(Error::NoLinkingLine)
}

// `Im ∫ μB ds` along `pts`, starting on the real axis with `B > 0`.
fn im_action(model: &FieldModel, pts: &[C64]) -> Result<f64> {
    let pot = Potential::leading(model);
    let b0 = model.b_squared(pts[0], 1.0).sqrt();
    let w = action_w(
        &pot,
        &ComplexPath::new(pts.to_vec())?,
        b0 * (0.5 * model.mu()),
    )?;
    Ok(2.0 * w.im)
}

/// `κ = Im ∫_{x₀}^{s_c} μB ds` from the real point below the closest crossing.
pub fn dykhne_exponent(model: &FieldModel, graph: &StokesGraph) -> Result<f64> {
    require_leading(graph)?;
    let sc = closest_crossing(graph)?;
    let k = im_action(model, &[C64::new(sc.re, 0.0), sc])?;
    Ok(k.abs())
}

/// The same exponent reached through `n` interior points of the closest line,
/// along the real axis and then vertically. Agreement with [`dykhne_exponent`]
/// reflects `Im W = 0` on the line.
pub fn dykhne_exponent_line_points(
    model: &FieldModel,
    graph: &StokesGraph,
    n: usize,
) -> Result<Vec<f64>> {
    require_leading(graph)?;
    let line = closest_stokes_line(graph)?;
    let sc = closest_crossing(graph)?;
    let poles: Vec<C64> = graph.singular.clone();
    let pts = &line.points;
    let mut out = Vec::new();
    let mut k = 1;
    while out.len() < n && k <= 4 * n {
        let idx = pts.len() * k / (4 * n + 1);
        k += 1;
        let p = pts[idx];
        // Vertical leg must stay clear of the strip's singular points.
        if poles
            .iter()
            .any(|z| (z.re - p.re).abs() < 0.05 && z.im.abs() <= p.im.abs() + 0.05)
        {
            continue;
        }
        let x0 = C64::new(sc.re, 0.0);
        let foot = C64::new(p.re, 0.0);
        let path: Vec<C64> = if (foot - x0).norm() > 0.0 {
            vec![x0, foot, p]
        } else {
            vec![x0, p]
        };
        out.push(im_action(model, &path)?.abs());
    }
    Ok(out)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Edge coefficient `D` for one tail, from `B0` and its leading correction `B1`.
/// When `B0` lies on the z-axis the vector form is singular and the modulus
/// `B1 sin φ/(2B0)` is returned as a real number.
pub fn prefactor_d_side(b0: [f64; 3], b1: [f64; 3]) -> Result<C64> {
    let (n0, n1) = (norm(b0), norm(b1));
    if n0 == 0.0 || n1 == 0.0 {
        return Err(Error::ParallelAsymptoticVectors { side: "degenerate" });
    }
    let w = cross(b0, b1);
    let sin_phi = norm(w) / (n0 * n1);
    if sin_phi < 1e-12 {
        return Err(Error::ParallelAsymptoticVectors { side: "" });
    }
    let modulus = n1 * sin_phi / (2.0 * n0);
    let rho = b0[0].hypot(b0[1]);
    if rho <= 1e-12 * n0 {
        return Ok(C64::new(modulus, 0.0));
    }
    let bbw = cross(b0, w);
    let d = C64::new(-0.5 * bbw[2] / (n0 * n0 * rho), 0.5 * w[2] / (n0 * rho));
    if (d.norm() - modulus).abs() > 1e-10 * modulus.max(1.0) {
        return Err(Error::NonConvergence {
            budget: 0,
            estimate: (d.norm() - modulus).abs(),
        });
    }
    Ok(d)
}

/// `(D⁻, D⁺)` from the tails of an algebraic field.
pub fn prefactor_d(asym: &AsymptoticData) -> Result<(C64, C64)> {
    if asym.alpha1_minus.is_none() || asym.alpha1_plus.is_none() {
        return Err(Error::UnknownFamily("tails are not algebraic".into()));
    }
    let tag = |e: Error, side: &'static str| match e {
        Error::ParallelAsymptoticVectors { .. } => Error::ParallelAsymptoticVectors { side },
        e => e,
    };
    let dm = prefactor_d_side(asym.b0_minus, asym.b1_minus).map_err(|e| tag(e, "minus"))?;
    let dp = prefactor_d_side(asym.b0_plus, asym.b1_plus).map_err(|e| tag(e, "plus"))?;
    Ok((dm, dp))
}

/// Family prefactor at `T` without edge constants, and the formula used.
pub fn family_prefactor(model: &FieldModel, t: f64) -> Result<(f64, FormulaId)> {
    let mu = model.mu();
    Ok(match model.kind() {
        ModelKind::Nikitin { delta_eps, .. } => (
            9.0 / (4.0 * t * t * delta_eps * delta_eps),
            FormulaId::Nikitin,
        ),
        ModelKind::Sech { b0, b1 } => (
            (2.0 * b1 / (mu * mu * t * b0 * b0)).powi(2),
            FormulaId::Sech,
        ),
        ModelKind::Tanh { b0 } => ((2f64.sqrt() / (mu * mu * t * b0)).powi(2), FormulaId::Tanh),
        ModelKind::Berry { b0, .. } => (1.0 / (2.0 * mu * t * b0).powi(2), FormulaId::Berry),
        ModelKind::Constant { .. } => return Err(Error::NoLinkingLine),
        ModelKind::Rational { .. } => {
            let a = asymptotic_data(model)?;
            let (dm, dp) = prefactor_d(&a)?;
            let (b0m, b0p) = (norm(a.b0_minus), norm(a.b0_plus));
            // |D±| = B1± sin φ±/(2B0±).
            let num = 4.0 * dm.norm() * dp.norm() * b0m * b0p;
            (
                num / (2.0 * mu * t * b0m * b0p).powi(2),
                FormulaId::Algebraic,
            )
        }
    })
}

/// Adiabatic-limit probability `prefactor · e^{-2Tκ}` for the model's family.
/// For the Berry field the prefactor includes the geometric factor of
/// [`berry_contribution`].
pub fn adiabatic_probability(
    model: &FieldModel,
    t: f64,
    graph: &StokesGraph,
    edge: Option<&EdgeFit>,
) -> Result<AdiabaticResult> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput("T must be positive".into()));
    }
    let kappa = dykhne_exponent(model, graph)?;
    let (mut pref, id) = family_prefactor(model, t)?;
    if id == FormulaId::Berry {
        pref *= berry_contribution(model, t, graph)?.0;
    }
    let (edge_constants, edge_fitted) = match edge.and_then(|e| e.edge_product) {
        Some(v) => (v, true),
        None => (1.0, false),
    };
    let prefactor = pref * edge_constants;
    Ok(AdiabaticResult {
        p: prefactor * (-2.0 * t * kappa).exp(),
        exponent_kappa: kappa,
        prefactor,
        edge_constants,
        edge_fitted,
        formula_id: id,
    })
}

/// Least-squares fit of `ln P = const − 2κT + p ln T` over `(T, P)` records.
pub fn fit_edge_constants(
    model: &FieldModel,
    records: &[(f64, f64)],
    graph: &StokesGraph,
) -> Result<EdgeFit> {
    closest_stokes_line(graph)?;
    let mut rec: Vec<(f64, f64)> = records.to_vec();
    rec.sort_by(|a, b| a.0.total_cmp(&b.0));
    if rec.len() < 6 {
        return Err(Error::RegimeViolation(format!(
            "{} samples, need at least 6",
            rec.len()
        )));
    }
    if rec
        .iter()
        .any(|r| !(r.0 > 0.0 && r.1 > 0.0 && r.1.is_finite()))
    {
        return Err(Error::RegimeViolation(
            "probabilities must be positive and finite".into(),
        ));
    }
    if rec.last().unwrap().0 < 3.0 * rec[0].0 {
        return Err(Error::RegimeViolation(
            "T window spans less than a factor 3".into(),
        ));
    }
    for w in rec.windows(2) {
        if w[1].1.ln() > w[0].1.ln() + 0.1 {
            return Err(Error::RegimeViolation(format!(
                "ln P rises between T = {} and T = {}",
                w[0].0, w[1].0
            )));
        }
    }
    let mut fit = fit_log_probability(&rec)?;
    if family_prefactor(model, 1.0).is_ok() {
        let mut acc = 0.0;
        for &(t, pr) in &rec {
            acc += pr.ln() + 2.0 * fit.kappa_fitted * t - family_prefactor(model, t)?.0.ln();
        }
        fit.edge_product = Some((acc / rec.len() as f64).exp());
    }
    Ok(fit)
}

/// Plain least-squares fit of `ln P = const − 2κT + p ln T` without regime
/// checks; `edge_product` is left empty.
pub fn fit_log_probability(records: &[(f64, f64)]) -> Result<EdgeFit> {
    let n = records.len();
    if n < 3 {
        return Err(Error::FitFailure(format!("{n} samples for 3 parameters")));
    }
    if records
        .iter()
        .any(|r| !(r.0 > 0.0 && r.1 > 0.0 && r.1.is_finite()))
    {
        return Err(Error::FitFailure(
            "probabilities must be positive and finite".into(),
        ));
    }
    let a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => -2.0 * records[i].0,
        _ => records[i].0.ln(),
    });
    let y = DVector::from_iterator(n, records.iter().map(|r| r.1.ln()));
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::FitFailure(e.to_string()))?;
    let res = &y - &a * &sol;
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ssr = res.norm_squared();
    Ok(EdgeFit {
        kappa_fitted: sol[1],
        power_fitted: sol[2],
        const_fitted: sol[0],
        edge_product: None,
        residual_rms: (ssr / n as f64).sqrt(),
        oscillation_amplitude: res.iter().fold(0.0, |m: f64, r| m.max(r.abs())),
        r_squared: if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 },
        samples: n,
    })
}

fn geo_sample(model: &FieldModel, s: C64, hint: C64) -> Result<Sample> {
    let b2 = model.b_squared(s, 1.0);
    let r = b2.sqrt();
    let b = if (r - hint).norm() <= (r + hint).norm() {
        r
    } else {
        -r
    };
    let j = coefficient_jets_branch(model, s, 1.0, 1, true, Some(b))?;
    let g = j.omega_geo.value();
    if !(g.re.is_finite() && g.im.is_finite()) {
        return Err(Error::NonFiniteSample { s });
    }
    let scale = {
        let mut d = f64::INFINITY;
        for z in model.singularities() {
            d = d.min((s - z.location).norm());
        }
        d
    };
    Ok(Sample {
        roots: [b, C64::new(0.0, 0.0)],
        value: g,
        scale,
    })
}

/// Geometric factor `e^{-2 Re I_γ}` with `I_γ = i ∫ ω_geo ds` from the real
/// point below the closest crossing up to it. Independent of `T`.
///
/// `ω_geo` has simple poles where `B_x² + B_y² = 0`, which may sit on the
/// vertical below the crossing. The path therefore climbs at a horizontal
/// offset and approaches the crossing sideways; a pole passed on either side
/// only adds a real residue term to `∫ ω_geo`, i.e. a phase of `I_γ`.
pub fn berry_contribution(model: &FieldModel, _t: f64, graph: &StokesGraph) -> Result<(f64, C64)> {
    if model.is_planar() {
        return Err(Error::GeometricTermZero);
    }
    require_leading(graph)?;
    let sc = closest_crossing(graph)?;
    let x0 = C64::new(sc.re, 0.0);
    let b0 = model.b_squared(x0, 1.0).sqrt();
    let d = 0.25 * sc.im.abs();
    // Stop short of the crossing, where ω_geo has an integrable inverse square root.
    let end = sc + 1e-6 * d;
    let (v, _, _) = march(
        |s, h: &[C64; 2]| geo_sample(model, s, h[0]),
        &[x0, x0 + d, C64::new(sc.re + d, sc.im), end],
        [b0, C64::new(0.0, 0.0)],
        &MarchOptions::default(),
    )?;
    let ig = C64::i() * v;
    Ok(((-2.0 * ig.re).exp(), ig))
}

/// The printed small-`α − √2` constant for the Berry field, for comparison only.
pub fn berry_printed_constant(alpha: f64) -> f64 {
    let r2 = 2f64.sqrt();
    (alpha - r2).sqrt() / (2f64.powf(0.25) * (r2 - 1.0).powf(r2))
}

/// Applies the triangular per-crossing factors `[[1, 0], [x, 1]]` in order to `[1, 0]`.
pub fn product_amplitude(factors: &[C64]) -> C64 {
    let mut v = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    for x in factors {
        v = [v[0], *x * v[0] + v[1]];
    }
    v[1]
}

/// Relative phase between consecutive crossings in [`naive_product_probability_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductPhase {
    /// `θ_k = 2T Σ |Re ΔW|` accumulated along the line from the first crossing.
    #[default]
    LineAction,
    /// All factors in phase; an upper envelope of the product.
    Coherent,
}

/// Per-crossing product baseline with [`ProductPhase::LineAction`].
pub fn naive_product_probability(model: &FieldModel, t: f64, graph: &StokesGraph) -> Result<f64> {
    naive_product_probability_with(model, t, graph, ProductPhase::LineAction)
}

/// Crossing `k` contributes `e^{-Tκ_k} e^{iθ_k}` with `κ_k` its own Dykhne exponent.
pub fn naive_product_probability_with(
    model: &FieldModel,
    t: f64,
    graph: &StokesGraph,
    phase: ProductPhase,
) -> Result<f64> {
    require_leading(graph)?;
    let line = closest_stokes_line(graph)?;
    let mut theta = 0.0;
    let mut factors = Vec::new();
    for (k, c) in line.crossings.iter().enumerate() {
        if k > 0 && phase == ProductPhase::LineAction {
            let seg = &graph.lines[line.segments[k]];
            theta += 2.0 * t * seg.w.last().unwrap().re.abs();
        }
        let s = c.location;
        let kap = im_action(model, &[C64::new(s.re, 0.0), s])?.abs();
        factors.push(C64::from_polar((-t * kap).exp(), theta));
    }
    Ok(product_amplitude(&factors).norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::*;
    use crate::numerics::{integrate_segment, Rect, Tolerance};
    use crate::stokes::{build_stokes_graph, GraphOptions};

    fn graph(m: &FieldModel, im: f64) -> StokesGraph {
        build_stokes_graph(
            &Potential::leading(m),
            &Rect::new(-5.0, 5.0, -im, im).unwrap(),
            &GraphOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn tanh_exponent_matches_quadrature() {
        let m = make_tanh(1.0, 1.0).unwrap();
        let g = graph(&m, 1.2);
        let k = dykhne_exponent(&m, &g).unwrap();
        let tol = Tolerance::new(1e-13, 1e-15, 200).unwrap();
        let want = integrate_segment(
            &mut |y: C64| (2.0 * y).cos().sqrt() / y.cos(),
            C64::new(0.0, 0.0),
            C64::new(std::f64::consts::FRAC_PI_4, 0.0),
            &tol,
        )
        .unwrap()
        .re;
        assert!((k - want).abs() < 1e-6, "{k} {want}");
        for v in dykhne_exponent_line_points(&m, &g, 3).unwrap() {
            assert!((v - k).abs() < 1e-6, "{v} {k}");
        }
    }

    #[test]
    fn nikitin_line_point_independence() {
        let m = make_nikitin(1.0, 1.0, 1.0).unwrap();
        let g = graph(&m, 2.0);
        let k = dykhne_exponent(&m, &g).unwrap();
        let pts = dykhne_exponent_line_points(&m, &g, 3).unwrap();
        assert_eq!(pts.len(), 3);
        for v in pts {
            assert!((v - k).abs() < 1e-6, "{v} {k}");
        }
    }

    #[test]
    fn nikitin_d_modulus_is_half() {
        let d = prefactor_d_side([0.0, 0.0, 2.0], [2.0, 0.0, 0.0]).unwrap();
        assert!((d.norm() - 0.5).abs() < 1e-14);
        assert!(matches!(
            prefactor_d_side([0.0, 1.0, 1.0], [0.0, 2.0, 2.0]),
            Err(Error::ParallelAsymptoticVectors { .. })
        ));
    }

    #[test]
    fn product_of_equal_factors_scales_quadratically() {
        let x = C64::new(1e-3, 0.0);
        let one = product_amplitude(&[x]).norm_sqr();
        for n in 2..5 {
            let p = product_amplitude(&vec![x; n]).norm_sqr();
            assert!((p / one - (n * n) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_synthetic_exponent() {
        let m = make_tanh(1.0, 1.0).unwrap();
        let g = graph(&m, 1.2);
        let recs: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let t = 6.0 + 2.0 * i as f64;
                (t, 0.7 * t.powf(-2.0) * (-2.0 * 0.65 * t).exp())
            })
            .collect();
        let f = fit_edge_constants(&m, &recs, &g).unwrap();
        assert!((f.kappa_fitted - 0.65).abs() < 1e-9 && (f.power_fitted + 2.0).abs() < 1e-8);
        assert!(f.r_squared > 1.0 - 1e-12);
        assert!(matches!(
            fit_edge_constants(&m, &recs[..5], &g),
            Err(Error::RegimeViolation(_))
        ));
    }

    #[test]
    fn planar_fields_have_no_geometric_factor() {
        let m = make_tanh(1.0, 1.0).unwrap();
        let g = graph(&m, 1.2);
        assert!(matches!(
            berry_contribution(&m, 10.0, &g),
            Err(Error::GeometricTermZero)
        ));
    }
}
