use super::coefficient_jets;
use crate::error::{Error, Result};
use crate::fields::{FieldModel, ModelKind};
use crate::numerics::ode::{ode_propagate_stats, OdeStats};
use crate::numerics::{integrate_segment, Tolerance};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::cell::RefCell;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Amplitudes in the adiabatic basis together with the accumulated phase
/// `∫_{s'}^{s} ω`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AmplitudeState {
    pub s: f64,
    pub a_plus: C64,
    pub a_minus: C64,
    pub phase: f64,
}

impl AmplitudeState {
    pub fn norm_sqr(&self) -> f64 {
        self.a_plus.norm_sqr() + self.a_minus.norm_sqr()
    }
}

/// How the amplitudes are matched to their asymptotic values at `±cutoff`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// `a+ = 1, a- = 0` at `-cutoff`; `a-(cutoff)` read off directly.
    Bare,
    /// Adds the non-resonant adiabatic following terms
    /// `e^{∓iφ} Σ_k t_k` at both ends, so the truncation error falls like a
    /// high derivative of `c` rather than `c` itself.
    Dressed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactOptions {
    /// `None` picks a model default and grows it until the tail estimate passes.
    pub cutoff: Option<f64>,
    pub tol: Tolerance,
    pub boundary: Boundary,
    pub geometric: bool,
    /// Reference point `s'` of the phase integral.
    pub phase_anchor: f64,
    /// Truncation estimate must stay below `tail_abs + tail_rel·|a-|`.
    pub tail_rel: f64,
    pub tail_abs: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            cutoff: None,
            tol: Tolerance {
                rel: 1e-11,
                abs: 1e-15,
                max_subdivisions: 2000,
            },
            boundary: Boundary::Dressed,
            geometric: true,
            phase_anchor: 0.0,
            tail_rel: 1e-3,
            tail_abs: 1e-14,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactResult {
    pub p: f64,
    /// `arg a-(+∞)` with the phase reference at `phase_anchor`.
    pub phase: f64,
    pub a_plus: C64,
    pub a_minus: C64,
    pub cutoff: f64,
    pub tail_estimate: f64,
    /// The field had to be rotated away from the `B_x = B_y = 0` axis.
    pub rotated: bool,
    pub steps: usize,
}

/// Columns are the states started from `(1,0)` and `(0,1)` at `-cutoff`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransitionMatrix {
    pub s: f64,
    pub u: [[C64; 2]; 2],
    pub phase: f64,
}

impl TransitionMatrix {
    pub fn mul(&self, o: &TransitionMatrix) -> [[C64; 2]; 2] {
        let a = &self.u;
        let b = &o.u;
        let mut out = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    }

    /// `max |U†U - 1|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let u = &self.u;
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let v = u[0][i].conj() * u[0][j] + u[1][i].conj() * u[1][j];
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - want).norm());
            }
        }
        worst
    }
}

/// Model-dependent starting cutoff.
pub fn default_cutoff(model: &FieldModel) -> f64 {
    match model.kind() {
        ModelKind::Nikitin { b, .. } => 150.0 * b.max(1.0),
        ModelKind::Sech { .. } => 40.0,
        ModelKind::Tanh { .. } => 30.0,
        ModelKind::Berry { .. } => 300.0,
        ModelKind::Constant { .. } => 10.0,
        ModelKind::Rational { .. } => 300.0,
    }
}

struct Coeff {
    c: C64,
    omega: f64,
}

fn coeff(model: &FieldModel, s: f64, t: f64, geometric: bool) -> Result<Coeff> {
    let j = coefficient_jets(model, C64::new(s, 0.0), t, 1, geometric)?;
    Ok(Coeff {
        c: j.c.value(),
        omega: j.omega.value().re,
    })
}

/// Adiabatic following sums `S-`, `S+` at real `s` and the size of the first omitted term.
fn following_terms(
    model: &FieldModel,
    s: f64,
    t: f64,
    geometric: bool,
    terms: usize,
) -> Result<(C64, C64, f64)> {
    let j = coefficient_jets(model, C64::new(s, 0.0), t, terms + 1, geometric)?;
    let iw = j.omega * I;
    let mut tm = j.c.conj() / iw;
    let mut tp = j.c / iw;
    let (mut sm, mut sp) = (ZERO, ZERO);
    for _ in 0..terms {
        sm += tm.value();
        sp += tp.value();
        let n = tm.n - 1;
        tm = tm.d() / iw.truncate(n);
        tp = -(tp.d() / iw.truncate(n));
    }
    let next = tm.value().norm().max(tp.value().norm());
    Ok((sm, sp, next))
}

fn initial_phase(
    model: &FieldModel,
    t: f64,
    from: f64,
    anchor: f64,
    geometric: bool,
    tol: &Tolerance,
) -> Result<f64> {
    let err = RefCell::new(None);
    let mut f = |s: C64| match coeff(model, s.re, t, geometric) {
        Ok(k) => C64::new(k.omega, 0.0),
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            C64::new(f64::NAN, 0.0)
        }
    };
    let tol = Tolerance {
        rel: tol.rel.max(1e-13),
        abs: tol.abs,
        max_subdivisions: tol.max_subdivisions.max(4000),
    };
    let v = integrate_segment(&mut f, C64::new(anchor, 0.0), C64::new(from, 0.0), &tol);
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(v?.re)
}

fn run_ode(
    model: &FieldModel,
    t: f64,
    s0: f64,
    s1: f64,
    y0: &[C64],
    geometric: bool,
    tol: &Tolerance,
) -> Result<(Vec<C64>, OdeStats)> {
    let err = RefCell::new(None);
    let n_pairs = (y0.len() - 1) / 2;
    let rhs = |s: f64, y: &[C64], dy: &mut [C64]| match coeff(model, s, t, geometric) {
        Ok(k) => {
            let ph = y[2 * n_pairs].re;
            let e = C64::from_polar(1.0, ph);
            let ce = k.c * e;
            let cbe = (k.c * e).conj();
            for p in 0..n_pairs {
                dy[2 * p] = ce * y[2 * p + 1];
                dy[2 * p + 1] = -cbe * y[2 * p];
            }
            dy[2 * n_pairs] = C64::new(k.omega, 0.0);
        }
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            for v in dy.iter_mut() {
                *v = C64::new(f64::NAN, 0.0);
            }
        }
    };
    let out = ode_propagate_stats(rhs, s0, s1, y0, tol);
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    out
}

/// Integrates the amplitude equations from `init.s` to `s_end` with the geometric term included.
pub fn propagate_exact(
    model: &FieldModel,
    t: f64,
    s_end: f64,
    init: AmplitudeState,
    tol: &Tolerance,
) -> Result<AmplitudeState> {
    propagate_exact_with(model, t, s_end, init, tol, true)
}

pub fn propagate_exact_with(
    model: &FieldModel,
    t: f64,
    s_end: f64,
    init: AmplitudeState,
    tol: &Tolerance,
    geometric: bool,
) -> Result<AmplitudeState> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("T must be positive, got {t}")));
    }
    let y0 = [init.a_plus, init.a_minus, C64::new(init.phase, 0.0)];
    let (y, _) = run_ode(model, t, init.s, s_end, &y0, geometric, tol)?;
    Ok(AmplitudeState {
        s: s_end,
        a_plus: y[0],
        a_minus: y[1],
        phase: y[2].re,
    })
}

/// `P = |a-(+∞)|²` for the state that is `a+ = 1` at `-∞`, with default options.
pub fn transition_probability_exact(
    model: &FieldModel,
    t: f64,
    cutoff: Option<f64>,
    tol: &Tolerance,
) -> Result<ExactResult> {
    let opts = ExactOptions {
        cutoff,
        tol: *tol,
        ..ExactOptions::default()
    };
    transition_probability_exact_with(model, t, &opts)
}

pub fn transition_probability_exact_with(
    model: &FieldModel,
    t: f64,
    opts: &ExactOptions,
) -> Result<ExactResult> {
    match exact_once(model, t, opts) {
        Err(Error::CoordinateSingularity { s }) => {
            log::warn!(
                "field passes through the polar axis near s = {s}; retrying in a rotated frame"
            );
            let r = model.rotated([0.6, 0.48, 0.64], 0.7)?;
            let mut out = exact_once(&r, t, opts)?;
            out.rotated = true;
            Ok(out)
        }
        other => other,
    }
}

fn tail_estimate(model: &FieldModel, t: f64, l: f64, opts: &ExactOptions) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in [-l, l] {
        let est = match opts.boundary {
            Boundary::Bare => {
                let k = coeff(model, s, t, opts.geometric)?;
                k.c.norm() / k.omega.abs()
            }
            Boundary::Dressed => following_terms(model, s, t, opts.geometric, 4)?.2,
        };
        worst = worst.max(est);
    }
    Ok(worst)
}

fn exact_once(model: &FieldModel, t: f64, opts: &ExactOptions) -> Result<ExactResult> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("T must be positive, got {t}")));
    }
    opts.tol.validate()?;
    let fixed = opts.cutoff.is_some();
    let mut l = opts.cutoff.unwrap_or_else(|| default_cutoff(model));
    if !(l > opts.phase_anchor.abs() && l.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "cutoff {l} must exceed |phase_anchor|"
        )));
    }
    for _attempt in 0..4 {
        let res = exact_at(model, t, l, opts)?;
        let allowed = opts.tail_abs + opts.tail_rel * res.a_minus.norm();
        if res.tail_estimate <= allowed {
            return Ok(res);
        }
        if fixed {
            return Err(Error::CutoffTooSmall {
                cutoff: l,
                bound: res.tail_estimate,
                allowed,
            });
        }
        // Grow the window on the cheap estimate alone, then propagate again.
        let mut grown = l;
        let mut est = res.tail_estimate;
        while est > allowed && grown < 64.0 * l {
            grown *= 1.25;
            est = tail_estimate(model, t, grown, opts)?;
        }
        log::debug!(
            "cutoff {l} -> {grown} (tail {:.2e} > {:.2e})",
            res.tail_estimate,
            allowed
        );
        if grown == l {
            break;
        }
        l = grown;
    }
    let res = exact_at(model, t, l, opts)?;
    let allowed = opts.tail_abs + opts.tail_rel * res.a_minus.norm();
    if res.tail_estimate <= allowed {
        Ok(res)
    } else {
        Err(Error::CutoffTooSmall {
            cutoff: l,
            bound: res.tail_estimate,
            allowed,
        })
    }
}

fn exact_at(model: &FieldModel, t: f64, l: f64, opts: &ExactOptions) -> Result<ExactResult> {
    let phi0 = initial_phase(model, t, -l, opts.phase_anchor, opts.geometric, &opts.tol)?;
    let (ap0, am0) = match opts.boundary {
        Boundary::Bare => (C64::new(1.0, 0.0), ZERO),
        Boundary::Dressed => {
            let (sm, _, _) = following_terms(model, -l, t, opts.geometric, 4)?;
            (C64::new(1.0, 0.0), C64::from_polar(1.0, -phi0) * sm)
        }
    };
    let (y, stats) = run_ode(
        model,
        t,
        -l,
        l,
        &[ap0, am0, C64::new(phi0, 0.0)],
        opts.geometric,
        &opts.tol,
    )?;
    let (ap, am, phi) = (y[0], y[1], y[2].re);
    let (a_plus, a_minus) = match opts.boundary {
        Boundary::Bare => (ap, am),
        Boundary::Dressed => {
            let (sm, sp, _) = following_terms(model, l, t, opts.geometric, 4)?;
            let em = C64::from_polar(1.0, -phi) * sm;
            let ep = C64::from_polar(1.0, phi) * sp;
            let det = C64::new(1.0, 0.0) - em * ep;
            ((ap - ep * am) / det, (am - em * ap) / det)
        }
    };
    let tail = tail_estimate(model, t, l, opts)?;
    Ok(ExactResult {
        p: a_minus.norm_sqr(),
        phase: a_minus.arg(),
        a_plus,
        a_minus,
        cutoff: l,
        tail_estimate: tail,
        rotated: false,
        steps: stats.accepted + stats.rejected,
    })
}

/// Bare transition matrix `U(s)` from `-cutoff`, geometric term included.
pub fn transition_matrix(
    model: &FieldModel,
    t: f64,
    s: f64,
    cutoff: f64,
    tol: &Tolerance,
) -> Result<TransitionMatrix> {
    transition_matrix_with(model, t, s, cutoff, tol, true, 0.0)
}

pub fn transition_matrix_with(
    model: &FieldModel,
    t: f64,
    s: f64,
    cutoff: f64,
    tol: &Tolerance,
    geometric: bool,
    phase_anchor: f64,
) -> Result<TransitionMatrix> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("T must be positive, got {t}")));
    }
    if !(cutoff > 0.0 && s >= -cutoff) {
        return Err(Error::InvalidInput(format!(
            "need s >= -cutoff, got s = {s}, cutoff = {cutoff}"
        )));
    }
    let phi0 = initial_phase(model, t, -cutoff, phase_anchor, geometric, tol)?;
    let one = C64::new(1.0, 0.0);
    let y0 = [one, ZERO, ZERO, one, C64::new(phi0, 0.0)];
    let (y, _) = run_ode(model, t, -cutoff, s, &y0, geometric, tol)?;
    Ok(TransitionMatrix {
        s,
        u: [[y[0], y[2]], [y[1], y[3]]],
        phase: y[4].re,
    })
}
