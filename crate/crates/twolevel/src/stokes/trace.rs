use super::track::nearest;
use super::{QFunction, TurningPoint};
use crate::error::{Error, Result};
use crate::numerics::quadrature::gk15;
use crate::numerics::Rect;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LineKind {
    /// `Im W = 0`.
    Stokes,
    /// `Re W = 0`.
    AntiStokes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Termination {
    Pole(C64),
    Boundary { side: Side, direction: C64 },
    TurningPoint(C64),
    MaxLength,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StokesLine {
    pub origin: TurningPoint,
    pub direction_index: u8,
    pub kind: LineKind,
    pub points: Vec<C64>,
    /// `W(s) = ∫_{origin}^{s} sqrt(q̃)` at each point.
    pub w: Vec<C64>,
    pub termination: Termination,
    pub arc_length: f64,
}

impl StokesLine {
    /// Largest deviation of the defining condition relative to `1 + |W|`.
    pub fn max_defect(&self) -> f64 {
        self.w
            .iter()
            .map(|w| {
                let d = match self.kind {
                    LineKind::Stokes => w.im.abs(),
                    LineKind::AntiStokes => w.re.abs(),
                };
                d / (1.0 + w.norm())
            })
            .fold(0.0, f64::max)
    }

    pub fn min_abs_im(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.im.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceOptions {
    pub region: Rect,
    pub max_arc: f64,
    /// Corrector target on the defining condition, relative to `1 + |W|`.
    pub trace_tol: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub start_offset: f64,
    pub pole_radius: f64,
    pub capture_radius: f64,
    /// Singular points where lines end.
    pub singular: Vec<C64>,
    /// Other turning points a line may run into.
    pub turning_points: Vec<C64>,
}

impl TraceOptions {
    pub fn new(region: Rect) -> Self {
        TraceOptions {
            region,
            max_arc: 40.0,
            trace_tol: 1e-10,
            h_max: 0.01,
            h_min: 1e-13,
            start_offset: 1e-7,
            pole_radius: 1e-3,
            capture_radius: 1e-5,
            singular: Vec::new(),
            turning_points: Vec::new(),
        }
    }
}

struct Cursor {
    s: C64,
    r: C64,
    w: C64,
}

fn sqrt_at<Q: QFunction + ?Sized>(pot: &Q, s: C64, hint: C64) -> Result<(C64, C64)> {
    let j = pot.q_jet(s, 2)?;
    let q = j.value();
    if !(q.re.is_finite() && q.im.is_finite()) || q.norm() == 0.0 {
        return Err(Error::NonFiniteSample { s });
    }
    Ok((nearest(q.sqrt(), hint), j.deriv(1)))
}

/// `∫_a^b sqrt(q̃)` on the branch interpolating `ra -> rb`.
fn seg_w<Q: QFunction + ?Sized>(pot: &Q, a: C64, b: C64, ra: C64, rb: C64) -> Result<C64> {
    let len = (b - a).norm();
    let mut fail = None;
    let mut f = |s: C64| {
        let t = if len > 0.0 {
            ((s - a).norm() / len).min(1.0)
        } else {
            0.0
        };
        match pot.q(s) {
            Ok(q) => nearest(q.sqrt(), ra + (rb - ra) * t),
            Err(e) => {
                fail.get_or_insert(e);
                C64::new(f64::NAN, 0.0)
            }
        }
    };
    let (v, err) = gk15(&mut f, a, b)?;
    if let Some(e) = fail {
        return Err(e);
    }
    if err > 1e-11 * (1.0 + v.norm()) {
        let m = (a + b) * 0.5;
        let rm = nearest(pot.q(m)?.sqrt(), (ra + rb) * 0.5);
        return Ok(seg_w(pot, a, m, ra, rm)? + seg_w(pot, m, b, rm, rb)?);
    }
    Ok(v)
}

fn side_of(region: &Rect, s: C64) -> Option<Side> {
    let d = [
        (region.re_min - s.re, Side::Left),
        (s.re - region.re_max, Side::Right),
        (region.im_min - s.im, Side::Bottom),
        (s.im - region.im_max, Side::Top),
    ];
    d.iter()
        .filter(|(v, _)| *v > 0.0)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|x| x.1)
}

/// Traces one of the three Stokes (or anti-Stokes) lines leaving a simple turning point.
pub fn trace_stokes_line<Q: QFunction + ?Sized>(
    pot: &Q,
    tp: &TurningPoint,
    direction_index: u8,
    kind: LineKind,
    opts: &TraceOptions,
) -> Result<StokesLine> {
    if tp.multiplicity != 1 {
        return Err(Error::StallDetected { s: tp.location });
    }
    if direction_index > 2 {
        return Err(Error::InvalidInput(format!(
            "direction index {direction_index} not in 0..=2"
        )));
    }
    let st = tp.location;
    let dq = pot.q_jet(st, 2)?.deriv(1);
    let base = match kind {
        LineKind::Stokes => 0.0,
        LineKind::AntiStokes => 0.5 * PI,
    };
    let theta = (2.0 / 3.0) * (base + direction_index as f64 * PI - 0.5 * dq.arg());
    let s0 = st + C64::from_polar(opts.start_offset, theta);
    let r0 = pot.q(s0)?.sqrt();
    let w0 = (s0 - st) * r0 * (2.0 / 3.0);
    let eps = match kind {
        LineKind::Stokes => w0.re.signum(),
        LineKind::AntiStokes => w0.im.signum(),
    };
    let rot = match kind {
        LineKind::Stokes => C64::new(eps, 0.0),
        LineKind::AntiStokes => C64::new(0.0, eps),
    };
    // Unit step along the line and unit step across it.
    let along = |r: C64| rot * r.conj() / r.norm();
    let defect = |w: C64| match kind {
        LineKind::Stokes => w.im,
        LineKind::AntiStokes => w.re,
    };
    let across = |r: C64| match kind {
        LineKind::Stokes => C64::new(0.0, 1.0) * r.conj() / r.norm(),
        LineKind::AntiStokes => r.conj() / r.norm(),
    };

    let mut cur = Cursor {
        s: s0,
        r: r0,
        w: C64::new(
            match kind {
                LineKind::Stokes => w0.re,
                _ => 0.0,
            },
            match kind {
                LineKind::Stokes => 0.0,
                _ => w0.im,
            },
        ),
    };
    let mut points = vec![st, s0];
    let mut ws = vec![C64::new(0.0, 0.0), cur.w];
    let mut arc = opts.start_offset;
    let mut dq_cur = dq;
    let termination = loop {
        let mut local = if dq_cur.norm() > 0.0 {
            pot.q(cur.s)?.norm() / dq_cur.norm()
        } else {
            f64::INFINITY
        };
        for z in opts.singular.iter().chain(opts.turning_points.iter()) {
            local = local.min((cur.s - z).norm());
        }
        local = local.min((cur.s - st).norm().max(opts.start_offset));
        let mut h = (0.2 * local).clamp(opts.h_min, opts.h_max);
        let step = loop {
            match try_step(pot, &cur, h, &along, &across, &defect, opts.trace_tol) {
                Ok(Some(next)) => break next,
                Ok(None) | Err(Error::NonFiniteSample { .. }) if h > opts.h_min => h *= 0.3,
                Ok(None) => return Err(Error::StallDetected { s: cur.s }),
                Err(Error::NonFiniteSample { s }) => return Err(Error::BranchJumpDetected { s }),
                Err(e) => return Err(e),
            }
        };
        arc += (step.0.s - cur.s).norm();
        cur = step.0;
        dq_cur = step.1;
        points.push(cur.s);
        ws.push(cur.w);
        if let Some(z) = opts
            .singular
            .iter()
            .find(|z| (cur.s - **z).norm() < opts.pole_radius)
        {
            break Termination::Pole(*z);
        }
        if let Some(z) = opts
            .turning_points
            .iter()
            .find(|z| (cur.s - **z).norm() < opts.capture_radius.max(1e-3 * h))
        {
            break Termination::TurningPoint(*z);
        }
        if let Some(side) = side_of(&opts.region, cur.s) {
            break Termination::Boundary {
                side,
                direction: along(cur.r),
            };
        }
        if arc > opts.max_arc {
            break Termination::MaxLength;
        }
    };
    Ok(StokesLine {
        origin: *tp,
        direction_index,
        kind,
        points,
        w: ws,
        termination,
        arc_length: arc,
    })
}

#[allow(clippy::too_many_arguments)]
fn try_step<Q, A, X, D>(
    pot: &Q,
    cur: &Cursor,
    h: f64,
    along: &A,
    across: &X,
    defect: &D,
    tol: f64,
) -> Result<Option<(Cursor, C64)>>
where
    Q: QFunction + ?Sized,
    A: Fn(C64) -> C64,
    X: Fn(C64) -> C64,
    D: Fn(C64) -> f64,
{
    // Midpoint predictor.
    let (rq, dq) = sqrt_at(pot, cur.s, cur.r)?;
    let slope = dq / (rq * 2.0);
    let sm = cur.s + along(rq) * (0.5 * h);
    let (rm, _) = sqrt_at(pot, sm, rq + slope * (sm - cur.s))?;
    if (rm - rq).norm() > 0.35 * rq.norm() {
        return Ok(None);
    }
    let mut s1 = cur.s + along(rm) * h;
    let (mut r1, mut dq1) = sqrt_at(pot, s1, rq + slope * (s1 - cur.s))?;
    if (r1 - rq).norm() > 0.35 * rq.norm() {
        return Ok(None);
    }
    let mut w1 = cur.w + seg_w(pot, cur.s, s1, rq, r1)?;
    for _ in 0..6 {
        let d = defect(w1);
        if d.abs() <= tol * (1.0 + w1.norm()) {
            return Ok(Some((
                Cursor {
                    s: s1,
                    r: r1,
                    w: w1,
                },
                dq1,
            )));
        }
        let shift = -d / r1.norm();
        if shift.abs() > 0.5 * h {
            return Ok(None);
        }
        s1 += across(r1) * shift;
        let (r, d1) = sqrt_at(pot, s1, r1)?;
        if (r - r1).norm() > 0.35 * r1.norm() {
            return Ok(None);
        }
        r1 = r;
        dq1 = d1;
        w1 = cur.w + seg_w(pot, cur.s, s1, rq, r1)?;
    }
    Ok(None)
}
