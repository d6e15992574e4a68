//! Integration of multivalued integrands along a polyline with the square-root
//! branches continued step by step.

use crate::error::{Error, Result};
use crate::numerics::quadrature::gk15;
use num_complex::Complex64 as C64;

pub(crate) const NROOTS: usize = 2;

/// Evaluation at one point: the tracked roots (chosen nearest the hints),
/// the integrand, and a local length scale for step control.
pub(crate) struct Sample {
    pub roots: [C64; NROOTS],
    pub value: C64,
    pub scale: f64,
}

pub(crate) struct Node {
    pub s: C64,
    /// Integral from the start of the path up to `s`.
    pub integral: C64,
    pub roots: [C64; NROOTS],
}

pub(crate) fn nearest(r: C64, hint: C64) -> C64 {
    if (r - hint).norm() <= (r + hint).norm() {
        r
    } else {
        -r
    }
}

fn jumped(a: &[C64; NROOTS], b: &[C64; NROOTS]) -> bool {
    // A continued root may grow or shrink quickly near a zero of q, but its phase turns slowly.
    a.iter()
        .zip(b)
        .any(|(x, y)| x.norm() > 0.0 && y.norm() > 0.0 && (y / x).arg().abs() > 0.6)
}

fn lerp(a: &[C64; NROOTS], b: &[C64; NROOTS], t: f64) -> [C64; NROOTS] {
    let mut out = *a;
    for k in 0..NROOTS {
        out[k] = a[k] + (b[k] - a[k]) * t;
    }
    out
}

pub(crate) struct MarchOptions {
    pub h_max: f64,
    pub h_min: f64,
    /// Step as a fraction of the local scale.
    pub scale_frac: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub record: bool,
}

impl Default for MarchOptions {
    fn default() -> Self {
        MarchOptions {
            h_max: 0.05,
            h_min: 1e-10,
            scale_frac: 0.2,
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            record: false,
        }
    }
}

fn piece<E>(
    eval: &mut E,
    a: C64,
    b: C64,
    ra: &[C64; NROOTS],
    rb: &[C64; NROOTS],
    opts: &MarchOptions,
    depth: u32,
) -> Result<C64>
where
    E: FnMut(C64, &[C64; NROOTS]) -> Result<Sample>,
{
    let mut err = None;
    let len = (b - a).norm();
    let mut f = |s: C64| {
        let t = if len > 0.0 {
            ((s - a).norm() / len).min(1.0)
        } else {
            0.0
        };
        match eval(s, &lerp(ra, rb, t)) {
            Ok(smp) => smp.value,
            Err(e) => {
                err.get_or_insert(e);
                C64::new(f64::NAN, 0.0)
            }
        }
    };
    let (v, e) = match gk15(&mut f, a, b) {
        Ok(x) => x,
        Err(e2) => return Err(err.unwrap_or(e2)),
    };
    if let Some(e) = err {
        return Err(e);
    }
    if e <= opts.abs_tol.max(opts.rel_tol * v.norm()) || depth >= 12 {
        return Ok(v);
    }
    let m = (a + b) * 0.5;
    let rm = eval(m, &lerp(ra, rb, 0.5))?.roots;
    Ok(piece(eval, a, m, ra, &rm, opts, depth + 1)? + piece(eval, m, b, &rm, rb, opts, depth + 1)?)
}

/// Integrates along the polyline `path`, continuing the roots from `hints` at its start.
pub(crate) fn march<E>(
    mut eval: E,
    path: &[C64],
    hints: [C64; NROOTS],
    opts: &MarchOptions,
) -> Result<(C64, [C64; NROOTS], Vec<Node>)>
where
    E: FnMut(C64, &[C64; NROOTS]) -> Result<Sample>,
{
    let first = eval(path[0], &hints)?;
    let mut roots = first.roots;
    let mut total = C64::new(0.0, 0.0);
    let mut nodes = Vec::new();
    if opts.record {
        nodes.push(Node {
            s: path[0],
            integral: total,
            roots,
        });
    }
    let mut scale = first.scale;
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg = (b - a).norm();
        let dir = (b - a) / seg;
        let mut done = 0.0;
        let mut s = a;
        while done < seg {
            let mut h = (opts.scale_frac * scale)
                .clamp(opts.h_min, opts.h_max)
                .min(seg - done);
            let next = loop {
                let sn = if done + h >= seg { b } else { s + dir * h };
                // Linear predictor for the roots from the local derivative is not
                // available generically; a short enough step keeps them close.
                match eval(sn, &roots) {
                    Ok(smp) if !jumped(&roots, &smp.roots) => break (sn, smp),
                    // A path ending on a zero of q: the root there is rounding noise.
                    Ok(smp) if sn == b && smp.scale < 1e-9 * seg => break (sn, smp),
                    Ok(_) | Err(Error::NonFiniteSample { .. }) if h > opts.h_min => h *= 0.25,
                    Ok(_) => return Err(Error::BranchJumpDetected { s: sn }),
                    Err(e) => return Err(e),
                }
            };
            let (sn, smp) = next;
            total += piece(&mut eval, s, sn, &roots, &smp.roots, opts, 0)?;
            done = if sn == b { seg } else { done + (sn - s).norm() };
            s = sn;
            roots = smp.roots;
            scale = smp.scale;
            if opts.record {
                nodes.push(Node {
                    s,
                    integral: total,
                    roots,
                });
            }
        }
    }
    Ok((total, roots, nodes))
}
