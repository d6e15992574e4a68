//! Direct quadrature of the regularized exponent of the transition amplitude.
//!
//! Near the lower crossing `s_j` the zeros of `q-` split into a cluster. The
//! amplitude is assembled on a contour at depth `h` below the real axis plus a
//! keyhole from `s₀ = Re z* - ih` to one cluster zero `z*`, around which
//! `sqrt(q-)` changes sign. Zeros of the coupling on the real axis make `q-`
//! singular there, hence the depth. With `B`
//! continued vertically from the real axis the cut of `B` runs straight down
//! from `s_j`, and the cluster zeros on that sheet are the candidates for `z*`.

use super::closest_crossing;
use crate::dynamics::{coefficient_jets_branch, Potential, PotentialKind};
use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::numerics::{find_roots_with, Rect, RootOptions};
use crate::stokes::track::{march, nearest, MarchOptions, Sample};
use crate::stokes::{potential_singularities, StokesGraph};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::FRAC_PI_4;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemiclassicalOptions {
    /// Truncation point of the edge integrals before doubling.
    pub x_start: f64,
    pub max_doublings: usize,
    /// Accepted change of the tail-corrected exponent between `X` and `2X`.
    pub tail_tol: f64,
    /// Depth `h` of the horizontal legs as a fraction of `|Im s_j|`.
    pub depth_frac: f64,
    /// Offset of `Re s₀` from `Re z*`.
    pub s0_shift: f64,
    /// Cluster search radius as a fraction of the distance to the nearest other singular point.
    pub cluster_frac: f64,
    /// Order of the `χ` correction; only the leading order 0 is available.
    pub order: usize,
}

impl Default for SemiclassicalOptions {
    fn default() -> Self {
        SemiclassicalOptions {
            x_start: 16.0,
            max_doublings: 8,
            tail_tol: 1e-8,
            depth_frac: 0.25,
            s0_shift: 0.0,
            cluster_frac: 0.5,
            order: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemiclassicalResult {
    pub amplitude: C64,
    /// Exponent `I` with the amplitude `prefactor · e^I`.
    pub exponent: C64,
    pub prefactor: C64,
    /// Lower crossing `s_j`.
    pub crossing: C64,
    /// Encircled zero `z*` of `q-`.
    pub turning_point: C64,
    pub s0: C64,
    pub cutoff: f64,
    /// Change of the tail-corrected exponent over the last doubling of `X`.
    pub tail_change: f64,
}

struct Integrand<'a> {
    model: &'a FieldModel,
    pot: Potential,
    t: f64,
}

impl Integrand<'_> {
    fn b(&self, s: C64, hint: C64) -> C64 {
        nearest(self.model.b_squared(s, self.t).sqrt(), hint)
    }

    fn cbar(&self, s: C64, b: C64) -> Result<(C64, C64)> {
        let j = coefficient_jets_branch(self.model, s.conj(), self.t, 2, false, Some(b.conj()))?
            .c
            .conj();
        let c0 = j.value();
        if c0.norm() == 0.0 {
            return Err(Error::CouplingZero { s });
        }
        Ok((c0, j.deriv(1)))
    }

    fn q(&self, s: C64, b: C64) -> Result<(C64, C64)> {
        let q = self.pot.eval_jet_branch(s, 2, Some(b))?;
        Ok((q.value(), q.deriv(1)))
    }

    // `-½(c̄'/c̄ - iω) + iT sqrt(q-)`, roots `[sqrt(q-), B]`.
    fn edge(&self, s: C64, hints: &[C64; 2]) -> Result<Sample> {
        let b = self.b(s, hints[1]);
        let (q, dq) = self.q(s, b)?;
        let r = nearest(q.sqrt(), hints[0]);
        let (c0, c1) = self.cbar(s, b)?;
        let u = c1 / c0 - I * b * (self.model.mu() * self.t);
        let value = -0.5 * u + I * r * self.t;
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(Error::NonFiniteSample { s });
        }
        let sq = if dq.norm() > 0.0 {
            q.norm() / dq.norm()
        } else {
            f64::INFINITY
        };
        let sc = if c1.norm() > 0.0 {
            c0.norm() / c1.norm()
        } else {
            f64::INFINITY
        };
        Ok(Sample {
            roots: [r, b],
            value,
            scale: sq.min(sc),
        })
    }

    // `2iT sqrt(q-)` on the keyhole.
    fn keyhole(&self, s: C64, hints: &[C64; 2]) -> Result<Sample> {
        let b = self.b(s, hints[1]);
        let (q, dq) = self.q(s, b)?;
        let r = nearest(q.sqrt(), hints[0]);
        let scale = if dq.norm() > 0.0 {
            q.norm() / dq.norm()
        } else {
            f64::INFINITY
        };
        Ok(Sample {
            roots: [r, b],
            value: 2.0 * I * r * self.t,
            scale,
        })
    }

    fn real_start(&self, x: f64) -> Result<Sample> {
        let s = C64::new(x, 0.0);
        let b = self.model.b_squared(s, self.t).sqrt();
        self.edge(s, &[-b * (0.5 * self.model.mu()), b])
    }

    fn b_vertical(&self, to: C64) -> Result<C64> {
        let top = C64::new(to.re, 0.0);
        let b0 = self.model.b_squared(top, self.t).sqrt();
        let (_, roots, _) = march(
            |s, h: &[C64; 2]| {
                Ok(Sample {
                    roots: [self.b(s, h[0]), ZERO],
                    value: ZERO,
                    scale: f64::INFINITY,
                })
            },
            &[top, to],
            [b0, ZERO],
            &MarchOptions::default(),
        )?;
        Ok(roots[0])
    }
}

/// Zeros of `q-` within `radius` of the crossing `sj` on the sheet of `B`
/// continued vertically from the real axis, nearest the real axis first.
fn cluster_zeros(f: &Integrand, sj: C64, radius: f64) -> Result<Vec<C64>> {
    let eps = (1e-6 * radius).max(1e-12);
    let k = f.model.b_squared(sj + eps, f.t) / eps;
    let g0 = k.sqrt();
    let b_of = |z: C64| z * nearest((f.model.b_squared(sj + z * z, f.t) / (z * z)).sqrt(), g0);
    // Fix the global sign against the vertical continuation.
    let z_ref = C64::from_polar((0.5 * radius).sqrt(), FRAC_PI_4);
    let b_ref = f.b_vertical(sj + z_ref * z_ref)?;
    let sign = if (b_of(z_ref) - b_ref).norm() <= (b_of(z_ref) + b_ref).norm() {
        1.0
    } else {
        -1.0
    };
    let zmax = radius.sqrt();
    let region = Rect::new(-zmax, zmax, -zmax, zmax)?;
    let found = find_roots_with(
        |z: C64| {
            let b = b_of(z) * sign;
            match f.q(sj + z * z, b) {
                Ok((q, _)) => q * z.powi(4),
                Err(_) => C64::new(f64::NAN, f64::NAN),
            }
        },
        &region,
        &RootOptions::default(),
    );
    let mut out: Vec<C64> = found
        .roots
        .into_iter()
        .filter(|z| z.norm() > 1e-9 && z.norm() < zmax)
        .filter(|z| {
            let a = z.arg();
            a > -FRAC_PI_4 && a <= 3.0 * FRAC_PI_4
        })
        .map(|z| sj + z * z)
        .collect();
    out.sort_by(|a, b| b.im.total_cmp(&a.im).then(a.re.total_cmp(&b.re)));
    Ok(out)
}

// `∫_X^∞ g` for a power-law tail, each of `Re g` and `Im g` with its own
// exponent read off `g(X)` and `g(2X)`.
fn tail_estimate(g1: C64, g2: C64, x: f64) -> Result<C64> {
    let part = |a: f64, b: f64| -> Result<f64> {
        if a.abs() < 1e-300 {
            return Ok(0.0);
        }
        let p = if b != 0.0 {
            (a.abs() / b.abs()).log2()
        } else {
            f64::INFINITY
        };
        if p <= 1.05 {
            return Err(Error::TailDivergence(format!(
                "integrand decays like |s|^-{p:.3} at |s| = {x}"
            )));
        }
        Ok(if p.is_finite() {
            a * x / (p - 1.0)
        } else {
            0.0
        })
    };
    Ok(C64::new(part(g1.re, g2.re)?, part(g1.im, g2.im)?))
}

/// `|a-(+∞)|`-level semiclassical amplitude with default options.
pub fn semiclassical_amplitude(model: &FieldModel, t: f64, graph: &StokesGraph) -> Result<C64> {
    Ok(semiclassical_amplitude_with(model, t, graph, &SemiclassicalOptions::default())?.amplitude)
}

/// Amplitude through the cluster zero nearest the real axis; see [`semiclassical_candidates`].
pub fn semiclassical_amplitude_with(
    model: &FieldModel,
    t: f64,
    graph: &StokesGraph,
    opts: &SemiclassicalOptions,
) -> Result<SemiclassicalResult> {
    semiclassical_candidates(model, t, graph, opts)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::NoCanonicalPathFound("no zero of q- near the crossing".into()))
}

/// One amplitude per cluster zero `z*`,
/// `(sqrt(q_L)/sqrt(q_R))^{1/2}/(iω_L) · e^I` with
/// `I = -i∫₀^{s₀} ω + ∫_{-X}^{s₀} g - ∫_{s₀}^{X} g + ln c̄(s₀) + 2iT∫_{s₀}^{z*} sqrt(q-)`,
/// `g = -½(c̄'/c̄ - iω) + iT sqrt(q-)` and `sqrt(q_R) = -sqrt(q-)(X)`. Planar fields only.
pub fn semiclassical_candidates(
    model: &FieldModel,
    t: f64,
    graph: &StokesGraph,
    opts: &SemiclassicalOptions,
) -> Result<Vec<SemiclassicalResult>> {
    if !model.is_planar() {
        return Err(Error::InvalidInput(
            "semiclassical amplitude is implemented for planar fields".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidInput("T must be positive".into()));
    }
    if opts.order > 0 {
        return Err(Error::InvalidInput(format!(
            "χ correction of order {} is not implemented for the amplitude",
            opts.order
        )));
    }
    let sj = closest_crossing(graph)?.conj();
    let pot = Potential::new(model, PotentialKind::Minus, t);
    let (sing, _) = potential_singularities(&pot, &graph.region);
    let mut dmin = sj.im.abs();
    for z in sing
        .iter()
        .chain(graph.turning_points.iter().map(|p| &p.location))
    {
        let d = (z - sj).norm();
        if d > 1e-6 {
            dmin = dmin.min(d);
        }
    }
    let f = Integrand { model, pot, t };
    let zeros = cluster_zeros(&f, sj, opts.cluster_frac * dmin)?;
    zeros
        .iter()
        .map(|&z| through_zero(&f, sj, z, opts))
        .collect()
}

fn through_zero(
    f: &Integrand,
    sj: C64,
    zs: C64,
    opts: &SemiclassicalOptions,
) -> Result<SemiclassicalResult> {
    let mo = MarchOptions::default();
    let mu_t = f.model.mu() * f.t;
    let h = opts.depth_frac * sj.im.abs();
    let s0 = C64::new(zs.re + opts.s0_shift, -h);
    let b0 = f.model.b_squared(ZERO, f.t).sqrt();
    let (phase, _, _) = march(
        |s, hs: &[C64; 2]| {
            let b = f.b(s, hs[0]);
            Ok(Sample {
                roots: [b, ZERO],
                value: b * mu_t,
                scale: f64::INFINITY,
            })
        },
        &[ZERO, C64::new(s0.re, 0.0), s0],
        [b0, ZERO],
        &mo,
    )?;

    let mut x = opts.x_start.max(2.0 * s0.re.abs());
    let mut last: Option<C64> = None;
    for _ in 0..=opts.max_doublings {
        let start = f.real_start(-x)?;
        let (left, at_s0, _) = march(
            |s, hs: &[C64; 2]| f.edge(s, hs),
            &[C64::new(-x, 0.0), C64::new(-x, -h), s0],
            start.roots,
            &mo,
        )?;
        let (right, at_end, _) = march(
            |s, hs: &[C64; 2]| f.edge(s, hs),
            &[s0, C64::new(x, -h), C64::new(x, 0.0)],
            at_s0,
            &mo,
        )?;
        // Stop short of `z*`, where the root has no usable phase; the remainder is O(δ^{3/2}).
        let end = zs + (s0 - zs) * 1e-9;
        let (hole, _, _) = march(|s, hs: &[C64; 2]| f.keyhole(s, hs), &[s0, end], at_s0, &mo)?;
        let (cb, _) = f.cbar(s0, at_s0[1])?;
        let exponent = -I * phase + left - right + cb.ln() + hole;
        let e1 = f.edge(C64::new(x, 0.0), &at_end)?;
        // A coupling that underflows at `2X` decays faster than any power.
        let far = |r: Result<Sample>| match r {
            Ok(smp) => Ok(smp.value),
            Err(Error::CouplingZero { .. }) => Ok(ZERO),
            Err(e) => Err(e),
        };
        let gl = far(f.real_start(-2.0 * x))?;
        let gr = far(f.edge(C64::new(2.0 * x, 0.0), &e1.roots))?;
        let exponent =
            exponent + tail_estimate(start.value, gl, x)? - tail_estimate(e1.value, gr, x)?;
        let omega_l = start.roots[1] * mu_t;
        let prefactor = (start.roots[0] / -at_end[0]).sqrt() / (I * omega_l);
        // Negligible edges need no second cutoff.
        let edge = x * (start.value.norm() + e1.value.norm());
        let change = match last {
            Some(prev) => (exponent - prev).norm(),
            None if edge < opts.tail_tol => edge,
            None => f64::INFINITY,
        };
        {
            if change < opts.tail_tol {
                return Ok(SemiclassicalResult {
                    amplitude: prefactor * exponent.exp(),
                    exponent,
                    prefactor,
                    crossing: sj,
                    turning_point: zs,
                    s0,
                    cutoff: x,
                    tail_change: change,
                });
            }
        }
        last = Some(exponent);
        x *= 2.0;
    }
    Err(Error::TailDivergence(format!(
        "edge integrals not converged by |s| = {}",
        x / 2.0
    )))
}
