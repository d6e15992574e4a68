use super::graph::{Sector, SectorAnchor, StokesGraph};
use super::trace::Side;
use super::track::{march, MarchOptions};
use super::{omega_correction_branch, sqrt_sample, QFunction};
use crate::error::{Error, Result};
use crate::numerics::ComplexPath;
use num_complex::Complex64 as C64;

/// A path along which `σ Im W` does not increase, with `W` continued from
/// the root nearest `branch_anchor` at the first point.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalPath {
    pub path: ComplexPath,
    pub branch_anchor: C64,
    pub sigma: i8,
}

/// Builds a canonical path from the anchor of `sector` to `to`.
pub fn canonical_path<Q: QFunction + ?Sized>(
    pot: &Q,
    graph: &StokesGraph,
    sector: &Sector,
    to: C64,
) -> Result<CanonicalPath> {
    let sigma = if sector.sigma == 0 { 1 } else { sector.sigma };
    let r = &graph.region;
    match sector.anchor {
        SectorAnchor::Infinity(side @ (Side::Left | Side::Right)) => {
            let x = if side == Side::Left {
                r.re_min
            } else {
                r.re_max
            };
            let start = C64::new(x, to.im);
            let anchor = pot.q(start)?.sqrt();
            let cp = canonical_path_along(pot, &[start, to], anchor, sigma)?;
            Ok(cp)
        }
        anchor => {
            let target = match anchor {
                SectorAnchor::Pole(z) => z,
                SectorAnchor::Infinity(Side::Top) => C64::new(to.re, r.im_max),
                SectorAnchor::Infinity(_) => C64::new(to.re, r.im_min),
            };
            let mut best: Option<(f64, Vec<C64>)> = None;
            for sign in [1.0, -1.0] {
                let pts = ascend(pot, to, pot.q(to)?.sqrt() * sign, sigma, target, graph)?;
                let d = (pts.last().unwrap() - target).norm();
                if best.as_ref().map_or(true, |b| d < b.0) {
                    best = Some((d, pts));
                }
            }
            let (d, mut pts) = best.unwrap();
            if d > 0.25 * r.diagonal() {
                return Err(Error::NoCanonicalPathFound(format!(
                    "ascent from {to} stops {d:.3} from the sector anchor"
                )));
            }
            pts.reverse();
            let anchor = pot.q(pts[0])?.sqrt();
            canonical_path_along(pot, &pts, anchor, sigma)
        }
    }
}

// Steepest ascent of σ Im W starting at `from` with root `r0`; returns the visited points.
fn ascend<Q: QFunction + ?Sized>(
    pot: &Q,
    from: C64,
    r0: C64,
    sigma: i8,
    target: C64,
    g: &StokesGraph,
) -> Result<Vec<C64>> {
    let h = 0.01 * g.region.diagonal();
    let mut pts = vec![from];
    let mut s = from;
    let mut root = r0;
    for _ in 0..2000 {
        if (s - target).norm() < 2.0 * h || !g.region.contains(s) {
            break;
        }
        let dir = C64::i() * root.conj() / root.norm() * sigma as f64;
        let next = s + dir * h;
        let smp = match sqrt_sample(pot, next, root) {
            Ok(x) => x,
            Err(_) => break,
        };
        root = smp.roots[0];
        s = next;
        pts.push(s);
    }
    Ok(pts)
}

/// Wraps a given polyline as a canonical path; the condition is checked by [`chi_series`].
pub fn canonical_path_along<Q: QFunction + ?Sized>(
    _pot: &Q,
    points: &[C64],
    branch_anchor: C64,
    sigma: i8,
) -> Result<CanonicalPath> {
    if sigma != 1 && sigma != -1 {
        return Err(Error::InvalidInput("sigma must be +1 or -1".into()));
    }
    Ok(CanonicalPath {
        path: ComplexPath::new(points.to_vec())?,
        branch_anchor,
        sigma,
    })
}

/// Truncated series `1 + χ₁ + χ₂` along `cp` up to `order` (at most 2).
pub fn chi_series<Q: QFunction + ?Sized>(
    pot: &Q,
    cp: &CanonicalPath,
    t: f64,
    order: usize,
) -> Result<C64> {
    if order == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    Ok(chi_terms(pot, cp, t, order)?.iter().sum::<C64>() + 1.0)
}

/// The individual terms of [`chi_series`]; element `k` is of order `T^{-(k+1)}`.
pub fn chi_terms<Q: QFunction + ?Sized>(
    pot: &Q,
    cp: &CanonicalPath,
    t: f64,
    order: usize,
) -> Result<Vec<C64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput("t must be positive".into()));
    }
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidInput(format!(
            "series order {order} not in 1..=2"
        )));
    }
    let rmax = cp
        .path
        .points()
        .iter()
        .filter_map(|s| pot.q(*s).ok())
        .map(|q| q.norm().sqrt())
        .fold(0.0, f64::max);
    let opts = MarchOptions {
        h_max: 0.01f64.min(0.1 / (t * rmax.max(1e-12))),
        record: true,
        ..MarchOptions::default()
    };
    let (_, _, nodes) = march(
        |s, h: &[C64; 2]| sqrt_sample(pot, s, h[0]),
        cp.path.points(),
        [cp.branch_anchor, C64::new(0.0, 0.0)],
        &opts,
    )?;
    let sig = cp.sigma as f64;
    for (k, w) in nodes.windows(2).enumerate() {
        let tol = 1e-9 * (1.0 + w[1].integral.norm());
        if sig * (w[1].integral.im - w[0].integral.im) > tol {
            return Err(Error::NonCanonicalPath { index: k });
        }
    }
    let om: Vec<C64> = nodes
        .iter()
        .map(|n| {
            omega_correction_branch(pot, n.s, n.roots[0]).map_err(|e| match e {
                Error::NearSingularity { s } => Error::NearTurningPoint { s },
                e => e,
            })
        })
        .collect::<Result<_>>()?;
    let pre = C64::new(0.0, -2.0 * sig * t);
    let k0 = C64::new(0.0, 2.0 * t).inv() * (-sig);
    let w_end = nodes.last().unwrap().integral;
    let mut plain = C64::new(0.0, 0.0);
    let mut osc = C64::new(0.0, 0.0);
    let mut run_plain = vec![C64::new(0.0, 0.0)];
    let mut run_g = vec![C64::new(0.0, 0.0)];
    for k in 0..nodes.len() - 1 {
        let ds = nodes[k + 1].s - nodes[k].s;
        let e = |n: usize| (pre * (w_end - nodes[n].integral)).exp();
        plain += (om[k] + om[k + 1]) * ds * 0.5;
        osc += (om[k] * e(k) + om[k + 1] * e(k + 1)) * ds * 0.5;
        if order > 1 {
            let dw = nodes[k + 1].integral - nodes[k].integral;
            let ph = (pre * dw).exp();
            let g = run_g[k] * ph + (om[k + 1] + om[k] * ph) * ds * 0.5;
            run_g.push(g);
            run_plain.push(run_plain[k] + (om[k] + om[k + 1]) * ds * 0.5);
        }
    }
    let mut out = vec![k0 * (plain - osc)];
    if order > 1 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..nodes.len() - 1 {
            let ds = nodes[k + 1].s - nodes[k].s;
            let f = |n: usize| om[n] * (run_plain[n] - run_g[n]);
            acc += (f(k) + f(k + 1)) * ds * 0.5;
        }
        out.push(k0 * k0 * acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stokes::PolynomialPotential;

    #[test]
    fn chi_vanishes_for_constant_potential() {
        let pot = PolynomialPotential::new(&[2.0]);
        let cp = canonical_path_along(
            &pot,
            &[C64::new(-2.0, 0.0), C64::new(2.0, 0.0)],
            C64::new(1.0, 0.0),
            1,
        )
        .unwrap();
        let chi = chi_terms(&pot, &cp, 5.0, 2).unwrap();
        assert!(chi.iter().all(|c| c.norm() < 1e-14));
        assert_eq!(chi_series(&pot, &cp, 5.0, 0).unwrap(), C64::new(1.0, 0.0));
    }

    #[test]
    fn first_order_term_scales_as_inverse_t() {
        // q = 1 + s², smooth on the real axis.
        let pot = PolynomialPotential::new(&[1.0, 0.0, 1.0]);
        let cp = canonical_path_along(
            &pot,
            &[C64::new(-3.0, 0.0), C64::new(3.0, 0.0)],
            C64::new(1.0, 0.0),
            1,
        )
        .unwrap();
        let a = (chi_series(&pot, &cp, 10.0, 1).unwrap() - 1.0).norm();
        let b = (chi_series(&pot, &cp, 20.0, 1).unwrap() - 1.0).norm();
        assert!((a / b - 2.0).abs() < 0.3, "{a} {b}");
        let c2 = chi_terms(&pot, &cp, 30.0, 2).unwrap();
        assert!(c2[1].norm() < 0.1 * c2[0].norm());
    }

    #[test]
    fn rising_path_is_rejected() {
        let pot = PolynomialPotential::new(&[1.0]);
        // W = s, Im W rises along an upward path.
        let cp = canonical_path_along(
            &pot,
            &[C64::new(0.0, 0.0), C64::new(0.0, 1.0)],
            C64::new(1.0, 0.0),
            1,
        )
        .unwrap();
        assert!(matches!(
            chi_series(&pot, &cp, 2.0, 1),
            Err(Error::NonCanonicalPath { .. })
        ));
    }
}
