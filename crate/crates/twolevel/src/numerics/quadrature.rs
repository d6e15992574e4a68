//! Adaptive Gauss-Kronrod (7/15) quadrature of complex integrands along
//! piecewise-linear paths.

use super::{ComplexPath, Tolerance};
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

struct Piece {
    a: C64,
    b: C64,
    value: C64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

pub(crate) fn gk15<F: FnMut(C64) -> C64>(f: &mut F, a: C64, b: C64) -> Result<(C64, f64)> {
    let mid = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    let mut eval = |t: f64| -> Result<C64> {
        let s = mid + half * t;
        let v = f(s);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteSample { s })
        }
    };
    let fc = eval(0.0)?;
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = XGK[j];
        let sum = eval(x)? + eval(-x)?;
        kron += sum * WGK[j];
        if j % 2 == 1 {
            gauss += sum * WG[j / 2];
        }
    }
    let value = kron * half;
    let err = ((kron - gauss) * half).norm();
    Ok((value, err))
}

/// Adaptive integral over the straight segment `a -> b`.
pub fn integrate_segment<F: FnMut(C64) -> C64>(
    f: &mut F,
    a: C64,
    b: C64,
    tol: &Tolerance,
) -> Result<C64> {
    integrate_path(f, &ComplexPath::segment(a, b)?, tol)
}

/// `∫_path f(s) ds` by globally adaptive bisection with a shared subdivision budget.
pub fn integrate_path<F: FnMut(C64) -> C64>(
    mut f: F,
    path: &ComplexPath,
    tol: &Tolerance,
) -> Result<C64> {
    tol.validate()?;
    let mut heap = BinaryHeap::new();
    let mut total = C64::new(0.0, 0.0);
    let mut total_err = 0.0;
    for w in path.points().windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1])?;
        total += v;
        total_err += e;
        heap.push(Piece {
            a: w[0],
            b: w[1],
            value: v,
            err: e,
        });
    }
    let mut used = heap.len();
    // Roundoff floor relative to the magnitude of the pieces.
    let floor = |heap: &BinaryHeap<Piece>| -> f64 {
        heap.iter().map(|p| p.value.norm()).sum::<f64>() * 50.0 * f64::EPSILON
    };
    loop {
        let target = tol.abs.max(tol.rel * total.norm()).max(floor(&heap));
        if total_err <= target {
            return Ok(total);
        }
        if used >= tol.max_subdivisions {
            return Err(Error::NonConvergence {
                budget: tol.max_subdivisions,
                estimate: total_err,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let m = (worst.a + worst.b) * 0.5;
        let (v1, e1) = gk15(&mut f, worst.a, m)?;
        let (v2, e2) = gk15(&mut f, m, worst.b)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece {
            a: worst.a,
            b: m,
            value: v1,
            err: e1,
        });
        heap.push(Piece {
            a: m,
            b: worst.b,
            value: v2,
            err: e2,
        });
        used += 1;
        if used % 64 == 0 {
            // Resum to avoid drift from incremental updates.
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn constant_along_diagonal() {
        let p = ComplexPath::segment(c(0.0, 0.0), c(1.0, 1.0)).unwrap();
        let v = integrate_path(|_| c(1.0, 0.0), &p, &Tolerance::default()).unwrap();
        assert!((v - c(1.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn linear_on_real_axis() {
        let p = ComplexPath::segment(c(0.0, 0.0), c(2.0, 0.0)).unwrap();
        let v = integrate_path(|s| s, &p, &Tolerance::default()).unwrap();
        assert!((v - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn lorentzian_against_trapezoid_oracle() {
        let p = ComplexPath::segment(c(-10.0, 0.0), c(10.0, 0.0)).unwrap();
        let v = integrate_path(
            |s| (s * s + 1.0).inv(),
            &p,
            &Tolerance::new(1e-13, 1e-14, 500).unwrap(),
        )
        .unwrap();
        // Composite trapezoid with endpoint derivative correction.
        let n = 200_000;
        let h = 20.0 / n as f64;
        let f = |x: f64| 1.0 / (1.0 + x * x);
        let df = |x: f64| -2.0 * x / (1.0 + x * x).powi(2);
        let mut t = 0.5 * (f(-10.0) + f(10.0));
        for k in 1..n {
            t += f(-10.0 + k as f64 * h);
        }
        t *= h;
        t -= h * h / 12.0 * (df(10.0) - df(-10.0));
        assert!((v.re - t).abs() < 1e-11, "{} vs {}", v.re, t);
        assert!((v.re - 2.0 * 10f64.atan()).abs() < 1e-12);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let p = ComplexPath::segment(c(-1.0, 0.0), c(1.0, 0.0)).unwrap();
        let r = integrate_path(
            |s| {
                if s.re.abs() < 1e-20 {
                    c(f64::NAN, 0.0)
                } else {
                    s
                }
            },
            &p,
            &Tolerance::default(),
        );
        assert!(matches!(r, Err(Error::NonFiniteSample { .. })));
    }

    #[test]
    fn exhausted_budget_is_reported() {
        let p = ComplexPath::segment(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let tol = Tolerance {
            rel: 1e-15,
            abs: 1e-300,
            max_subdivisions: 3,
        };
        let r = integrate_path(|s| (s * 200.0).sin() * (s * 57.0).exp(), &p, &tol);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }
}
