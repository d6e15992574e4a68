//! Root finding for analytic functions by seeded Newton iteration.

use super::Rect;
use num_complex::Complex64 as C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootOptions {
    /// Seeds per side of the region.
    pub seed_density: usize,
    /// Accepted roots satisfy `|f(r)| <= abs_tol`.
    pub abs_tol: f64,
    /// Merge radius as a fraction of the region diagonal.
    pub dedup_factor: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            seed_density: 24,
            abs_tol: 1e-10,
            dedup_factor: 1e-6,
            max_iter: 80,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RootSearch {
    pub roots: Vec<C64>,
    /// Winding number of `f` around the region boundary (zeros minus poles),
    /// `None` when `f` is not finite or vanishes on the boundary.
    pub winding: Option<i64>,
    /// Seeds whose iteration diverged, left the region or stalled.
    pub failed_seeds: usize,
}

impl RootSearch {
    /// True when the boundary winding counts more zeros than were found.
    /// Only meaningful for functions without poles in the region.
    pub fn suspected_missed(&self) -> bool {
        matches!(self.winding, Some(w) if w > self.roots.len() as i64)
    }
}

pub fn find_roots<F: Fn(C64) -> C64>(f: F, region: &Rect, seed_density: usize) -> Vec<C64> {
    let opts = RootOptions {
        seed_density,
        ..RootOptions::default()
    };
    find_roots_with(f, region, &opts).roots
}

fn newton<F: Fn(C64) -> C64>(f: &F, z0: C64, region: &Rect, opts: &RootOptions) -> Option<C64> {
    let diag = region.diagonal();
    let h = 1e-7 * diag.max(1e-3);
    let mut z = z0;
    let mut fz = f(z);
    for _ in 0..opts.max_iter {
        if !(fz.re.is_finite() && fz.im.is_finite()) {
            return None;
        }
        let d = (f(z + h) - f(z - h)) / (2.0 * h);
        if d.norm() == 0.0 || !(d.re.is_finite() && d.im.is_finite()) {
            return None;
        }
        let mut step = fz / d;
        let cap = 0.25 * diag;
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        // Backtrack while the residual grows.
        let mut lambda = 1.0;
        let mut znew = z - step;
        let mut fnew = f(znew);
        while !(fnew.norm() < fz.norm()) && lambda > 1.0 / 64.0 {
            lambda *= 0.5;
            znew = z - step * lambda;
            fnew = f(znew);
        }
        let moved = (znew - z).norm();
        z = znew;
        fz = fnew;
        let margin = 0.05 * diag;
        if z.re < region.re_min - margin
            || z.re > region.re_max + margin
            || z.im < region.im_min - margin
            || z.im > region.im_max + margin
        {
            return None;
        }
        if moved <= 4.0 * f64::EPSILON * (1.0 + z.norm()) {
            break;
        }
    }
    if region.contains(z) && fz.norm() <= opts.abs_tol {
        Some(z)
    } else {
        None
    }
}

/// Seeded Newton search with merge and sort by `(Im, Re)`.
pub fn find_roots_with<F: Fn(C64) -> C64>(f: F, region: &Rect, opts: &RootOptions) -> RootSearch {
    let n = opts.seed_density.max(2);
    let merge = opts.dedup_factor * region.diagonal();
    let mut roots: Vec<C64> = Vec::new();
    let mut failed = 0;
    for i in 0..n {
        for j in 0..n {
            let re = region.re_min + (region.re_max - region.re_min) * (i as f64 + 0.5) / n as f64;
            let im = region.im_min + (region.im_max - region.im_min) * (j as f64 + 0.5) / n as f64;
            match newton(&f, C64::new(re, im), region, opts) {
                Some(r) => {
                    if !roots.iter().any(|q| (q - r).norm() <= merge) {
                        roots.push(r);
                    }
                }
                None => failed += 1,
            }
        }
    }
    roots.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    RootSearch {
        roots,
        winding: boundary_winding(&f, region),
        failed_seeds: failed,
    }
}

fn boundary_winding<F: Fn(C64) -> C64>(f: &F, region: &Rect) -> Option<i64> {
    let c = region.corners();
    let mut total = 0.0;
    for k in 0..4 {
        let a = c[k];
        let b = c[(k + 1) % 4];
        let mut t: f64 = 0.0;
        let mut prev = f(a);
        if !(prev.re.is_finite() && prev.im.is_finite()) || prev.norm() == 0.0 {
            return None;
        }
        let mut dt: f64 = 1.0 / 512.0;
        while t < 1.0 {
            let tn = (t + dt).min(1.0);
            let v = f(a + (b - a) * tn);
            if !(v.re.is_finite() && v.im.is_finite()) || v.norm() == 0.0 {
                return None;
            }
            let darg = (v / prev).arg();
            if darg.abs() > 0.5 && dt > 1e-9 {
                dt *= 0.5;
                continue;
            }
            total += darg;
            prev = v;
            t = tn;
            if darg.abs() < 0.1 {
                dt = (dt * 1.5).min(1.0 / 128.0);
            }
        }
    }
    Some((total / (2.0 * std::f64::consts::PI)).round() as i64)
}
