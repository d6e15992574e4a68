//! Effective magnetic field models `B(s)` analytic in complex `s`.

use crate::error::{Error, Result};
use crate::numerics::{Jet, Rect};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ModelKind {
    Nikitin {
        b: f64,
        delta_eps: f64,
    },
    Sech {
        b0: f64,
        b1: f64,
    },
    Tanh {
        b0: f64,
    },
    Berry {
        b0: f64,
        alpha: f64,
    },
    Constant {
        v: [f64; 3],
    },
    /// Componentwise ratios of polynomials, coefficients in ascending powers.
    Rational {
        num: [Vec<f64>; 3],
        den: [Vec<f64>; 3],
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SingularityKind {
    /// Pole of `B^2` of the given order.
    Pole {
        order: u32,
    },
    BranchPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Singularity {
    pub location: C64,
    pub kind: SingularityKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldModel {
    name: String,
    kind: ModelKind,
    mu: f64,
    params: BTreeMap<String, f64>,
    rotation: Option<[[f64; 3]; 3]>,
    planar: bool,
    singularities: Vec<Singularity>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::DegenerateParams(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn periodic_poles(order: u32) -> Vec<Singularity> {
    (-2..=1)
        .map(|k| Singularity {
            location: C64::new(0.0, PI * (k as f64 + 0.5)),
            kind: SingularityKind::Pole { order },
        })
        .collect()
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn make_nikitin(b: f64, delta_eps: f64, mu: f64) -> Result<FieldModel> {
    positive("b", b)?;
    positive("delta_eps", delta_eps)?;
    positive("mu", mu)?;
    let sing = [1.0, -1.0]
        .iter()
        .map(|&sg| Singularity {
            location: C64::new(0.0, sg * b),
            kind: SingularityKind::Pole { order: 3 },
        })
        .collect();
    Ok(FieldModel {
        name: "nikitin".into(),
        kind: ModelKind::Nikitin { b, delta_eps },
        mu,
        params: params(&[("b", b), ("delta_eps", delta_eps), ("mu", mu)]),
        rotation: None,
        planar: true,
        singularities: sing,
    })
}

pub fn make_sech(b0: f64, b1: f64, mu: f64) -> Result<FieldModel> {
    positive("B0", b0)?;
    positive("B1", b1)?;
    positive("mu", mu)?;
    if b0 == b1 {
        return Err(Error::DegenerateParams(
            "sech model requires B0 != B1".into(),
        ));
    }
    Ok(FieldModel {
        name: "sech".into(),
        kind: ModelKind::Sech { b0, b1 },
        mu,
        params: params(&[("B0", b0), ("B1", b1), ("mu", mu)]),
        rotation: None,
        planar: true,
        singularities: periodic_poles(2),
    })
}

pub fn make_tanh(b0: f64, mu: f64) -> Result<FieldModel> {
    positive("B0", b0)?;
    positive("mu", mu)?;
    Ok(FieldModel {
        name: "tanh".into(),
        kind: ModelKind::Tanh { b0 },
        mu,
        params: params(&[("B0", b0), ("mu", mu)]),
        rotation: None,
        planar: true,
        singularities: periodic_poles(2),
    })
}

pub fn make_berry(b0: f64, alpha: f64, mu: f64) -> Result<FieldModel> {
    positive("B0", b0)?;
    positive("mu", mu)?;
    if !(alpha > 2f64.sqrt()) {
        return Err(Error::DegenerateParams(format!(
            "berry model requires alpha > sqrt(2), got {alpha}"
        )));
    }
    let sing = [1.0, -1.0]
        .iter()
        .map(|&sg| Singularity {
            location: C64::new(0.0, sg),
            kind: SingularityKind::Pole { order: 2 },
        })
        .collect();
    Ok(FieldModel {
        name: "berry".into(),
        kind: ModelKind::Berry { b0, alpha },
        mu,
        params: params(&[("B0", b0), ("alpha", alpha), ("mu", mu)]),
        rotation: None,
        planar: false,
        singularities: sing,
    })
}

pub fn make_constant(v: [f64; 3], mu: f64) -> Result<FieldModel> {
    positive("mu", mu)?;
    if v.iter().all(|x| *x == 0.0) {
        return Err(Error::ZeroField);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateParams(
            "field components must be finite".into(),
        ));
    }
    Ok(FieldModel {
        name: "constant".into(),
        kind: ModelKind::Constant { v },
        mu,
        params: params(&[("Bx", v[0]), ("By", v[1]), ("Bz", v[2]), ("mu", mu)]),
        rotation: None,
        planar: v[1] == 0.0,
        singularities: Vec::new(),
    })
}

fn poly_eval(c: &[f64], s: C64) -> C64 {
    c.iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, &a| acc * s + a)
}

fn poly_jet(c: &[f64], s: Jet) -> Jet {
    c.iter()
        .rev()
        .fold(Jet::real(0.0, s.n), |acc, &a| acc * s + a)
}

fn trim(c: &[f64]) -> Vec<f64> {
    let mut v = c.to_vec();
    while v.len() > 1 && *v.last().unwrap() == 0.0 {
        v.pop();
    }
    v
}

/// Roots of a real polynomial, located by Newton search inside the Cauchy bound.
fn poly_roots(c: &[f64]) -> Vec<C64> {
    let c = trim(c);
    let deg = c.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let bound = 1.0
        + c[..deg]
            .iter()
            .map(|a| (a / lead).abs())
            .fold(0.0, f64::max);
    let region = Rect {
        re_min: -bound,
        re_max: bound,
        im_min: -bound,
        im_max: bound,
    };
    let scale: f64 = c.iter().map(|a| a.abs()).sum();
    let opts = crate::numerics::RootOptions {
        seed_density: 8 * deg + 8,
        abs_tol: 1e-10 * scale * bound.powi(deg as i32),
        dedup_factor: 1e-7,
        max_iter: 100,
    };
    crate::numerics::find_roots_with(|s| poly_eval(&c, s), &region, &opts).roots
}

/// Field given by `B_i(s) = num_i(s) / den_i(s)`.
pub fn make_rational(num: [Vec<f64>; 3], den: [Vec<f64>; 3], mu: f64) -> Result<FieldModel> {
    positive("mu", mu)?;
    for d in &den {
        if d.is_empty() || d.iter().all(|a| *a == 0.0) {
            return Err(Error::DegenerateParams(
                "denominator polynomial is zero".into(),
            ));
        }
    }
    for p in num.iter().chain(den.iter()) {
        if p.iter().any(|a| !a.is_finite()) {
            return Err(Error::DegenerateParams(
                "polynomial coefficients must be finite".into(),
            ));
        }
    }
    let num = [trim(&num[0]), trim(&num[1]), trim(&num[2])];
    let den = [trim(&den[0]), trim(&den[1]), trim(&den[2])];
    let mut sing: Vec<Singularity> = Vec::new();
    for (n, d) in num.iter().zip(den.iter()) {
        if n.iter().all(|a| *a == 0.0) {
            continue;
        }
        for r in poly_roots(d) {
            if r.im.abs() < 1e-9 * (1.0 + r.re.abs()) {
                return Err(Error::DegenerateParams(format!(
                    "field has a real pole at s = {}",
                    r.re
                )));
            }
            if !sing.iter().any(|q| (q.location - r).norm() < 1e-8) {
                sing.push(Singularity {
                    location: r,
                    kind: SingularityKind::Pole { order: 2 },
                });
            }
        }
    }
    let planar = num[1].iter().all(|a| *a == 0.0);
    let model = FieldModel {
        name: "rational".into(),
        kind: ModelKind::Rational { num, den },
        mu,
        params: params(&[("mu", mu)]),
        rotation: None,
        planar,
        singularities: sing,
    };
    // No real level crossing.
    for k in 0..=2000 {
        let s = -50.0 + 0.05 * k as f64;
        let b2 = model.b_squared(C64::new(s, 0.0), 1.0);
        if !(b2.re > 0.0) {
            return Err(Error::DegenerateParams(format!(
                "B^2 vanishes on the real axis near s = {s}"
            )));
        }
    }
    Ok(model)
}

impl FieldModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// True when `B_y` vanishes identically.
    pub fn is_planar(&self) -> bool {
        self.planar
    }

    pub fn singularities(&self) -> &[Singularity] {
        &self.singularities
    }

    pub fn rotation(&self) -> Option<[[f64; 3]; 3]> {
        self.rotation
    }

    /// The same physical field seen in a frame rotated by `angle` about `axis`.
    pub fn rotated(&self, axis: [f64; 3], angle: f64) -> Result<FieldModel> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !(n > 0.0) {
            return Err(Error::InvalidInput("rotation axis must be nonzero".into()));
        }
        let (x, y, z) = (axis[0] / n, axis[1] / n, axis[2] / n);
        let (sn, cs) = angle.sin_cos();
        let t = 1.0 - cs;
        let r = [
            [cs + x * x * t, x * y * t - z * sn, x * z * t + y * sn],
            [y * x * t + z * sn, cs + y * y * t, y * z * t - x * sn],
            [z * x * t - y * sn, z * y * t + x * sn, cs + z * z * t],
        ];
        let total = match self.rotation {
            None => r,
            Some(old) => {
                let mut m = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] = (0..3).map(|k| r[i][k] * old[k][j]).sum();
                    }
                }
                m
            }
        };
        let mut out = self.clone();
        out.rotation = Some(total);
        out.planar = self.planar && total[1][0].abs() < 1e-15 && total[1][2].abs() < 1e-15;
        Ok(out)
    }

    /// Taylor jets of the three field components at `s`, length `n`.
    pub fn eval_jet(&self, s: C64, _t: f64, n: usize) -> [Jet; 3] {
        let x = Jet::var(s, n);
        let raw = match &self.kind {
            ModelKind::Nikitin { b, delta_eps } => {
                let a = delta_eps / self.mu;
                let p = (x * x + b * b).powf(-1.5);
                [p * a, Jet::real(0.0, n), Jet::real(a, n)]
            }
            ModelKind::Sech { b0, b1 } => {
                let (_, ch) = x.sinh_cosh();
                [ch.recip() * *b1, Jet::real(0.0, n), Jet::real(*b0, n)]
            }
            ModelKind::Tanh { b0 } => [x.tanh() * *b0, Jet::real(0.0, n), Jet::real(*b0, n)],
            ModelKind::Berry { b0, alpha } => {
                let w = (x * x + 1.0).recip() * *b0;
                [w, w * x * *alpha, w * x * x]
            }
            ModelKind::Constant { v } => {
                [Jet::real(v[0], n), Jet::real(v[1], n), Jet::real(v[2], n)]
            }
            ModelKind::Rational { num, den } => {
                let f = |i: usize| poly_jet(&num[i], x) / poly_jet(&den[i], x);
                [f(0), f(1), f(2)]
            }
        };
        match self.rotation {
            None => raw,
            Some(r) => {
                let row = |i: usize| raw[0] * r[i][0] + raw[1] * r[i][1] + raw[2] * r[i][2];
                [row(0), row(1), row(2)]
            }
        }
    }

    pub fn eval(&self, s: C64, t: f64) -> [C64; 3] {
        let j = self.eval_jet(s, t, 1);
        [j[0].value(), j[1].value(), j[2].value()]
    }

    pub fn eval_deriv(&self, s: C64, t: f64) -> [C64; 3] {
        let j = self.eval_jet(s, t, 2);
        [j[0].deriv(1), j[1].deriv(1), j[2].deriv(1)]
    }

    /// `B·B` (no complex conjugation).
    pub fn b_squared(&self, s: C64, t: f64) -> C64 {
        let b = self.eval(s, t);
        b[0] * b[0] + b[1] * b[1] + b[2] * b[2]
    }
}

/// `μ·sqrt(B²)` with the branch fixed positive on the real axis.
#[derive(Clone, Debug)]
pub struct GapFunction {
    pub model: FieldModel,
    pub branch_anchor: f64,
}

impl GapFunction {
    pub fn new(model: &FieldModel) -> Self {
        GapFunction {
            model: model.clone(),
            branch_anchor: 0.0,
        }
    }

    /// Principal-branch value; positive for real `s`.
    pub fn eval(&self, s: C64, t: f64) -> C64 {
        self.model.b_squared(s, t).sqrt() * self.model.mu()
    }

    /// Value continued from `prev` (the value at a nearby point) by phase continuity.
    pub fn eval_continued(&self, s: C64, t: f64, prev: C64) -> C64 {
        let g = self.eval(s, t);
        if (g - prev).norm() <= (g + prev).norm() {
            g
        } else {
            -g
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TailKind {
    Algebraic,
    Exponential,
    Constant,
}

/// Limits and leading algebraic corrections of the field on both tails,
/// `B(s) ≈ B0± + B1±/|s|^α±` as `s → ±∞`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticData {
    pub b0_plus: [f64; 3],
    pub b0_minus: [f64; 3],
    pub b1_plus: [f64; 3],
    pub b1_minus: [f64; 3],
    pub alpha1_plus: Option<f64>,
    pub alpha1_minus: Option<f64>,
    pub tail_plus: TailKind,
    pub tail_minus: TailKind,
}

fn re3(b: [C64; 3]) -> [f64; 3] {
    [b[0].re, b[1].re, b[2].re]
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn tail(model: &FieldModel, sign: f64) -> Result<([f64; 3], [f64; 3], Option<f64>, TailKind)> {
    let at = |s: f64| re3(model.eval(C64::new(sign * s, 0.0), 1.0));
    let b0 = at(1e8);
    let s1 = 400.0;
    let d1 = sub3(at(s1), b0);
    let d2 = sub3(at(2.0 * s1), b0);
    let scale = norm3(b0).max(1e-300);
    if norm3(d1) <= 1e-13 * scale {
        let near = norm3(sub3(at(4.0), b0));
        let kind = if near > 1e-10 * scale {
            TailKind::Exponential
        } else {
            TailKind::Constant
        };
        return Ok((b0, [0.0; 3], None, kind));
    }
    let raw_alpha = (norm3(d1) / norm3(d2)).log2();
    let snapped = (raw_alpha * 2.0).round() / 2.0;
    let alpha = if (raw_alpha - snapped).abs() < 0.05 {
        snapped
    } else {
        raw_alpha
    };
    if !(alpha > 0.5) {
        return Err(Error::FitFailure(format!(
            "decay exponent {raw_alpha:.3} not above 1/2"
        )));
    }
    // Richardson on B1(S) = (B(S) - B0) S^α, assuming a next correction one power down.
    let b1_at = |s: f64| {
        let d = sub3(at(s), b0);
        let f = s.powf(alpha);
        [d[0] * f, d[1] * f, d[2] * f]
    };
    let (e1, e2) = (b1_at(s1), b1_at(2.0 * s1));
    let mut b1 = [
        2.0 * e2[0] - e1[0],
        2.0 * e2[1] - e1[1],
        2.0 * e2[2] - e1[2],
    ];
    let m = norm3(b1);
    for x in b1.iter_mut() {
        if x.abs() < 1e-6 * m {
            *x = 0.0;
        }
    }
    // The fitted expansion must describe the tail further out.
    let s3 = 8.0 * s1;
    let r = sub3(
        sub3(at(s3), b0),
        [
            b1[0] / s3.powf(alpha),
            b1[1] / s3.powf(alpha),
            b1[2] / s3.powf(alpha),
        ],
    );
    let rel = norm3(r) * s3.powf(alpha) / m;
    if !(rel < 0.05) {
        return Err(Error::FitFailure(format!(
            "tail residual {rel:.3e} relative to leading correction"
        )));
    }
    Ok((b0, b1, Some(alpha), TailKind::Algebraic))
}

pub fn asymptotic_data(model: &FieldModel) -> Result<AsymptoticData> {
    let (b0p, b1p, ap, kp) = tail(model, 1.0)?;
    let (b0m, b1m, am, km) = tail(model, -1.0)?;
    Ok(AsymptoticData {
        b0_plus: b0p,
        b0_minus: b0m,
        b1_plus: b1p,
        b1_minus: b1m,
        alpha1_plus: ap,
        alpha1_minus: am,
        tail_plus: kp,
        tail_minus: km,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn nikitin_values() {
        let m = make_nikitin(1.0, 2.0, 0.5).unwrap();
        let b = m.eval(c(0.0, 0.0), 1.0);
        assert!((b[0] - c(4.0, 0.0)).norm() < 1e-14 && (b[2] - c(4.0, 0.0)).norm() < 1e-14);
        let b = m.eval(c(1.0, 0.0), 1.0);
        assert!((b[0].re - 4.0 * 2f64.powf(-1.5)).abs() < 1e-14);
        let b = m.eval(c(1e6, 0.0), 1.0);
        assert!(b[0].norm() < 1e-15 && (b[2].re - 4.0).abs() < 1e-15);
    }

    #[test]
    fn sech_tanh_berry_limits() {
        let s = make_sech(1.0, 2.0, 1.0).unwrap();
        assert_eq!(
            s.eval(c(0.0, 0.0), 1.0),
            [c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]
        );
        assert!(s.eval(c(50.0, 0.0), 1.0)[0].norm() < 1e-20);
        let t = make_tanh(1.5, 1.0).unwrap();
        let b = t.eval(c(-40.0, 0.0), 1.0);
        assert!((b[0].re + 1.5).abs() < 1e-15 && (b[2].re - 1.5).abs() < 1e-15);
        let be = make_berry(2.0, 1.5, 1.0).unwrap();
        assert_eq!(be.eval(c(0.0, 0.0), 1.0)[0], c(2.0, 0.0));
        let b = be.eval(c(1e7, 0.0), 1.0);
        assert!((b[2].re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn berry_b_squared_expansion() {
        let (b0, a) = (1.3, 1.7);
        let m = make_berry(b0, a, 1.0).unwrap();
        for &s in &[c(0.3, 0.0), c(-2.0, 0.4), c(0.1, 0.7)] {
            let want = (s.powi(4) + s * s * a * a + 1.0) * b0 * b0 / (s * s + 1.0).powi(2);
            assert!((m.b_squared(s, 1.0) - want).norm() < 1e-13 * want.norm());
        }
    }

    #[test]
    fn rejected_parameters() {
        assert!(matches!(
            make_sech(1.0, 1.0, 1.0),
            Err(Error::DegenerateParams(_))
        ));
        assert!(matches!(
            make_berry(1.0, 1.4, 1.0),
            Err(Error::DegenerateParams(_))
        ));
        assert!(matches!(
            make_constant([0.0; 3], 1.0),
            Err(Error::ZeroField)
        ));
        assert!(matches!(
            make_nikitin(-1.0, 1.0, 1.0),
            Err(Error::DegenerateParams(_))
        ));
    }

    #[test]
    fn rational_reproduces_berry() {
        let a = 1.6;
        let den = vec![1.0, 0.0, 1.0];
        let r = make_rational(
            [vec![1.0], vec![0.0, a], vec![0.0, 0.0, 1.0]],
            [den.clone(), den.clone(), den],
            1.0,
        )
        .unwrap();
        let b = make_berry(1.0, a, 1.0).unwrap();
        let s = c(0.7, 0.2);
        for (x, y) in r.eval(s, 1.0).iter().zip(b.eval(s, 1.0).iter()) {
            assert!((x - y).norm() < 1e-14);
        }
        assert_eq!(r.singularities().len(), 2);
        assert!(!r.is_planar());
    }

    #[test]
    fn rational_with_real_pole_rejected() {
        let r = make_rational(
            [vec![1.0], vec![0.0], vec![1.0]],
            [vec![-1.0, 0.0, 1.0], vec![1.0], vec![1.0]],
            1.0,
        );
        assert!(matches!(r, Err(Error::DegenerateParams(_))));
    }

    #[test]
    fn rotation_preserves_length_and_planarity_about_y() {
        let m = make_tanh(1.0, 1.0).unwrap();
        let ry = m.rotated([0.0, 1.0, 0.0], 0.3).unwrap();
        assert!(ry.is_planar());
        let rx = m.rotated([1.0, 0.0, 0.0], 0.3).unwrap();
        assert!(!rx.is_planar());
        let s = c(0.4, 0.2);
        assert!((rx.b_squared(s, 1.0) - m.b_squared(s, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn asymptotics_nikitin() {
        let a = asymptotic_data(&make_nikitin(1.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(a.alpha1_plus, Some(3.0));
        assert_eq!(a.alpha1_minus, Some(3.0));
        assert!((a.b1_plus[0] - 1.0).abs() < 1e-4 && a.b1_plus[1] == 0.0 && a.b1_plus[2] == 0.0);
        assert!((a.b1_minus[0] - 1.0).abs() < 1e-4);
        assert!((a.b0_plus[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn asymptotics_berry_and_constant() {
        let a = asymptotic_data(&make_berry(1.0, 1.5, 1.0).unwrap()).unwrap();
        assert_eq!(a.alpha1_plus, Some(1.0));
        assert!((a.b1_plus[1] - 1.5).abs() < 1e-4 && (a.b1_minus[1] + 1.5).abs() < 1e-4);
        let k = asymptotic_data(&make_constant([0.0, 0.0, 2.0], 1.0).unwrap()).unwrap();
        assert_eq!(k.tail_plus, TailKind::Constant);
        assert_eq!(k.b1_plus, [0.0; 3]);
        let e = asymptotic_data(&make_tanh(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(e.tail_minus, TailKind::Exponential);
    }

    #[test]
    fn gap_positive_on_real_axis() {
        let g = GapFunction::new(&make_berry(1.0, 1.5, 2.0).unwrap());
        for k in -20..=20 {
            let v = g.eval(c(k as f64 * 0.7, 0.0), 1.0);
            assert!(v.re > 0.0 && v.im == 0.0);
        }
    }
}
