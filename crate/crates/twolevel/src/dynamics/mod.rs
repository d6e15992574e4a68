//! Adiabatic-basis amplitude equations: coupling `c`, frequency `ω`,
//! Schrödinger-form potentials `q±`, exact propagation and the transition
//! matrix.

mod exact;

pub use exact::{
    default_cutoff, propagate_exact, propagate_exact_with, transition_matrix,
    transition_matrix_with, transition_probability_exact, transition_probability_exact_with,
    AmplitudeState, Boundary, ExactOptions, ExactResult, TransitionMatrix,
};

use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::numerics::Jet;
use num_complex::Complex64 as C64;
use serde::Serialize;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Jets of the amplitude-equation coefficients at one point.
#[derive(Clone, Copy, Debug)]
pub struct CoefficientJets {
    pub c: Jet,
    /// Full frequency, with or without the geometric term as requested.
    pub omega: Jet,
    /// Geometric part `-(B_z/B)(B×Ḃ)_z/(B_x²+B_y²)` alone.
    pub omega_geo: Jet,
    pub b: Jet,
}

/// Jets of length `n` for `c`, `ω` at `s`; needs field jets of length `n + 1`.
pub fn coefficient_jets(
    model: &FieldModel,
    s: C64,
    t: f64,
    n: usize,
    geometric: bool,
) -> Result<CoefficientJets> {
    coefficient_jets_branch(model, s, t, n, geometric, None)
}

/// As [`coefficient_jets`], with `B = sqrt(B²)` taken on the root nearest `b_hint`
/// instead of the principal one.
pub fn coefficient_jets_branch(
    model: &FieldModel,
    s: C64,
    t: f64,
    n: usize,
    geometric: bool,
    b_hint: Option<C64>,
) -> Result<CoefficientJets> {
    let bj = model.eval_jet(s, t, n + 1);
    let db = [bj[0].d(), bj[1].d(), bj[2].d()];
    let b = [bj[0].truncate(n), bj[1].truncate(n), bj[2].truncate(n)];
    let b2 = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
    let b2v = b2.value();
    if b2v.norm() == 0.0 || (b_hint.is_none() && b2v.im == 0.0 && b2v.re < 0.0) {
        return Err(Error::BranchAmbiguity { s });
    }
    let bmag = match b_hint {
        None => b2.sqrt(),
        Some(h) => {
            let r = b2v.sqrt();
            b2.sqrt_with(if (r - h).norm() <= (r + h).norm() {
                r
            } else {
                -r
            })
        }
    };
    let (c, geo) = if model.is_planar() {
        // Signed in-plane angle: c = -Θ̇/2 with Θ = atan2(B_x, B_z).
        let c = (b[0] * db[2] - b[2] * db[0]) / (b2 * 2.0);
        (c, Jet::real(0.0, n))
    } else {
        let rho2 = b[0] * b[0] + b[1] * b[1];
        if rho2.value().norm() <= 1e-24 * b2v.norm() {
            return Err(Error::CoordinateSingularity { s });
        }
        let rho = rho2.sqrt();
        let cross_x = b[1] * db[2] - b[2] * db[1];
        let cross_y = b[2] * db[0] - b[0] * db[2];
        let cross_z = b[0] * db[1] - b[1] * db[0];
        let bbz = b[0] * cross_y - b[1] * cross_x;
        let c = -(bbz / (b2 * rho)) * 0.5 + (cross_z / (bmag * rho)) * (I * 0.5);
        let geo = -(b[2] / bmag) * (cross_z / rho2);
        (c, geo)
    };
    let dyn_part = bmag * (model.mu() * t);
    let omega = if geometric { dyn_part + geo } else { dyn_part };
    Ok(CoefficientJets {
        c,
        omega,
        omega_geo: geo,
        b: bmag,
    })
}

/// Coupling `c(s,T) = -Θ̇/2 + (i/2) φ̇ sin Θ`, continued to complex `s`.
pub fn coupling_c(model: &FieldModel, s: C64, t: f64) -> Result<C64> {
    Ok(coefficient_jets(model, s, t, 1, true)?.c.value())
}

/// `c̄(s) = conj(c(conj s))`, the analytic continuation of `c*` off the real axis.
pub fn coupling_c_bar(model: &FieldModel, s: C64, t: f64) -> Result<C64> {
    Ok(coupling_c(model, s.conj(), t)?.conj())
}

/// `ω = μTB - φ̇ cos Θ`; `geometric = false` drops the second term.
pub fn frequency_omega(model: &FieldModel, s: C64, t: f64, geometric: bool) -> Result<C64> {
    Ok(coefficient_jets(model, s, t, 1, geometric)?.omega.value())
}

/// Geometric part of `ω` alone.
pub fn frequency_geometric(model: &FieldModel, s: C64, t: f64) -> Result<C64> {
    Ok(coefficient_jets(model, s, t, 1, true)?.omega_geo.value())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PotentialKind {
    Plus,
    Minus,
    /// `¼μ²B²`, the `T → ∞` limit of both.
    Leading,
}

/// One of `q+`, `q-`, `q(0)`, optionally with a Langer term `δ(s)/T²`.
#[derive(Clone, Debug)]
pub struct Potential {
    model: FieldModel,
    kind: PotentialKind,
    t: f64,
    langer: Vec<C64>,
    geometric: bool,
}

impl Potential {
    pub fn new(model: &FieldModel, kind: PotentialKind, t: f64) -> Self {
        Potential {
            model: model.clone(),
            kind,
            t,
            langer: Vec::new(),
            geometric: true,
        }
    }

    pub fn leading(model: &FieldModel) -> Self {
        Self::new(model, PotentialKind::Leading, 1.0)
    }

    /// Langer modification `q - δ(s)/T²`, `δ = Σ 1/(4(s - z)²)` over the given poles.
    /// The minus sign makes the `1/(s - z)` terms of the Fröman error
    /// function cancel at each pole.
    pub fn with_langer(mut self, poles: &[C64]) -> Self {
        self.langer = poles.to_vec();
        self
    }

    pub fn with_geometric(mut self, geometric: bool) -> Self {
        self.geometric = geometric;
        self
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn model(&self) -> &FieldModel {
        &self.model
    }

    pub fn langer_poles(&self) -> &[C64] {
        &self.langer
    }

    /// Taylor jet of length `n` (`n <= 5`) of the potential at `s`.
    pub fn eval_jet(&self, s: C64, n: usize) -> Result<Jet> {
        self.eval_jet_branch(s, n, None)
    }

    /// Jet on the sheet where `B = sqrt(B²)` is the root nearest `b_hint`.
    pub fn eval_jet_branch(&self, s: C64, n: usize, b_hint: Option<C64>) -> Result<Jet> {
        let t = self.t;
        let mut q = match self.kind {
            PotentialKind::Leading => {
                let b = self.model.eval_jet(s, t, n);
                let b2 = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
                b2 * (0.25 * self.model.mu() * self.model.mu())
            }
            PotentialKind::Plus | PotentialKind::Minus => {
                let here =
                    coefficient_jets_branch(&self.model, s, t, n + 2, self.geometric, b_hint)?;
                let mirror = if s.im == 0.0 && b_hint.is_none() {
                    here
                } else {
                    let h = b_hint.map(|h| h.conj());
                    coefficient_jets_branch(&self.model, s.conj(), t, n + 2, self.geometric, h)?
                };
                // c̄ jet at s: conjugated coefficients of c at conj(s).
                let c = here.c;
                let cbar = mirror.c.conj();
                let omega = here.omega;
                let (lead, sign) = match self.kind {
                    PotentialKind::Plus => (c, 1.0),
                    _ => (cbar, -1.0),
                };
                if lead.value().norm() == 0.0 {
                    return Err(Error::CouplingZero { s });
                }
                let u = lead.d() / lead.truncate(n + 1) + omega.truncate(n + 1) * (I * sign);
                let ccbar = (c * cbar).truncate(n);
                let body = (u * u).truncate(n) * (-0.25) + ccbar + u.d() * 0.5;
                body * (1.0 / (t * t))
            }
        };
        if !self.langer.is_empty() && self.kind != PotentialKind::Leading {
            let x = Jet::var(s, n);
            for z in &self.langer {
                let d = x + (-*z);
                q = q - (d * d).recip() * (0.25 / (t * t));
            }
        }
        if !q.is_finite() {
            return Err(Error::NearSingularity { s });
        }
        Ok(q)
    }

    pub fn eval(&self, s: C64) -> Result<C64> {
        Ok(self.eval_jet(s, 1)?.value())
    }
}

/// `q±(s,T)` with an optional Langer pole list.
pub fn potential_q(
    model: &FieldModel,
    kind: PotentialKind,
    s: C64,
    t: f64,
    langer: &[C64],
) -> Result<C64> {
    Potential::new(model, kind, t).with_langer(langer).eval(s)
}

/// `q(0)(s) = ¼μ²B²(s)`.
pub fn potential_q_leading(model: &FieldModel, s: C64) -> C64 {
    let b2 = model.b_squared(s, 1.0);
    b2 * (0.25 * model.mu() * model.mu())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn tanh_coupling_and_frequency() {
        let m = make_tanh(1.0, 1.0).unwrap();
        for &s in &[c(0.0, 0.0), c(0.7, 0.0), c(-1.3, 0.0), c(0.2, 0.3)] {
            let want = -(s * 2.0).cosh().inv() * 0.5;
            assert!((coupling_c(&m, s, 3.0).unwrap() - want).norm() < 1e-14);
            let w = frequency_omega(&m, s, 3.0, true).unwrap();
            let want = (s * 2.0).cosh().sqrt() / s.cosh() * 3.0;
            assert!((w - want).norm() < 1e-13 * want.norm());
        }
    }

    #[test]
    fn nikitin_coupling_value() {
        let m = make_nikitin(1.0, 1.0, 1.0).unwrap();
        let v = coupling_c(&m, c(1.0, 0.0), 1.0).unwrap();
        assert!((v.re - 2f64.sqrt() / 6.0).abs() < 1e-15 && v.im == 0.0);
    }

    #[test]
    fn sech_coupling_and_frequency() {
        let (b0, b1) = (1.0, 2.0);
        let m = make_sech(b0, b1, 1.0).unwrap();
        let s = 1.0f64;
        let want = 0.5 * b0 * b1 * s.sinh() / (b1 * b1 + b0 * b0 * s.cosh().powi(2));
        assert!((coupling_c(&m, c(s, 0.0), 1.0).unwrap().re - want).abs() < 1e-15);
        let w = frequency_omega(&m, c(s, 0.0), 5.0, true).unwrap();
        assert!((w.re - 5.0 * (b0 * b0 + b1 * b1 / s.cosh().powi(2)).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn constant_field_decoupled() {
        let m = make_constant([0.0, 0.0, 2.0], 1.5).unwrap();
        assert_eq!(coupling_c(&m, c(0.3, 0.0), 2.0).unwrap(), c(0.0, 0.0));
        assert!(
            (frequency_omega(&m, c(0.3, 0.0), 2.0, true).unwrap() - c(6.0, 0.0)).norm() < 1e-15
        );
    }

    #[test]
    fn berry_geometric_term_closed_form() {
        // (B×Ḃ)_z/ρ² = α/(1+α²s²), B_z/B = s²/sqrt(s⁴+α²s²+1).
        let a = 1.5;
        let m = make_berry(1.0, a, 1.0).unwrap();
        for &s in &[0.4, 1.0, -2.0] {
            let want =
                -a * s * s / ((1.0 + a * a * s * s) * (s.powi(4) + a * a * s * s + 1.0).sqrt());
            let got = frequency_geometric(&m, c(s, 0.0), 1.0).unwrap();
            assert!((got.re - want).abs() < 1e-14, "{s}: {got} vs {want}");
        }
    }

    #[test]
    fn leading_potential_values() {
        let m = make_nikitin(1.0, 1.0, 1.0).unwrap();
        assert!((potential_q_leading(&m, c(0.0, 0.0)) - c(0.5, 0.0)).norm() < 1e-15);
        let b = make_berry(2.0, 1.5, 0.5).unwrap();
        assert!((potential_q_leading(&b, c(0.0, 0.0)) - c(0.25, 0.0)).norm() < 1e-15);
        let t = make_tanh(1.0, 1.0).unwrap();
        let s = c(0.3, 0.2);
        let want = (s * 2.0).cosh() / (s.cosh() * s.cosh()) * 0.25;
        assert!((potential_q_leading(&t, s) - want).norm() < 1e-14);
    }

    #[test]
    fn potential_jet_matches_leading_eval() {
        let m = make_tanh(1.0, 1.0).unwrap();
        let p = Potential::leading(&m);
        let s = c(0.4, 0.1);
        assert!((p.eval(s).unwrap() - potential_q_leading(&m, s)).norm() < 1e-15);
    }

    #[test]
    fn langer_subtracts_inverse_square() {
        let m = make_nikitin(1.0, 1.0, 1.0).unwrap();
        let s = c(0.5, 0.4);
        let t = 7.0;
        let a = potential_q(&m, PotentialKind::Minus, s, t, &[]).unwrap();
        let b = potential_q(&m, PotentialKind::Minus, s, t, &[c(0.0, 0.0)]).unwrap();
        assert!((a - b - (s * s * 4.0).inv() / (t * t)).norm() < 1e-14);
    }
}
