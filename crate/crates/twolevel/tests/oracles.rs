//! Exact probabilities against reference values from a separate DOP853
//! integration of the amplitude equations at tolerance 1e-12.

use twolevel::dynamics::{transition_probability_exact_with, ExactOptions};
use twolevel::fields::{make_berry, make_nikitin, make_sech, make_tanh, FieldModel};

fn p(m: &FieldModel, t: f64) -> f64 {
    transition_probability_exact_with(m, t, &ExactOptions::default())
        .unwrap()
        .p
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn nikitin_at_t10() {
    let got = p(&make_nikitin(1.0, 1.0, 1.0).unwrap(), 10.0);
    assert!(rel(got, 2.788683260765e-8) < 1e-6, "{got}");
}

#[test]
fn tanh_at_t2() {
    let got = p(&make_tanh(1.0, 1.0).unwrap(), 2.0);
    assert!(rel(got, 0.0738261526) < 1e-6, "{got}");
}

#[test]
fn sech_at_t3_3() {
    let got = p(&make_sech(1.0, 2.0, 1.0).unwrap(), 3.3);
    assert!(rel(got, 8.232e-5) < 1e-3, "{got}");
}

#[test]
fn berry_at_t10() {
    let got = p(&make_berry(1.0, 1.5, 1.0).unwrap(), 10.0);
    assert!(rel(got, 5.780e-6) < 1e-3, "{got}");
}

// B = (B1 sech s, 0, B0) is the Rosen-Zener model: P = sin²(πμTB1/2)/cosh²(πμTB0/2).
#[test]
fn sech_matches_rosen_zener_closed_form() {
    use std::f64::consts::PI;
    let (b0, b1) = (1.0, 2.0);
    let m = make_sech(b0, b1, 1.0).unwrap();
    for t in [0.7, 1.3, 3.3, 5.7, 7.25] {
        let want = (PI * t * b1 / 2.0).sin().powi(2) / (PI * t * b0 / 2.0).cosh().powi(2);
        let got = p(&m, t);
        assert!(rel(got, want) < 1e-6, "T = {t}: {got} vs {want}");
    }
}
