//! Dormand-Prince 8(5,3) integrator for complex state vectors.
//!
//! Step-size control and the combined 5th/3rd order error estimate follow
//! Hairer & Wanner's DOP853.

use super::Tolerance;
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

const C: [f64; 12] = [
    0.0,
    5.260_015_195_876_773E-2,
    7.890_022_793_815_16E-2,
    1.183_503_419_072_274E-1,
    2.816_496_580_927_726E-1,
    3.333_333_333_333_333E-1,
    0.25,
    3.076_923_076_923_077E-1,
    6.512_820_512_820_513E-1,
    0.6,
    8.571_428_571_428_571E-1,
    1.0,
];

const A: [[f64; 11]; 12] = [
    [0.0; 11],
    [
        5.260_015_195_876_773E-2,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        1.972_505_698_453_79E-2,
        5.917_517_095_361_37E-2,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        2.958_758_547_680_685E-2,
        0.0,
        8.876_275_643_042_054E-2,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        2.413_651_341_592_667E-1,
        0.0,
        -8.845_494_793_282_861E-1,
        9.248_340_032_617_92E-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.703_703_703_703_703_5E-2,
        0.0,
        0.0,
        1.708_286_087_294_738_6E-1,
        1.254_676_875_668_224_2E-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.710_937_5E-2,
        0.0,
        0.0,
        1.702_522_110_195_440_5E-1,
        6.021_653_898_045_596E-2,
        -1.757_812_5E-2,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.709_200_011_850_479E-2,
        0.0,
        0.0,
        1.703_839_257_122_399_8E-1,
        1.072_620_304_463_732_8E-1,
        -1.531_943_774_862_440_2E-2,
        8.273_789_163_814_023E-3,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        6.241_109_587_160_757E-1,
        0.0,
        0.0,
        -3.360_892_629_446_941_4,
        -8.682_193_468_417_26E-1,
        2.759_209_969_944_671E1,
        2.015_406_755_047_789_4E1,
        -4.348_988_418_106_996E1,
        0.0,
        0.0,
        0.0,
    ],
    [
        4.776_625_364_382_643_4E-1,
        0.0,
        0.0,
        -2.488_114_619_971_667_7,
        -5.902_908_268_368_43E-1,
        2.123_005_144_818_119_3E1,
        1.527_923_363_288_242_3E1,
        -3.328_821_096_898_486E1,
        -2.033_120_170_850_862_7E-2,
        0.0,
        0.0,
    ],
    [
        -9.371_424_300_859_873E-1,
        0.0,
        0.0,
        5.186_372_428_844_064,
        1.091_437_348_996_729_5,
        -8.149_787_010_746_927,
        -1.852_006_565_999_696E1,
        2.273_948_709_935_050_5E1,
        2.493_605_552_679_652_3,
        -3.046_764_471_898_219_6,
        0.0,
    ],
    [
        2.273_310_147_516_538,
        0.0,
        0.0,
        -1.053_449_546_673_725E1,
        -2.000_872_058_224_862_5,
        -1.795_893_186_311_88E1,
        2.794_888_452_941_996E1,
        -2.858_998_277_135_023_5,
        -8.872_856_933_530_63,
        1.236_056_717_579_430_3E1,
        6.433_927_460_157_636E-1,
    ],
];

const B: [f64; 12] = [
    5.429_373_411_656_876_5E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450_312_892_752_409,
    1.891_517_899_314_500_3,
    -5.801_203_960_010_585,
    3.111_643_669_578_199E-1,
    -1.521_609_496_625_161E-1,
    2.013_654_008_040_303_4E-1,
    4.471_061_572_777_259E-2,
];

// Fifth-order error weights.
const ER: [f64; 12] = [
    1.312_004_499_419_488E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.225_156_446_376_204_4,
    -4.957_589_496_572_502E-1,
    1.664_377_182_454_986_4,
    -3.503_288_487_499_736_6E-1,
    3.341_791_187_130_175E-1,
    8.192_320_648_511_571E-2,
    -2.235_530_786_388_629_4E-2,
];

const BHH1: f64 = 0.244_094_488_188_976;
const BHH2: f64 = 0.733_846_688_281_611;
const BHH3: f64 = 0.022_058_823_529_411_8;

const SAFE: f64 = 0.9;
const FAC1: f64 = 0.333;
const FAC2: f64 = 6.0;
const MAX_STEPS: usize = 20_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn finite(y: &[C64]) -> bool {
    y.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Integrates `y' = rhs(s, y)` from `s0` to `s1` (either direction).
pub fn ode_propagate<F>(rhs: F, s0: f64, s1: f64, y0: &[C64], tol: &Tolerance) -> Result<Vec<C64>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    ode_propagate_stats(rhs, s0, s1, y0, tol).map(|(y, _)| y)
}

pub fn ode_propagate_stats<F>(
    mut rhs: F,
    s0: f64,
    s1: f64,
    y0: &[C64],
    tol: &Tolerance,
) -> Result<(Vec<C64>, OdeStats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    tol.validate()?;
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    if !finite(&y) {
        return Err(Error::NonFiniteState { s: s0 });
    }
    if s1 == s0 || n == 0 {
        return Ok((y, stats));
    }
    let dir = (s1 - s0).signum();
    let span = (s1 - s0).abs();
    let (rtol, atol) = (tol.rel, tol.abs);
    let sk = |a: &C64, b: &C64| atol + rtol * a.norm().max(b.norm());

    let zero = C64::new(0.0, 0.0);
    let mut k: Vec<Vec<C64>> = vec![vec![zero; n]; 12];
    let mut ytmp = vec![zero; n];
    let mut ynew = vec![zero; n];
    let mut x = s0;

    rhs(x, &y, &mut k[0]);
    stats.evaluations += 1;
    if !finite(&k[0]) {
        return Err(Error::NonFiniteState { s: x });
    }

    // Initial step guess.
    let mut h = {
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..n {
            let s = atol + rtol * y[i].norm();
            dnf += (k[0][i].norm() / s).powi(2);
            dny += (y[i].norm() / s).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(span);
        for i in 0..n {
            ytmp[i] = y[i] + k[0][i] * (h * dir);
        }
        rhs(x + h * dir, &ytmp, &mut k[1]);
        stats.evaluations += 1;
        let mut der2 = 0.0;
        for i in 0..n {
            let s = atol + rtol * y[i].norm();
            der2 += ((k[1][i] - k[0][i]).norm() / s).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(1.0 / 8.0)
        };
        (100.0 * h).min(h1).min(span)
    };

    let mut reject = false;
    let mut last = false;
    loop {
        if stats.accepted + stats.rejected >= MAX_STEPS {
            return Err(Error::StiffnessAbort { s: x, h });
        }
        if 0.1 * h <= f64::EPSILON * x.abs().max(1.0) {
            return Err(Error::StiffnessAbort { s: x, h });
        }
        if (x + 1.01 * h * dir - s1) * dir >= 0.0 {
            h = (s1 - x).abs();
            last = true;
        }
        let hs = h * dir;
        for st in 1..12 {
            for i in 0..n {
                let mut acc = zero;
                for j in 0..st {
                    let a = A[st][j];
                    if a != 0.0 {
                        acc += k[j][i] * a;
                    }
                }
                ytmp[i] = y[i] + acc * hs;
            }
            rhs(x + C[st] * hs, &ytmp, &mut k[st]);
        }
        stats.evaluations += 11;

        let (mut err5, mut err3) = (0.0, 0.0);
        for i in 0..n {
            let mut inc = zero;
            let mut e5 = zero;
            for j in 0..12 {
                if B[j] != 0.0 {
                    inc += k[j][i] * B[j];
                }
                if ER[j] != 0.0 {
                    e5 += k[j][i] * ER[j];
                }
            }
            ynew[i] = y[i] + inc * hs;
            let s = sk(&y[i], &ynew[i]);
            let e3 = inc - k[0][i] * BHH1 - k[8][i] * BHH2 - k[11][i] * BHH3;
            err5 += (e5.norm() / s).powi(2);
            err3 += (e3.norm() / s).powi(2);
        }
        let deno = {
            let d = err5 + 0.01 * err3;
            if d <= 0.0 {
                1.0
            } else {
                d
            }
        };
        let err = h * err5 * (1.0 / (n as f64 * deno)).sqrt();
        if !err.is_finite() {
            // Treat as a hard rejection.
            stats.rejected += 1;
            h *= FAC1;
            last = false;
            reject = true;
            continue;
        }
        let fac11 = err.powf(0.125);
        let fac = (fac11 / SAFE).clamp(1.0 / FAC2, 1.0 / FAC1);
        let mut hnew = h / fac;
        if err <= 1.0 {
            stats.accepted += 1;
            if !finite(&ynew) {
                return Err(Error::NonFiniteState { s: x + hs });
            }
            x += hs;
            std::mem::swap(&mut y, &mut ynew);
            if last {
                return Ok((y, stats));
            }
            rhs(x, &y, &mut k[0]);
            stats.evaluations += 1;
            if reject {
                hnew = hnew.min(h);
            }
            reject = false;
            h = hnew.min(span);
        } else {
            stats.rejected += 1;
            hnew = h / (fac11 / SAFE).min(1.0 / FAC1);
            reject = true;
            last = false;
            h = hnew;
        }
    }
}
