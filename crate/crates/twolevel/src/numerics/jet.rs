//! Truncated Taylor series in one complex variable.
//!
//! A `Jet` of length `n` stores `f(s0), f'(s0), f''(s0)/2!, ...` up to
//! order `n - 1`. Arithmetic propagates the coefficients exactly, so field
//! models written once against `Jet` give values and derivatives together.

use num_complex::Complex64 as C64;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub const MAX_LEN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub c: [C64; MAX_LEN],
    pub n: usize,
}

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

impl Jet {
    pub fn constant(v: C64, n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_LEN, "jet length out of range");
        let mut c = [ZERO; MAX_LEN];
        c[0] = v;
        Jet { c, n }
    }

    pub fn real(v: f64, n: usize) -> Self {
        Self::constant(C64::new(v, 0.0), n)
    }

    /// The independent variable expanded at `s0`.
    pub fn var(s0: C64, n: usize) -> Self {
        let mut j = Self::constant(s0, n);
        if n > 1 {
            j.c[1] = C64::new(1.0, 0.0);
        }
        j
    }

    pub fn value(&self) -> C64 {
        self.c[0]
    }

    /// k-th derivative at the expansion point.
    pub fn deriv(&self, k: usize) -> C64 {
        assert!(k < self.n, "derivative order exceeds jet length");
        let mut f = 1.0;
        for i in 2..=k {
            f *= i as f64;
        }
        self.c[k] * f
    }

    /// Jet of the derivative, one order shorter.
    pub fn d(&self) -> Self {
        assert!(self.n >= 2, "cannot differentiate a length-1 jet");
        let mut c = [ZERO; MAX_LEN];
        for k in 0..self.n - 1 {
            c[k] = self.c[k + 1] * (k + 1) as f64;
        }
        Jet { c, n: self.n - 1 }
    }

    pub fn truncate(&self, n: usize) -> Self {
        let n = n.min(self.n);
        let mut c = [ZERO; MAX_LEN];
        c[..n].copy_from_slice(&self.c[..n]);
        Jet { c, n }
    }

    pub fn conj(&self) -> Self {
        let mut out = *self;
        for k in 0..self.n {
            out.c[k] = self.c[k].conj();
        }
        out
    }

    pub fn scale(&self, a: C64) -> Self {
        let mut out = *self;
        for k in 0..self.n {
            out.c[k] *= a;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.c[..self.n]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn recip(&self) -> Self {
        Jet::constant(C64::new(1.0, 0.0), self.n) / *self
    }

    /// Principal square root at the expansion point.
    pub fn sqrt(&self) -> Self {
        self.sqrt_with(self.c[0].sqrt())
    }

    /// Square root continuing the branch whose value at the expansion point is `y0`.
    pub fn sqrt_with(&self, y0: C64) -> Self {
        let n = self.n;
        let mut y = [ZERO; MAX_LEN];
        y[0] = y0;
        for k in 1..n {
            let mut acc = self.c[k];
            for j in 1..k {
                acc -= y[j] * y[k - j];
            }
            y[k] = acc / (y0 * 2.0);
        }
        Jet { c: y, n }
    }

    pub fn exp(&self) -> Self {
        let n = self.n;
        let mut y = [ZERO; MAX_LEN];
        y[0] = self.c[0].exp();
        for k in 1..n {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += self.c[j] * y[k - j] * j as f64;
            }
            y[k] = acc / k as f64;
        }
        Jet { c: y, n }
    }

    pub fn ln(&self) -> Self {
        let n = self.n;
        let x0 = self.c[0];
        let mut y = [ZERO; MAX_LEN];
        y[0] = x0.ln();
        for k in 1..n {
            let mut acc = self.c[k] * k as f64;
            for j in 1..k {
                acc -= y[j] * self.c[k - j] * j as f64;
            }
            y[k] = acc / (x0 * k as f64);
        }
        Jet { c: y, n }
    }

    /// `self^p` on the principal branch at the expansion point.
    pub fn powf(&self, p: f64) -> Self {
        let n = self.n;
        let x0 = self.c[0];
        let mut y = [ZERO; MAX_LEN];
        y[0] = x0.powf(p);
        for k in 1..n {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += self.c[j] * y[k - j] * (p * j as f64 - (k - j) as f64);
            }
            y[k] = acc / (x0 * k as f64);
        }
        Jet { c: y, n }
    }

    pub fn powi(&self, p: u32) -> Self {
        let mut out = Jet::real(1.0, self.n);
        for _ in 0..p {
            out = out * *self;
        }
        out
    }

    /// Returns `(sinh, cosh)`.
    pub fn sinh_cosh(&self) -> (Self, Self) {
        let n = self.n;
        let mut sh = [ZERO; MAX_LEN];
        let mut ch = [ZERO; MAX_LEN];
        sh[0] = self.c[0].sinh();
        ch[0] = self.c[0].cosh();
        for k in 1..n {
            let mut a = ZERO;
            let mut b = ZERO;
            for j in 1..=k {
                let w = self.c[j] * j as f64;
                a += w * ch[k - j];
                b += w * sh[k - j];
            }
            sh[k] = a / k as f64;
            ch[k] = b / k as f64;
        }
        (Jet { c: sh, n }, Jet { c: ch, n })
    }

    pub fn tanh(&self) -> Self {
        // y' = (1 - y^2) x'
        let n = self.n;
        let mut y = [ZERO; MAX_LEN];
        let mut y2 = [ZERO; MAX_LEN];
        y[0] = tanh_stable(self.c[0]);
        y2[0] = y[0] * y[0];
        for k in 1..n {
            let mut acc = ZERO;
            for j in 1..=k {
                let one = if k == j { C64::new(1.0, 0.0) } else { ZERO };
                acc += self.c[j] * (one - y2[k - j]) * j as f64;
            }
            y[k] = acc / k as f64;
            let mut sq = ZERO;
            for j in 0..=k {
                sq += y[j] * y[k - j];
            }
            y2[k] = sq;
        }
        Jet { c: y, n }
    }
}

/// `tanh` without the inf/inf of the library formula at large `|Re z|`.
fn tanh_stable(z: C64) -> C64 {
    if z.re.abs() < 20.0 {
        return z.tanh();
    }
    let sg = z.re.signum();
    let e = (z * (-2.0 * sg)).exp();
    (C64::new(1.0, 0.0) - e) / (C64::new(1.0, 0.0) + e) * sg
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let n = self.n.min(o.n);
        let mut c = [ZERO; MAX_LEN];
        for k in 0..n {
            c[k] = self.c[k] + o.c[k];
        }
        Jet { c, n }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let n = self.n.min(o.n);
        let mut c = [ZERO; MAX_LEN];
        for k in 0..n {
            c[k] = self.c[k] - o.c[k];
        }
        Jet { c, n }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let n = self.n.min(o.n);
        let mut c = [ZERO; MAX_LEN];
        for k in 0..n {
            let mut acc = ZERO;
            for j in 0..=k {
                acc += self.c[j] * o.c[k - j];
            }
            c[k] = acc;
        }
        Jet { c, n }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let n = self.n.min(o.n);
        let mut c = [ZERO; MAX_LEN];
        for k in 0..n {
            let mut acc = self.c[k];
            for j in 0..k {
                acc -= c[j] * o.c[k - j];
            }
            c[k] = acc / o.c[0];
        }
        Jet { c, n }
    }
}

impl Add<C64> for Jet {
    type Output = Jet;
    fn add(mut self, a: C64) -> Jet {
        self.c[0] += a;
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, a: f64) -> Jet {
        self.c[0] += a;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, a: f64) -> Jet {
        self.scale(C64::new(a, 0.0))
    }
}

impl Mul<C64> for Jet {
    type Output = Jet;
    fn mul(self, a: C64) -> Jet {
        self.scale(a)
    }
}
