//! Numerical kernel: quadrature along complex paths, root finding,
//! differentiation, Taylor jets and an adaptive Runge-Kutta integrator.

pub mod diff;
pub mod jet;
pub mod ode;
pub mod quadrature;
pub mod roots;

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use diff::derivative;
pub use jet::Jet;
pub use ode::{ode_propagate, OdeStats};
pub use quadrature::{integrate_path, integrate_segment};
pub use roots::{find_roots, find_roots_with, RootOptions, RootSearch};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64, max_subdivisions: usize) -> Result<Self> {
        let t = Tolerance {
            rel,
            abs,
            max_subdivisions,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel >= 0.0 && self.abs >= 0.0) || self.rel + self.abs <= 0.0 {
            return Err(Error::InvalidInput("tolerance needs rel + abs > 0".into()));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidInput(
                "max_subdivisions must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Same absolute and relative level.
    pub fn uniform(tol: f64) -> Self {
        Tolerance {
            rel: tol,
            abs: tol,
            max_subdivisions: 2000,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-10,
            abs: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

/// Piecewise-linear path through the complex plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexPath {
    points: Vec<C64>,
}

impl ComplexPath {
    pub fn new(points: Vec<C64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(
                "a path needs at least two waypoints".into(),
            ));
        }
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("consecutive waypoints coincide".into()));
        }
        if points
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidInput("waypoint is not finite".into()));
        }
        Ok(ComplexPath { points })
    }

    pub fn segment(a: C64, b: C64) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn start(&self) -> C64 {
        self.points[0]
    }

    pub fn end(&self) -> C64 {
        *self.points.last().unwrap()
    }

    pub fn reversed(&self) -> Self {
        let mut p = self.points.clone();
        p.reverse();
        ComplexPath { points: p }
    }

    /// Concatenation; the end of `self` must equal the start of `other`.
    pub fn join(&self, other: &ComplexPath) -> Result<Self> {
        if (self.end() - other.start()).norm() > 1e-14 * (1.0 + self.end().norm()) {
            return Err(Error::InvalidInput("paths do not meet".into()));
        }
        let mut p = self.points.clone();
        p.extend_from_slice(&other.points[1..]);
        Ok(ComplexPath { points: p })
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Point at arc-length fraction `t` in [0, 1].
    pub fn at_fraction(&self, t: f64) -> C64 {
        let total = self.length();
        let mut target = t.clamp(0.0, 1.0) * total;
        for w in self.points.windows(2) {
            let l = (w[1] - w[0]).norm();
            if target <= l {
                return w[0] + (w[1] - w[0]) * (target / l);
            }
            target -= l;
        }
        self.end()
    }
}

/// Axis-aligned rectangle `[re_min, re_max] x [im_min, im_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min < re_max && im_min < im_max) {
            return Err(Error::InvalidInput("empty rectangle".into()));
        }
        Ok(Rect {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    pub fn diagonal(&self) -> f64 {
        (self.re_max - self.re_min).hypot(self.im_max - self.im_min)
    }

    pub fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_max, self.im_max),
            C64::new(self.re_min, self.im_max),
        ]
    }
}
