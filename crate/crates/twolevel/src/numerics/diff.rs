use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

fn central(f: &impl Fn(C64) -> C64, s: C64, order: u8, h: f64) -> C64 {
    match order {
        1 => (f(s + h) - f(s - h)) / (2.0 * h),
        _ => (f(s + h) - f(s) * 2.0 + f(s - h)) / (h * h),
    }
}

/// First or second derivative by central differences with one Richardson
/// step, error `O(step^4)`.
pub fn derivative<F: Fn(C64) -> C64>(f: F, s: C64, order: u8, step: f64) -> Result<C64> {
    if order != 1 && order != 2 {
        return Err(Error::InvalidInput(format!(
            "derivative order {order} not supported"
        )));
    }
    let floor = if order == 1 { 1e-11 } else { 1e-6 } * (1.0 + s.norm());
    if !(step >= floor) {
        return Err(Error::StepUnderflow { step, floor });
    }
    let d1 = central(&f, s, order, step);
    let d2 = central(&f, s, order, step * 0.5);
    Ok((d2 * 4.0 - d1) / 3.0)
}
