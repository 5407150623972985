//! Adaptive Simpson quadrature with interval bisection.

use crate::{Error, Result};

pub const MAX_DEPTH: u32 = 60;

/// Integrates `f` over `[a, b]` (either orientation) to absolute tolerance `tol`.
///
/// Fails with [`Error::Quadrature`] when a subinterval still misses its share of
/// the tolerance at `MAX_DEPTH`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let fa = f(lo);
    let fb = f(hi);
    let m = 0.5 * (lo + hi);
    let fm = f(m);
    let whole = simpson(lo, hi, fa, fm, fb);
    let floor = 16.0 * f64::EPSILON;
    let value = recurse(f, lo, hi, fa, fm, fb, whole, tol, floor, MAX_DEPTH)
        .ok_or(Error::Quadrature { a, b, tolerance: tol })?;
    Ok(sign * value)
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    floor: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // below `floor` relative to the piece, round-off dominates the estimate
    let eff_tol = tol.max(floor * (left.abs() + right.abs()));
    if delta.abs() <= 15.0 * eff_tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 || !delta.is_finite() {
        return None;
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, floor, depth - 1)?;
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, floor, depth - 1)?;
    Some(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let v = adaptive_simpson(&|x: f64| x * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 4.0).abs() < 1e-13);
    }

    #[test]
    fn orientation_flips_sign() {
        let f = |x: f64| x.exp();
        let a = adaptive_simpson(&f, 0.0, 1.0, 1e-12).unwrap();
        let b = adaptive_simpson(&f, 1.0, 0.0, 1e-12).unwrap();
        assert_eq!(a, -b);
        assert!((a - (1f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn reports_failure_on_nonintegrable_singularity() {
        let r = adaptive_simpson(&|x: f64| 1.0 / x, 0.0, 1.0, 1e-10);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
