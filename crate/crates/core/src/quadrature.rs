//! Adaptive Simpson quadrature with Richardson extrapolation, and
//! bracketed bisection.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 40;

/// Integral value with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Each panel compares Simpson on the whole panel with Simpson on its two
/// halves; the difference over 15 is the Richardson error estimate, and the
/// extrapolated value is returned.
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(tol > 0.0) {
        return Err(Error::Options(format!("quadrature tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
        });
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut error = 0.0;
    let value = recurse(&mut f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut error)?;
    Ok(Quadrature { value, error })
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    error: &mut f64,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol || (b - a).abs() <= 4.0 * f64::EPSILON * m.abs() {
        *error += diff.abs() / 15.0;
        return Ok(left + right + diff / 15.0);
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, error)?;
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, error)?;
    Ok(l + r)
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Stops when `|f| ≤ ftol` or the bracket is narrower than `xtol`; returns the
/// bracket end with the smaller residual.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, ftol: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut flo = f(lo)?;
    let mut fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Domain(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid)?;
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
            fhi = fmid;
        }
        let best = flo.abs().min(fhi.abs());
        if best <= ftol && (hi - lo) <= xtol.max(f64::EPSILON * hi.abs()) {
            break;
        }
        if (hi - lo) <= f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
    }
    Ok(if flo.abs() <= fhi.abs() { lo } else { hi })
}

/// Three-point Gauss–Legendre rule on `[a, b]`.
pub(crate) fn gauss3<F>(mut f: F, a: f64, b: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    const NODE: f64 = 0.774_596_669_241_483_4;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let v = 5.0 * f(mid - half * NODE)? + 8.0 * f(mid)? + 5.0 * f(mid + half * NODE)?;
    Ok(half * v / 9.0)
}
