//! Adaptive Simpson quadrature for densities on `[0,1]`.

use crate::error::{Error, Result};

use super::Segment;

/// Recursion depth at which a panel is declared non-convergent.
const MAX_DEPTH: u32 = 40;

/// Adaptive Simpson estimate of the integral of `g` over `s`, within `tol`.
/// Degenerate segments integrate to exactly zero.
pub fn integrate_density<G>(g: G, s: Segment, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    try_integrate_density(|t| Ok(g(t)), s, tol)
}

/// Like [`integrate_density`] for a fallible density.
pub fn try_integrate_density<G>(g: G, s: Segment, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    let (a, b) = (s.a(), s.b());
    if a == b {
        return Ok(0.0);
    }
    let fa = g(a)?;
    let fb = g(b)?;
    let m = 0.5 * (a + b);
    let fm = g(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut panel = Panel { g: &g, a0: a, b0: b };
    panel.step(a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

struct Panel<'g, G> {
    g: &'g G,
    a0: f64,
    b0: f64,
}

impl<G> Panel<'_, G>
where
    G: Fn(f64) -> Result<f64>,
{
    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.g)(lm)?;
        let frm = (self.g)(rm)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 || m <= a || m >= b {
            return Err(Error::Integration {
                a: self.a0,
                b: self.b0,
            });
        }
        let l = self.step(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = self.step(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn seg(a: f64, b: f64) -> Segment {
        Segment::new(a, b).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert!((integrate_density(|t| 2.0 * t, seg(0.0, 1.0), 1e-12).unwrap() - 1.0).abs() < 1e-12);
        assert!((integrate_density(|_| 1.0, seg(0.1, 0.6), 1e-12).unwrap() - 0.5).abs() < 1e-12);
        let v = integrate_density(|t| (PI * t).sin(), seg(0.0, 1.0), 1e-12).unwrap();
        assert!((v - 2.0 / PI).abs() < 1e-11, "{v}");
        assert!((v - 0.636620).abs() < 1e-6);
    }

    #[test]
    fn degenerate_is_exact_zero() {
        assert_eq!(integrate_density(|t| t.exp(), seg(0.3, 0.3), 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn nonconvergence_is_reported() {
        // Not continuous at 0.5; the jump never resolves below the tolerance.
        let r = integrate_density(|t| if t < 0.5 { 0.0 } else { 1.0 }, seg(0.0, 1.0), 1e-300);
        assert!(matches!(r, Err(Error::Integration { .. })));
    }
}
