//! Collision probability of the Euclidean p-stable hash family.

use crate::error::{Error, Result};

const QUAD_TOLERANCE: f64 = 1e-9;
const MAX_DEPTH: u32 = 50;

/// Probability that two points at distance `r` land in the same bucket of a
/// random `⌊(a·x + b)/w⌋` hash:
///
/// `P(r) = ∫₀^w (1/r) · (2/√(2π)) · exp(−t²/2r²) · (1 − t/w) dt`
///
/// Evaluated by adaptive Simpson quadrature to an absolute error of 1e-9.
pub fn collision_prob(r: f64, w: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("distance must be positive, got {r}")));
    }
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::Domain(format!("bucket width must be positive, got {w}")));
    }
    let norm = 2.0 / (2.0 * std::f64::consts::PI).sqrt() / r;
    let f = |t: f64| norm * (-t * t / (2.0 * r * r)).exp() * (1.0 - t / w);
    Ok(adaptive_simpson(&f, 0.0, w, QUAD_TOLERANCE).clamp(0.0, 1.0))
}

pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    refine(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_positive_inputs() {
        assert!(collision_prob(0.0, 1.0).is_err());
        assert!(collision_prob(1.0, 0.0).is_err());
        assert!(collision_prob(-1.0, 2.0).is_err());
        assert!(collision_prob(f64::NAN, 2.0).is_err());
    }

    #[test]
    fn vanishing_width_gives_zero() {
        let p = collision_prob(1.0, 1e-12).unwrap();
        assert!(p < 1e-11, "{p}");
    }

    #[test]
    fn decreasing_in_distance() {
        let grid = [0.5, 1.0, 2.0, 4.0, 8.0];
        let ps: Vec<f64> = grid
            .iter()
            .map(|&r| collision_prob(r, 2.184).unwrap())
            .collect();
        for pair in ps.windows(2) {
            assert!(pair[0] > pair[1], "{ps:?}");
        }
    }

    #[test]
    fn simpson_exact_on_cubic() {
        let v = adaptive_simpson(&|x: f64| x * x * x - 2.0 * x, 0.0, 3.0, 1e-12);
        assert!((v - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }
}
