//! Collision-counting constants derived from dataset size and error bounds.

use crate::error::{Error, Result};
use crate::lsh::prob::collision_prob;

/// Derived constants for collision counting over `m` single-function layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LshParams {
    pub n: usize,
    /// Approximation ratio, > 1.
    pub c: f64,
    pub w: f64,
    pub delta: f64,
    /// Allowed false-positive fraction, fixed to 100/n.
    pub beta: f64,
    pub p1: f64,
    pub p2: f64,
    pub z: f64,
    /// Collision threshold percentage.
    pub alpha: f64,
    /// Number of hash layers.
    pub m: usize,
    /// Collision count threshold.
    pub l: usize,
}

impl LshParams {
    pub fn derive(n: usize, c: f64, w: f64, delta: f64) -> Result<Self> {
        if n < 100 {
            return Err(Error::Param(format!(
                "dataset cardinality {n} < 100 makes beta = 100/n exceed 1"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Param(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(c > 1.0 && c.is_finite()) {
            return Err(Error::Param(format!("approximation ratio must exceed 1, got {c}")));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Param(format!("bucket width must be positive, got {w}")));
        }

        let beta = 100.0 / n as f64;
        let p1 = collision_prob(1.0, w)?;
        let p2 = collision_prob(c, w)?;
        let z = ((2.0 / beta).ln() / (1.0 / delta).ln()).sqrt();
        let gap = p1 - p2;
        let m = ((1.0 / delta).ln() / (2.0 * gap * gap) * (1.0 + z).powi(2)).ceil() as usize;
        let alpha = (z * p1 + p2) / (1.0 + z);
        let l = (alpha * m as f64).ceil() as usize;

        let params = Self {
            n,
            c,
            w,
            delta,
            beta,
            p1,
            p2,
            z,
            alpha,
            m,
            l,
        };
        debug_assert!(params.p1 > params.p2);
        debug_assert!(params.p2 < params.alpha && params.alpha < params.p1);
        debug_assert!(1 <= params.l && params.l <= params.m);
        Ok(params)
    }

    /// `⌈β·n⌉`, the number of extra candidates tolerated before stopping.
    ///
    /// β·n is 100 up to rounding; the epsilon keeps `ceil` from jumping to 101.
    pub fn false_positive_budget(&self) -> usize {
        (self.beta * self.n as f64 - 1e-9).ceil() as usize
    }
}
