//! Radius sequences for virtual rehashing.

/// How projected radii grow from one round to the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusPlan {
    /// `1, c, c², …` (each term rounded up to an integer).
    Exponential { c: f64 },
    /// `i2r + 2^x` for `0 ≤ x ≤ ⌊log₂ i2r⌋`, then the powers of two above
    /// the last of those. For a power-of-two `i2r` this is
    /// `i2r+1, i2r+2, i2r+4, …, 2·i2r, 4·i2r, 8·i2r, …`.
    Improved { i2r: u64 },
    /// `start, start + step, start + 2·step, …`.
    Linear { start: u64, step: u64 },
}

/// A strictly increasing radius sequence capped at `max_radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusSchedule {
    pub plan: RadiusPlan,
    pub max_radius: u64,
}

impl RadiusSchedule {
    pub fn exponential(c: f64, max_radius: u64) -> Self {
        assert!(c > 1.0, "ratio must exceed 1");
        Self {
            plan: RadiusPlan::Exponential { c },
            max_radius,
        }
    }

    pub fn improved(i2r: u64, max_radius: u64) -> Self {
        Self {
            plan: RadiusPlan::Improved { i2r: i2r.max(1) },
            max_radius,
        }
    }

    /// Starts at `predicted` and grows by `⌈predicted · lambda⌉` per round.
    pub fn linear(predicted: u64, lambda: f64, max_radius: u64) -> Self {
        let start = predicted.max(1);
        let step = ((start as f64 * lambda).ceil() as u64).max(1);
        Self {
            plan: RadiusPlan::Linear { start, step },
            max_radius,
        }
    }

    /// Next radius after `current` (`None` = nothing examined yet), or `None`
    /// once the sequence would pass `max_radius`.
    pub fn next_radius(&self, current: Option<u64>) -> Option<u64> {
        let next = match self.plan {
            RadiusPlan::Exponential { c } => next_power(c, current),
            RadiusPlan::Improved { i2r } => next_improved(i2r, current),
            RadiusPlan::Linear { start, step } => match current {
                None => start,
                Some(r) if r < start => start,
                Some(r) => start + step * ((r - start) / step + 1),
            },
        };
        (next <= self.max_radius).then_some(next)
    }

    /// The full sequence up to `max_radius`.
    pub fn radii(&self) -> impl Iterator<Item = u64> + '_ {
        std::iter::successors(self.next_radius(None), move |&r| self.next_radius(Some(r)))
    }
}

fn next_power(c: f64, current: Option<u64>) -> u64 {
    let Some(cur) = current else { return 1 };
    let mut term = 1.0f64;
    loop {
        let r = term.ceil() as u64;
        if r > cur {
            return r;
        }
        term *= c;
        if !term.is_finite() || term > u64::MAX as f64 / 2.0 {
            return u64::MAX;
        }
    }
}

fn next_improved(i2r: u64, current: Option<u64>) -> u64 {
    let floor_log = 63 - i2r.leading_zeros() as u64;
    let cur = match current {
        None => return i2r + 1,
        Some(r) => r,
    };
    for x in 0..=floor_log {
        let r = i2r + (1u64 << x);
        if r > cur {
            return r;
        }
    }
    let last = i2r + (1u64 << floor_log);
    let above = cur.max(last);
    above
        .checked_add(1)
        .and_then(u64::checked_next_power_of_two)
        .unwrap_or(u64::MAX)
}
