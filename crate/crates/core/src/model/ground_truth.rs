//! Smallest projected radius at which a query terminates.
//!
//! A point's collision count at radius `R` is `#{i : |h_i(x) − h_i(q)| ≤ R}`,
//! so it becomes a candidate exactly when `R` reaches the `l`-th smallest of
//! its per-projection offsets. Precomputing that offset for every point turns
//! each fixed-radius termination check into one linear pass.

use crate::bench::{euclidean, Dataset};
use crate::error::{Error, Result};
use crate::index::DiskIndex;
use crate::lsh::{HashFamily, LshParams, Signature};

/// Point-major table of every point's bucket in every projection.
#[derive(Debug, Clone)]
pub struct BucketMatrix {
    n: usize,
    m: usize,
    buckets: Vec<i64>,
}

impl BucketMatrix {
    /// Loads the table from the index's projection files.
    pub fn from_index(index: &DiskIndex) -> Result<Self> {
        Ok(Self {
            n: index.len(),
            m: index.m(),
            buckets: index.bucket_matrix()?,
        })
    }

    pub fn from_dataset(dataset: &Dataset, family: &HashFamily) -> Result<Self> {
        let mut buckets = Vec::with_capacity(dataset.len() * family.m());
        for p in dataset.points() {
            buckets.extend(family.signature(p)?.0);
        }
        Ok(Self {
            n: dataset.len(),
            m: family.m(),
            buckets,
        })
    }

    pub fn row(&self, id: usize) -> &[i64] {
        &self.buckets[id * self.m..(id + 1) * self.m]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// For one query: the radius at which each point becomes a candidate, and
/// its exact distance.
#[derive(Debug, Clone)]
pub struct CollisionProfile {
    candidate_radius: Vec<u64>,
    distance: Vec<f64>,
}

impl CollisionProfile {
    pub fn new(
        matrix: &BucketMatrix,
        signature: &Signature,
        q: &[f32],
        dataset: &Dataset,
        threshold: usize,
    ) -> Result<Self> {
        if signature.len() != matrix.m {
            return Err(Error::Dimension {
                expected: matrix.m,
                got: signature.len(),
            });
        }
        if threshold == 0 || threshold > matrix.m {
            return Err(Error::Param(format!("threshold {threshold} outside 1..={}", matrix.m)));
        }
        let mut offsets = vec![0u64; matrix.m];
        let candidate_radius = (0..matrix.n)
            .map(|id| {
                for ((o, &b), &s) in offsets.iter_mut().zip(matrix.row(id)).zip(signature.buckets()) {
                    *o = b.abs_diff(s);
                }
                *offsets.select_nth_unstable(threshold - 1).1
            })
            .collect();
        let distance = dataset.points().map(|p| euclidean(q, p)).collect();
        Ok(Self {
            candidate_radius,
            distance,
        })
    }

    pub fn candidate_radius(&self) -> &[u64] {
        &self.candidate_radius
    }

    pub fn candidates_at(&self, radius: u64) -> Vec<u32> {
        (0..self.candidate_radius.len() as u32)
            .filter(|&id| self.candidate_radius[id as usize] <= radius)
            .collect()
    }

    /// Whether a query run at fixed `radius` meets either stopping rule.
    pub fn satisfied(&self, radius: u64, k: usize, c: f64, false_positive_budget: usize) -> bool {
        let bound = c * radius as f64;
        let mut candidates = 0usize;
        let mut close = 0usize;
        for (&r, &d) in self.candidate_radius.iter().zip(&self.distance) {
            if r <= radius {
                candidates += 1;
                if d <= bound {
                    close += 1;
                }
            }
        }
        candidates >= k + false_positive_budget || close >= k
    }

    /// Smallest radius satisfying the stopping rules, by doubling to bracket
    /// and then binary search. The result is clamped below at `min_radius`.
    pub fn terminal_radius(&self, k: usize, c: f64, false_positive_budget: usize, min_radius: u64) -> Result<u64> {
        let n = self.candidate_radius.len();
        if k == 0 || k > n {
            return Err(Error::Param(format!("k = {k} unreachable with {n} points")));
        }
        let ok = |r: u64| self.satisfied(r, k, c, false_positive_budget);
        if ok(0) {
            return Ok(min_radius);
        }
        let mut hi = 1u64;
        while !ok(hi) {
            if hi >= 1 << 62 {
                return Err(Error::Search("no terminating radius below 2^62".into()));
            }
            hi *= 2;
        }
        // ok(hi) holds, ok(lo) does not.
        let mut lo = hi / 2;
        if hi == 1 {
            lo = 0;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi.max(min_radius))
    }
}

/// Bundles what ground-truth collection needs for arbitrary queries.
pub struct RadiusOracle<'a> {
    pub matrix: &'a BucketMatrix,
    pub family: &'a HashFamily,
    pub params: &'a LshParams,
    pub dataset: &'a Dataset,
    pub min_radius: u64,
}

impl RadiusOracle<'_> {
    pub fn profile(&self, q: &[f32]) -> Result<CollisionProfile> {
        let signature = self.family.signature(q)?;
        CollisionProfile::new(self.matrix, &signature, q, self.dataset, self.params.l)
    }

    pub fn ground_truth_radius(&self, q: &[f32], k: usize) -> Result<u64> {
        self.profile(q)?.terminal_radius(
            k,
            self.params.c,
            self.params.false_positive_budget(),
            self.min_radius,
        )
    }
}
