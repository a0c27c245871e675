//! Index-time sampling: ground-truth radii for regression and oVR terminal
//! radii for initial-radius selection. Both parallelize over queries.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bench::Dataset;
use crate::error::{Error, Result};
use crate::lsh::SplitMix64;
use crate::model::ground_truth::{CollisionProfile, RadiusOracle};
use crate::model::histogram::{select_i2r, I2rTable, RadiusHistogram};
use crate::model::samples::TrainingSample;
use crate::search::{SearchEngine, VirtualRehashing};

/// The `k` set training covers by default.
pub const DEFAULT_TRAINING_KS: [usize; 5] = [1, 25, 50, 75, 100];

/// Seeded draw of `count` distinct dataset ids (all of them, shuffled, if
/// `count ≥ n`).
pub fn draw_query_ids(n: usize, count: usize, seed: u64) -> Vec<usize> {
    SplitMix64::derive(seed, 0x5155_4552).sample_indices(n, count.min(n))
}

/// One sample per `(query, k)`, labelled with the ground-truth radius.
/// Output order is query-major, then `ks` order, regardless of threading.
pub fn collect_samples(
    oracle: &RadiusOracle<'_>,
    dataset: &Dataset,
    query_ids: &[usize],
    ks: &[usize],
) -> Result<Vec<TrainingSample>> {
    if ks.is_empty() {
        return Err(Error::Param("no k values to sample".into()));
    }
    let per_query: Vec<Vec<TrainingSample>> = query_ids
        .par_iter()
        .map(|&id| {
            let q = dataset.point(id);
            let signature = oracle.family.signature(q)?;
            let profile = CollisionProfile::new(
                oracle.matrix,
                &signature,
                q,
                oracle.dataset,
                oracle.params.l,
            )?;
            ks.iter()
                .map(|&k| {
                    let target = profile.terminal_radius(
                        k,
                        oracle.params.c,
                        oracle.params.false_positive_budget(),
                        oracle.min_radius,
                    )?;
                    Ok(TrainingSample {
                        buckets: signature.0.clone(),
                        k,
                        target,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_query.into_iter().flatten().collect())
}

/// Runs oVR for every sampled query and `k`, histograms the terminal radii
/// per `k`, and picks each `k`'s initial radius from its histogram.
pub fn sample_i2r(
    engine: &SearchEngine<'_>,
    query_ids: &[usize],
    ks: &[usize],
) -> Result<(I2rTable, BTreeMap<usize, RadiusHistogram>)> {
    if query_ids.is_empty() {
        return Err(Error::Param("sampling needs at least one query".into()));
    }
    let mut histograms = BTreeMap::new();
    let mut table = I2rTable::default();
    for &k in ks {
        let hist = build_histogram(engine, query_ids, k)?;
        table.insert(k, select_i2r(&hist, engine.params.c)?);
        histograms.insert(k, hist);
    }
    Ok((table, histograms))
}

pub fn build_histogram(engine: &SearchEngine<'_>, query_ids: &[usize], k: usize) -> Result<RadiusHistogram> {
    let radii: Vec<u64> = query_ids
        .par_iter()
        .map(|&id| {
            engine
                .query(engine.dataset.point(id), k, &VirtualRehashing)
                .map(|r| r.terminal_radius())
        })
        .collect::<Result<_>>()?;
    Ok(RadiusHistogram::from_radii(radii))
}
