//! Exact k-nearest-neighbour ground truth.

use crate::bench::dataset::{euclidean, Dataset};
use crate::error::{Error, Result};
use crate::search::Neighbor;

/// Exact Euclidean `k` nearest points, ascending by distance then id.
pub fn brute_force_knn(q: &[f32], k: usize, dataset: &Dataset) -> Result<Vec<Neighbor>> {
    if q.len() != dataset.dim() {
        return Err(Error::Dimension {
            expected: dataset.dim(),
            got: q.len(),
        });
    }
    if k == 0 || k > dataset.len() {
        return Err(Error::Param(format!("k = {k} with {} points", dataset.len())));
    }
    let mut all: Vec<Neighbor> = dataset
        .points()
        .enumerate()
        .map(|(id, p)| Neighbor {
            id: id as u32,
            distance: euclidean(q, p),
        })
        .collect();
    let order = |a: &Neighbor, b: &Neighbor| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id));
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, order);
        all.truncate(k);
    }
    all.sort_by(order);
    Ok(all)
}
