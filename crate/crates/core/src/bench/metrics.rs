//! The modeled query cost and the accuracy ratio.

use crate::error::{Error, Result};
use crate::index::CostCounters;
use crate::search::Neighbor;

/// Average cost of one random seek, in milliseconds.
pub const SEEK_MS: f64 = 8.5;
/// Multiplier applied to megabytes read. The formula uses the number as
/// printed, so its effective unit is ms per MB.
pub const DATA_READ_FACTOR: f64 = 0.156;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub seek_ms: f64,
    pub data_read_factor: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            seek_ms: SEEK_MS,
            data_read_factor: DATA_READ_FACTOR,
        }
    }
}

impl CostModel {
    /// `seeks·seek_ms + MB·data_read_factor + alg_ms + fp_rem_ms`.
    pub fn qpt_parts(&self, seeks: f64, data_read_mb: f64, alg_ms: f64, fp_rem_ms: f64) -> f64 {
        seeks * self.seek_ms + data_read_mb * self.data_read_factor + alg_ms + fp_rem_ms
    }

    /// The I/O share of [`qpt`](Self::qpt): a pure function of the seek and
    /// byte counters.
    pub fn io_ms(&self, counters: &CostCounters) -> f64 {
        self.qpt_parts(counters.disk_seeks as f64, counters.data_read_mb(), 0.0, 0.0)
    }

    pub fn qpt(&self, counters: &CostCounters) -> f64 {
        self.qpt_parts(
            counters.disk_seeks as f64,
            counters.data_read_mb(),
            counters.alg_time_ms(),
            counters.fp_rem_time_ms(),
        )
    }
}

/// Query processing time under the default constants.
pub fn qpt(counters: &CostCounters) -> f64 {
    CostModel::default().qpt(counters)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyRatio {
    pub ratio: f64,
    /// Ranks whose true distance is 0 but whose returned distance is not.
    pub excluded: usize,
}

/// Mean over ranks of returned distance ÷ true distance.
///
/// A rank with true distance 0 counts as 1 if the returned distance is also
/// 0 and is otherwise left out of the mean (and counted in `excluded`).
pub fn accuracy_ratio(results: &[Neighbor], truth: &[Neighbor]) -> Result<AccuracyRatio> {
    if results.len() != truth.len() {
        return Err(Error::Input(format!(
            "{} results against {} ground-truth neighbours",
            results.len(),
            truth.len()
        )));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for (r, t) in results.iter().zip(truth) {
        if t.distance > 0.0 {
            sum += r.distance / t.distance;
            used += 1;
        } else if r.distance == 0.0 {
            sum += 1.0;
            used += 1;
        } else {
            excluded += 1;
        }
    }
    let ratio = if used == 0 { 1.0 } else { sum / used as f64 };
    Ok(AccuracyRatio { ratio, excluded })
}
