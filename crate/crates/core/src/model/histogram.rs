//! Terminal-radius histograms and initial-radius selection.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, IoContext, Result};

/// Terminal radius → number of sampled queries that stopped there.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RadiusHistogram {
    bins: BTreeMap<u64, usize>,
}

impl RadiusHistogram {
    pub fn from_radii(radii: impl IntoIterator<Item = u64>) -> Self {
        let mut hist = Self::default();
        for r in radii {
            hist.add(r);
        }
        hist
    }

    pub fn add(&mut self, radius: u64) {
        *self.bins.entry(radius).or_default() += 1;
    }

    pub fn bins(&self) -> &BTreeMap<u64, usize> {
        &self.bins
    }

    pub fn total(&self) -> usize {
        self.bins.values().sum()
    }

    /// Most frequent radius; ties go to the smaller radius.
    pub fn mode(&self) -> Option<u64> {
        let max = *self.bins.values().max()?;
        self.bins.iter().find(|(_, &n)| n == max).map(|(&r, _)| r)
    }
}

/// The radius one step before the histogram's mode in the `1, c, c², …`
/// sequence. A mode at radius 1 has no predecessor and yields 1.
pub fn select_i2r(hist: &RadiusHistogram, c: f64) -> Result<u64> {
    let mode = hist
        .mode()
        .ok_or_else(|| Error::Param("cannot select an initial radius from an empty histogram".into()))?;
    let mut prev = 1u64;
    let mut term = 1.0f64;
    loop {
        let r = term.ceil() as u64;
        if r >= mode {
            return Ok(prev);
        }
        prev = r;
        term *= c;
    }
}

/// Sampled initial radius per `k`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct I2rTable {
    entries: BTreeMap<usize, u64>,
}

impl I2rTable {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u64)>) -> Self {
        Self {
            entries: pairs.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, k: usize, i2r: u64) {
        self.entries.insert(k, i2r);
    }

    pub fn entries(&self) -> &BTreeMap<usize, u64> {
        &self.entries
    }

    /// Exact `k` if sampled, else the smallest sampled `k` above it, else the
    /// largest sampled `k`.
    pub fn lookup(&self, k: usize) -> Option<u64> {
        self.entries
            .range(k..)
            .next()
            .or_else(|| self.entries.iter().next_back())
            .map(|(_, &r)| r)
    }

    /// Tab-separated `k<TAB>i2r` lines.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::from("# k\ti2r\n");
        for (k, r) in &self.entries {
            text.push_str(&format!("{k}\t{r}\n"));
        }
        std::fs::write(path, text).io_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).io_context(|| format!("reading {}", path.display()))?;
        let mut table = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Format {
                path: path.to_path_buf(),
                offset: lineno as u64,
                msg: format!("expected `k<TAB>i2r`, got {line:?}"),
            };
            let (k, r) = line.split_once('\t').ok_or_else(bad)?;
            table.insert(k.trim().parse().map_err(|_| bad())?, r.trim().parse().map_err(|_| bad())?);
        }
        Ok(table)
    }
}
