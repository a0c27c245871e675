//! Regression samples: a query's bucket signature and `k`, labelled with the
//! smallest terminating radius.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSample {
    pub buckets: Vec<i64>,
    pub k: usize,
    pub target: u64,
}

impl TrainingSample {
    /// `m` bucket ids followed by `k`.
    pub fn features(&self) -> impl Iterator<Item = f64> + '_ {
        self.buckets
            .iter()
            .map(|&b| b as f64)
            .chain(std::iter::once(self.k as f64))
    }

    pub fn feature_len(&self) -> usize {
        self.buckets.len() + 1
    }
}

/// CSV with columns `b0..b{m-1},k,r_act`.
pub fn write_samples_csv(path: &Path, samples: &[TrainingSample]) -> Result<()> {
    let m = samples.first().map_or(0, |s| s.buckets.len());
    let mut out = String::new();
    for i in 0..m {
        let _ = write!(out, "b{i},");
    }
    out.push_str("k,r_act\n");
    for s in samples {
        if s.buckets.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: s.buckets.len(),
            });
        }
        for b in &s.buckets {
            let _ = write!(out, "{b},");
        }
        let _ = writeln!(out, "{},{}", s.k, s.target);
    }
    std::fs::write(path, out).io_context(|| format!("writing {}", path.display()))
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<TrainingSample>> {
    let text = std::fs::read_to_string(path).io_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        offset: line as u64,
        msg,
    };
    let (_, header) = lines.next().ok_or_else(|| bad(0, "empty file".into()))?;
    let columns = header.split(',').count();
    if columns < 2 || !header.ends_with("k,r_act") {
        return Err(bad(0, format!("unexpected header {header:?}")));
    }
    let mut samples = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(bad(lineno, format!("{} fields, expected {columns}", fields.len())));
        }
        let parse_err = |f: &str| bad(lineno, format!("not an integer: {f:?}"));
        let buckets = fields[..columns - 2]
            .iter()
            .map(|f| f.trim().parse::<i64>().map_err(|_| parse_err(f)))
            .collect::<Result<Vec<_>>>()?;
        let k = fields[columns - 2].trim().parse().map_err(|_| parse_err(fields[columns - 2]))?;
        let target = fields[columns - 1].trim().parse().map_err(|_| parse_err(fields[columns - 1]))?;
        samples.push(TrainingSample { buckets, k, target });
    }
    Ok(samples)
}
