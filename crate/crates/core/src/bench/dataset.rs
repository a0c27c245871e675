//! In-memory point sets, `.fvecs` / `.ivecs` I/O and the synthetic
//! Gaussian-mixture generator.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use crate::error::{Error, IoContext, Result};
use crate::lsh::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Fvecs,
    Synthetic,
    Memory,
}

/// `n` points of dimension `d`, stored row-major. Point ids are `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    data: Vec<f32>,
    pub source: SourceFormat,
}

impl Dataset {
    pub fn from_flat(d: usize, data: Vec<f32>, source: SourceFormat) -> Result<Self> {
        if d == 0 {
            return Err(Error::Input("dimensionality must be positive".into()));
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::Input(format!(
                "{} values do not split into rows of {d}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite coordinate in point {} (dimension {})",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { d, data, source })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::Input(format!(
                "point {i} has {} coordinates, expected {d}",
                r.len()
            )));
        }
        Self::from_flat(d, rows.concat(), SourceFormat::Memory)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn point(&self, id: usize) -> &[f32] {
        &self.data[id * self.d..(id + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.d)
    }

    /// Largest absolute coordinate, the `t` of the b-interval bound.
    pub fn max_abs_coord(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs() as f64))
    }

    pub fn load_fvecs(path: &Path) -> Result<Self> {
        let (d, data) = read_vecs(path, f32::from_le_bytes)?;
        let d = d.ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            msg: "file holds no vectors".into(),
        })?;
        Self::from_flat(d, data, SourceFormat::Fvecs)
    }

    pub fn write_fvecs(&self, path: &Path) -> Result<()> {
        let rows: Vec<&[f32]> = self.points().collect();
        write_vecs(path, &rows, |out, v| out.write_f32::<LittleEndian>(*v))
    }
}

#[inline]
pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let diff = x as f64 - y as f64;
            diff * diff
        })
        .sum::<f64>()
        .sqrt()
}

/// Reads `.ivecs` records (e.g. ground-truth id tables).
pub fn load_ivecs(path: &Path) -> Result<Vec<Vec<i32>>> {
    let (d, flat) = read_vecs(path, i32::from_le_bytes)?;
    Ok(match d {
        Some(d) if d > 0 => flat.chunks_exact(d).map(<[i32]>::to_vec).collect(),
        _ => Vec::new(),
    })
}

pub fn write_ivecs(path: &Path, rows: &[Vec<i32>]) -> Result<()> {
    let rows: Vec<&[i32]> = rows.iter().map(Vec::as_slice).collect();
    write_vecs(path, &rows, |out, v| out.write_i32::<LittleEndian>(*v))
}

/// Shared framing: each record is a little-endian `i32` dimension followed by
/// that many 4-byte values. All records must agree on the dimension.
fn read_vecs<T>(path: &Path, decode: impl Fn([u8; 4]) -> T) -> Result<(Option<usize>, Vec<T>)> {
    let file = File::open(path).io_context(|| format!("opening {}", path.display()))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .io_context(|| format!("reading {}", path.display()))?;
    let fmt = |offset: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        msg,
    };

    let mut dim: Option<usize> = None;
    let mut out = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let header: [u8; 4] = bytes
            .get(pos..pos + 4)
            .and_then(|s| s.try_into().ok())
            .ok_or_else(|| fmt(pos, "truncated record header".into()))?;
        let d = i32::from_le_bytes(header);
        if d <= 0 {
            return Err(fmt(pos, format!("invalid dimension {d}")));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(fmt(pos, format!("dimension {d} differs from first record's {expected}")));
            }
            Some(_) => {}
        }
        let body = pos + 4;
        let end = body + 4 * d;
        if end > bytes.len() {
            return Err(fmt(pos, format!("truncated record: needs {} bytes, {} left", 4 + 4 * d, bytes.len() - pos)));
        }
        out.extend(
            bytes[body..end]
                .chunks_exact(4)
                .map(|c| decode(c.try_into().expect("chunk of 4"))),
        );
        pos = end;
    }
    Ok((dim, out))
}

fn write_vecs<T>(
    path: &Path,
    rows: &[&[T]],
    put: impl Fn(&mut BufWriter<File>, &T) -> std::io::Result<()>,
) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    let mut out = BufWriter::new(File::create(path).io_context(ctx)?);
    for row in rows {
        out.write_i32::<LittleEndian>(row.len() as i32).io_context(ctx)?;
        for v in row.iter() {
            put(&mut out, v).io_context(ctx)?;
        }
    }
    out.flush().io_context(ctx)
}

/// Gaussian mixture with per-cluster spread, so projected radii vary with
/// the query's location.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub n: usize,
    pub d: usize,
    pub clusters: usize,
    /// Cluster centers are uniform in `[-center_range, center_range]^d`.
    pub center_range: f64,
    /// Per-cluster standard deviation, log-uniform in this interval.
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub seed: u64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            n: 10_000,
            d: 32,
            clusters: 20,
            center_range: 1000.0,
            sigma_min: 80.0,
            sigma_max: 160.0,
            seed: 1,
        }
    }
}

impl MixtureSpec {
    pub fn generate(&self) -> Result<Dataset> {
        if self.n == 0 || self.d == 0 || self.clusters == 0 {
            return Err(Error::Param("mixture needs n, d and clusters > 0".into()));
        }
        if !(self.sigma_min > 0.0 && self.sigma_max >= self.sigma_min) {
            return Err(Error::Param(format!(
                "bad sigma range [{}, {}]",
                self.sigma_min, self.sigma_max
            )));
        }
        let mut rng = SplitMix64::derive(self.seed, 0x4D49_5854);
        let centers: Vec<Vec<f64>> = (0..self.clusters)
            .map(|_| {
                (0..self.d)
                    .map(|_| rng.uniform(-self.center_range, self.center_range))
                    .collect()
            })
            .collect();
        let (lo, hi) = (self.sigma_min.ln(), self.sigma_max.ln());
        let sigmas: Vec<f64> = (0..self.clusters)
            .map(|_| rng.uniform(lo, hi).exp())
            .collect();

        let mut data = Vec::with_capacity(self.n * self.d);
        for _ in 0..self.n {
            let j = rng.below(self.clusters as u64) as usize;
            data.extend(
                centers[j]
                    .iter()
                    .map(|&mu| (mu + sigmas[j] * rng.normal()) as f32),
            );
        }
        Dataset::from_flat(self.d, data, SourceFormat::Synthetic)
    }
}
