//! Random-projection hash functions, level hashing and query signatures.
//!
//! Family file layout (all little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"LSHFAMLY"
//! 8       4     version (u32, currently 1)
//! 12      4     d (u32)
//! 16      4     m (u32)
//! 20      8     w (f64)
//! 28      8     seed (u64)
//! 36      8     upper bound of the b-interval (f64)
//! 44      ...   m records of { a: d × f64, b: f64 }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, IoContext, Result};
use crate::lsh::rng::SplitMix64;

const FAMILY_MAGIC: &[u8; 8] = b"LSHFAMLY";
const FAMILY_VERSION: u32 = 1;
const FAMILY_HEADER_BYTES: u64 = 44;

/// Width multiplier of the b-interval `[0, c^⌈log_c(t·d)⌉ · w^p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffsetRange {
    /// `p = 2`.
    #[default]
    WidthSquared,
    /// `p = 1`.
    Width,
}

impl std::str::FromStr for OffsetRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w2" | "width-squared" => Ok(Self::WidthSquared),
            "w" | "width" => Ok(Self::Width),
            other => Err(Error::Param(format!("unknown b-interval mode {other:?} (w2 | w)"))),
        }
    }
}

impl std::fmt::Display for OffsetRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::WidthSquared => "w2",
            Self::Width => "w",
        })
    }
}

/// Smallest `e` with `c^e ≥ t·d`, i.e. `⌈log_c(t·d)⌉`, clamped at 0.
pub fn domain_exponent(max_abs_coord: f64, d: usize, c: f64) -> u32 {
    let target = max_abs_coord * d as f64;
    let mut e = 0u32;
    let mut pow = 1.0f64;
    while pow < target && e < 1024 {
        pow *= c;
        e += 1;
    }
    e
}

/// `c^⌈log_c(t·d)⌉`: the largest level radius the family is built for.
pub fn domain_radius(max_abs_coord: f64, d: usize, c: f64) -> f64 {
    c.powi(domain_exponent(max_abs_coord, d, c) as i32)
}

pub fn offset_upper_bound(max_abs_coord: f64, d: usize, c: f64, w: f64, range: OffsetRange) -> f64 {
    let scale = domain_radius(max_abs_coord, d, c);
    match range {
        OffsetRange::WidthSquared => scale * w * w,
        OffsetRange::Width => scale * w,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashFunction {
    pub a: Vec<f64>,
    pub b: f64,
    pub w: f64,
}

impl HashFunction {
    /// `⌊(a·x + b) / w⌋`, floored toward −∞.
    #[inline]
    pub fn hash(&self, coords: &[f32]) -> i64 {
        debug_assert_eq!(coords.len(), self.a.len());
        let dot: f64 = self
            .a
            .iter()
            .zip(coords)
            .map(|(a, &x)| a * x as f64)
            .sum();
        ((dot + self.b) / self.w).floor() as i64
    }

    pub fn try_hash(&self, coords: &[f32]) -> Result<i64> {
        if coords.len() != self.a.len() {
            return Err(Error::Dimension {
                expected: self.a.len(),
                got: coords.len(),
            });
        }
        Ok(self.hash(coords))
    }
}

/// Level-`R` bucket: `⌊bucket / R⌋` with mathematical floor.
#[inline]
pub fn hash_level(bucket: i64, radius: i64) -> i64 {
    assert!(radius >= 1, "level radius must be >= 1");
    bucket.div_euclid(radius)
}

/// Bucket positions of one point across all projections.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature(pub Vec<i64>);

impl Signature {
    pub fn buckets(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashFamily {
    pub functions: Vec<HashFunction>,
    pub seed: u64,
    pub d: usize,
    pub w: f64,
    pub offset_upper: f64,
}

impl HashFamily {
    /// Draws `m` functions with standard-normal `a` and `b ~ U[0, offset_upper)`.
    pub fn generate(d: usize, m: usize, w: f64, offset_upper: f64, seed: u64) -> Result<Self> {
        if d == 0 || m == 0 {
            return Err(Error::Param(format!("family needs d > 0 and m > 0 (d={d}, m={m})")));
        }
        if !(w > 0.0) || !(offset_upper > 0.0) {
            return Err(Error::Param(format!(
                "bucket width and offset range must be positive (w={w}, upper={offset_upper})"
            )));
        }
        let mut rng = SplitMix64::derive(seed, 0x4841_5348);
        let functions = (0..m)
            .map(|_| {
                let a = (0..d).map(|_| rng.normal()).collect();
                let b = rng.uniform(0.0, offset_upper);
                HashFunction { a, b, w }
            })
            .collect();
        Ok(Self {
            functions,
            seed,
            d,
            w,
            offset_upper,
        })
    }

    pub fn m(&self) -> usize {
        self.functions.len()
    }

    pub fn signature(&self, coords: &[f32]) -> Result<Signature> {
        if coords.len() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: coords.len(),
            });
        }
        Ok(Signature(self.functions.iter().map(|f| f.hash(coords)).collect()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ctx = || format!("writing hash family {}", path.display());
        let file = File::create(path).io_context(ctx)?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out).io_context(ctx)?;
        out.flush().io_context(ctx)
    }

    fn write_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        out.write_all(FAMILY_MAGIC)?;
        out.write_u32::<LittleEndian>(FAMILY_VERSION)?;
        out.write_u32::<LittleEndian>(self.d as u32)?;
        out.write_u32::<LittleEndian>(self.m() as u32)?;
        out.write_f64::<LittleEndian>(self.w)?;
        out.write_u64::<LittleEndian>(self.seed)?;
        out.write_f64::<LittleEndian>(self.offset_upper)?;
        for f in &self.functions {
            for &a in &f.a {
                out.write_f64::<LittleEndian>(a)?;
            }
            out.write_f64::<LittleEndian>(f.b)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).io_context(|| format!("opening hash family {}", path.display()))?;
        let len = file.metadata().map(|m| m.len()).unwrap_or(0);
        let mut input = BufReader::new(file);
        let fmt = |offset: u64, msg: &str| Error::Format {
            path: path.to_path_buf(),
            offset,
            msg: msg.to_string(),
        };

        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|_| fmt(0, "truncated header"))?;
        if &magic != FAMILY_MAGIC {
            return Err(fmt(0, "bad magic"));
        }
        let header = (|| -> std::io::Result<_> {
            let version = input.read_u32::<LittleEndian>()?;
            let d = input.read_u32::<LittleEndian>()? as usize;
            let m = input.read_u32::<LittleEndian>()? as usize;
            let w = input.read_f64::<LittleEndian>()?;
            let seed = input.read_u64::<LittleEndian>()?;
            let upper = input.read_f64::<LittleEndian>()?;
            Ok((version, d, m, w, seed, upper))
        })()
        .map_err(|_| fmt(8, "truncated header"))?;
        let (version, d, m, w, seed, offset_upper) = header;
        if version != FAMILY_VERSION {
            return Err(fmt(8, &format!("unsupported version {version}")));
        }
        let expected = FAMILY_HEADER_BYTES + (m as u64) * (d as u64 + 1) * 8;
        if len != expected {
            return Err(fmt(len.min(expected), &format!("expected {expected} bytes, found {len}")));
        }
        let mut functions = Vec::with_capacity(m);
        for _ in 0..m {
            let mut a = vec![0.0; d];
            input
                .read_f64_into::<LittleEndian>(&mut a)
                .io_context(|| format!("reading {}", path.display()))?;
            let b = input
                .read_f64::<LittleEndian>()
                .io_context(|| format!("reading {}", path.display()))?;
            functions.push(HashFunction { a, b, w });
        }
        Ok(Self {
            functions,
            seed,
            d,
            w,
            offset_upper,
        })
    }
}
