//! Paged per-projection bucket files.
//!
//! Directory layout (all integers little-endian):
//!
//! * `meta.bin`: magic `b"LSHRIDX1"`, version `u32`, `n: u64`, `d: u32`,
//!   `m: u32`, `page_size: u32`, `c: f64`, `w: f64`, `delta: f64`,
//!   family seed `u64`, family file name (`u32` length + UTF-8).
//! * `family.bin`: the hash family (see [`crate::lsh::hash`]).
//! * `proj_<i>.pages`: entries `(bucket: i64, point_id: u32)` sorted by
//!   `(bucket, point_id)`, packed `⌊page_size / 12⌋` per page. Every page
//!   occupies exactly `page_size` bytes (zero padded) except the last.
//! * `proj_<i>.dir`: magic `b"LSHRDIR1"`, version `u32`, page count `u32`,
//!   then per page `first_bucket: i64`, `last_bucket: i64`, `offset: u64`,
//!   `entries: u32`.
//!
//! Page directories live in memory and their reads are not charged to the
//! cost counters. Every bucket-range read is.

mod counters;

pub use counters::{CostCounters, BYTES_PER_MB};

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::bench::Dataset;
use crate::error::{Error, IoContext, Result};
use crate::lsh::{HashFamily, LshParams};

pub const DEFAULT_PAGE_SIZE: usize = 4096;
pub const MIN_PAGE_SIZE: usize = 64;
pub const ENTRY_BYTES: usize = 12;

const META_MAGIC: &[u8; 8] = b"LSHRIDX1";
const DIR_MAGIC: &[u8; 8] = b"LSHRDIR1";
const LAYOUT_VERSION: u32 = 1;
const FAMILY_FILE: &str = "family.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageInfo {
    pub first_bucket: i64,
    pub last_bucket: i64,
    pub offset: u64,
    pub entries: u32,
}

/// What `meta.bin` records about the build.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMeta {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub page_size: usize,
    pub c: f64,
    pub w: f64,
    pub delta: f64,
    pub family_seed: u64,
    pub family_file: String,
}

#[derive(Debug)]
pub struct DiskIndex {
    dir: PathBuf,
    meta: IndexMeta,
    files: Vec<File>,
    directories: Vec<Vec<PageInfo>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexStats {
    pub file_count: usize,
    pub total_bytes: u64,
    pub page_bytes: u64,
    pub pages_per_projection: Vec<usize>,
}

fn pages_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("proj_{i}.pages"))
}

fn dir_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("proj_{i}.dir"))
}

/// Hashes every point of `dataset` under `family` and writes the index to `dir`.
pub fn build_index(
    dir: &Path,
    dataset: &Dataset,
    family: &HashFamily,
    params: &LshParams,
    page_size: usize,
) -> Result<DiskIndex> {
    let ids: Vec<u32> = (0..dataset.len() as u32).collect();
    build_index_with_ids(dir, dataset, &ids, family, params, page_size)
}

/// Like [`build_index`] with explicit point ids (`ids[row]` labels row `row`).
pub fn build_index_with_ids(
    dir: &Path,
    dataset: &Dataset,
    ids: &[u32],
    family: &HashFamily,
    params: &LshParams,
    page_size: usize,
) -> Result<DiskIndex> {
    if dataset.is_empty() {
        return Err(Error::Input("cannot index an empty dataset".into()));
    }
    if ids.len() != dataset.len() {
        return Err(Error::Input(format!(
            "{} ids for {} points",
            ids.len(),
            dataset.len()
        )));
    }
    let mut sorted_ids = ids.to_vec();
    sorted_ids.sort_unstable();
    if let Some(w) = sorted_ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Input(format!("duplicate point id {}", w[0])));
    }
    if page_size < MIN_PAGE_SIZE {
        return Err(Error::Param(format!(
            "page size {page_size} below minimum {MIN_PAGE_SIZE}"
        )));
    }
    if family.d != dataset.dim() {
        return Err(Error::Dimension {
            expected: family.d,
            got: dataset.dim(),
        });
    }
    if family.m() == 0 {
        return Err(Error::Param("hash family has no functions".into()));
    }

    fs::create_dir_all(dir).io_context(|| format!("creating index directory {}", dir.display()))?;
    family.save(&dir.join(FAMILY_FILE))?;

    let per_page = page_size / ENTRY_BYTES;
    let mut entries: Vec<(i64, u32)> = Vec::with_capacity(dataset.len());
    let mut files = Vec::with_capacity(family.m());
    let mut directories = Vec::with_capacity(family.m());
    for (i, f) in family.functions.iter().enumerate() {
        entries.clear();
        entries.extend(
            dataset
                .points()
                .zip(ids)
                .map(|(coords, &id)| (f.hash(coords), id)),
        );
        entries.sort_unstable();
        let directory = write_projection(dir, i, &entries, per_page, page_size)?;
        let path = pages_path(dir, i);
        files.push(File::open(&path).io_context(|| format!("reopening {}", path.display()))?);
        directories.push(directory);
    }

    let meta = IndexMeta {
        n: dataset.len(),
        d: dataset.dim(),
        m: family.m(),
        page_size,
        c: params.c,
        w: params.w,
        delta: params.delta,
        family_seed: family.seed,
        family_file: FAMILY_FILE.to_string(),
    };
    write_meta(dir, &meta)?;
    Ok(DiskIndex {
        dir: dir.to_path_buf(),
        meta,
        files,
        directories,
    })
}

fn write_projection(
    dir: &Path,
    i: usize,
    entries: &[(i64, u32)],
    per_page: usize,
    page_size: usize,
) -> Result<Vec<PageInfo>> {
    let path = pages_path(dir, i);
    let ctx = || format!("writing {}", path.display());
    let mut out = BufWriter::new(File::create(&path).io_context(ctx)?);
    let mut directory = Vec::with_capacity(entries.len().div_ceil(per_page));
    let page_count = entries.len().div_ceil(per_page);
    for (p, chunk) in entries.chunks(per_page).enumerate() {
        directory.push(PageInfo {
            first_bucket: chunk[0].0,
            last_bucket: chunk[chunk.len() - 1].0,
            offset: (p * page_size) as u64,
            entries: chunk.len() as u32,
        });
        for &(bucket, id) in chunk {
            out.write_i64::<LittleEndian>(bucket).io_context(ctx)?;
            out.write_u32::<LittleEndian>(id).io_context(ctx)?;
        }
        if p + 1 < page_count {
            let pad = page_size - chunk.len() * ENTRY_BYTES;
            out.write_all(&vec![0u8; pad]).io_context(ctx)?;
        }
    }
    out.flush().io_context(ctx)?;

    let dpath = dir_path(dir, i);
    let dctx = || format!("writing {}", dpath.display());
    let mut out = BufWriter::new(File::create(&dpath).io_context(dctx)?);
    out.write_all(DIR_MAGIC).io_context(dctx)?;
    out.write_u32::<LittleEndian>(LAYOUT_VERSION).io_context(dctx)?;
    out.write_u32::<LittleEndian>(directory.len() as u32).io_context(dctx)?;
    for page in &directory {
        out.write_i64::<LittleEndian>(page.first_bucket).io_context(dctx)?;
        out.write_i64::<LittleEndian>(page.last_bucket).io_context(dctx)?;
        out.write_u64::<LittleEndian>(page.offset).io_context(dctx)?;
        out.write_u32::<LittleEndian>(page.entries).io_context(dctx)?;
    }
    out.flush().io_context(dctx)?;
    Ok(directory)
}

fn write_meta(dir: &Path, meta: &IndexMeta) -> Result<()> {
    let path = dir.join("meta.bin");
    let ctx = || format!("writing {}", path.display());
    let mut out = BufWriter::new(File::create(&path).io_context(ctx)?);
    (|| -> std::io::Result<()> {
        out.write_all(META_MAGIC)?;
        out.write_u32::<LittleEndian>(LAYOUT_VERSION)?;
        out.write_u64::<LittleEndian>(meta.n as u64)?;
        out.write_u32::<LittleEndian>(meta.d as u32)?;
        out.write_u32::<LittleEndian>(meta.m as u32)?;
        out.write_u32::<LittleEndian>(meta.page_size as u32)?;
        out.write_f64::<LittleEndian>(meta.c)?;
        out.write_f64::<LittleEndian>(meta.w)?;
        out.write_f64::<LittleEndian>(meta.delta)?;
        out.write_u64::<LittleEndian>(meta.family_seed)?;
        out.write_u32::<LittleEndian>(meta.family_file.len() as u32)?;
        out.write_all(meta.family_file.as_bytes())?;
        out.flush()
    })()
    .io_context(ctx)
}

fn read_meta(dir: &Path) -> Result<IndexMeta> {
    let path = dir.join("meta.bin");
    let mut input = File::open(&path).io_context(|| format!("opening {}", path.display()))?;
    let fmt = |msg: &str| Error::Format {
        path: path.clone(),
        offset: 0,
        msg: msg.to_string(),
    };
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| fmt("truncated"))?;
    if &magic != META_MAGIC {
        return Err(fmt("bad magic"));
    }
    (|| -> std::io::Result<Result<IndexMeta>> {
        let version = input.read_u32::<LittleEndian>()?;
        if version != LAYOUT_VERSION {
            return Ok(Err(fmt(&format!("unsupported version {version}"))));
        }
        let n = input.read_u64::<LittleEndian>()? as usize;
        let d = input.read_u32::<LittleEndian>()? as usize;
        let m = input.read_u32::<LittleEndian>()? as usize;
        let page_size = input.read_u32::<LittleEndian>()? as usize;
        let c = input.read_f64::<LittleEndian>()?;
        let w = input.read_f64::<LittleEndian>()?;
        let delta = input.read_f64::<LittleEndian>()?;
        let family_seed = input.read_u64::<LittleEndian>()?;
        let len = input.read_u32::<LittleEndian>()? as usize;
        let mut name = vec![0u8; len];
        input.read_exact(&mut name)?;
        let family_file = match String::from_utf8(name) {
            Ok(s) => s,
            Err(_) => return Ok(Err(fmt("family file name is not UTF-8"))),
        };
        Ok(Ok(IndexMeta {
            n,
            d,
            m,
            page_size,
            c,
            w,
            delta,
            family_seed,
            family_file,
        }))
    })()
    .map_err(|_| fmt("truncated"))?
}

fn read_directory(path: &Path) -> Result<Vec<PageInfo>> {
    let mut input = File::open(path).io_context(|| format!("opening {}", path.display()))?;
    let fmt = |msg: &str| Error::Format {
        path: path.to_path_buf(),
        offset: 0,
        msg: msg.to_string(),
    };
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| fmt("truncated"))?;
    if &magic != DIR_MAGIC {
        return Err(fmt("bad magic"));
    }
    (|| -> std::io::Result<Vec<PageInfo>> {
        let _version = input.read_u32::<LittleEndian>()?;
        let count = input.read_u32::<LittleEndian>()? as usize;
        (0..count)
            .map(|_| {
                Ok(PageInfo {
                    first_bucket: input.read_i64::<LittleEndian>()?,
                    last_bucket: input.read_i64::<LittleEndian>()?,
                    offset: input.read_u64::<LittleEndian>()?,
                    entries: input.read_u32::<LittleEndian>()?,
                })
            })
            .collect()
    })()
    .map_err(|_| fmt("truncated page directory"))
}

impl DiskIndex {
    pub fn open(dir: &Path) -> Result<Self> {
        let meta = read_meta(dir)?;
        let mut files = Vec::with_capacity(meta.m);
        let mut directories = Vec::with_capacity(meta.m);
        for i in 0..meta.m {
            let path = pages_path(dir, i);
            files.push(File::open(&path).io_context(|| format!("opening {}", path.display()))?);
            directories.push(read_directory(&dir_path(dir, i))?);
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            meta,
            files,
            directories,
        })
    }

    pub fn load_family(&self) -> Result<HashFamily> {
        let family = HashFamily::load(&self.dir.join(&self.meta.family_file))?;
        if family.m() != self.meta.m || family.d != self.meta.d {
            return Err(Error::Input(format!(
                "family file shape ({} x {}) does not match index ({} x {})",
                family.m(),
                family.d,
                self.meta.m,
                self.meta.d
            )));
        }
        Ok(family)
    }

    /// Re-derives the collision-counting constants stored in the metadata.
    pub fn params(&self) -> Result<LshParams> {
        LshParams::derive(self.meta.n, self.meta.c, self.meta.w, self.meta.delta)
    }

    pub fn meta(&self) -> &IndexMeta {
        &self.meta
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn m(&self) -> usize {
        self.meta.m
    }

    pub fn len(&self) -> usize {
        self.meta.n
    }

    pub fn is_empty(&self) -> bool {
        self.meta.n == 0
    }

    pub fn page_size(&self) -> usize {
        self.meta.page_size
    }

    pub fn page_directory(&self, projection: usize) -> Result<&[PageInfo]> {
        self.directories
            .get(projection)
            .map(Vec::as_slice)
            .ok_or(Error::Range {
                projection,
                count: self.meta.m,
            })
    }

    /// Appends to `out` every point id whose bucket in `projection` lies in
    /// `[lo, hi]`. Charges one seek and `pages × page_size` bytes when at
    /// least one page overlaps the range; nothing otherwise.
    pub fn read_bucket_range_into(
        &self,
        projection: usize,
        lo: i64,
        hi: i64,
        counters: &mut CostCounters,
        out: &mut Vec<u32>,
    ) -> Result<()> {
        let directory = self.page_directory(projection)?;
        if lo > hi {
            return Ok(());
        }
        let start = directory.partition_point(|p| p.last_bucket < lo);
        let end = directory.partition_point(|p| p.first_bucket <= hi);
        if start >= end {
            return Ok(());
        }
        let first = &directory[start];
        let last = &directory[end - 1];
        let byte_len = (last.offset - first.offset) as usize + last.entries as usize * ENTRY_BYTES;
        let mut buf = vec![0u8; byte_len];
        self.files[projection]
            .read_exact_at(&mut buf, first.offset)
            .io_context(|| format!("reading projection {projection} pages {start}..{end}"))?;
        counters.disk_seeks += 1;
        counters.bytes_read += ((end - start) * self.meta.page_size) as u64;

        for page in &directory[start..end] {
            let base = (page.offset - first.offset) as usize;
            let body = &buf[base..base + page.entries as usize * ENTRY_BYTES];
            for entry in body.chunks_exact(ENTRY_BYTES) {
                let bucket = i64::from_le_bytes(entry[..8].try_into().expect("8 bytes"));
                if bucket < lo {
                    continue;
                }
                if bucket > hi {
                    break;
                }
                out.push(u32::from_le_bytes(entry[8..].try_into().expect("4 bytes")));
            }
        }
        Ok(())
    }

    pub fn read_bucket_range(
        &self,
        projection: usize,
        lo: i64,
        hi: i64,
        counters: &mut CostCounters,
    ) -> Result<Vec<u32>> {
        let mut out = Vec::new();
        self.read_bucket_range_into(projection, lo, hi, counters, &mut out)?;
        Ok(out)
    }

    /// Full scan of one projection file, uncharged. Used by offline tooling.
    pub fn scan_projection(&self, projection: usize) -> Result<Vec<(i64, u32)>> {
        let directory = self.page_directory(projection)?;
        let mut out = Vec::with_capacity(self.meta.n);
        for page in directory {
            let mut buf = vec![0u8; page.entries as usize * ENTRY_BYTES];
            self.files[projection]
                .read_exact_at(&mut buf, page.offset)
                .io_context(|| format!("scanning projection {projection}"))?;
            out.extend(buf.chunks_exact(ENTRY_BYTES).map(|e| {
                (
                    i64::from_le_bytes(e[..8].try_into().expect("8 bytes")),
                    u32::from_le_bytes(e[8..].try_into().expect("4 bytes")),
                )
            }));
        }
        Ok(out)
    }

    /// Point-major bucket matrix: `result[id * m + i]` is point `id`'s bucket
    /// in projection `i`. Requires dense ids `0..n`.
    pub fn bucket_matrix(&self) -> Result<Vec<i64>> {
        let (n, m) = (self.meta.n, self.meta.m);
        let mut matrix = vec![0i64; n * m];
        for i in 0..m {
            for (bucket, id) in self.scan_projection(i)? {
                let id = id as usize;
                if id >= n {
                    return Err(Error::Input(format!("point id {id} outside 0..{n}")));
                }
                matrix[id * m + i] = bucket;
            }
        }
        Ok(matrix)
    }

    pub fn stats(&self) -> Result<IndexStats> {
        let mut file_count = 0;
        let mut total_bytes = 0;
        let mut page_bytes = 0;
        for entry in fs::read_dir(&self.dir).io_context(|| format!("listing {}", self.dir.display()))? {
            let entry = entry.io_context(|| format!("listing {}", self.dir.display()))?;
            let meta = entry.metadata().io_context(|| format!("stat {}", entry.path().display()))?;
            if !meta.is_file() {
                continue;
            }
            file_count += 1;
            total_bytes += meta.len();
            if entry.path().extension().is_some_and(|e| e == "pages") {
                page_bytes += meta.len();
            }
        }
        Ok(IndexStats {
            file_count,
            total_bytes,
            page_bytes,
            pages_per_projection: self.directories.iter().map(Vec::len).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::MixtureSpec;

    fn small(n: usize, page_size: usize) -> (tempfile::TempDir, Dataset, HashFamily, DiskIndex) {
        let ds = MixtureSpec {
            n,
            d: 6,
            clusters: 2,
            center_range: 10.0,
            sigma_min: 1.0,
            sigma_max: 2.0,
            seed: 3,
        }
        .generate()
        .unwrap();
        let params = LshParams::derive(n.max(100), 2.0, 2.184, 0.1).unwrap();
        let family = HashFamily::generate(6, 3, 2.184, 40.0, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let index = build_index(dir.path(), &ds, &family, &params, page_size).unwrap();
        (dir, ds, family, index)
    }

    #[test]
    fn one_point_three_projections() {
        let (dir, _, _, index) = small(1, 64);
        for i in 0..3 {
            assert!(dir.path().join(format!("proj_{i}.pages")).exists());
            assert_eq!(index.scan_projection(i).unwrap().len(), 1);
        }
    }

    #[test]
    fn conservation_and_round_trip() {
        let (dir, ds, family, _) = small(500, 128);
        let index = DiskIndex::open(dir.path()).unwrap();
        assert_eq!(index.load_family().unwrap(), family);
        for (i, f) in family.functions.iter().enumerate() {
            let stored = index.scan_projection(i).unwrap();
            assert_eq!(stored.len(), ds.len());
            let mut expected: Vec<(i64, u32)> =
                ds.points().enumerate().map(|(id, p)| (f.hash(p), id as u32)).collect();
            expected.sort_unstable();
            assert_eq!(stored, expected);
            let total: u32 = index.page_directory(i).unwrap().iter().map(|p| p.entries).sum();
            assert_eq!(total as usize, ds.len());
        }
    }

    #[test]
    fn counter_contract() {
        let (_dir, _, _, index) = small(500, 64);
        // 64-byte pages hold 5 entries each.
        let directory = index.page_directory(0).unwrap().to_vec();
        assert!(directory.len() >= 4);

        let mut c = CostCounters::default();
        let below = directory[0].first_bucket - 10;
        assert!(index.read_bucket_range(0, below - 5, below, &mut c).unwrap().is_empty());
        assert_eq!(c, CostCounters::default());

        // A range strictly inside one page's span.
        let page = directory
            .iter()
            .enumerate()
            .find(|(k, p)| {
                p.first_bucket < p.last_bucket
                    && (*k == 0 || directory[k - 1].last_bucket < p.first_bucket)
                    && directory.get(k + 1).is_none_or(|q| q.first_bucket > p.last_bucket)
            })
            .map(|(_, p)| *p);
        if let Some(p) = page {
            let mut c = CostCounters::default();
            let ids = index.read_bucket_range(0, p.first_bucket, p.last_bucket, &mut c).unwrap();
            assert_eq!(ids.len(), p.entries as usize);
            assert_eq!((c.disk_seeks, c.bytes_read), (1, 64));
        }

        // Spanning exactly three consecutive pages.
        let (a, b) = (directory[1], directory[3]);
        if directory[0].last_bucket < a.first_bucket && b.last_bucket < directory[4.min(directory.len() - 1)].first_bucket {
            let mut c = CostCounters::default();
            index.read_bucket_range(0, a.first_bucket, b.last_bucket, &mut c).unwrap();
            assert_eq!((c.disk_seeks, c.bytes_read), (1, 3 * 64));
        }

        // Repeating a read doubles the counters.
        let mut once = CostCounters::default();
        index.read_bucket_range(1, -1000, 1000, &mut once).unwrap();
        let mut twice = CostCounters::default();
        index.read_bucket_range(1, -1000, 1000, &mut twice).unwrap();
        index.read_bucket_range(1, -1000, 1000, &mut twice).unwrap();
        assert_eq!(twice.disk_seeks, 2 * once.disk_seeks);
        assert_eq!(twice.bytes_read, 2 * once.bytes_read);
    }

    #[test]
    fn results_independent_of_page_size() {
        let (_d1, _, _, small_pages) = small(300, 64);
        let (_d2, _, _, big_pages) = small(300, 4096);
        for i in 0..3 {
            for (lo, hi) in [(-50, 50), (0, 3), (i64::MIN / 2, i64::MAX / 2)] {
                let mut c = CostCounters::default();
                let mut a = small_pages.read_bucket_range(i, lo, hi, &mut c).unwrap();
                let mut b = big_pages.read_bucket_range(i, lo, hi, &mut c).unwrap();
                a.sort_unstable();
                b.sort_unstable();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn errors() {
        let (_dir, ds, family, index) = small(20, 64);
        let mut c = CostCounters::default();
        assert!(matches!(
            index.read_bucket_range(3, 0, 1, &mut c),
            Err(Error::Range { projection: 3, count: 3 })
        ));
        let params = LshParams::derive(100, 2.0, 2.184, 0.1).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        assert!(build_index(tmp.path(), &ds, &family, &params, 32).is_err());
        let ids = vec![0u32; ds.len()];
        assert!(matches!(
            build_index_with_ids(tmp.path(), &ds, &ids, &family, &params, 64),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn stats_match_disk() {
        let (dir, _, _, index) = small(400, 256);
        let stats = index.stats().unwrap();
        let on_disk: u64 = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().metadata().unwrap().len())
            .sum();
        assert_eq!(stats.total_bytes, on_disk);
        assert_eq!(stats.file_count, 2 + 2 * 3);
        assert_eq!(stats.pages_per_projection, vec![400usize.div_ceil(256 / 12); 3]);
    }
}
