//! The index-time steps shared by the command line and the benchmarks:
//! load or generate data, build the index, sample initial radii, collect
//! regression samples and train the predictor.
//!
//! Artifacts live under one directory:
//! `index/` (the disk index), `i2r.tsv`, `samples.csv`, `predictor.bin`.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::bench::{BenchConfig, Dataset};
use crate::error::{Error, Result};
use crate::index::{build_index, DiskIndex};
use crate::lsh::{offset_upper_bound, HashFamily, LshParams, SplitMix64};
use crate::model::{
    collect_samples, sample_i2r, BucketMatrix, I2rTable, RadiusHistogram, RadiusOracle, RadiusPredictor,
    TrainConfig, TrainingSample,
};
use crate::search::{SearchEngine, StrategyResources};

pub const INDEX_DIR: &str = "index";
pub const I2R_FILE: &str = "i2r.tsv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const PREDICTOR_FILE: &str = "predictor.bin";

pub fn index_dir(root: &Path) -> PathBuf {
    root.join(INDEX_DIR)
}

pub fn load_dataset(config: &BenchConfig) -> Result<Dataset> {
    match &config.dataset {
        Some(path) => Dataset::load_fvecs(path),
        None => config.mixture().generate(),
    }
}

/// Disjoint evaluation and training query ids drawn from one seeded
/// permutation. Training gets whatever remains when `n` is small.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySplit {
    pub evaluation: Vec<usize>,
    pub training: Vec<usize>,
}

impl QuerySplit {
    pub fn new(n: usize, evaluation: usize, training: usize, seed: u64) -> Self {
        let perm = SplitMix64::derive(seed, 0x5350_4C54).sample_indices(n, n);
        let e = evaluation.min(n);
        let t = training.min(n - e);
        Self {
            evaluation: perm[..e].to_vec(),
            training: perm[e..e + t].to_vec(),
        }
    }

    pub fn for_config(config: &BenchConfig, n: usize) -> Self {
        let per_k = config.training_size.div_ceil(config.ks.len().max(1));
        Self::new(n, config.queries, per_k.max(config.sample_queries), config.seed)
    }
}

/// An opened index with its family and constants.
#[derive(Debug)]
pub struct IndexBundle {
    pub index: DiskIndex,
    pub family: HashFamily,
    pub params: LshParams,
}

impl IndexBundle {
    pub fn open(root: &Path) -> Result<Self> {
        let index = DiskIndex::open(&index_dir(root))?;
        let family = index.load_family()?;
        let params = index.params()?;
        Ok(Self { index, family, params })
    }

    pub fn engine<'a>(&'a self, dataset: &'a Dataset) -> Result<SearchEngine<'a>> {
        SearchEngine::new(&self.index, &self.family, &self.params, dataset)
    }
}

/// Hashes `dataset` and writes the index under `root/index`.
pub fn build(root: &Path, dataset: &Dataset, config: &BenchConfig) -> Result<(IndexBundle, Duration)> {
    let started = Instant::now();
    let params = LshParams::derive(dataset.len(), config.c, config.w, config.delta)?;
    let upper = offset_upper_bound(dataset.max_abs_coord(), dataset.dim(), config.c, config.w, config.offset_range);
    let family = HashFamily::generate(dataset.dim(), params.m, config.w, upper, config.seed)?;
    let dir = index_dir(root);
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
        context: format!("creating {}", dir.display()),
        source,
    })?;
    let index = build_index(&dir, dataset, &family, &params, config.page_size)?;
    Ok((IndexBundle { index, family, params }, started.elapsed()))
}

pub struct SampledRadii {
    pub table: I2rTable,
    pub histograms: std::collections::BTreeMap<usize, RadiusHistogram>,
}

/// oVR terminal-radius histograms over the first `sample_queries` training
/// queries, one per configured `k`.
pub fn sample_radii(engine: &SearchEngine<'_>, split: &QuerySplit, config: &BenchConfig) -> Result<SampledRadii> {
    let ids = &split.training[..config.sample_queries.min(split.training.len())];
    let (table, histograms) = sample_i2r(engine, ids, &config.ks)?;
    Ok(SampledRadii { table, histograms })
}

/// Ground-truth radius for every training query and configured `k`.
pub fn training_samples(
    bundle: &IndexBundle,
    dataset: &Dataset,
    split: &QuerySplit,
    config: &BenchConfig,
) -> Result<Vec<TrainingSample>> {
    let matrix = BucketMatrix::from_index(&bundle.index)?;
    let oracle = RadiusOracle {
        matrix: &matrix,
        family: &bundle.family,
        params: &bundle.params,
        dataset,
        min_radius: config.min_radius,
    };
    let per_k = config.training_size.div_ceil(config.ks.len());
    let ids = &split.training[..per_k.min(split.training.len())];
    collect_samples(&oracle, dataset, ids, &config.ks)
}

pub fn train_config(config: &BenchConfig, max_radius: u64) -> TrainConfig {
    let mut train = TrainConfig {
        kind: config.predictor,
        max_radius,
        ..TrainConfig::default()
    };
    train.mlp.seed = config.seed;
    train
}

/// Loads whichever trained artifacts exist under `root`.
pub fn load_resources(root: &Path, config: &BenchConfig) -> Result<StrategyResources> {
    let i2r = root.join(I2R_FILE);
    let predictor = root.join(PREDICTOR_FILE);
    Ok(StrategyResources {
        i2r_table: i2r.exists().then(|| I2rTable::load(&i2r)).transpose()?,
        predictor: predictor
            .exists()
            .then(|| RadiusPredictor::load(&predictor).map(Arc::new))
            .transpose()?,
        lambda: config.lambda,
        nn_ivr_round_pow2: config.nn_ivr_round_pow2,
    })
}

/// Wall-clock cost of each index-time step.
#[derive(Debug, Clone, Copy, Default)]
pub struct PrepareTimings {
    pub build: Duration,
    pub sampling: Duration,
    pub ground_truth: Duration,
    pub training: Duration,
}

impl PrepareTimings {
    /// Radius sampling plus ground truth plus training, over build time.
    pub fn overhead_ratio(&self) -> f64 {
        (self.sampling + self.ground_truth + self.training).as_secs_f64() / self.build.as_secs_f64()
    }
}

pub struct Prepared {
    pub bundle: IndexBundle,
    pub split: QuerySplit,
    pub resources: StrategyResources,
    pub samples: Vec<TrainingSample>,
    pub timings: PrepareTimings,
}

/// Every index-time step in order, writing all artifacts under `root`.
pub fn prepare(root: &Path, dataset: &Dataset, config: &BenchConfig) -> Result<Prepared> {
    config.validate()?;
    let (bundle, build_time) = build(root, dataset, config)?;
    let split = QuerySplit::for_config(config, dataset.len());
    let engine = bundle.engine(dataset)?;

    let started = Instant::now();
    let sampled = sample_radii(&engine, &split, config)?;
    let sampling = started.elapsed();
    sampled.table.save(&root.join(I2R_FILE))?;

    let started = Instant::now();
    let samples = training_samples(&bundle, dataset, &split, config)?;
    let ground_truth = started.elapsed();

    let started = Instant::now();
    let predictor = RadiusPredictor::train(&samples, &train_config(config, engine.max_radius))?;
    let training = started.elapsed();
    predictor.save(&root.join(PREDICTOR_FILE))?;

    let resources = StrategyResources {
        i2r_table: Some(sampled.table),
        predictor: Some(Arc::new(predictor)),
        lambda: config.lambda,
        nn_ivr_round_pow2: config.nn_ivr_round_pow2,
    };
    Ok(Prepared {
        bundle,
        split,
        resources,
        samples,
        timings: PrepareTimings {
            build: build_time,
            sampling,
            ground_truth,
            training,
        },
    })
}
