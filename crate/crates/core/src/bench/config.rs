//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored; lists are comma separated.
//! Every key can also be set programmatically with [`BenchConfig::set`],
//! which is how command-line overrides are applied on top of a file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bench::metrics::{DATA_READ_FACTOR, SEEK_MS};
use crate::bench::MixtureSpec;
use crate::error::{Error, IoContext, Result};
use crate::index::DEFAULT_PAGE_SIZE;
use crate::lsh::OffsetRange;
use crate::model::{PredictorKind, DEFAULT_TRAINING_KS};
use crate::search::{NN_IVR, NN_LAMBDA, OVR, SAMPLED};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub c: f64,
    pub w: f64,
    pub delta: f64,
    pub ks: Vec<usize>,
    pub lambda: f64,
    /// Regression samples to collect (split evenly across `ks`).
    pub training_size: usize,
    /// Queries per `k` used to build the initial-radius histograms.
    pub sample_queries: usize,
    pub page_size: usize,
    pub seed: u64,
    pub strategies: Vec<String>,
    /// Evaluation queries per `(strategy, k)`.
    pub queries: usize,
    /// Query worker threads; 0 means one per core.
    pub workers: usize,
    pub nn_ivr_round_pow2: bool,
    pub offset_range: OffsetRange,
    pub predictor: PredictorKind,
    pub cv_folds: usize,
    pub exclude_self: bool,
    pub min_radius: u64,
    pub seek_ms: f64,
    pub data_read_factor: f64,
    /// `.fvecs` input; the synthetic mixture is used when unset.
    pub dataset: Option<PathBuf>,
    pub synthetic: MixtureSpec,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            c: 2.0,
            w: 2.184,
            delta: 0.1,
            ks: DEFAULT_TRAINING_KS.to_vec(),
            lambda: 0.10,
            training_size: 10_000,
            sample_queries: 100,
            page_size: DEFAULT_PAGE_SIZE,
            seed: 1,
            strategies: [OVR, SAMPLED, NN_IVR, NN_LAMBDA].iter().map(|s| s.to_string()).collect(),
            queries: 50,
            workers: 0,
            nn_ivr_round_pow2: false,
            offset_range: OffsetRange::WidthSquared,
            predictor: PredictorKind::Mlp,
            cv_folds: 10,
            exclude_self: false,
            min_radius: 1,
            seek_ms: SEEK_MS,
            data_read_factor: DATA_READ_FACTOR,
            dataset: None,
            synthetic: MixtureSpec::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Param(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Param(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl BenchConfig {
    pub const KEYS: &'static [&'static str] = &[
        "c",
        "w",
        "delta",
        "ks",
        "lambda",
        "training_size",
        "sample_queries",
        "page_size",
        "seed",
        "strategies",
        "queries",
        "workers",
        "nn_ivr_round_pow2",
        "offset_range",
        "predictor",
        "cv_folds",
        "exclude_self",
        "min_radius",
        "seek_ms",
        "data_read_factor",
        "dataset",
        "synthetic_n",
        "synthetic_d",
        "clusters",
        "center_range",
        "sigma_min",
        "sigma_max",
    ];

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).io_context(|| format!("reading config {}", path.display()))?;
        let mut config = Self::default();
        config.apply_text(&text).map_err(|e| match e {
            Error::Param(msg) => Error::Param(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Param(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Param(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "c" => self.c = parse(key, value)?,
            "w" => self.w = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "ks" => self.ks = parse_list(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "training_size" => self.training_size = parse(key, value)?,
            "sample_queries" => self.sample_queries = parse(key, value)?,
            "page_size" => self.page_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "strategies" => self.strategies = parse_list(key, value)?,
            "queries" => self.queries = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "nn_ivr_round_pow2" => self.nn_ivr_round_pow2 = parse_bool(key, value)?,
            "offset_range" => self.offset_range = value.parse()?,
            "predictor" => self.predictor = value.parse()?,
            "cv_folds" => self.cv_folds = parse(key, value)?,
            "exclude_self" => self.exclude_self = parse_bool(key, value)?,
            "min_radius" => self.min_radius = parse(key, value)?,
            "seek_ms" => self.seek_ms = parse(key, value)?,
            "data_read_factor" => self.data_read_factor = parse(key, value)?,
            "dataset" => self.dataset = (!value.is_empty()).then(|| PathBuf::from(value)),
            "synthetic_n" => self.synthetic.n = parse(key, value)?,
            "synthetic_d" => self.synthetic.d = parse(key, value)?,
            "clusters" => self.synthetic.clusters = parse(key, value)?,
            "center_range" => self.synthetic.center_range = parse(key, value)?,
            "sigma_min" => self.synthetic.sigma_min = parse(key, value)?,
            "sigma_max" => self.synthetic.sigma_max = parse(key, value)?,
            _ => {
                return Err(Error::Param(format!(
                    "unknown key {key:?} (known: {})",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::Param("ks must list positive integers".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Param("no strategies configured".into()));
        }
        if self.queries == 0 {
            return Err(Error::Param("queries must be positive".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Param(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }

    /// The configuration as a file [`load`](Self::load) reads back.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("c", self.c.to_string());
        put("w", self.w.to_string());
        put("delta", self.delta.to_string());
        put("ks", join(&self.ks));
        put("lambda", self.lambda.to_string());
        put("training_size", self.training_size.to_string());
        put("sample_queries", self.sample_queries.to_string());
        put("page_size", self.page_size.to_string());
        put("seed", self.seed.to_string());
        put("strategies", join(&self.strategies));
        put("queries", self.queries.to_string());
        put("workers", self.workers.to_string());
        put("nn_ivr_round_pow2", self.nn_ivr_round_pow2.to_string());
        put("offset_range", self.offset_range.to_string());
        put("predictor", self.predictor.to_string());
        put("cv_folds", self.cv_folds.to_string());
        put("exclude_self", self.exclude_self.to_string());
        put("min_radius", self.min_radius.to_string());
        put("seek_ms", self.seek_ms.to_string());
        put("data_read_factor", self.data_read_factor.to_string());
        put(
            "dataset",
            self.dataset.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        put("synthetic_n", self.synthetic.n.to_string());
        put("synthetic_d", self.synthetic.d.to_string());
        put("clusters", self.synthetic.clusters.to_string());
        put("center_range", self.synthetic.center_range.to_string());
        put("sigma_min", self.synthetic.sigma_min.to_string());
        put("sigma_max", self.synthetic.sigma_max.to_string());
        out
    }

    /// Synthetic generator settings with the run seed threaded through.
    pub fn mixture(&self) -> MixtureSpec {
        MixtureSpec {
            seed: self.seed,
            ..self.synthetic.clone()
        }
    }
}
