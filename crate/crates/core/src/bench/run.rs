//! Evaluation runs: every configured strategy and `k` over the evaluation
//! queries, averaged into one [`MetricRow`] each.
//!
//! The CSV starts with a `# schema:` line. Columns derived only from the
//! cost counters, radii and distances are deterministic under a fixed seed;
//! the columns listed in [`WALL_CLOCK_COLUMNS`] come from the monotonic
//! clock and are placed last.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bench::knn::brute_force_knn;
use crate::bench::metrics::{accuracy_ratio, CostModel};
use crate::bench::BenchConfig;
use crate::error::{Error, Result};
use crate::index::CostCounters;
use crate::search::{ExpansionStrategy, Neighbor, SearchEngine, StrategyRegistry, StrategyResources};

pub const CSV_SCHEMA: &str = "lsh-radius-bench/1";

pub const CSV_COLUMNS: &[&str] = &[
    "strategy",
    "k",
    "queries",
    "disk_seeks",
    "data_read_mb",
    "io_cost_ms",
    "rounds",
    "terminal_radius",
    "predicted_radius",
    "candidates",
    "accuracy_ratio",
    "degenerate_ranks",
    "short_results",
    "alg_time_ms",
    "fp_rem_time_ms",
    "qpt_ms",
];

pub const WALL_CLOCK_COLUMNS: &[&str] = &["alg_time_ms", "fp_rem_time_ms", "qpt_ms"];

/// One evaluation query under one strategy.
#[derive(Debug, Clone)]
pub struct QueryRecord {
    pub strategy: String,
    pub k: usize,
    pub query_id: usize,
    pub counters: CostCounters,
    pub rounds: usize,
    pub terminal_radius: u64,
    pub predicted_radius: Option<u64>,
    pub candidates: usize,
    pub ratio: f64,
    pub degenerate_ranks: usize,
    /// Fewer than `k` results came back.
    pub short: bool,
}

/// Means over the evaluation queries for one `(strategy, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub strategy: String,
    pub k: usize,
    pub queries: usize,
    pub disk_seeks: f64,
    pub data_read_mb: f64,
    pub io_cost_ms: f64,
    pub rounds: f64,
    pub terminal_radius: f64,
    /// Mean predicted radius; NaN for strategies without a predictor.
    pub predicted_radius: f64,
    pub candidates: f64,
    pub accuracy_ratio: f64,
    pub degenerate_ranks: usize,
    pub short_results: usize,
    pub alg_time_ms: f64,
    pub fp_rem_time_ms: f64,
    pub qpt_ms: f64,
}

impl MetricRow {
    fn aggregate(strategy: &str, k: usize, records: &[QueryRecord], cost: &CostModel) -> Self {
        let n = records.len() as f64;
        let mean = |f: &dyn Fn(&QueryRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        let predicted: Vec<f64> = records.iter().filter_map(|r| r.predicted_radius).map(|r| r as f64).collect();
        Self {
            strategy: strategy.to_string(),
            k,
            queries: records.len(),
            disk_seeks: mean(&|r| r.counters.disk_seeks as f64),
            data_read_mb: mean(&|r| r.counters.data_read_mb()),
            io_cost_ms: mean(&|r| cost.io_ms(&r.counters)),
            rounds: mean(&|r| r.rounds as f64),
            terminal_radius: mean(&|r| r.terminal_radius as f64),
            predicted_radius: if predicted.is_empty() {
                f64::NAN
            } else {
                predicted.iter().sum::<f64>() / predicted.len() as f64
            },
            candidates: mean(&|r| r.candidates as f64),
            accuracy_ratio: mean(&|r| r.ratio),
            degenerate_ranks: records.iter().map(|r| r.degenerate_ranks).sum(),
            short_results: records.iter().filter(|r| r.short).count(),
            alg_time_ms: mean(&|r| r.counters.alg_time_ms()),
            fp_rem_time_ms: mean(&|r| r.counters.fp_rem_time_ms()),
            qpt_ms: mean(&|r| cost.qpt(&r.counters)),
        }
    }

    fn csv_fields(&self) -> Vec<String> {
        let f = |v: f64| if v.is_nan() { String::new() } else { format!("{v:.6}") };
        vec![
            self.strategy.clone(),
            self.k.to_string(),
            self.queries.to_string(),
            f(self.disk_seeks),
            f(self.data_read_mb),
            f(self.io_cost_ms),
            f(self.rounds),
            f(self.terminal_radius),
            f(self.predicted_radius),
            f(self.candidates),
            f(self.accuracy_ratio),
            self.degenerate_ranks.to_string(),
            self.short_results.to_string(),
            f(self.alg_time_ms),
            f(self.fp_rem_time_ms),
            f(self.qpt_ms),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<MetricRow>,
    pub records: Vec<QueryRecord>,
}

impl BenchReport {
    pub fn row(&self, strategy: &str, k: usize) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.strategy == strategy && r.k == k)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# schema: {CSV_SCHEMA}\n{}\n", CSV_COLUMNS.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.csv_fields().join(","));
        }
        out
    }
}

/// Removes the wall-clock columns from CSV text produced by
/// [`BenchReport::to_csv`].
pub fn strip_wall_clock(csv: &str) -> String {
    let keep: Vec<bool> = CSV_COLUMNS.iter().map(|c| !WALL_CLOCK_COLUMNS.contains(c)).collect();
    csv.lines()
        .map(|line| {
            if line.starts_with('#') {
                return line.to_string();
            }
            line.split(',')
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(f, _)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn run_one(
    engine: &SearchEngine<'_>,
    strategy: &dyn ExpansionStrategy,
    query_id: usize,
    k: usize,
    truth: &[Neighbor],
    exclude_self: bool,
) -> Result<QueryRecord> {
    let q = engine.dataset.point(query_id);
    let asked = if exclude_self { k + 1 } else { k };
    let report = engine.query(q, asked.min(engine.dataset.len()), strategy)?;
    let mut results = report.results.clone();
    if exclude_self {
        results.retain(|n| n.id as usize != query_id);
    }
    results.truncate(k);
    let short = results.len() < k;
    let ratio = accuracy_ratio(&results, &truth[..results.len()])?;
    log::debug!(
        "query strategy={} k={k} id={query_id} seeks={} bytes={} rounds={} radius={} predicted={:?} ratio={:.4}",
        report.strategy,
        report.counters.disk_seeks,
        report.counters.bytes_read,
        report.rounds(),
        report.terminal_radius(),
        report.predicted_radius,
        ratio.ratio
    );
    Ok(QueryRecord {
        strategy: report.strategy.clone(),
        k,
        query_id,
        counters: report.counters,
        rounds: report.rounds(),
        terminal_radius: report.terminal_radius(),
        predicted_radius: report.predicted_radius,
        candidates: report.candidates,
        ratio: if results.is_empty() { f64::NAN } else { ratio.ratio },
        degenerate_ranks: ratio.excluded,
        short,
    })
}

/// Runs every `(strategy, k)` of `config` over `query_ids`.
///
/// Queries within one `(strategy, k)` run on `config.workers` threads;
/// records are collected in query order, so the report does not depend on
/// scheduling.
pub fn run_bench(
    engine: &SearchEngine<'_>,
    registry: &StrategyRegistry,
    resources: &StrategyResources,
    config: &BenchConfig,
    query_ids: &[usize],
) -> Result<BenchReport> {
    config.validate()?;
    if query_ids.is_empty() {
        return Err(Error::Param("no evaluation queries".into()));
    }
    let strategies = config
        .strategies
        .iter()
        .map(|name| registry.build(name, resources))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Param(format!("worker pool: {e}")))?;
    let cost = CostModel {
        seek_ms: config.seek_ms,
        data_read_factor: config.data_read_factor,
    };

    let k_max = *config.ks.iter().max().expect("validated non-empty");
    let n = engine.dataset.len();
    let truths: Vec<Vec<Neighbor>> = pool.install(|| {
        query_ids
            .par_iter()
            .map(|&id| {
                let q = engine.dataset.point(id);
                let extra = usize::from(config.exclude_self);
                let mut truth = brute_force_knn(q, (k_max + extra).min(n), engine.dataset)?;
                if config.exclude_self {
                    truth.retain(|nb| nb.id as usize != id);
                }
                Ok(truth)
            })
            .collect::<Result<_>>()
    })?;

    let mut rows = Vec::new();
    let mut records = Vec::new();
    for strategy in &strategies {
        for &k in &config.ks {
            if truths.iter().any(|t| t.len() < k) {
                return Err(Error::Param(format!("k = {k} exceeds the {n} indexed points")));
            }
            let batch: Vec<QueryRecord> = pool.install(|| {
                query_ids
                    .par_iter()
                    .zip(&truths)
                    .map(|(&id, truth)| run_one(engine, strategy.as_ref(), id, k, &truth[..k], config.exclude_self))
                    .collect::<Result<_>>()
            })?;
            rows.push(MetricRow::aggregate(strategy.name(), k, &batch, &cost));
            records.extend(batch);
        }
    }
    Ok(BenchReport { rows, records })
}
