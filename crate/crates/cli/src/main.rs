//! `lsh-radius`: build, train, query and benchmark a disk-resident LSH index.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lsh_radius::bench::pipeline::{self, IndexBundle, QuerySplit};
use lsh_radius::bench::{brute_force_knn, qpt, run_bench, write_ivecs, BenchConfig, Dataset};
use lsh_radius::model::{cross_validate, write_samples_csv, RadiusPredictor};
use lsh_radius::search::StrategyRegistry;

const DATA_FILE: &str = "data.fvecs";
const CONFIG_SNAPSHOT: &str = "config.txt";

#[derive(Parser)]
#[command(name = "lsh-radius", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Directory holding the index and trained artifacts.
    #[arg(long, global = true, env = "LSH_RADIUS_DATA_DIR", default_value = "lsh-radius-data")]
    dir: PathBuf,

    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every stochastic step (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Query worker threads, 0 = one per core (overrides the config file).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Override any configuration key, e.g. `--set ks=1,10`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Load or generate the dataset and write the index.
    Build,
    /// Pick per-k initial radii from oVR terminal-radius histograms.
    SampleRadii,
    /// Collect ground-truth radii and fit the radius predictor.
    Train {
        /// Also report k-fold cross-validated error for both regressors.
        #[arg(long)]
        cv: bool,
    },
    /// Run one query and print its neighbours and cost counters.
    Query {
        /// Dataset point to use as the query.
        #[arg(long)]
        id: usize,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value = "ovr")]
        strategy: String,
    },
    /// Evaluate every configured strategy and k; write the metric table.
    Bench {
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write exact k-NN ids of the evaluation queries as `.ivecs`.
    GroundTruth {
        #[arg(long)]
        out: PathBuf,
        #[arg(short, long, default_value_t = 100)]
        k: usize,
    },
    /// Print index layout and derived parameters.
    Stats,
}

fn resolve_config(global: &GlobalArgs) -> Result<BenchConfig> {
    let mut config = match &global.config {
        Some(path) => BenchConfig::load(path)?,
        None => BenchConfig::default(),
    };
    for kv in &global.overrides {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(workers) = global.workers {
        config.workers = workers;
    }
    config.validate()?;
    Ok(config)
}

fn load_indexed_data(dir: &Path) -> Result<(IndexBundle, Dataset)> {
    let bundle = IndexBundle::open(dir).with_context(|| format!("no index under {}; run `lsh-radius build` first", dir.display()))?;
    let dataset = Dataset::load_fvecs(&dir.join(DATA_FILE))?;
    Ok((bundle, dataset))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let config = resolve_config(&cli.global)?;
    let dir = cli.global.dir.as_path();

    match cli.command {
        Command::Build => {
            let dataset = pipeline::load_dataset(&config)?;
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            dataset.write_fvecs(&dir.join(DATA_FILE))?;
            std::fs::write(dir.join(CONFIG_SNAPSHOT), config.to_kv_string())?;
            let (bundle, elapsed) = pipeline::build(dir, &dataset, &config)?;
            let p = &bundle.params;
            println!(
                "built index: n={} d={} m={} l={} page_size={} in {:.3}s",
                dataset.len(),
                dataset.dim(),
                p.m,
                p.l,
                config.page_size,
                elapsed.as_secs_f64()
            );
        }
        Command::SampleRadii => {
            let (bundle, dataset) = load_indexed_data(dir)?;
            let engine = bundle.engine(&dataset)?;
            let split = QuerySplit::for_config(&config, dataset.len());
            let started = Instant::now();
            let sampled = pipeline::sample_radii(&engine, &split, &config)?;
            sampled.table.save(&dir.join(pipeline::I2R_FILE))?;
            for (k, hist) in &sampled.histograms {
                let bins: Vec<String> = hist.bins().iter().map(|(r, n)| format!("{r}:{n}")).collect();
                println!(
                    "k={k:<4} i2r={:<8} histogram {{{}}}",
                    sampled.table.lookup(*k).unwrap_or(0),
                    bins.join(", ")
                );
            }
            println!("sampled in {:.3}s", started.elapsed().as_secs_f64());
        }
        Command::Train { cv } => {
            let (bundle, dataset) = load_indexed_data(dir)?;
            let engine = bundle.engine(&dataset)?;
            let split = QuerySplit::for_config(&config, dataset.len());
            let started = Instant::now();
            let samples = pipeline::training_samples(&bundle, &dataset, &split, &config)?;
            let gt_time = started.elapsed();
            write_samples_csv(&dir.join(pipeline::SAMPLES_FILE), &samples)?;

            let train_cfg = pipeline::train_config(&config, engine.max_radius);
            let started = Instant::now();
            let mut predictor = RadiusPredictor::train(&samples, &train_cfg)?;
            let train_time = started.elapsed();
            if cv {
                for kind in [lsh_radius::model::PredictorKind::Mlp, lsh_radius::model::PredictorKind::Linear] {
                    let cfg = lsh_radius::model::TrainConfig { kind, ..train_cfg.clone() };
                    let report = cross_validate(&samples, &cfg, config.cv_folds, config.seed)?;
                    println!(
                        "{kind:<6} {}-fold CV: mse={:.4} r2={:.4}",
                        report.folds, report.mse, report.r2
                    );
                    if kind == predictor.kind() {
                        predictor.set_cross_validation(report);
                    }
                }
            }
            predictor.save(&dir.join(pipeline::PREDICTOR_FILE))?;
            println!(
                "{} samples; ground truth {:.3}s, {} training {:.3}s",
                samples.len(),
                gt_time.as_secs_f64(),
                predictor.kind(),
                train_time.as_secs_f64()
            );
        }
        Command::Query { id, k, strategy } => {
            let (bundle, dataset) = load_indexed_data(dir)?;
            if id >= dataset.len() {
                bail!("query id {id} out of range (dataset has {} points)", dataset.len());
            }
            let engine = bundle.engine(&dataset)?;
            let resources = pipeline::load_resources(dir, &config)?;
            let strategy = StrategyRegistry::default().build(&strategy, &resources)?;
            let report = engine.query(dataset.point(id), k, strategy.as_ref())?;
            for (rank, n) in report.results.iter().enumerate() {
                println!("{:>4} id={:<8} distance={:.4}", rank + 1, n.id, n.distance);
            }
            let c = &report.counters;
            println!(
                "strategy={} radii={:?} predicted={:?} candidates={} seeks={} mb={:.4} alg_ms={:.3} fprem_ms={:.3} qpt_ms={:.3}{}",
                report.strategy,
                report.radii,
                report.predicted_radius,
                report.candidates,
                c.disk_seeks,
                c.data_read_mb(),
                c.alg_time_ms(),
                c.fp_rem_time_ms(),
                qpt(c),
                if report.complete { "" } else { " (hit maximum radius)" }
            );
        }
        Command::Bench { out } => {
            let (bundle, dataset) = load_indexed_data(dir)?;
            let engine = bundle.engine(&dataset)?;
            let resources = pipeline::load_resources(dir, &config)?;
            let split = QuerySplit::for_config(&config, dataset.len());
            let report = run_bench(&engine, &StrategyRegistry::default(), &resources, &config, &split.evaluation)?;
            let csv = report.to_csv();
            match out {
                Some(path) => {
                    std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
                    println!("wrote {} rows to {}", report.rows.len(), path.display());
                }
                None => print!("{csv}"),
            }
        }
        Command::GroundTruth { out, k } => {
            let dataset = Dataset::load_fvecs(&dir.join(DATA_FILE))
                .with_context(|| format!("no dataset under {}; run `lsh-radius build` first", dir.display()))?;
            let split = QuerySplit::for_config(&config, dataset.len());
            let rows = split
                .evaluation
                .iter()
                .map(|&id| {
                    let nn = brute_force_knn(dataset.point(id), k, &dataset)?;
                    Ok(nn.iter().map(|n| n.id as i32).collect())
                })
                .collect::<Result<Vec<Vec<i32>>>>()?;
            write_ivecs(&out, &rows)?;
            println!("wrote {} rows of {k} neighbours to {}", rows.len(), out.display());
        }
        Command::Stats => {
            let bundle = IndexBundle::open(dir)?;
            let stats = bundle.index.stats()?;
            let p = &bundle.params;
            let meta = bundle.index.meta();
            println!("points          {}", meta.n);
            println!("dimensions      {}", meta.d);
            println!("c / w / delta   {} / {} / {}", p.c, p.w, p.delta);
            println!("beta            {}", p.beta);
            println!("p1 / p2         {:.6} / {:.6}", p.p1, p.p2);
            println!("z / alpha       {:.6} / {:.6}", p.z, p.alpha);
            println!("m / l           {} / {}", p.m, p.l);
            println!("page size       {}", meta.page_size);
            println!("files           {}", stats.file_count);
            println!("bytes           {} ({} in pages)", stats.total_bytes, stats.page_bytes);
            let pages = &stats.pages_per_projection;
            println!(
                "pages/projection min {} max {}",
                pages.iter().min().unwrap_or(&0),
                pages.iter().max().unwrap_or(&0)
            );
        }
    }
    Ok(())
}
