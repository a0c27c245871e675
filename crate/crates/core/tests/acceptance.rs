//! End-to-end acceptance checks. Runs without the libtest harness so each
//! check prints exactly one PASS/FAIL line and the checks run one after
//! another (the overhead check times index-time work and must not share the
//! CPU with the others).
//!
//! Desk-scale setup: 10 000 points, 32 dimensions, 20-cluster Gaussian
//! mixture, c = 2, δ = 0.1, w = 2.184, k ∈ {1, 25, 50, 75, 100}, 50
//! evaluation queries.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use lsh_radius::bench::pipeline::{self, Prepared};
use lsh_radius::bench::{run_bench, strip_wall_clock, BenchConfig, BenchReport, CostModel, Dataset, MixtureSpec};
use lsh_radius::index::{build_index, CostCounters};
use lsh_radius::lsh::{collision_prob, HashFamily, LshParams, SplitMix64};
use lsh_radius::model::{cross_validate, BucketMatrix, CollisionProfile, PredictorKind, RadiusOracle};
use lsh_radius::search::{
    RadiusSchedule, SampledRehashing, SearchEngine, StrategyRegistry, VirtualRehashing, NN_IVR, NN_LAMBDA, OVR,
    SAMPLED,
};
use statrs::distribution::{ContinuousCDF, Normal};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Closed-form collision probability for the 2-stable hash, evaluated with
/// an independent normal CDF.
fn closed_form(r: f64, w: f64) -> f64 {
    let phi = Normal::new(0.0, 1.0).unwrap();
    let t = w / r;
    1.0 - 2.0 * phi.cdf(-t) - 2.0 / ((2.0 * std::f64::consts::PI).sqrt() * t) * (1.0 - (-t * t / 2.0).exp())
}

// ---------------------------------------------------------------------------

fn collision_fidelity() -> Check {
    let w = 2.184;
    let trials = 100_000;
    let d = 16;
    let mut detail = Vec::new();
    for r in [1.0f64, 2.0] {
        let family = HashFamily::generate(d, trials, w, w * w, 0xC0FFEE + r as u64).unwrap();
        let mut rng = SplitMix64::new(77 + r as u64);
        let mut hits = 0usize;
        for h in &family.functions {
            let x: Vec<f64> = (0..d).map(|_| rng.uniform(-50.0, 50.0)).collect();
            let u: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + r * b / norm).collect();
            // Evaluate in f64 so the pair sits at distance r exactly.
            let hx = ((h.a.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() + h.b) / w).floor();
            let hy = ((h.a.iter().zip(&y).map(|(a, v)| a * v).sum::<f64>() + h.b) / w).floor();
            hits += usize::from(hx == hy);
        }
        let empirical = hits as f64 / trials as f64;
        let predicted = collision_prob(r, w).unwrap();
        ensure(
            (empirical - predicted).abs() <= 0.02,
            format!("r={r}: empirical {empirical:.4} vs p(r) {predicted:.4}"),
        )?;
        detail.push(format!("r={r}: {empirical:.4} vs {predicted:.4}"));
    }
    let mut worst = 0.0f64;
    for i in 1..=200 {
        let r = i as f64 * 0.05;
        for w in [0.5, 1.0, 2.184, 4.0] {
            worst = worst.max((collision_prob(r, w).unwrap() - closed_form(r, w)).abs());
        }
    }
    ensure(worst <= 1e-7, format!("quadrature deviates from closed form by {worst:e}"))?;
    detail.push(format!("max |quadrature − closed form| = {worst:.1e}"));
    Ok(detail.join("; "))
}

fn parameter_formulas() -> Check {
    let p = LshParams::derive(10_000, 2.0, 2.184, 0.1).map_err(|e| e.to_string())?;
    // 50-digit evaluation of the same formulas.
    let (p1, p2, z, alpha) = (
        0.639_351_444_573_755_76,
        0.397_013_827_480_002_14,
        1.516_914_630_315_094_96,
        0.543_067_838_377_936_89,
    );
    ensure(p.beta == 0.01, format!("beta {}", p.beta))?;
    ensure(p.false_positive_budget() == 100, "false-positive budget ≠ 100")?;
    for (name, got, want) in [("p1", p.p1, p1), ("p2", p.p2, p2), ("z", p.z, z), ("alpha", p.alpha, alpha)] {
        ensure((got - want).abs() < 1e-9, format!("{name} = {got}, expected {want}"))?;
    }
    ensure(p.m == 125 && p.l == 68, format!("m = {}, l = {} (expected 125, 68)", p.m, p.l))?;

    // Same derivation from the closed-form probabilities.
    let (q1, q2) = (closed_form(1.0, 2.184), closed_form(2.0, 2.184));
    let zz = ((2.0f64 / 0.01).ln() / 10f64.ln()).sqrt();
    let m = (10f64.ln() / (2.0 * (q1 - q2).powi(2)) * (1.0 + zz).powi(2)).ceil() as usize;
    let l = ((zz * q1 + q2) / (1.0 + zz) * m as f64).ceil() as usize;
    ensure((m, l) == (p.m, p.l), format!("closed-form oracle gives m={m}, l={l}"))?;

    let mut cases = 0;
    for n in [100usize, 1_000, 10_000, 1_000_000] {
        for c in [1.5, 2.0, 3.0] {
            for w in [1.0, 2.184, 4.0] {
                for delta in [0.01, 0.1, 0.3] {
                    let q = LshParams::derive(n, c, w, delta).map_err(|e| e.to_string())?;
                    ensure(
                        q.p2 < q.alpha && q.alpha < q.p1,
                        format!("p2 < alpha < p1 violated at n={n} c={c} w={w} delta={delta}"),
                    )?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!(
        "beta=0.01 z={:.5} alpha={:.5} m={} l={}; p2<alpha<p1 on {cases} grid points",
        p.z, p.alpha, p.m, p.l
    ))
}

// ---------------------------------------------------------------------------

struct Desk {
    _dir: tempfile::TempDir,
    config: BenchConfig,
    dataset: Dataset,
    prepared: Prepared,
}

fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let config = BenchConfig {
            workers: 1,
            ..BenchConfig::default()
        };
        let dataset = MixtureSpec::default().generate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let prepared = pipeline::prepare(dir.path(), &dataset, &config).unwrap();
        Desk {
            _dir: dir,
            config,
            dataset,
            prepared,
        }
    })
}

fn desk_bench() -> &'static BenchReport {
    static REPORT: OnceLock<BenchReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let d = desk();
        let engine = d.prepared.bundle.engine(&d.dataset).unwrap();
        run_bench(
            &engine,
            &StrategyRegistry::default(),
            &d.prepared.resources,
            &d.config,
            &d.prepared.split.evaluation,
        )
        .unwrap()
    })
}

/// Number of schedule radii examined until the first one ≥ `terminal`.
fn rounds_until(schedule: &RadiusSchedule, terminal: u64) -> usize {
    schedule.radii().position(|r| r >= terminal).map(|p| p + 1).unwrap_or(usize::MAX)
}

fn improved_radius_suite() -> Check {
    let d = desk();
    let bundle = &d.prepared.bundle;
    let params = &bundle.params;
    let table = d.prepared.resources.i2r_table.clone().ok_or("no sampled table")?;
    let engine = bundle.engine(&d.dataset).map_err(|e| e.to_string())?;
    let matrix = BucketMatrix::from_index(&bundle.index).map_err(|e| e.to_string())?;
    let budget = params.false_positive_budget();
    let mut rng = SplitMix64::new(4242);

    let mut qualifying = 0usize;
    let mut in_window = 0usize;
    let mut engine_checked = 0usize;
    let mut attempts = 0usize;
    while qualifying < 1000 {
        attempts += 1;
        if attempts > 20_000 {
            return Err(format!("only {qualifying} of 1000 queries qualified"));
        }
        // A perturbed dataset point: close to the data but not in it.
        let base = d.dataset.point(rng.below(d.dataset.len() as u64) as usize);
        let q: Vec<f32> = base.iter().map(|&v| v + (rng.normal() * 20.0) as f32).collect();
        let k = d.config.ks[rng.below(d.config.ks.len() as u64) as usize];
        let i2r = table.lookup(k).ok_or("table has no entries")?;
        let sig = bundle.family.signature(&q).map_err(|e| e.to_string())?;
        let profile =
            CollisionProfile::new(&matrix, &sig, &q, &d.dataset, params.l).map_err(|e| e.to_string())?;
        let r_act = profile.terminal_radius(k, params.c, budget, 1).map_err(|e| e.to_string())?;

        let ovr = RadiusSchedule::exponential(params.c, engine.max_radius);
        let ivr = RadiusSchedule::improved(i2r, engine.max_radius);
        let ovr_terminal = ovr.radii().find(|&r| r >= r_act).ok_or("terminal beyond max radius")?;
        if ovr_terminal < 2 * i2r {
            continue;
        }
        qualifying += 1;
        let (n_ovr, n_ivr) = (rounds_until(&ovr, r_act), rounds_until(&ivr, r_act));
        ensure(n_ivr <= n_ovr, format!("k={k} R_act={r_act}: iVR {n_ivr} rounds > oVR {n_ovr}"))?;

        if r_act > i2r && r_act <= 2 * i2r {
            in_window += 1;
            let log_r = i2r.trailing_zeros() as usize;
            ensure(i2r.is_power_of_two(), format!("i2R {i2r} is not a power of two"))?;
            ensure(n_ovr == log_r + 2, format!("oVR examined {n_ovr} radii, expected {}", log_r + 2))?;
            // iVR stops at the first i2R + 2^x ≥ R_act.
            let x = (0..=log_r).find(|&x| i2r + (1u64 << x) >= r_act).unwrap();
            ensure(n_ivr == x + 1, format!("iVR examined {n_ivr} radii, expected {}", x + 1))?;
            ensure(n_ivr <= log_r + 1, format!("iVR examined {n_ivr} > log2 R + 1"))?;
        }

        if engine_checked < 100 {
            engine_checked += 1;
            let a = engine.query(&q, k, &VirtualRehashing).map_err(|e| e.to_string())?;
            let b = engine
                .query(&q, k, &SampledRehashing::new(table.clone()))
                .map_err(|e| e.to_string())?;
            ensure(
                (a.rounds(), b.rounds()) == (n_ovr, n_ivr),
                format!("engine rounds ({}, {}) vs schedule ({n_ovr}, {n_ivr})", a.rounds(), b.rounds()),
            )?;
            ensure(
                b.counters.disk_seeks <= a.counters.disk_seeks,
                format!("iVR {} seeks > oVR {}", b.counters.disk_seeks, a.counters.disk_seeks),
            )?;
        }
    }
    ensure(in_window > 0, "no query had its terminal radius in (i2R, 2·i2R]")?;
    Ok(format!(
        "1000/1000 queries iVR ≤ oVR rounds; exact counts on {in_window} in (R,2R]; engine agrees on {engine_checked}"
    ))
}

fn oracle_equivalence() -> Check {
    let mut checked_radii = 0usize;
    let mut checked_gt = 0usize;
    for seed in 1..=5u64 {
        let dataset = MixtureSpec {
            n: 1000,
            d: 16,
            clusters: 5,
            center_range: 300.0,
            sigma_min: 15.0,
            sigma_max: 40.0,
            seed,
        }
        .generate()
        .unwrap();
        let params = LshParams::derive(1000, 2.0, 2.184, 0.1).unwrap();
        let family = HashFamily::generate(16, params.m, 2.184, 2.184 * 2.184 * 64.0, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let index = build_index(dir.path(), &dataset, &family, &params, 512).map_err(|e| e.to_string())?;
        let engine = SearchEngine::new(&index, &family, &params, &dataset).map_err(|e| e.to_string())?;
        let matrix = BucketMatrix::from_index(&index).map_err(|e| e.to_string())?;
        let oracle = RadiusOracle {
            matrix: &matrix,
            family: &family,
            params: &params,
            dataset: &dataset,
            min_radius: 1,
        };
        let budget = params.false_positive_budget();
        let mut rng = SplitMix64::new(seed * 31);

        for _ in 0..4 {
            let qi = rng.below(1000) as usize;
            let q = dataset.point(qi);
            // Per-point, per-projection offsets straight from the hash functions.
            let qh: Vec<i64> = family.functions.iter().map(|h| h.hash(q)).collect();
            let offsets: Vec<Vec<u64>> = dataset
                .points()
                .map(|p| family.functions.iter().zip(&qh).map(|(h, &b)| h.hash(p).abs_diff(b)).collect())
                .collect();
            let dist: Vec<f64> = dataset.points().map(|p| lsh_radius::bench::euclidean(q, p)).collect();
            let scan = |radius: u64| -> Vec<u32> {
                (0..1000u32)
                    .filter(|&id| offsets[id as usize].iter().filter(|&&o| o <= radius).count() >= params.l)
                    .collect()
            };

            let mut radii = vec![1u64, 2, 3, 4, 7, 8, 16, 31, 64, 100];
            radii.extend((0..5).map(|_| 1 + rng.below(200)));
            for &radius in &radii {
                let cand = engine
                    .fixed_radius(q, radius, &mut CostCounters::default())
                    .map_err(|e| e.to_string())?;
                ensure(
                    cand.verified_ids() == scan(radius),
                    format!("seed {seed} q {qi} R {radius}: engine candidates differ from scan"),
                )?;
                checked_radii += 1;
            }

            // Linear sweep R = 1, 2, 3, … over the scan.
            let ks = [1usize, 10, 50];
            let mut sweep = [None; 3];
            let mut radius = 1u64;
            while sweep.iter().any(Option::is_none) {
                let cands = scan(radius);
                let close = cands.iter().filter(|&&id| dist[id as usize] <= params.c * radius as f64).count();
                for (slot, &k) in sweep.iter_mut().zip(&ks) {
                    if slot.is_none() && (cands.len() >= k + budget || close >= k) {
                        *slot = Some(radius);
                    }
                }
                radius += 1;
                if radius > 1 << 16 {
                    return Err("sweep did not terminate".into());
                }
            }
            for (&k, want) in ks.iter().zip(sweep) {
                let got = oracle.ground_truth_radius(q, k).map_err(|e| e.to_string())?;
                ensure(
                    Some(got) == want,
                    format!("seed {seed} q {qi} k {k}: ground truth {got} vs sweep {want:?}"),
                )?;
                checked_gt += 1;
            }
        }
    }
    Ok(format!(
        "5 seeds × 1000 points: {checked_radii} fixed-radius candidate sets and {checked_gt} ground-truth radii match"
    ))
}

// ---------------------------------------------------------------------------

fn mean_over_ks(report: &BenchReport, strategy: &str, f: impl Fn(&lsh_radius::bench::MetricRow) -> f64) -> f64 {
    let rows: Vec<_> = report.rows.iter().filter(|r| r.strategy == strategy).collect();
    rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64
}

fn accuracy_guarantee() -> Check {
    let report = desk_bench();
    let ks = &desk().config.ks;
    let mut parts = Vec::new();
    for &k in ks {
        let base = report.row(OVR, k).ok_or("missing oVR row")?.accuracy_ratio;
        ensure(base <= 1.5, format!("oVR ratio {base:.4} at k={k}"))?;
        for s in [NN_IVR, NN_LAMBDA] {
            let r = report.row(s, k).ok_or("missing NN row")?.accuracy_ratio;
            ensure(
                (r - base).abs() <= 0.05 * base,
                format!("{s} ratio {r:.4} vs oVR {base:.4} at k={k}"),
            )?;
        }
        parts.push(format!(
            "k={k}: {:.4}/{:.4}/{:.4}",
            base,
            report.row(NN_IVR, k).unwrap().accuracy_ratio,
            report.row(NN_LAMBDA, k).unwrap().accuracy_ratio
        ));
    }
    Ok(format!("ratio oVR/NN-iVR/NN-λ {}", parts.join(", ")))
}

fn io_trend() -> Check {
    let report = desk_bench();
    let seeks = |s| mean_over_ks(report, s, |r| r.disk_seeks);
    let radius = |s| mean_over_ks(report, s, |r| r.terminal_radius);
    let (lam, ivr, ovr) = (seeks(NN_LAMBDA), seeks(NN_IVR), seeks(OVR));
    let (samp_r, ovr_r) = (radius(SAMPLED), radius(OVR));
    let detail = format!(
        "mean seeks NN-λ {lam:.1} < NN-iVR {ivr:.1} < oVR {ovr:.1}; terminal radius samp {samp_r:.1} < oVR {ovr_r:.1}"
    );
    ensure(lam < ivr && ivr < ovr, detail.clone())?;
    ensure(samp_r < ovr_r, detail.clone())?;
    Ok(detail)
}

fn regressor_ordering() -> Check {
    let d = desk();
    let samples = &d.prepared.samples;
    ensure(samples.len() >= 10_000, format!("only {} samples", samples.len()))?;
    let engine = d.prepared.bundle.engine(&d.dataset).map_err(|e| e.to_string())?;
    let base = pipeline::train_config(&d.config, engine.max_radius);
    let mut mse = Vec::new();
    for kind in [PredictorKind::Mlp, PredictorKind::Linear] {
        let cfg = lsh_radius::model::TrainConfig { kind, ..base.clone() };
        mse.push(cross_validate(samples, &cfg, 10, d.config.seed).map_err(|e| e.to_string())?);
    }
    let (mlp, lin) = (mse[0], mse[1]);
    let detail = format!(
        "10-fold CV on {} samples: MLP mse {:.4} (r2 {:.3}) vs linear {:.4} (r2 {:.3})",
        samples.len(),
        mlp.mse,
        mlp.r2,
        lin.mse,
        lin.r2
    );
    ensure(mlp.mse <= 0.5 * lin.mse, detail.clone())?;
    Ok(detail)
}

fn cost_determinism() -> Check {
    let model = CostModel::default();
    let example = model.qpt_parts(10.0, 1.56, 5.0, 2.0);
    ensure((example - 92.24336).abs() < 1e-12, format!("worked example gives {example}"))?;
    let zero = model.qpt(&CostCounters::default());
    ensure(zero == 0.0, format!("zero counters give {zero}"))?;

    let run = || -> Result<String, String> {
        let config = BenchConfig {
            training_size: 1_000,
            sample_queries: 40,
            queries: 20,
            ks: vec![1, 10],
            synthetic: MixtureSpec {
                n: 2_000,
                d: 16,
                clusters: 8,
                center_range: 500.0,
                sigma_min: 40.0,
                sigma_max: 80.0,
                seed: 0,
            },
            seed: 5,
            ..BenchConfig::default()
        };
        let dataset = pipeline::load_dataset(&config).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let prepared = pipeline::prepare(dir.path(), &dataset, &config).map_err(|e| e.to_string())?;
        let engine = prepared.bundle.engine(&dataset).map_err(|e| e.to_string())?;
        let report = run_bench(
            &engine,
            &StrategyRegistry::default(),
            &prepared.resources,
            &config,
            &prepared.split.evaluation,
        )
        .map_err(|e| e.to_string())?;
        Ok(report.to_csv())
    };
    let (a, b) = (run()?, run()?);
    let (sa, sb) = (strip_wall_clock(&a), strip_wall_clock(&b));
    ensure(sa == sb, "CSV differs between identical-seed runs")?;
    ensure(sa.lines().count() == 2 + 8, format!("unexpected CSV shape:\n{sa}"))?;
    Ok(format!(
        "qpt example = {example} ms; two seeded runs give identical {}-byte CSVs (wall-clock columns excluded)",
        sa.len()
    ))
}

fn training_overhead() -> Check {
    let t = desk().prepared.timings;
    let ratio = t.overhead_ratio();
    let detail = format!(
        "build {:.3}s; sampling {:.3}s + ground truth {:.3}s + training {:.3}s = {:.1}% of build",
        t.build.as_secs_f64(),
        t.sampling.as_secs_f64(),
        t.ground_truth.as_secs_f64(),
        t.training.as_secs_f64(),
        100.0 * ratio
    );
    ensure(ratio <= 0.10, detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------------------

fn main() {
    // `cargo test -- <filter>` passes arguments through; honour a simple
    // substring filter over the check names.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let checks: [(u8, &str, fn() -> Check); 9] = [
        (1, "collision-probability fidelity", collision_fidelity),
        (2, "parameter formulas", parameter_formulas),
        (3, "improved-radius guarantees", improved_radius_suite),
        (4, "oracle equivalence", oracle_equivalence),
        (5, "accuracy guarantee", accuracy_guarantee),
        (6, "I/O trend", io_trend),
        (7, "regressor ordering", regressor_ordering),
        (8, "cost-model determinism", cost_determinism),
        (9, "training overhead bound", training_overhead),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {id} ({name}) [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {id} ({name}) [{secs:.1}s]: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
