//! Collision counting over expanding query-centered windows.
//!
//! A point collides with the query at radius `R` in projection `i` iff
//! `|h_i(x) − h_i(q)| ≤ R`. Windows nest as `R` grows, so each round only
//! reads the two new strips on either side of the previous window.

use std::time::{Duration, Instant};

use crate::bench::{euclidean, Dataset};
use crate::error::{Error, Result};
use crate::index::{CostCounters, DiskIndex};
use crate::lsh::{domain_radius, HashFamily, LshParams, Signature};
use crate::search::schedule::RadiusSchedule;
use crate::search::strategy::{ExpansionStrategy, QueryContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub distance: f64,
}

/// Per-query collision counts plus the candidates that reached `l`.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    counts: Vec<u16>,
    verified: Vec<Neighbor>,
    threshold: usize,
}

impl CandidateSet {
    pub fn new(n: usize, threshold: usize) -> Self {
        Self {
            counts: vec![0; n],
            verified: Vec::new(),
            threshold,
        }
    }

    pub fn count(&self, id: u32) -> usize {
        self.counts[id as usize] as usize
    }

    pub fn counts(&self) -> &[u16] {
        &self.counts
    }

    /// Candidates with at least `l` collisions, in promotion order.
    pub fn verified(&self) -> &[Neighbor] {
        &self.verified
    }

    pub fn verified_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.verified.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        ids
    }

    /// The `k` closest verified candidates, ties broken by ascending id.
    pub fn top_k(&self, k: usize) -> Vec<Neighbor> {
        let mut all = self.verified.clone();
        all.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
        all.truncate(k);
        all
    }

    /// Either stopping rule holds at `radius`:
    /// at least `k` candidates within `c·radius`, or at least
    /// `k + false_positive_budget` candidates overall.
    pub fn satisfied(&self, k: usize, c: f64, radius: u64, false_positive_budget: usize) -> bool {
        if self.verified.len() >= k + false_positive_budget {
            return true;
        }
        let bound = c * radius as f64;
        self.verified.iter().filter(|n| n.distance <= bound).count() >= k
    }
}

#[derive(Debug, Clone)]
pub struct QueryReport {
    pub strategy: String,
    pub k: usize,
    pub results: Vec<Neighbor>,
    pub counters: CostCounters,
    /// Radii examined, in order. The last one is the terminal radius.
    pub radii: Vec<u64>,
    pub predicted_radius: Option<u64>,
    pub candidates: usize,
    /// False when the schedule hit the maximum radius before terminating.
    pub complete: bool,
}

impl QueryReport {
    pub fn terminal_radius(&self) -> u64 {
        self.radii.last().copied().unwrap_or(0)
    }

    pub fn rounds(&self) -> usize {
        self.radii.len()
    }
}

/// Read-only view over an index and the data it was built from. Cheap to
/// share across query workers; all mutable state lives in the per-query
/// [`CandidateSet`] and [`CostCounters`].
pub struct SearchEngine<'a> {
    pub index: &'a DiskIndex,
    pub family: &'a HashFamily,
    pub params: &'a LshParams,
    pub dataset: &'a Dataset,
    pub max_radius: u64,
}

impl<'a> SearchEngine<'a> {
    pub fn new(
        index: &'a DiskIndex,
        family: &'a HashFamily,
        params: &'a LshParams,
        dataset: &'a Dataset,
    ) -> Result<Self> {
        if index.len() != dataset.len() {
            return Err(Error::Input(format!(
                "index holds {} points but dataset has {}",
                index.len(),
                dataset.len()
            )));
        }
        if index.m() != family.m() || family.d != dataset.dim() {
            return Err(Error::Input("index, family and dataset shapes disagree".into()));
        }
        if family.m() > u16::MAX as usize {
            return Err(Error::Param(format!("{} projections exceed the counter width", family.m())));
        }
        let max_radius = domain_radius(dataset.max_abs_coord(), dataset.dim(), params.c).max(1.0) as u64;
        Ok(Self {
            index,
            family,
            params,
            dataset,
            max_radius,
        })
    }

    pub fn with_max_radius(mut self, max_radius: u64) -> Self {
        self.max_radius = max_radius.max(1);
        self
    }

    pub fn signature(&self, q: &[f32]) -> Result<Signature> {
        self.family.signature(q)
    }

    /// Widens every projection's window from `prev` (`None` = nothing read)
    /// to `new`, counting collisions and verifying points that reach `l`.
    pub fn expand_and_count(
        &self,
        q: &[f32],
        signature: &Signature,
        prev: Option<u64>,
        new: u64,
        candidates: &mut CandidateSet,
        counters: &mut CostCounters,
    ) -> Result<()> {
        if let Some(p) = prev {
            if new <= p {
                return Err(Error::Search(format!("radius must grow (from {p} to {new})")));
            }
        }
        let started = Instant::now();
        let mut io = Duration::ZERO;
        let mut fp = Duration::ZERO;
        let mut ids = Vec::new();
        let new = new as i64;
        for (i, &center) in signature.buckets().iter().enumerate() {
            ids.clear();
            let io_start = Instant::now();
            match prev {
                None => self
                    .index
                    .read_bucket_range_into(i, center - new, center + new, counters, &mut ids)?,
                Some(p) => {
                    let p = p as i64;
                    self.index
                        .read_bucket_range_into(i, center - new, center - p - 1, counters, &mut ids)?;
                    self.index
                        .read_bucket_range_into(i, center + p + 1, center + new, counters, &mut ids)?;
                }
            }
            io += io_start.elapsed();

            for &id in &ids {
                let slot = &mut candidates.counts[id as usize];
                *slot += 1;
                if *slot as usize == candidates.threshold {
                    let fp_start = Instant::now();
                    let distance = euclidean(q, self.dataset.point(id as usize));
                    fp += fp_start.elapsed();
                    candidates.verified.push(Neighbor { id, distance });
                }
            }
        }
        counters.fp_rem_time += fp;
        counters.alg_time += started.elapsed().saturating_sub(io + fp);
        Ok(())
    }

    /// Collision counts and candidates at one fixed radius, from scratch.
    pub fn fixed_radius(&self, q: &[f32], radius: u64, counters: &mut CostCounters) -> Result<CandidateSet> {
        let signature = self.signature(q)?;
        let mut candidates = CandidateSet::new(self.dataset.len(), self.params.l);
        self.expand_and_count(q, &signature, None, radius, &mut candidates, counters)?;
        Ok(candidates)
    }

    pub fn query(&self, q: &[f32], k: usize, strategy: &dyn ExpansionStrategy) -> Result<QueryReport> {
        if k == 0 {
            return Err(Error::Param("k must be at least 1".into()));
        }
        let signature = self.signature(q)?;
        let ctx = QueryContext {
            signature: &signature,
            k,
            c: self.params.c,
            max_radius: self.max_radius,
        };
        let plan_started = Instant::now();
        let schedule = strategy.schedule(&ctx)?;
        let predicted_radius = strategy.predicted_radius(&ctx);
        let mut counters = CostCounters {
            alg_time: plan_started.elapsed(),
            ..CostCounters::default()
        };
        let mut report = self.run_schedule(q, &signature, k, &schedule, &mut counters)?;
        report.strategy = strategy.name().to_string();
        report.predicted_radius = predicted_radius;
        report.counters = counters;
        Ok(report)
    }

    pub fn run_schedule(
        &self,
        q: &[f32],
        signature: &Signature,
        k: usize,
        schedule: &RadiusSchedule,
        counters: &mut CostCounters,
    ) -> Result<QueryReport> {
        let budget = self.params.false_positive_budget();
        let mut candidates = CandidateSet::new(self.dataset.len(), self.params.l);
        let mut radii = Vec::new();
        let mut current: Option<u64> = None;
        let mut complete = false;
        loop {
            let next = match schedule.next_radius(current) {
                Some(r) => r,
                // One last round at the cap before giving up.
                None if current.is_none_or(|r| r < schedule.max_radius) => schedule.max_radius,
                None => break,
            };
            self.expand_and_count(q, signature, current, next, &mut candidates, counters)?;
            radii.push(next);
            current = Some(next);
            let check = Instant::now();
            let done = candidates.satisfied(k, self.params.c, next, budget);
            counters.alg_time += check.elapsed();
            if done {
                complete = true;
                break;
            }
        }
        let finish = Instant::now();
        let results = candidates.top_k(k);
        counters.alg_time += finish.elapsed();
        Ok(QueryReport {
            strategy: String::new(),
            k,
            results,
            counters: *counters,
            radii,
            predicted_radius: None,
            candidates: candidates.verified.len(),
            complete,
        })
    }
}
