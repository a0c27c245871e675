//! Radius-expansion strategies and the name-keyed registry that builds them.
//!
//! Every strategy turns a query (its signature and `k`) into a
//! [`RadiusSchedule`]. The engine drives the schedule; strategies never see
//! the index.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lsh::Signature;
use crate::model::{I2rTable, RadiusPredictor};
use crate::search::schedule::RadiusSchedule;

pub const OVR: &str = "ovr";
pub const SAMPLED: &str = "samp";
pub const NN_IVR: &str = "nn-ivr";
pub const NN_LAMBDA: &str = "nn-lambda";

/// What a strategy may look at when planning one query.
#[derive(Debug, Clone, Copy)]
pub struct QueryContext<'a> {
    pub signature: &'a Signature,
    pub k: usize,
    pub c: f64,
    pub max_radius: u64,
}

pub trait ExpansionStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn schedule(&self, query: &QueryContext<'_>) -> Result<RadiusSchedule>;

    /// Radius the learned strategies start from, if any.
    fn predicted_radius(&self, _query: &QueryContext<'_>) -> Option<u64> {
        None
    }
}

/// Exponential virtual rehashing from radius 1.
#[derive(Debug, Default)]
pub struct VirtualRehashing;

impl ExpansionStrategy for VirtualRehashing {
    fn name(&self) -> &'static str {
        OVR
    }

    fn schedule(&self, query: &QueryContext<'_>) -> Result<RadiusSchedule> {
        Ok(RadiusSchedule::exponential(query.c, query.max_radius))
    }
}

/// Improved virtual rehashing seeded by a sampled per-`k` initial radius.
#[derive(Debug)]
pub struct SampledRehashing {
    table: I2rTable,
}

impl SampledRehashing {
    pub fn new(table: I2rTable) -> Self {
        Self { table }
    }
}

impl ExpansionStrategy for SampledRehashing {
    fn name(&self) -> &'static str {
        SAMPLED
    }

    fn schedule(&self, query: &QueryContext<'_>) -> Result<RadiusSchedule> {
        let i2r = self.table.lookup(query.k).ok_or_else(|| Error::MissingModel {
            strategy: SAMPLED.into(),
            what: "initial-radius table",
            command: "sample-radii",
        })?;
        Ok(RadiusSchedule::improved(i2r, query.max_radius))
    }
}

/// Predicted start; underestimates continue with the improved sequence.
pub struct PredictedRehashing {
    predictor: Arc<RadiusPredictor>,
    round_to_power_of_two: bool,
}

impl PredictedRehashing {
    pub fn new(predictor: Arc<RadiusPredictor>, round_to_power_of_two: bool) -> Self {
        Self {
            predictor,
            round_to_power_of_two,
        }
    }
}

impl ExpansionStrategy for PredictedRehashing {
    fn name(&self) -> &'static str {
        NN_IVR
    }

    fn schedule(&self, query: &QueryContext<'_>) -> Result<RadiusSchedule> {
        let predicted = self.predictor.predict(query.signature, query.k)?;
        let i2r = if self.round_to_power_of_two {
            predicted.next_power_of_two()
        } else {
            predicted
        };
        Ok(RadiusSchedule::improved(i2r, query.max_radius))
    }

    fn predicted_radius(&self, query: &QueryContext<'_>) -> Option<u64> {
        self.predictor.predict(query.signature, query.k).ok()
    }
}

/// Predicted start; underestimates grow linearly by `⌈R_pred · λ⌉`.
pub struct PredictedLinear {
    predictor: Arc<RadiusPredictor>,
    lambda: f64,
}

impl PredictedLinear {
    pub fn new(predictor: Arc<RadiusPredictor>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Param(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { predictor, lambda })
    }
}

impl ExpansionStrategy for PredictedLinear {
    fn name(&self) -> &'static str {
        NN_LAMBDA
    }

    fn schedule(&self, query: &QueryContext<'_>) -> Result<RadiusSchedule> {
        let predicted = self.predictor.predict(query.signature, query.k)?;
        Ok(RadiusSchedule::linear(predicted, self.lambda, query.max_radius))
    }

    fn predicted_radius(&self, query: &QueryContext<'_>) -> Option<u64> {
        self.predictor.predict(query.signature, query.k).ok()
    }
}

/// Trained artifacts and knobs a factory may draw on.
#[derive(Clone, Default)]
pub struct StrategyResources {
    pub i2r_table: Option<I2rTable>,
    pub predictor: Option<Arc<RadiusPredictor>>,
    pub lambda: f64,
    pub nn_ivr_round_pow2: bool,
}

impl StrategyResources {
    fn predictor(&self, strategy: &str) -> Result<Arc<RadiusPredictor>> {
        self.predictor.clone().ok_or_else(|| Error::MissingModel {
            strategy: strategy.into(),
            what: "radius predictor",
            command: "train",
        })
    }
}

pub type StrategyFactory = fn(&StrategyResources) -> Result<Box<dyn ExpansionStrategy>>;

pub struct StrategyRegistry {
    factories: BTreeMap<&'static str, StrategyFactory>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: StrategyFactory) -> Result<()> {
        if self.factories.contains_key(name) {
            return Err(Error::Param(format!("strategy {name:?} already registered")));
        }
        self.factories.insert(name, factory);
        Ok(())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn build(&self, name: &str, resources: &StrategyResources) -> Result<Box<dyn ExpansionStrategy>> {
        let factory = self
            .factories
            .get(canonical_name(name))
            .ok_or_else(|| Error::UnknownStrategy {
                name: name.to_string(),
                known: self.names().join(", "),
            })?;
        factory(resources)
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let builtins: [(&'static str, StrategyFactory); 4] = [
            (OVR, build_ovr),
            (SAMPLED, build_sampled),
            (NN_IVR, build_nn_ivr),
            (NN_LAMBDA, build_nn_lambda),
        ];
        let mut registry = Self::empty();
        for (name, factory) in builtins {
            registry
                .register(name, factory)
                .expect("built-in strategy names are distinct");
        }
        registry
    }
}

fn build_ovr(_: &StrategyResources) -> Result<Box<dyn ExpansionStrategy>> {
    Ok(Box::new(VirtualRehashing))
}

fn build_sampled(res: &StrategyResources) -> Result<Box<dyn ExpansionStrategy>> {
    let table = res.i2r_table.clone().ok_or(Error::MissingModel {
        strategy: SAMPLED.into(),
        what: "initial-radius table",
        command: "sample-radii",
    })?;
    Ok(Box::new(SampledRehashing::new(table)))
}

fn build_nn_ivr(res: &StrategyResources) -> Result<Box<dyn ExpansionStrategy>> {
    Ok(Box::new(PredictedRehashing::new(
        res.predictor(NN_IVR)?,
        res.nn_ivr_round_pow2,
    )))
}

fn build_nn_lambda(res: &StrategyResources) -> Result<Box<dyn ExpansionStrategy>> {
    Ok(Box::new(PredictedLinear::new(res.predictor(NN_LAMBDA)?, res.lambda)?))
}

/// Accepts the long-form aliases used in reports (`oVR`, `iVR`, `NN-λ`, …).
fn canonical_name(name: &str) -> &str {
    match name.to_ascii_lowercase().as_str() {
        "ovr" | "c2lsh" => OVR,
        "samp" | "ivr" => SAMPLED,
        "nn-ivr" | "nnivr" => NN_IVR,
        "nn-lambda" | "nn-λ" | "nnlambda" => NN_LAMBDA,
        _ => name,
    }
}
