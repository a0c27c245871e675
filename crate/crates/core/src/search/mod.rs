//! Top-k search by collision counting under pluggable radius schedules.

pub mod engine;
pub mod schedule;
pub mod strategy;

pub use engine::{CandidateSet, Neighbor, QueryReport, SearchEngine};
pub use schedule::{RadiusPlan, RadiusSchedule};
pub use strategy::{
    ExpansionStrategy, PredictedLinear, PredictedRehashing, QueryContext, SampledRehashing,
    StrategyFactory, StrategyRegistry, StrategyResources, VirtualRehashing, NN_IVR, NN_LAMBDA, OVR,
    SAMPLED,
};
