//! Ground-truth radii, initial-radius sampling and the radius regressor.

mod ground_truth;
mod histogram;
mod linear;
mod mlp;
mod predictor;
mod samples;
mod training;

pub use ground_truth::{BucketMatrix, CollisionProfile, RadiusOracle};
pub use histogram::{select_i2r, I2rTable, RadiusHistogram};
pub use linear::LinearModel;
pub use mlp::{FitReport, Mlp, MlpConfig};
pub use predictor::{
    cross_validate, CvReport, PredictorKind, RadiusPredictor, Regressor, Standardizer, TrainConfig,
    MIN_TRAINING_SAMPLES,
};
pub use samples::{read_samples_csv, write_samples_csv, TrainingSample};
pub use training::{build_histogram, collect_samples, draw_query_ids, sample_i2r, DEFAULT_TRAINING_KS};
