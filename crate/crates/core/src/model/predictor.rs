//! Radius regressor: standardized features in, projected radius out.

use std::fmt;
use std::io::{Cursor, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, IoContext, Result};
use crate::lsh::{Signature, SplitMix64};
use crate::model::linear::LinearModel;
use crate::model::mlp::{FitReport, Mlp, MlpConfig};
use crate::model::samples::TrainingSample;

const PREDICTOR_MAGIC: &[u8; 8] = b"LSHRPRED";
const PREDICTOR_VERSION: u32 = 1;

/// Fewer samples than this cannot support a meaningful fit.
pub const MIN_TRAINING_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    Mlp,
    Linear,
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictorKind::Mlp => "mlp",
            PredictorKind::Linear => "linear",
        })
    }
}

impl FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" | "nn" => Ok(PredictorKind::Mlp),
            "linear" | "lr" => Ok(PredictorKind::Linear),
            other => Err(Error::Param(format!("unknown predictor kind {other:?} (expected mlp or linear)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Mlp(Mlp),
    Linear(LinearModel),
}

impl Regressor {
    fn kind(&self) -> PredictorKind {
        match self {
            Regressor::Mlp(_) => PredictorKind::Mlp,
            Regressor::Linear(_) => PredictorKind::Linear,
        }
    }

    fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        match self {
            Regressor::Mlp(net) => net.predict_row(x),
            Regressor::Linear(lin) => lin.predict_row(x),
        }
    }
}

/// Per-column shift and scale; zero-variance columns keep scale 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty").to_vec();
        let scale = x
            .std_axis(Axis(0), 0.0)
            .iter()
            .map(|&s| if s > 0.0 && s.is_finite() { s } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    fn fit_scalar(y: &Array1<f64>) -> (f64, f64) {
        let mean = y.mean().expect("non-empty");
        let sd = y.std(0.0);
        (mean, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
    }

    pub fn apply(&self, x: &mut Array2<f64>) {
        for mut row in x.rows_mut() {
            self.apply_row(row.as_slice_mut().expect("standard layout"));
        }
    }

    fn apply_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) / s;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub kind: PredictorKind,
    pub mlp: MlpConfig,
    /// Upper clamp applied to every prediction.
    pub max_radius: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kind: PredictorKind::Mlp,
            mlp: MlpConfig::default(),
            max_radius: u64::MAX >> 1,
        }
    }
}

/// Held-out error from k-fold cross-validation, in standardized target
/// units (squared error divided by the target variance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvReport {
    pub folds: usize,
    pub mse: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusPredictor {
    m: usize,
    features: Standardizer,
    target_mean: f64,
    target_scale: f64,
    max_radius: u64,
    model: Regressor,
    cv: Option<CvReport>,
}

fn design_matrix(samples: &[TrainingSample]) -> Result<(Array2<f64>, Array1<f64>)> {
    let p = samples[0].feature_len();
    let mut x = Array2::zeros((samples.len(), p));
    for (mut row, s) in x.rows_mut().into_iter().zip(samples) {
        if s.feature_len() != p {
            return Err(Error::Dimension {
                expected: p,
                got: s.feature_len(),
            });
        }
        for (dst, v) in row.iter_mut().zip(s.features()) {
            *dst = v;
        }
    }
    let y = samples.iter().map(|s| s.target as f64).collect();
    Ok((x, y))
}

impl RadiusPredictor {
    pub fn train(samples: &[TrainingSample], config: &TrainConfig) -> Result<Self> {
        Ok(Self::train_with_report(samples, config)?.0)
    }

    /// Like [`train`](Self::train), also returning the MLP's epoch report.
    pub fn train_with_report(samples: &[TrainingSample], config: &TrainConfig) -> Result<(Self, Option<FitReport>)> {
        if samples.len() < MIN_TRAINING_SAMPLES {
            return Err(Error::Param(format!(
                "need at least {MIN_TRAINING_SAMPLES} training samples, got {}",
                samples.len()
            )));
        }
        if let Some(s) = samples.iter().find(|s| s.target == 0) {
            return Err(Error::Input(format!("training target must be ≥ 1 (k = {})", s.k)));
        }
        let (mut x, y) = design_matrix(samples)?;
        let features = Standardizer::fit(&x);
        features.apply(&mut x);
        let (target_mean, target_scale) = Standardizer::fit_scalar(&y);
        let y_std = y.mapv(|v| (v - target_mean) / target_scale);

        let (model, report) = match config.kind {
            // Zero-variance targets: the fit's fixed point is the constant
            // itself, so skip the descent.
            PredictorKind::Mlp if y_std.iter().all(|&v| v == 0.0) => {
                (Regressor::Mlp(Mlp::constant(x.ncols(), &config.mlp, 0.0)), None)
            }
            PredictorKind::Mlp => {
                let (net, report) = Mlp::fit(x.view(), y_std.view(), &config.mlp);
                log::debug!("mlp stopped after {} epochs, loss {:.5}", report.epochs, report.final_loss);
                (Regressor::Mlp(net), Some(report))
            }
            PredictorKind::Linear => (Regressor::Linear(LinearModel::fit(x.view(), y_std.view())), None),
        };
        Ok((
            Self {
                m: samples[0].buckets.len(),
                features,
                target_mean,
                target_scale,
                max_radius: config.max_radius.max(1),
                model,
                cv: None,
            },
            report,
        ))
    }

    pub fn kind(&self) -> PredictorKind {
        self.model.kind()
    }

    pub fn model(&self) -> &Regressor {
        &self.model
    }

    pub fn max_radius(&self) -> u64 {
        self.max_radius
    }

    pub fn cross_validation(&self) -> Option<CvReport> {
        self.cv
    }

    pub fn set_cross_validation(&mut self, report: CvReport) {
        self.cv = Some(report);
    }

    /// Unclamped prediction in radius units.
    pub fn predict_raw(&self, buckets: &[i64], k: usize) -> Result<f64> {
        if buckets.len() != self.m {
            return Err(Error::Dimension {
                expected: self.m,
                got: buckets.len(),
            });
        }
        let mut row: Vec<f64> = buckets.iter().map(|&b| b as f64).collect();
        row.push(k as f64);
        self.features.apply_row(&mut row);
        let out = self.model.predict_row(ArrayView1::from(&row[..]));
        Ok(out * self.target_scale + self.target_mean)
    }

    /// Rounded, clamped to `[1, max_radius]`.
    pub fn predict(&self, signature: &Signature, k: usize) -> Result<u64> {
        let raw = self.predict_raw(signature.buckets(), k)?;
        if raw.is_nan() {
            return Err(Error::Search("radius predictor produced NaN".into()));
        }
        Ok(raw.round().clamp(1.0, self.max_radius as f64) as u64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        std::fs::write(path, buf).io_context(|| format!("writing predictor {}", path.display()))
    }

    fn write_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let put_all = |out: &mut W, vals: &[f64]| -> std::io::Result<()> {
            vals.iter().try_for_each(|&v| out.write_f64::<LittleEndian>(v))
        };
        out.write_all(PREDICTOR_MAGIC)?;
        out.write_u32::<LittleEndian>(PREDICTOR_VERSION)?;
        out.write_u8(match self.kind() {
            PredictorKind::Mlp => 0,
            PredictorKind::Linear => 1,
        })?;
        out.write_u32::<LittleEndian>(self.m as u32)?;
        out.write_u64::<LittleEndian>(self.max_radius)?;
        put_all(out, &self.features.mean)?;
        put_all(out, &self.features.scale)?;
        out.write_f64::<LittleEndian>(self.target_mean)?;
        out.write_f64::<LittleEndian>(self.target_scale)?;
        match &self.model {
            Regressor::Mlp(net) => {
                out.write_u32::<LittleEndian>(net.hidden() as u32)?;
                put_all(out, &net.w1.iter().copied().collect::<Vec<_>>())?;
                put_all(out, net.b1.as_slice().expect("contiguous"))?;
                put_all(out, net.w2.as_slice().expect("contiguous"))?;
                out.write_f64::<LittleEndian>(net.b2)?;
            }
            Regressor::Linear(lin) => {
                put_all(out, lin.coef.as_slice().expect("contiguous"))?;
                out.write_f64::<LittleEndian>(lin.intercept)?;
            }
        }
        match self.cv {
            None => out.write_u8(0)?,
            Some(cv) => {
                out.write_u8(1)?;
                out.write_u32::<LittleEndian>(cv.folds as u32)?;
                out.write_f64::<LittleEndian>(cv.mse)?;
                out.write_f64::<LittleEndian>(cv.r2)?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).io_context(|| format!("reading predictor {}", path.display()))?;
        let mut input = Cursor::new(&bytes[..]);
        let parsed = Self::read_from(&mut input);
        let offset = input.position();
        let fmt = |msg: String| Error::Format {
            path: path.to_path_buf(),
            offset,
            msg,
        };
        let predictor = parsed.map_err(|e| fmt(e.to_string()))?;
        if offset != bytes.len() as u64 {
            return Err(fmt(format!("{} trailing bytes", bytes.len() as u64 - offset)));
        }
        Ok(predictor)
    }

    fn read_from<R: Read>(input: &mut R) -> std::io::Result<Self> {
        use std::io::{Error as IoError, ErrorKind};
        let invalid = |msg: String| IoError::new(ErrorKind::InvalidData, msg);
        let get_all = |input: &mut R, n: usize| -> std::io::Result<Vec<f64>> {
            let mut v = vec![0.0; n];
            input.read_f64_into::<LittleEndian>(&mut v)?;
            Ok(v)
        };

        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != PREDICTOR_MAGIC {
            return Err(invalid("bad magic".into()));
        }
        let version = input.read_u32::<LittleEndian>()?;
        if version != PREDICTOR_VERSION {
            return Err(invalid(format!("unsupported version {version}")));
        }
        let kind = input.read_u8()?;
        let m = input.read_u32::<LittleEndian>()? as usize;
        let max_radius = input.read_u64::<LittleEndian>()?;
        let p = m + 1;
        let features = Standardizer {
            mean: get_all(input, p)?,
            scale: get_all(input, p)?,
        };
        let target_mean = input.read_f64::<LittleEndian>()?;
        let target_scale = input.read_f64::<LittleEndian>()?;
        let model = match kind {
            0 => {
                let hidden = input.read_u32::<LittleEndian>()? as usize;
                let w1 = Array2::from_shape_vec((p, hidden), get_all(input, p * hidden)?)
                    .map_err(|e| invalid(e.to_string()))?;
                let b1 = Array1::from(get_all(input, hidden)?);
                let w2 = Array1::from(get_all(input, hidden)?);
                let b2 = input.read_f64::<LittleEndian>()?;
                Regressor::Mlp(Mlp { w1, b1, w2, b2 })
            }
            1 => {
                let coef = Array1::from(get_all(input, p)?);
                let intercept = input.read_f64::<LittleEndian>()?;
                Regressor::Linear(LinearModel { coef, intercept })
            }
            other => return Err(invalid(format!("unknown model tag {other}"))),
        };
        let cv = match input.read_u8()? {
            0 => None,
            _ => Some(CvReport {
                folds: input.read_u32::<LittleEndian>()? as usize,
                mse: input.read_f64::<LittleEndian>()?,
                r2: input.read_f64::<LittleEndian>()?,
            }),
        };
        Ok(Self {
            m,
            features,
            target_mean,
            target_scale,
            max_radius,
            model,
            cv,
        })
    }
}

/// K-fold cross-validation over a seeded shuffle. Each fold refits the
/// standardization on its own training part.
pub fn cross_validate(samples: &[TrainingSample], config: &TrainConfig, folds: usize, seed: u64) -> Result<CvReport> {
    if folds < 2 || folds > samples.len() {
        return Err(Error::Param(format!("{folds} folds for {} samples", samples.len())));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    SplitMix64::derive(seed, 0x4B46_4F4C).shuffle(&mut order);

    let targets: Vec<f64> = samples.iter().map(|s| s.target as f64).collect();
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let variance = targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / targets.len() as f64;

    let mut sse = 0.0;
    for fold in 0..folds {
        let lo = fold * samples.len() / folds;
        let hi = (fold + 1) * samples.len() / folds;
        let train: Vec<TrainingSample> = order[..lo]
            .iter()
            .chain(&order[hi..])
            .map(|&i| samples[i].clone())
            .collect();
        let model = RadiusPredictor::train(&train, config)?;
        for &i in &order[lo..hi] {
            let s = &samples[i];
            let err = model.predict_raw(&s.buckets, s.k)? - targets[i];
            sse += err * err;
        }
    }
    let mse_raw = sse / samples.len() as f64;
    let (mse, r2) = if variance > 0.0 {
        (mse_raw / variance, 1.0 - mse_raw / variance)
    } else {
        (mse_raw, if mse_raw == 0.0 { 1.0 } else { f64::NEG_INFINITY })
    };
    Ok(CvReport { folds, mse, r2 })
}
