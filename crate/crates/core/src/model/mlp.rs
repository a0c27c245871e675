//! Single-hidden-layer ReLU regressor trained with mini-batch Adam.
//!
//! Defaults follow the common toolkit settings: 100 hidden units, squared
//! error with a small L2 penalty, learning rate 1e-3, batches of 200, at most
//! 200 epochs, stop after 10 epochs without a 1e-4 loss improvement.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use crate::lsh::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub tolerance: f64,
    pub patience: usize,
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 100,
            learning_rate: 1e-3,
            batch_size: 200,
            max_epochs: 200,
            tolerance: 1e-4,
            patience: 10,
            l2: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub(crate) w1: Array2<f64>,
    pub(crate) b1: Array1<f64>,
    pub(crate) w2: Array1<f64>,
    pub(crate) b2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub epochs: usize,
    pub final_loss: f64,
}

/// First and second moment estimates for one parameter tensor.
struct Moments<D: ndarray::Dimension> {
    m: ndarray::Array<f64, D>,
    v: ndarray::Array<f64, D>,
}

impl<D: ndarray::Dimension> Moments<D> {
    fn like(p: &ndarray::Array<f64, D>) -> Self {
        Self {
            m: ndarray::Array::zeros(p.raw_dim()),
            v: ndarray::Array::zeros(p.raw_dim()),
        }
    }

    fn step(&mut self, param: &mut ndarray::Array<f64, D>, grad: &ndarray::Array<f64, D>, lr_t: f64, cfg: &MlpConfig) {
        Zip::from(param)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                *p -= lr_t * *m / (v.sqrt() + cfg.epsilon);
            });
    }
}

impl Mlp {
    pub fn inputs(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    /// A network whose output is `value` everywhere: hidden weights are
    /// initialized as usual but the output layer is zero.
    pub fn constant(inputs: usize, cfg: &MlpConfig, value: f64) -> Self {
        let mut rng = SplitMix64::derive(cfg.seed, 0x4D4C_5031);
        let mut net = Self::init(inputs, cfg, &mut rng);
        net.w2.fill(0.0);
        net.b2 = value;
        net
    }

    fn init(inputs: usize, cfg: &MlpConfig, rng: &mut SplitMix64) -> Self {
        let bound1 = (6.0 / (inputs + cfg.hidden) as f64).sqrt();
        let bound2 = (6.0 / (cfg.hidden + 1) as f64).sqrt();
        let mut draw = |b: f64| rng.uniform(-b, b);
        let w1 = Array2::from_shape_simple_fn((inputs, cfg.hidden), || draw(bound1));
        let b1 = Array1::from_shape_simple_fn(cfg.hidden, || draw(bound1));
        let w2 = Array1::from_shape_simple_fn(cfg.hidden, || draw(bound2));
        let b2 = draw(bound2);
        Self { w1, b1, w2, b2 }
    }

    fn hidden_activations(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.dot(&self.w1);
        h += &self.b1;
        h.mapv_inplace(|v| v.max(0.0));
        h
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.hidden_activations(x).dot(&self.w2) + self.b2
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        let mut h = x.dot(&self.w1);
        h += &self.b1;
        h.iter().zip(&self.w2).map(|(&a, &w)| a.max(0.0) * w).sum::<f64>() + self.b2
    }

    /// Fits on already-standardized inputs and targets.
    pub fn fit(x: ArrayView2<f64>, y: ArrayView1<f64>, cfg: &MlpConfig) -> (Self, FitReport) {
        let (n, inputs) = x.dim();
        assert_eq!(n, y.len(), "row count mismatch");
        assert!(n > 0, "no training rows");
        let mut rng = SplitMix64::derive(cfg.seed, 0x4D4C_5031);
        let mut net = Self::init(inputs, cfg, &mut rng);
        let mut mw1 = Moments::like(&net.w1);
        let mut mb1 = Moments::like(&net.b1);
        let mut mw2 = Moments::like(&net.w2);
        let (mut mb2, mut vb2) = (0.0f64, 0.0f64);

        let batch = cfg.batch_size.clamp(1, n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut step = 0i32;
        let mut best = f64::INFINITY;
        let mut stale = 0usize;
        let mut report = FitReport {
            epochs: 0,
            final_loss: f64::NAN,
        };
        let mut xb = Array2::<f64>::zeros((batch, inputs));
        let mut yb = Array1::<f64>::zeros(batch);

        for epoch in 0..cfg.max_epochs {
            rng.shuffle(&mut order);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                let bs = chunk.len();
                for (row, &idx) in chunk.iter().enumerate() {
                    xb.row_mut(row).assign(&x.row(idx));
                    yb[row] = y[idx];
                }
                let xv = xb.slice(s![..bs, ..]);
                let yv = yb.slice(s![..bs]);

                let h = net.hidden_activations(xv);
                let out = h.dot(&net.w2) + net.b2;
                let err = &out - &yv;
                let penalty = 0.5 * cfg.l2 * (net.w1.iter().map(|w| w * w).sum::<f64>()
                    + net.w2.iter().map(|w| w * w).sum::<f64>())
                    / bs as f64;
                epoch_loss += (0.5 * err.iter().map(|e| e * e).sum::<f64>() / bs as f64 + penalty) * bs as f64;

                let d_out = err / bs as f64;
                let g_w2 = h.t().dot(&d_out) + &net.w2 * (cfg.l2 / bs as f64);
                let g_b2 = d_out.sum();
                let mut d_h = d_out
                    .view()
                    .insert_axis(Axis(1))
                    .dot(&net.w2.view().insert_axis(Axis(0)));
                Zip::from(&mut d_h).and(&h).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                let g_w1 = xv.t().dot(&d_h) + &net.w1 * (cfg.l2 / bs as f64);
                let g_b1 = d_h.sum_axis(Axis(0));

                step += 1;
                let lr_t = cfg.learning_rate * (1.0 - cfg.beta2.powi(step)).sqrt() / (1.0 - cfg.beta1.powi(step));
                mw1.step(&mut net.w1, &g_w1, lr_t, cfg);
                mb1.step(&mut net.b1, &g_b1, lr_t, cfg);
                mw2.step(&mut net.w2, &g_w2, lr_t, cfg);
                mb2 = cfg.beta1 * mb2 + (1.0 - cfg.beta1) * g_b2;
                vb2 = cfg.beta2 * vb2 + (1.0 - cfg.beta2) * g_b2 * g_b2;
                net.b2 -= lr_t * mb2 / (vb2.sqrt() + cfg.epsilon);
            }
            let loss = epoch_loss / n as f64;
            report = FitReport {
                epochs: epoch + 1,
                final_loss: loss,
            };
            if loss > best - cfg.tolerance {
                stale += 1;
            } else {
                stale = 0;
            }
            best = best.min(loss);
            if stale > cfg.patience {
                break;
            }
        }
        (net, report)
    }
}
