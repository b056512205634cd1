use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{precondition, Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

use super::model::{Architecture, AutoencoderModel, Layer};

/// Optimiser settings for [`train_autoencoder`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Share of the columns held out for model selection, in `[0, 1)`.
    pub validation_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        precondition(self.epochs >= 1 && self.batch_size >= 1, || "epochs and batch size must be positive")?;
        precondition(self.learning_rate > 0.0 && self.learning_rate.is_finite(), || {
            "learning rate must be positive"
        })?;
        precondition((0.0..1.0).contains(&self.validation_fraction), || {
            "validation fraction must lie in [0, 1)"
        })
    }
}

/// Mean squared reconstruction errors after one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub train: f64,
    pub validation: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainingOutcome<T> {
    pub model: AutoencoderModel<T>,
    pub history: Vec<EpochLoss>,
    /// Epoch whose weights were kept (lowest validation loss, or training loss without a
    /// validation split).
    pub best_epoch: usize,
}

/// Trains `φ̃ ∘ ψ̃` to reproduce the columns of `data` (`p × n` filtered coordinates).
///
/// Inputs are standardised per coordinate and outputs mapped back by the inverse affine map;
/// both maps are fixed during training and folded into the first encoder and last decoder
/// layers of the returned model. The loss is the plain mean squared error on the filtered
/// coordinates.
pub fn train_autoencoder<T: Scalar>(
    data: &DenseMatrix<T>,
    arch: &Architecture,
    config: &TrainingConfig,
) -> Result<TrainingOutcome<T>> {
    arch.validate()?;
    config.validate()?;
    let (p, n) = data.shape();
    precondition(n >= 1, || "empty training set")?;
    precondition(p == arch.filtered_dim, || {
        format!("data has {p} coordinates, architecture expects {}", arch.filtered_dim)
    })?;
    precondition(arch.latent_dim < p, || {
        format!("latent dimension {} must be below the filtered dimension {p}", arch.latent_dim)
    })?;
    data.ensure_finite("training data")?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64) * config.validation_fraction).floor() as usize;
    let n_val = n_val.min(n - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();

    let (mean, scale) = standardisation(data, &train_idx);
    let mut net = Net {
        layers: {
            let m = AutoencoderModel::<T>::random(arch, config.seed)?;
            m.encoder().iter().chain(m.decoder()).cloned().collect()
        },
        n_encoder: arch.hidden.len() + 1,
        mean,
        scale,
    };
    let mut adam = Adam::new(&net.layers, config.learning_rate);
    let val_data = data.select_cols(&val_idx);
    let train_data = data.select_cols(&train_idx);

    let mut history = Vec::with_capacity(config.epochs);
    let mut best = (f64::INFINITY, 0usize, net.layers.clone());
    let mut shuffled = train_idx.clone();
    for epoch in 0..config.epochs {
        shuffled.shuffle(&mut rng);
        for batch in shuffled.chunks(config.batch_size) {
            let x = data.select_cols(batch);
            let grads = net.gradients(&x);
            adam.step(&mut net.layers, &grads);
        }
        let train = net.loss(&train_data);
        let validation = (!val_idx.is_empty()).then(|| net.loss(&val_data));
        if !train.is_finite() || validation.is_some_and(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        let score = validation.unwrap_or(train);
        if score < best.0 {
            best = (score, epoch, net.layers.clone());
        }
        if epoch % 500 == 0 {
            debug!("epoch {epoch}: train {train:.3e}, validation {validation:?}");
        }
        history.push(EpochLoss { train, validation });
    }
    net.layers = best.2;
    Ok(TrainingOutcome {
        model: net.fold()?,
        history,
        best_epoch: best.1,
    })
}

fn standardisation<T: Scalar>(data: &DenseMatrix<T>, cols: &[usize]) -> (Vec<T>, Vec<T>) {
    let p = data.rows();
    let n = T::of(cols.len() as f64);
    let mut mean = vec![T::zero(); p];
    for &j in cols {
        for (m, &x) in mean.iter_mut().zip(data.col(j)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut scale = vec![T::zero(); p];
    for &j in cols {
        for ((s, &x), &m) in scale.iter_mut().zip(data.col(j)).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    scale.iter_mut().for_each(|s| *s = (*s / n).sqrt());
    let top = scale.iter().fold(T::zero(), |a, &b| a.max(b));
    let floor = if top > T::zero() { top * T::of(1e-6) } else { T::one() };
    scale.iter_mut().for_each(|s| *s = s.max(floor));
    (mean, scale)
}

struct Net<T> {
    layers: Vec<Layer<T>>,
    n_encoder: usize,
    mean: Vec<T>,
    scale: Vec<T>,
}

struct LayerGrad<T> {
    weight: DenseMatrix<T>,
    bias: Vec<T>,
}

impl<T: Scalar> Net<T> {
    fn standardise(&self, y: &DenseMatrix<T>) -> DenseMatrix<T> {
        DenseMatrix::from_fn(y.rows(), y.cols(), |i, j| (y[(i, j)] - self.mean[i]) / self.scale[i])
    }

    /// Forward pass keeping every layer input and pre-activation.
    fn forward(&self, y: &DenseMatrix<T>) -> (Vec<DenseMatrix<T>>, Vec<DenseMatrix<T>>) {
        let mut inputs = vec![self.standardise(y)];
        let mut pres = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut pre = layer.weight.matmul(inputs.last().unwrap());
            for j in 0..pre.cols() {
                for (v, b) in pre.col_mut(j).iter_mut().zip(&layer.bias) {
                    *v += *b;
                }
            }
            let mut act = pre.clone();
            for j in 0..act.cols() {
                act.col_mut(j).iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            }
            pres.push(pre);
            inputs.push(act);
        }
        (inputs, pres)
    }

    fn output(&self, out: &DenseMatrix<T>) -> DenseMatrix<T> {
        DenseMatrix::from_fn(out.rows(), out.cols(), |i, j| out[(i, j)] * self.scale[i] + self.mean[i])
    }

    fn loss(&self, y: &DenseMatrix<T>) -> f64 {
        if y.cols() == 0 {
            return 0.0;
        }
        let (inputs, _) = self.forward(y);
        let rec = self.output(inputs.last().unwrap());
        let sq: f64 = rec
            .data()
            .iter()
            .zip(y.data())
            .map(|(a, b)| (*a - *b).to_f64_lossy().powi(2))
            .sum();
        sq / (y.rows() * y.cols()) as f64
    }

    fn gradients(&self, y: &DenseMatrix<T>) -> Vec<LayerGrad<T>> {
        let (inputs, pres) = self.forward(y);
        let rec = self.output(inputs.last().unwrap());
        let norm = T::of(2.0 / (y.rows() * y.cols()) as f64);
        // dL/d(network output)
        let mut delta = DenseMatrix::from_fn(y.rows(), y.cols(), |i, j| norm * self.scale[i] * (rec[(i, j)] - y[(i, j)]));
        let mut grads = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let pre = &pres[k];
            for j in 0..delta.cols() {
                for (d, &a) in delta.col_mut(j).iter_mut().zip(pre.col(j)) {
                    *d *= layer.activation.derivative(a);
                }
            }
            let x = &inputs[k];
            let mut gw = DenseMatrix::zeros(layer.outputs(), layer.inputs());
            let mut gb = vec![T::zero(); layer.outputs()];
            for b in 0..delta.cols() {
                let db = delta.col(b);
                for (g, &d) in gb.iter_mut().zip(db) {
                    *g += d;
                }
                for (c, &xc) in x.col(b).iter().enumerate() {
                    if xc != T::zero() {
                        for (g, &d) in gw.col_mut(c).iter_mut().zip(db) {
                            *g += xc * d;
                        }
                    }
                }
            }
            if k > 0 {
                delta = layer.weight.tr_matmul(&delta);
            }
            grads.push(LayerGrad { weight: gw, bias: gb });
        }
        grads.reverse();
        grads
    }

    /// Folds the fixed standardisation maps into the outer layers.
    fn fold(self) -> Result<AutoencoderModel<T>> {
        let Net {
            mut layers,
            n_encoder,
            mean,
            scale,
        } = self;
        let first = &mut layers[0];
        let shift: Vec<T> = mean.iter().zip(&scale).map(|(m, s)| *m / *s).collect();
        let correction = first.weight.matvec(&shift);
        for (b, c) in first.bias.iter_mut().zip(correction) {
            *b -= c;
        }
        for (j, s) in scale.iter().enumerate() {
            first.weight.col_mut(j).iter_mut().for_each(|w| *w /= *s);
        }
        let last = layers.last_mut().unwrap();
        last.weight.scale_rows(&scale);
        for ((b, s), m) in last.bias.iter_mut().zip(&scale).zip(&mean) {
            *b = *b * *s + *m;
        }
        let decoder = layers.split_off(n_encoder);
        AutoencoderModel::new(layers, decoder)
    }
}

struct Adam<T> {
    lr: T,
    t: i32,
    m: Vec<LayerGrad<T>>,
    v: Vec<LayerGrad<T>>,
}

impl<T: Scalar> Adam<T> {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(layers: &[Layer<T>], lr: f64) -> Self {
        let zeros = || {
            layers
                .iter()
                .map(|l| LayerGrad {
                    weight: DenseMatrix::zeros(l.outputs(), l.inputs()),
                    bias: vec![T::zero(); l.outputs()],
                })
                .collect::<Vec<_>>()
        };
        Self {
            lr: T::of(lr),
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    fn step(&mut self, layers: &mut [Layer<T>], grads: &[LayerGrad<T>]) {
        self.t += 1;
        let (b1, b2, eps) = (T::of(Self::BETA1), T::of(Self::BETA2), T::of(Self::EPS));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let alpha = self.lr * c2.sqrt() / c1;
        let update = |p: &mut T, g: T, m: &mut T, v: &mut T| {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            *p -= alpha * *m / (v.sqrt() + eps);
        };
        for (((layer, g), m), v) in layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let wd = layer.weight.data_mut();
            let md = m.weight.data_mut();
            let vd = v.weight.data_mut();
            for (((p, &gi), mi), vi) in wd.iter_mut().zip(g.weight.data()).zip(md.iter_mut()).zip(vd.iter_mut()) {
                update(p, gi, mi, vi);
            }
            for (((p, &gi), mi), vi) in layer.bias.iter_mut().zip(&g.bias).zip(&mut m.bias).zip(&mut v.bias) {
                update(p, gi, mi, vi);
            }
        }
    }
}
