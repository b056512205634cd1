use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{precondition, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Pointwise nonlinearity of a dense layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    /// `x` for `x > 0`, `eˣ − 1` otherwise.
    Elu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Elu if x <= T::zero() => x.exp_m1(),
            _ => x,
        }
    }

    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Elu if x <= T::zero() => x.exp(),
            _ => T::one(),
        }
    }

    pub fn tag(self) -> u64 {
        match self {
            Activation::Linear => 0,
            Activation::Elu => 1,
        }
    }

    pub fn from_tag(tag: u64) -> Option<Self> {
        match tag {
            0 => Some(Activation::Linear),
            1 => Some(Activation::Elu),
            _ => None,
        }
    }
}

/// `x ↦ σ(Wx + b)` with `W` stored as an `out × in` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub weight: DenseMatrix<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn new(weight: DenseMatrix<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        precondition(bias.len() == weight.rows(), || {
            format!("bias of length {} for a layer with {} outputs", bias.len(), weight.rows())
        })?;
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    /// Uniform weights with variance `1/fan_in`, zero bias.
    pub fn random(inputs: usize, outputs: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let a = (3.0 / inputs as f64).sqrt();
        Self {
            weight: DenseMatrix::from_fn(outputs, inputs, |_, _| T::of(rng.random_range(-a..a))),
            bias: vec![T::zero(); outputs],
            activation,
        }
    }

    #[inline]
    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    /// Pre-activation `Wx + b`.
    pub fn affine(&self, x: &[T]) -> Vec<T> {
        let mut y = self.weight.matvec(x);
        for (yi, bi) in y.iter_mut().zip(&self.bias) {
            *yi += *bi;
        }
        y
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut y = self.affine(x);
        for v in y.iter_mut() {
            *v = self.activation.apply(*v);
        }
        y
    }

    pub fn cast<U: Scalar>(&self) -> Layer<U> {
        Layer {
            weight: self.weight.cast(),
            bias: self.bias.iter().map(|b| U::of(b.to_f64_lossy())).collect(),
            activation: self.activation,
        }
    }

    fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.bias.iter().all(|b| b.is_finite())
    }
}

/// Widths of the hidden layers; the decoder uses them in the given order from the latent
/// side and the encoder mirrors them.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub latent_dim: usize,
    pub filtered_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(latent_dim: usize, filtered_dim: usize) -> Self {
        Self {
            latent_dim,
            filtered_dim,
            hidden: vec![32; 5],
            activation: Activation::Elu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        precondition(self.latent_dim >= 1, || "latent dimension must be positive")?;
        precondition(self.filtered_dim >= 1, || "filtered dimension must be positive")?;
        precondition(self.hidden.iter().all(|&h| h >= 1), || "hidden widths must be positive")
    }
}

/// Encoder `ψ̃: R^p → R^r` and decoder `φ̃: R^r → R^p` acting on filtered coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderModel<T> {
    encoder: Vec<Layer<T>>,
    decoder: Vec<Layer<T>>,
}

impl<T: Scalar> AutoencoderModel<T> {
    pub fn new(encoder: Vec<Layer<T>>, decoder: Vec<Layer<T>>) -> Result<Self> {
        precondition(!encoder.is_empty() && !decoder.is_empty(), || "encoder and decoder need a layer each")?;
        for net in [&encoder, &decoder] {
            for pair in net.windows(2) {
                precondition(pair[0].outputs() == pair[1].inputs(), || {
                    format!("layer dims do not chain: {} -> {}", pair[0].outputs(), pair[1].inputs())
                })?;
            }
            precondition(net.iter().all(Layer::is_finite), || "non-finite weights")?;
        }
        let r = encoder.last().unwrap().outputs();
        let p = encoder[0].inputs();
        precondition(decoder[0].inputs() == r && decoder.last().unwrap().outputs() == p, || {
            format!("decoder must map R^{r} to R^{p}")
        })?;
        Ok(Self { encoder, decoder })
    }

    /// Seeded random initialisation; the output layers of both networks are linear.
    pub fn random(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dec_dims = vec![arch.latent_dim];
        dec_dims.extend(&arch.hidden);
        dec_dims.push(arch.filtered_dim);
        let mut enc_dims = dec_dims.clone();
        enc_dims.reverse();
        let build = |dims: &[usize], rng: &mut ChaCha8Rng| -> Vec<Layer<T>> {
            let last = dims.len() - 2;
            dims.windows(2)
                .enumerate()
                .map(|(k, w)| {
                    let act = if k == last { Activation::Linear } else { arch.activation };
                    Layer::random(w[0], w[1], act, rng)
                })
                .collect()
        };
        let encoder = build(&enc_dims, &mut rng);
        let decoder = build(&dec_dims, &mut rng);
        Self::new(encoder, decoder)
    }

    /// Identity chart with `r = p`: one linear identity layer on each side.
    pub fn identity(p: usize) -> Self {
        let layer = || Layer {
            weight: DenseMatrix::identity(p),
            bias: vec![T::zero(); p],
            activation: Activation::Linear,
        };
        Self {
            encoder: vec![layer()],
            decoder: vec![layer()],
        }
    }

    pub fn encoder(&self) -> &[Layer<T>] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[Layer<T>] {
        &self.decoder
    }

    #[inline]
    pub fn latent_dim(&self) -> usize {
        self.decoder[0].inputs()
    }

    #[inline]
    pub fn filtered_dim(&self) -> usize {
        self.encoder[0].inputs()
    }

    /// `ψ̃(y)`.
    pub fn encode_filtered(&self, y: &[T]) -> Result<Vec<T>> {
        precondition(y.len() == self.filtered_dim(), || {
            format!("encoder expects {} inputs, got {}", self.filtered_dim(), y.len())
        })?;
        Ok(run(&self.encoder, y))
    }

    /// `φ̃(z)`.
    pub fn decode_filtered(&self, z: &[T]) -> Result<Vec<T>> {
        precondition(z.len() == self.latent_dim(), || {
            format!("decoder expects {} inputs, got {}", self.latent_dim(), z.len())
        })?;
        Ok(run(&self.decoder, z))
    }

    /// `∂φ̃/∂z` at `z` by forward-mode propagation, `p × r`.
    pub fn decoder_jacobian(&self, z: &[T]) -> Result<DenseMatrix<T>> {
        Ok(self.decode_with_jacobian(z)?.1)
    }

    /// `φ̃(z)` together with its Jacobian.
    pub fn decode_with_jacobian(&self, z: &[T]) -> Result<(Vec<T>, DenseMatrix<T>)> {
        precondition(z.len() == self.latent_dim(), || {
            format!("decoder expects {} inputs, got {}", self.latent_dim(), z.len())
        })?;
        let mut x = z.to_vec();
        let mut jac = DenseMatrix::<T>::identity(z.len());
        for layer in &self.decoder {
            let pre = layer.affine(&x);
            let slopes: Vec<T> = pre.iter().map(|&a| layer.activation.derivative(a)).collect();
            let mut next = layer.weight.matmul(&jac);
            for j in 0..next.cols() {
                for (v, &s) in next.col_mut(j).iter_mut().zip(&slopes) {
                    *v *= s;
                }
            }
            x = pre.into_iter().map(|a| layer.activation.apply(a)).collect();
            jac = next;
        }
        Ok((x, jac))
    }

    pub fn cast<U: Scalar>(&self) -> AutoencoderModel<U> {
        AutoencoderModel {
            encoder: self.encoder.iter().map(Layer::cast).collect(),
            decoder: self.decoder.iter().map(Layer::cast).collect(),
        }
    }
}

fn run<T: Scalar>(layers: &[Layer<T>], x: &[T]) -> Vec<T> {
    layers.iter().fold(x.to_vec(), |h, l| l.forward(&h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elu_values_and_slopes() {
        assert_eq!(Activation::Elu.apply(2.0f64), 2.0);
        assert!((Activation::Elu.apply(-1.0f64) - (-1.0f64).exp_m1()).abs() < 1e-15);
        assert_eq!(Activation::Elu.derivative(0.5f64), 1.0);
        assert!((Activation::Elu.derivative(-2.0f64) - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(Activation::from_tag(Activation::Elu.tag()), Some(Activation::Elu));
        assert_eq!(Activation::from_tag(7), None);
    }

    #[test]
    fn random_model_has_expected_shapes() {
        let arch = Architecture {
            latent_dim: 3,
            filtered_dim: 10,
            hidden: vec![8, 6],
            activation: Activation::Elu,
        };
        let m = AutoencoderModel::<f64>::random(&arch, 1).unwrap();
        assert_eq!(m.encoder().len(), 3);
        assert_eq!(m.decoder()[0].inputs(), 3);
        assert_eq!(m.decoder().last().unwrap().activation, Activation::Linear);
        assert_eq!(m.encode_filtered(&[0.1; 10]).unwrap().len(), 3);
        assert_eq!(m.decode_filtered(&[0.1; 3]).unwrap().len(), 10);
        assert!(m.decode_filtered(&[0.1; 4]).is_err());
        assert_eq!(m, AutoencoderModel::random(&arch, 1).unwrap());
    }

    #[test]
    fn rejects_broken_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = vec![Layer::<f64>::random(4, 2, Activation::Linear, &mut rng)];
        let dec = vec![Layer::random(3, 4, Activation::Linear, &mut rng)];
        assert!(AutoencoderModel::new(enc, dec).is_err());
    }

    #[test]
    fn linear_decoder_jacobian_is_its_matrix() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, -1.0], &[0.5, 0.0]]);
        let dec = vec![Layer::new(a.clone(), vec![1.0, 0.0, -1.0], Activation::Linear).unwrap()];
        let enc = vec![Layer::new(DenseMatrix::zeros(2, 3), vec![0.0; 2], Activation::Linear).unwrap()];
        let m = AutoencoderModel::new(enc, dec).unwrap();
        for z in [[0.0, 0.0], [3.0, -7.0]] {
            assert_eq!(m.decoder_jacobian(&z).unwrap(), a);
        }
    }

    #[test]
    fn positive_elu_layer_has_weight_jacobian() {
        let w = DenseMatrix::from_rows(&[&[1.0, 0.5], &[0.2, 2.0]]);
        let dec = vec![Layer::new(w.clone(), vec![1.0, 1.0], Activation::Elu).unwrap()];
        let enc = vec![Layer::new(DenseMatrix::zeros(2, 2), vec![0.0; 2], Activation::Linear).unwrap()];
        let m = AutoencoderModel::new(enc, dec).unwrap();
        assert_eq!(m.decoder_jacobian(&[0.3, 0.4]).unwrap(), w);
    }
}
