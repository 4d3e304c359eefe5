use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::loss::PosteriorMatrix;
use crate::scalar::Scalar;

/// Per-layer arrays shaped like an [`MlpModel`]'s parameters.
///
/// Weight `l` is `(dims[l+1], dims[l])` row-major, bias `l` has `dims[l+1]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBuffers<T> {
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Scalar> ParamBuffers<T> {
    pub fn zeros(layer_dims: &[usize]) -> Self {
        let weights = layer_dims.windows(2).map(|w| Matrix::zeros(w[1], w[0])).collect();
        let biases = layer_dims.windows(2).map(|w| vec![T::zero(); w[1]]).collect();
        Self { weights, biases }
    }

    /// True when every weight and bias matches the shapes implied by `layer_dims`.
    pub fn matches(&self, layer_dims: &[usize]) -> bool {
        let layers = layer_dims.len().saturating_sub(1);
        self.weights.len() == layers
            && self.biases.len() == layers
            && layer_dims
                .windows(2)
                .enumerate()
                .all(|(l, w)| self.weights[l].shape() == (w[1], w[0]) && self.biases[l].len() == w[1])
    }

    /// Parameter tensors in canonical order: W0, b0, W1, b1, ...
    pub fn tensors(&self) -> impl Iterator<Item = &[T]> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        self.weights.iter_mut().zip(self.biases.iter_mut()).flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn len(&self) -> usize {
        self.tensors().map(<[T]>::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fully connected ReLU network ending in a softmax over `C` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel<T> {
    layer_dims: Vec<usize>,
    params: ParamBuffers<T>,
}

/// Activations recorded by a forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    /// `inputs[l]` is the input to layer `l` (post-ReLU for `l > 0`).
    pub(crate) inputs: Vec<Matrix<T>>,
    pub posteriors: PosteriorMatrix<T>,
}

impl<T> ForwardTrace<T> {
    pub fn posteriors(&self) -> &PosteriorMatrix<T> {
        &self.posteriors
    }
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::config("an MLP needs at least an input and an output dimension"));
    }
    if layer_dims.contains(&0) {
        return Err(Error::config(format!("layer dimensions must be positive, got {layer_dims:?}")));
    }
    Ok(())
}

impl<T: Scalar> MlpModel<T> {
    /// All weights and biases zero.
    pub fn zeroed(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        Ok(Self { layer_dims: layer_dims.to_vec(), params: ParamBuffers::zeros(layer_dims) })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(layer_dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut model = Self::zeroed(layer_dims)?;
        for (l, w) in model.params.weights.iter_mut().enumerate() {
            let (fan_in, fan_out) = (layer_dims[l] as f64, layer_dims[l + 1] as f64);
            let limit = (6.0 / (fan_in + fan_out)).sqrt();
            for v in w.as_mut_slice() {
                *v = T::lit(rng.random_range(-limit..limit));
            }
        }
        Ok(model)
    }

    pub fn from_params(layer_dims: &[usize], params: ParamBuffers<T>) -> Result<Self> {
        check_dims(layer_dims)?;
        if !params.matches(layer_dims) {
            return Err(Error::config(format!("parameter shapes do not match layer dims {layer_dims:?}")));
        }
        if !params.is_finite() {
            return Err(Error::input("model parameters must be finite"));
        }
        Ok(Self { layer_dims: layer_dims.to_vec(), params })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_dims.last().expect("validated non-empty")
    }

    pub fn params(&self) -> &ParamBuffers<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamBuffers<T> {
        &mut self.params
    }

    pub fn forward(&self, inputs: &Matrix<T>) -> Result<PosteriorMatrix<T>> {
        Ok(self.forward_trace(inputs)?.posteriors)
    }

    /// Raw output-layer scores before the softmax.
    pub fn logits(&self, inputs: &Matrix<T>) -> Result<Matrix<T>> {
        let mut acts = self.hidden_activations(inputs)?;
        let last = acts.pop().expect("at least the input");
        self.affine(self.num_layers() - 1, &last)
    }

    pub fn forward_trace(&self, inputs: &Matrix<T>) -> Result<ForwardTrace<T>> {
        let acts = self.hidden_activations(inputs)?;
        let out = self.num_layers() - 1;
        let logits = self.affine(out, acts.last().expect("at least the input"))?;
        let posteriors = PosteriorMatrix::softmax(&logits);
        if !posteriors.as_matrix().is_finite() {
            return Err(Error::Numeric { layer: out, detail: "non-finite softmax output".into() });
        }
        Ok(ForwardTrace { inputs: acts, posteriors })
    }

    /// Inputs to each layer: the raw batch followed by each hidden ReLU output.
    fn hidden_activations(&self, inputs: &Matrix<T>) -> Result<Vec<Matrix<T>>> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::config(format!(
                "input has {} features, model expects {}",
                inputs.cols(),
                self.input_dim()
            )));
        }
        if !inputs.is_finite() {
            return Err(Error::input("inputs contain non-finite values"));
        }
        let mut acts = Vec::with_capacity(self.num_layers());
        acts.push(inputs.clone());
        for l in 0..self.num_layers() - 1 {
            let mut z = self.affine(l, &acts[l])?;
            for v in z.as_mut_slice() {
                if *v < T::zero() {
                    *v = T::zero();
                }
            }
            acts.push(z);
        }
        Ok(acts)
    }

    fn affine(&self, l: usize, a: &Matrix<T>) -> Result<Matrix<T>> {
        let w = &self.params.weights[l];
        let b = &self.params.biases[l];
        let (out_dim, in_dim) = w.shape();
        let mut z = Matrix::zeros(a.rows(), out_dim);
        for i in 0..a.rows() {
            let x = a.row(i);
            let zi = z.row_mut(i);
            for (o, zo) in zi.iter_mut().enumerate() {
                let wo = w.row(o);
                let mut acc = b[o];
                for k in 0..in_dim {
                    acc += wo[k] * x[k];
                }
                *zo = acc;
            }
        }
        if !z.is_finite() {
            return Err(Error::Numeric { layer: l, detail: "non-finite pre-activation".into() });
        }
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_gives_uniform_rows() {
        let model = MlpModel::<f64>::zeroed(&[3, 4]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 5.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let p = model.forward(&x).unwrap();
        for i in 0..2 {
            for c in 0..4 {
                assert_eq!(p.get(i, c), 0.25);
            }
        }
    }

    #[test]
    fn logits_ln2_zero_give_two_thirds() {
        // Identity-like single layer: logits = (ln 2 * x0, 0).
        let mut model = MlpModel::<f64>::zeroed(&[1, 2]).unwrap();
        model.params_mut().weights[0].set(0, 0, std::f64::consts::LN_2);
        let p = model.forward(&Matrix::from_rows(&[vec![1.0]]).unwrap()).unwrap();
        assert!((p.get(0, 0) - 2.0 / 3.0).abs() < 1e-9);
        assert!((p.get(0, 1) - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn glorot_init_within_bounds_and_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = MlpModel::<f64>::init(&[10, 6, 3], &mut rng).unwrap();
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(model.params().weights[0].as_slice().iter().all(|v| v.abs() <= limit));
        assert!(model.params().biases.iter().flatten().all(|&b| b == 0.0));
        assert_eq!(model.params().weights[1].shape(), (3, 6));
        assert_eq!(model.params().len(), 10 * 6 + 6 + 6 * 3 + 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = MlpModel::<f64>::zeroed(&[2, 3]).unwrap();
        let wrong = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(matches!(model.forward(&wrong), Err(Error::Config(_))));
        let nan = Matrix::from_rows(&[vec![1.0, f64::NAN]]).unwrap();
        assert!(matches!(model.forward(&nan), Err(Error::Input(_))));
        assert!(MlpModel::<f64>::zeroed(&[3]).is_err());
        assert!(MlpModel::<f64>::zeroed(&[3, 0, 2]).is_err());
    }

    #[test]
    fn huge_logits_report_layer() {
        let mut model = MlpModel::<f64>::zeroed(&[1, 2, 2]).unwrap();
        model.params_mut().weights[0].set(0, 0, f64::MAX);
        let x = Matrix::from_rows(&[vec![10.0]]).unwrap();
        match model.forward(&x) {
            Err(Error::Numeric { layer, .. }) => assert_eq!(layer, 0),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn f32_forward_normalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = MlpModel::<f32>::init(&[4, 8, 3], &mut rng).unwrap();
        let x = Matrix::from_rows(&[vec![0.3f32, -1.0, 2.0, 0.5]]).unwrap();
        let p = model.forward(&x).unwrap();
        let s: f32 = p.row(0).iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
}
