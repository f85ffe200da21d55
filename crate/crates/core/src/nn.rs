//! Dense multilayer-perceptron engine with exact backpropagation and Adam.
//!
//! Batches are row-major: a batch of B samples with dimension d is a B×d
//! matrix, a layer with weights W (in×out) and bias b computes
//! `A = act(X·W + b)` row by row. Everything is `f64`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::DenseMatrix;
use crate::{Error, Result};

/// Probabilities produced by the softmax head are floored at this value and
/// the row renormalized, so downstream logs stay finite.
pub const PROB_CLAMP: f64 = 1e-7;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Linear,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

/// A dense layer: weights are input_dim×output_dim, bias has output_dim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

impl Layer {
    /// Xavier-uniform weights in ±sqrt(6/(fan_in+fan_out)), zero biases.
    pub fn init(spec: LayerSpec, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (spec.input_dim + spec.output_dim) as f64).sqrt();
        let weights = DenseMatrix::from_fn(spec.input_dim, spec.output_dim, |_, _| {
            rng.random_range(-limit..limit)
        });
        Layer {
            spec,
            weights,
            bias: vec![0.0; spec.output_dim],
        }
    }
}

/// Per-layer pre- and post-activation matrices kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: DenseMatrix,
    pub pre: Vec<DenseMatrix>,
    pub post: Vec<DenseMatrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &DenseMatrix {
        self.post.last().unwrap_or(&self.input)
    }
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub d_weights: DenseMatrix,
    pub d_bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrads {
                    d_weights: DenseMatrix::zeros(l.spec.input_dim, l.spec.output_dim),
                    d_bias: vec![0.0; l.spec.output_dim],
                })
                .collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &MlpGrads) {
        assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.d_weights.axpy(alpha, &b.d_weights);
            for (x, &y) in a.d_bias.iter_mut().zip(&b.d_bias) {
                *x += alpha * y;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.d_weights.all_finite() && l.d_bias.iter().all(|x| x.is_finite()))
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

impl Mlp {
    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.spec.input_dim).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.spec.output_dim).unwrap_or(0)
    }

    /// Runs the batch through every layer, keeping the trace for `backward`.
    pub fn forward(&self, batch: &DenseMatrix) -> Result<ForwardTrace> {
        if batch.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = batch;
        for layer in &self.layers {
            let mut z = current.matmul(&layer.weights);
            for i in 0..z.rows() {
                for (v, &b) in z.row_mut(i).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            let a = apply_activation(layer.spec.activation, &z);
            pre.push(z);
            post.push(a);
            current = post.last().unwrap();
        }
        Ok(ForwardTrace {
            input: batch.clone(),
            pre,
            post,
        })
    }

    /// Backpropagates `d_output` (the gradient of a scalar loss with respect
    /// to the final activation). Returns parameter gradients and the gradient
    /// with respect to the input batch.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        d_output: &DenseMatrix,
    ) -> Result<(MlpGrads, DenseMatrix)> {
        let out = trace.output();
        if d_output.rows() != out.rows() || d_output.cols() != out.cols() {
            return Err(Error::DimensionMismatch(format!(
                "output gradient is {}x{}, final activation is {}x{}",
                d_output.rows(),
                d_output.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d_post = d_output.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let d_z = activation_backward(layer.spec.activation, &trace.pre[l], &trace.post[l], &d_post);
            let prev = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            let d_weights = prev.matmul_tn(&d_z);
            let d_bias = d_z.col_sums();
            d_post = d_z.matmul_nt(&layer.weights);
            grads.push(LayerGrads { d_weights, d_bias });
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, d_post))
    }
}

fn apply_activation(activation: Activation, z: &DenseMatrix) -> DenseMatrix {
    match activation {
        Activation::Linear => z.clone(),
        Activation::Relu => z.map(|x| if x > 0.0 { x } else { 0.0 }),
        Activation::Softmax => {
            let mut out = z.clone();
            for i in 0..out.rows() {
                softmax_row(out.row_mut(i));
            }
            out
        }
    }
}

/// Numerically stable softmax with a probability floor: subtract the row max,
/// exponentiate, normalize, then clamp to [PROB_CLAMP, 1-PROB_CLAMP] and
/// renormalize so the row still sums to exactly one.
fn softmax_row(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
    if row.iter().any(|&p| p < PROB_CLAMP) {
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = v.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

fn activation_backward(
    activation: Activation,
    pre: &DenseMatrix,
    post: &DenseMatrix,
    d_post: &DenseMatrix,
) -> DenseMatrix {
    match activation {
        Activation::Linear => d_post.clone(),
        Activation::Relu => DenseMatrix::from_fn(pre.rows(), pre.cols(), |i, j| {
            if pre.get(i, j) > 0.0 {
                d_post.get(i, j)
            } else {
                0.0
            }
        }),
        // Full softmax Jacobian-vector product per row:
        // dz_j = p_j * (da_j - sum_k da_k * p_k)
        Activation::Softmax => {
            let mut out = DenseMatrix::zeros(post.rows(), post.cols());
            for i in 0..post.rows() {
                let p = post.row(i);
                let da = d_post.row(i);
                let dot: f64 = p.iter().zip(da).map(|(&pk, &dk)| pk * dk).sum();
                for (j, o) in out.row_mut(i).iter_mut().enumerate() {
                    *o = p[j] * (da[j] - dot);
                }
            }
            out
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Moments {
    m_weights: DenseMatrix,
    v_weights: DenseMatrix,
    m_bias: Vec<f64>,
    v_bias: Vec<f64>,
}

impl Moments {
    fn zeros(spec: &LayerSpec) -> Self {
        Moments {
            m_weights: DenseMatrix::zeros(spec.input_dim, spec.output_dim),
            v_weights: DenseMatrix::zeros(spec.input_dim, spec.output_dim),
            m_bias: vec![0.0; spec.output_dim],
            v_bias: vec![0.0; spec.output_dim],
        }
    }
}

/// First/second-moment accumulators for every parameter, plus a step counter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    step: u64,
    moments: Vec<Moments>,
}

impl AdamState {
    fn new(specs: &[LayerSpec]) -> Self {
        AdamState {
            step: 0,
            moments: specs.iter().map(Moments::zeros).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Gradients for the full model, mirroring its three parameter groups.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub encoder: MlpGrads,
    pub decoder: MlpGrads,
    pub head: MlpGrads,
}

impl ModelGrads {
    pub fn zeros_like(model: &GldcModel) -> Self {
        ModelGrads {
            encoder: MlpGrads::zeros_like(&model.encoder),
            decoder: MlpGrads::zeros_like(&model.decoder),
            head: MlpGrads::zeros_like(&model.head),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.encoder.all_finite() && self.decoder.all_finite() && self.head.all_finite()
    }
}

/// Autoencoder plus clustering head with shared Adam optimizer state.
///
/// The encoder maps D → … → embedding, the decoder mirrors it back, and the
/// head maps the embedding to a row-stochastic c-column output via softmax.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GldcModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub head: Mlp,
    adam: AdamState,
}

/// Hidden widths of the default autoencoder; the full encoder stack is
/// D-500-500-2000-5 and the decoder mirrors it.
pub const DEFAULT_HIDDEN: [usize; 3] = [500, 500, 2000];
pub const DEFAULT_EMBEDDING_DIM: usize = 5;

impl GldcModel {
    /// Builds the default architecture for `input_dim` features and
    /// `clusters` output columns, seeded deterministically.
    pub fn new(input_dim: usize, clusters: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(&DEFAULT_HIDDEN);
        dims.push(DEFAULT_EMBEDDING_DIM);
        Self::with_encoder_dims(&dims, clusters, rng)
    }

    /// Builds a model from explicit encoder dimensions (first entry is the
    /// input dimension, last is the embedding dimension). The decoder mirrors
    /// the encoder; the head is a single softmax layer embedding → clusters.
    ///
    /// Hidden layers use ReLU; the embedding and reconstruction layers are
    /// linear so both can take arbitrary real values.
    pub fn with_encoder_dims(dims: &[usize], clusters: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidInput(
                "encoder needs at least input and embedding dimensions".into(),
            ));
        }
        if dims.iter().any(|&d| d == 0) || clusters == 0 {
            return Err(Error::InvalidInput("layer dimensions must be positive".into()));
        }
        let mut encoder = Vec::new();
        for w in 0..dims.len() - 1 {
            let activation = if w == dims.len() - 2 {
                Activation::Linear
            } else {
                Activation::Relu
            };
            encoder.push(Layer::init(
                LayerSpec {
                    input_dim: dims[w],
                    output_dim: dims[w + 1],
                    activation,
                },
                rng,
            ));
        }
        let mut decoder = Vec::new();
        for w in (0..dims.len() - 1).rev() {
            let activation = if w == 0 { Activation::Linear } else { Activation::Relu };
            decoder.push(Layer::init(
                LayerSpec {
                    input_dim: dims[w + 1],
                    output_dim: dims[w],
                    activation,
                },
                rng,
            ));
        }
        let head = vec![Layer::init(
            LayerSpec {
                input_dim: *dims.last().unwrap(),
                output_dim: clusters,
                activation: Activation::Softmax,
            },
            rng,
        )];
        let encoder = Mlp { layers: encoder };
        let decoder = Mlp { layers: decoder };
        let head = Mlp { layers: head };
        let specs = all_specs(&encoder, &decoder, &head);
        Ok(GldcModel {
            encoder,
            decoder,
            head,
            adam: AdamState::new(&specs),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn clusters(&self) -> usize {
        self.head.output_dim()
    }

    pub fn adam_step_count(&self) -> u64 {
        self.adam.step_count()
    }

    /// Clears the optimizer moments and step counter.
    pub fn reset_optimizer(&mut self) {
        let specs = all_specs(&self.encoder, &self.decoder, &self.head);
        self.adam = AdamState::new(&specs);
    }

    /// One Adam update over all parameters with β=(0.9, 0.999), ε=1e-8.
    pub fn adam_step(&mut self, grads: &ModelGrads, learning_rate: f64) -> Result<()> {
        if learning_rate <= 0.0 {
            return Err(Error::InvalidInput("learning rate must be positive".into()));
        }
        if !grads.all_finite() {
            return Err(Error::TrainingDivergence(
                "non-finite gradients in optimizer step".into(),
            ));
        }
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        let mut idx = 0;
        for (mlp, g) in [
            (&mut self.encoder, &grads.encoder),
            (&mut self.decoder, &grads.decoder),
            (&mut self.head, &grads.head),
        ] {
            assert_eq!(mlp.layers.len(), g.layers.len(), "gradient layout mismatch");
            for (layer, lg) in mlp.layers.iter_mut().zip(&g.layers) {
                let mo = &mut self.adam.moments[idx];
                adam_update(
                    layer.weights.data_mut(),
                    lg.d_weights.data(),
                    mo.m_weights.data_mut(),
                    mo.v_weights.data_mut(),
                    learning_rate,
                    bc1,
                    bc2,
                );
                adam_update(
                    &mut layer.bias,
                    &lg.d_bias,
                    &mut mo.m_bias,
                    &mut mo.v_bias,
                    learning_rate,
                    bc1,
                    bc2,
                );
                idx += 1;
            }
        }
        Ok(())
    }
}

fn all_specs(encoder: &Mlp, decoder: &Mlp, head: &Mlp) -> Vec<LayerSpec> {
    encoder
        .layers
        .iter()
        .chain(&decoder.layers)
        .chain(&head.layers)
        .map(|l| l.spec)
        .collect()
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn single_linear_layer(weights: DenseMatrix, bias: Vec<f64>) -> Mlp {
        let spec = LayerSpec {
            input_dim: weights.rows(),
            output_dim: weights.cols(),
            activation: Activation::Linear,
        };
        Mlp {
            layers: vec![Layer { spec, weights, bias }],
        }
    }

    #[test]
    fn zero_weight_linear_layer_propagates_zeros() {
        let mlp = single_linear_layer(DenseMatrix::zeros(3, 2), vec![0.0; 2]);
        let batch = DenseMatrix::from_fn(4, 3, |i, j| (i + j) as f64);
        let trace = mlp.forward(&batch).unwrap();
        assert!(trace.output().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identity_linear_layer_reproduces_batch() {
        let mlp = single_linear_layer(DenseMatrix::identity(3), vec![0.0; 3]);
        let batch = DenseMatrix::from_fn(2, 3, |i, j| (i as f64) * 1.5 - j as f64);
        let trace = mlp.forward(&batch).unwrap();
        assert_eq!(trace.output(), &batch);
    }

    #[test]
    fn two_layer_forward_matches_scalar_arithmetic() {
        // 3 -> 2 relu -> 2 linear, evaluated independently entry by entry.
        let w1 = DenseMatrix::from_vec(3, 2, vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6]);
        let b1 = vec![0.05, -0.1];
        let w2 = DenseMatrix::from_vec(2, 2, vec![1.0, -1.0, 0.5, 0.25]);
        let b2 = vec![0.0, 0.2];
        let mlp = Mlp {
            layers: vec![
                Layer {
                    spec: LayerSpec {
                        input_dim: 3,
                        output_dim: 2,
                        activation: Activation::Relu,
                    },
                    weights: w1.clone(),
                    bias: b1.clone(),
                },
                Layer {
                    spec: LayerSpec {
                        input_dim: 2,
                        output_dim: 2,
                        activation: Activation::Linear,
                    },
                    weights: w2.clone(),
                    bias: b2.clone(),
                },
            ],
        };
        let batch = DenseMatrix::from_vec(2, 3, vec![1.0, 2.0, -1.0, 0.5, -0.5, 2.0]);
        let trace = mlp.forward(&batch).unwrap();

        for i in 0..2 {
            let x = batch.row(i);
            let mut h = [0.0f64; 2];
            for (o, hv) in h.iter_mut().enumerate() {
                let mut s = b1[o];
                for (k, &xv) in x.iter().enumerate() {
                    s += xv * w1.get(k, o);
                }
                *hv = s.max(0.0);
            }
            for o in 0..2 {
                let mut s = b2[o];
                for (k, &hv) in h.iter().enumerate() {
                    s += hv * w2.get(k, o);
                }
                assert!(
                    (trace.output().get(i, o) - s).abs() < 1e-12,
                    "entry ({i},{o}): {} vs {}",
                    trace.output().get(i, o),
                    s
                );
            }
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let mlp = single_linear_layer(DenseMatrix::zeros(3, 2), vec![0.0; 2]);
        let batch = DenseMatrix::zeros(4, 5);
        assert!(matches!(
            mlp.forward(&batch),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = GldcModel::with_encoder_dims(&[4, 3, 2], 2, &mut rng).unwrap();
        let batch = DenseMatrix::from_fn(3, 4, |i, j| (i as f64 - j as f64) * 0.3);
        let trace = model.encoder.forward(&batch).unwrap();
        let d_out = DenseMatrix::zeros(3, 2);
        let (grads, d_in) = model.encoder.backward(&trace, &d_out).unwrap();
        assert!(grads
            .layers
            .iter()
            .all(|l| l.d_weights.data().iter().all(|&x| x == 0.0)
                && l.d_bias.iter().all(|&x| x == 0.0)));
        assert!(d_in.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linear_layer_sum_loss_gradient_is_column_sum_outer_input() {
        // loss = sum of outputs => d_output = ones, so dW = X^T * ones,
        // i.e. dW[k][o] = column-sum k of X for every output o.
        let mlp = single_linear_layer(
            DenseMatrix::from_fn(3, 2, |i, j| 0.1 * (i as f64 + 1.0) - 0.05 * j as f64),
            vec![0.0; 2],
        );
        let batch = DenseMatrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let trace = mlp.forward(&batch).unwrap();
        let ones = DenseMatrix::from_fn(2, 2, |_, _| 1.0);
        let (grads, _) = mlp.backward(&trace, &ones).unwrap();
        let col_sums = batch.col_sums();
        for k in 0..3 {
            for o in 0..2 {
                assert!((grads.layers[0].d_weights.get(k, o) - col_sums[k]).abs() < 1e-12);
            }
        }
        assert_eq!(grads.layers[0].d_bias, vec![2.0, 2.0]);
    }

    #[test]
    fn backward_rejects_gradient_shape_mismatch() {
        let mlp = single_linear_layer(DenseMatrix::zeros(3, 2), vec![0.0; 2]);
        let batch = DenseMatrix::zeros(4, 3);
        let trace = mlp.forward(&batch).unwrap();
        let bad = DenseMatrix::zeros(4, 3);
        assert!(matches!(
            mlp.backward(&trace, &bad),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one_and_stay_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = GldcModel::with_encoder_dims(&[6, 5], 4, &mut rng).unwrap();
        // Extreme inputs drive the softmax toward saturation.
        let batch = DenseMatrix::from_fn(8, 6, |i, j| ((i * 31 + j * 7) as f64 - 80.0) * 25.0);
        let z = model.encoder.forward(&batch).unwrap();
        let p = model.head.forward(z.output()).unwrap();
        for i in 0..p.output().rows() {
            let row = p.output().row(i);
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {i} sums to {sum}");
            assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut model = GldcModel::with_encoder_dims(&[3, 2], 2, &mut rng).unwrap();
        let before = model.clone();
        let grads = ModelGrads::zeros_like(&model);
        model.adam_step(&grads, 0.1).unwrap();
        assert_eq!(model.encoder.layers[0].weights, before.encoder.layers[0].weights);
        assert_eq!(model.head.layers[0].weights, before.head.layers[0].weights);
        assert_eq!(model.adam_step_count(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // Scalar parameter w = 0, gradient 1, lr 0.1: bias-corrected first
        // step is lr * 1 / (1 + eps) ≈ -0.1.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = GldcModel::with_encoder_dims(&[1, 1], 1, &mut rng).unwrap();
        model.encoder.layers[0].weights.set(0, 0, 0.0);
        let mut grads = ModelGrads::zeros_like(&model);
        grads.encoder.layers[0].d_weights.set(0, 0, 1.0);
        model.adam_step(&grads, 0.1).unwrap();
        let w = model.encoder.layers[0].weights.get(0, 0);
        assert!((w + 0.1).abs() < 1e-6, "w = {w}");
    }

    #[test]
    fn adam_identical_steps_move_monotonically() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = GldcModel::with_encoder_dims(&[1, 1], 1, &mut rng).unwrap();
        model.encoder.layers[0].weights.set(0, 0, 0.5);
        let mut grads = ModelGrads::zeros_like(&model);
        grads.encoder.layers[0].d_weights.set(0, 0, 2.0);
        let w0 = model.encoder.layers[0].weights.get(0, 0);
        model.adam_step(&grads, 0.05).unwrap();
        let w1 = model.encoder.layers[0].weights.get(0, 0);
        model.adam_step(&grads, 0.05).unwrap();
        let w2 = model.encoder.layers[0].weights.get(0, 0);
        assert!(w1 < w0 && w2 < w1);
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = GldcModel::with_encoder_dims(&[2, 2], 2, &mut rng).unwrap();
        let mut grads = ModelGrads::zeros_like(&model);
        grads.head.layers[0].d_weights.set(0, 0, f64::NAN);
        assert!(matches!(
            model.adam_step(&grads, 0.01),
            Err(Error::TrainingDivergence(_))
        ));
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let mut rng_a = ChaCha8Rng::seed_from_u64(42);
        let mut rng_b = ChaCha8Rng::seed_from_u64(42);
        let a = GldcModel::new(10, 3, &mut rng_a).unwrap();
        let b = GldcModel::new(10, 3, &mut rng_b).unwrap();
        assert_eq!(a.encoder.layers[2].weights, b.encoder.layers[2].weights);
        assert_eq!(a.decoder.layers[0].weights, b.decoder.layers[0].weights);
        assert_eq!(a.head.layers[0].weights, b.head.layers[0].weights);
    }

    #[test]
    fn default_architecture_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = GldcModel::new(784, 10, &mut rng).unwrap();
        let dims: Vec<(usize, usize)> = model
            .encoder
            .layers
            .iter()
            .map(|l| (l.spec.input_dim, l.spec.output_dim))
            .collect();
        assert_eq!(dims, vec![(784, 500), (500, 500), (500, 2000), (2000, 5)]);
        let dims: Vec<(usize, usize)> = model
            .decoder
            .layers
            .iter()
            .map(|l| (l.spec.input_dim, l.spec.output_dim))
            .collect();
        assert_eq!(dims, vec![(5, 2000), (2000, 500), (500, 500), (500, 784)]);
        assert_eq!(model.head.layers[0].spec.input_dim, 5);
        assert_eq!(model.head.layers[0].spec.output_dim, 10);
        assert_eq!(
            model.head.layers[0].spec.activation,
            Activation::Softmax
        );
    }
}
