//! GLDC deep clustering: autoencoder pretraining, mini-batch kNN adjacency,
//! graph-learning and augmentation losses, and the combined training loop
//! that yields a per-sample cluster probability matrix.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::matrix::DenseMatrix;
use crate::nn::{GldcModel, ModelGrads, PROB_CLAMP};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: DenseMatrix,
    pub true_labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(features: DenseMatrix, true_labels: Option<Vec<usize>>) -> Result<Self> {
        if features.rows() < 2 || features.cols() < 1 {
            return Err(Error::InvalidInput(format!(
                "dataset must be at least 2x1, got {}x{}",
                features.rows(),
                features.cols()
            )));
        }
        if let Some(labels) = &true_labels {
            if labels.len() != features.rows() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    features.rows()
                )));
            }
        }
        Ok(Dataset {
            features,
            true_labels,
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

/// Whether the β₁ discount advances once per epoch or once per mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscountGranularity {
    Epoch,
    Minibatch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Number of clusters c. `None` means "derive from the true labels".
    pub clusters: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Initial graph-loss weight β₁, decayed by `discount_gamma` over time.
    pub beta1: f64,
    /// Augmentation-loss weight β₂.
    pub beta2: f64,
    pub discount_gamma: f64,
    pub discount_granularity: DiscountGranularity,
    /// Gaussian kernel bandwidth σ² for the kNN adjacency weights.
    pub sigma2: f64,
    /// Variance ξ of the additive Gaussian augmentation noise.
    pub xi: f64,
    pub k_neighbors: usize,
    pub pretrain_epochs: usize,
    pub train_epochs: usize,
    pub seed: u64,
    /// Encoder layer widths including the input dimension, e.g.
    /// `[D, 500, 500, 2000, 5]`. `None` selects that default; overriding it
    /// is mainly useful for small experiments and tests.
    #[serde(default)]
    pub encoder_dims: Option<Vec<usize>>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            clusters: None,
            batch_size: 128,
            learning_rate: 0.002,
            beta1: 5.0,
            beta2: 10.0,
            discount_gamma: 0.8,
            discount_granularity: DiscountGranularity::Epoch,
            sigma2: 0.1,
            xi: 0.05,
            k_neighbors: 5,
            pretrain_epochs: 50,
            train_epochs: 200,
            seed: 0,
            encoder_dims: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.clusters {
            if c < 2 {
                return Err(Error::Config("clusters must be at least 2".into()));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.discount_gamma > 0.0 && self.discount_gamma <= 1.0) {
            return Err(Error::Config("discount_gamma must be in (0, 1]".into()));
        }
        if self.sigma2 <= 0.0 {
            return Err(Error::Config("sigma2 must be positive".into()));
        }
        if self.xi < 0.0 {
            return Err(Error::Config("xi must be nonnegative".into()));
        }
        if self.k_neighbors < 1 || self.k_neighbors >= self.batch_size {
            return Err(Error::Config(
                "k_neighbors must satisfy 1 <= k < batch_size".into(),
            ));
        }
        Ok(())
    }

    fn validate_against(&self, data: &Dataset) -> Result<usize> {
        self.validate()?;
        if self.batch_size > data.n() {
            return Err(Error::Config(format!(
                "batch_size {} exceeds dataset size {}",
                self.batch_size,
                data.n()
            )));
        }
        let c = self
            .clusters
            .ok_or_else(|| Error::Config("clusters is not set and cannot be derived".into()))?;
        if let Some(labels) = &data.true_labels {
            if let Some(&max) = labels.iter().max() {
                if max >= c {
                    return Err(Error::Config(format!(
                        "label {max} out of range for {c} clusters"
                    )));
                }
            }
        }
        Ok(c)
    }
}

/// n×c row-stochastic matrix of cluster probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    values: DenseMatrix,
}

impl ProbabilityMatrix {
    /// Validates that every row is a probability distribution: entries in
    /// [0, 1] and a row sum within 1e-9 of one. Matrices produced by the
    /// softmax head are additionally strictly interior to (0, 1) thanks to
    /// the probability floor.
    pub fn new(values: DenseMatrix) -> Result<Self> {
        for i in 0..values.rows() {
            let row = values.row(i);
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidInput(format!(
                    "probability row {i} has entries outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "probability row {i} sums to {sum}"
                )));
            }
        }
        Ok(ProbabilityMatrix { values })
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn clusters(&self) -> usize {
        self.values.cols()
    }
}

/// Loss components of one training step.
#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub graph: f64,
    pub augmentation: f64,
}

/// Adds N(0, ξ) noise to every feature entry, reproducibly for a given seed.
pub fn augment(data: &Dataset, xi: f64, seed: u64) -> Dataset {
    if xi == 0.0 {
        return data.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, xi.sqrt()).expect("xi is nonnegative");
    let mut features = data.features.clone();
    for v in features.data_mut() {
        *v += normal.sample(&mut rng);
    }
    Dataset {
        features,
        true_labels: data.true_labels.clone(),
    }
}

/// Directed kNN adjacency over a batch of embeddings: w[i][j] =
/// exp(-‖zᵢ-zⱼ‖²/σ²) when j is one of the k nearest neighbors of i
/// (self excluded, ties at rank k broken toward the lowest index), 0 otherwise.
pub fn build_knn_adjacency(z_batch: &DenseMatrix, k: usize, sigma2: f64) -> Result<DenseMatrix> {
    let b = z_batch.rows();
    if k >= b {
        return Err(Error::InvalidInput(format!(
            "k_neighbors {k} must be smaller than the batch size {b}"
        )));
    }
    if sigma2 <= 0.0 {
        return Err(Error::InvalidInput("sigma2 must be positive".into()));
    }
    let mut w = DenseMatrix::zeros(b, b);
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(b.saturating_sub(1));
    for i in 0..b {
        dists.clear();
        let zi = z_batch.row(i);
        for j in 0..b {
            if j == i {
                continue;
            }
            let zj = z_batch.row(j);
            let d2: f64 = zi
                .iter()
                .zip(zj)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            dists.push((d2, j));
        }
        dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        for &(d2, j) in dists.iter().take(k) {
            w.set(i, j, (-d2 / sigma2).exp());
        }
    }
    Ok(w)
}

/// Squared reconstruction error of the autoencoder over a batch, summed over
/// samples, with gradients for the encoder and decoder (head gradients zero).
pub fn reconstruction_loss(batch: &DenseMatrix, model: &GldcModel) -> Result<(f64, ModelGrads)> {
    let enc = model.encoder.forward(batch)?;
    let dec = model.decoder.forward(enc.output())?;
    let recon = dec.output();
    let loss = batch.squared_distance(recon);
    // d/d(recon) of sum ||x - recon||^2 = 2 (recon - x)
    let mut d_recon = recon.sub(batch);
    d_recon.scale(2.0);
    let (dec_grads, d_embed) = model.decoder.backward(&dec, &d_recon)?;
    let (enc_grads, _) = model.encoder.backward(&enc, &d_embed)?;
    let grads = ModelGrads {
        encoder: enc_grads,
        decoder: dec_grads,
        head: crate::nn::MlpGrads::zeros_like(&model.head),
    };
    Ok((loss, grads))
}

/// Graph-learning loss over all ordered pairs of a batch:
/// -(1/B²) Σᵢⱼ [w log(pᵢᵀpⱼ) + (1-w) log(1-pᵢᵀpⱼ)].
///
/// Diagonal pairs participate with w = 1 regardless of the adjacency matrix.
/// Inner products are clamped to [1e-7, 1-1e-7] before the logs; the clamp
/// saturates, so its gradient is zero outside the open interval. Returns the
/// loss and its gradient with respect to the probability rows.
pub fn graph_loss(p_batch: &DenseMatrix, w: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    let b = p_batch.rows();
    if w.rows() != b || w.cols() != b {
        return Err(Error::DimensionMismatch(format!(
            "adjacency is {}x{} for a batch of {b}",
            w.rows(),
            w.cols()
        )));
    }
    let lo = PROB_CLAMP;
    let hi = 1.0 - PROB_CLAMP;
    let q = p_batch.matmul_nt(p_batch);
    let norm = 1.0 / (b * b) as f64;
    let mut loss = 0.0;
    let mut g = DenseMatrix::zeros(b, b);
    for i in 0..b {
        for j in 0..b {
            let weight = if i == j { 1.0 } else { w.get(i, j) };
            let raw = q.get(i, j);
            let clamped = raw.clamp(lo, hi);
            loss -= norm * (weight * clamped.ln() + (1.0 - weight) * (1.0 - clamped).ln());
            if raw > lo && raw < hi {
                g.set(
                    i,
                    j,
                    -norm * (weight / clamped - (1.0 - weight) / (1.0 - clamped)),
                );
            }
        }
    }
    // dL/dP = (G + Gᵀ) P for q = P Pᵀ.
    let mut g_sym = g.transpose();
    g_sym.axpy(1.0, &g);
    let d_p = g_sym.matmul(p_batch);
    Ok((loss, d_p))
}

/// Σᵢ‖pᵢ - p̃ᵢ‖² with gradients for both arguments.
pub fn augmentation_loss(
    p: &DenseMatrix,
    p_aug: &DenseMatrix,
) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    if p.rows() != p_aug.rows() || p.cols() != p_aug.cols() {
        return Err(Error::DimensionMismatch(format!(
            "probability matrices are {}x{} and {}x{}",
            p.rows(),
            p.cols(),
            p_aug.rows(),
            p_aug.cols()
        )));
    }
    let loss = p.squared_distance(p_aug);
    let mut d_p = p.sub(p_aug);
    d_p.scale(2.0);
    let mut d_p_aug = d_p.clone();
    d_p_aug.scale(-1.0);
    Ok((loss, d_p, d_p_aug))
}

/// Combined clustering loss L_r + β₁L_w + β₂L_a for one mini-batch, with
/// gradients over all parameter groups. The adjacency matrix is treated as a
/// constant target; gradients do not flow through it.
pub fn combined_loss(
    model: &GldcModel,
    batch: &DenseMatrix,
    batch_aug: &DenseMatrix,
    w: &DenseMatrix,
    beta1: f64,
    beta2: f64,
) -> Result<(LossBreakdown, ModelGrads)> {
    let enc = model.encoder.forward(batch)?;
    let dec = model.decoder.forward(enc.output())?;
    let head = model.head.forward(enc.output())?;
    let enc_aug = model.encoder.forward(batch_aug)?;
    let head_aug = model.head.forward(enc_aug.output())?;

    let recon = dec.output();
    let l_r = batch.squared_distance(recon);
    let (l_w, d_p_graph) = graph_loss(head.output(), w)?;
    let (l_a, d_p_aug_term, d_p_tilde) = augmentation_loss(head.output(), head_aug.output())?;
    let total = l_r + beta1 * l_w + beta2 * l_a;
    if !total.is_finite() {
        return Err(Error::TrainingDivergence(format!(
            "loss is not finite (L_r={l_r}, L_w={l_w}, L_a={l_a})"
        )));
    }

    let mut d_recon = recon.sub(batch);
    d_recon.scale(2.0);
    let (dec_grads, d_embed_recon) = model.decoder.backward(&dec, &d_recon)?;

    let mut d_p = d_p_graph;
    d_p.scale(beta1);
    d_p.axpy(beta2, &d_p_aug_term);
    let (head_grads_clean, d_embed_head) = model.head.backward(&head, &d_p)?;

    let mut d_embed = d_embed_recon;
    d_embed.axpy(1.0, &d_embed_head);
    let (enc_grads_clean, _) = model.encoder.backward(&enc, &d_embed)?;

    let mut d_p_tilde_scaled = d_p_tilde;
    d_p_tilde_scaled.scale(beta2);
    let (head_grads_aug, d_embed_aug) = model.head.backward(&head_aug, &d_p_tilde_scaled)?;
    let (enc_grads_aug, _) = model.encoder.backward(&enc_aug, &d_embed_aug)?;

    let mut encoder = enc_grads_clean;
    encoder.axpy(1.0, &enc_grads_aug);
    let mut head_total = head_grads_clean;
    head_total.axpy(1.0, &head_grads_aug);

    Ok((
        LossBreakdown {
            total,
            reconstruction: l_r,
            graph: l_w,
            augmentation: l_a,
        },
        ModelGrads {
            encoder,
            decoder: dec_grads,
            head: head_total,
        },
    ))
}

/// β₁ after t discount applications: beta1 · γᵗ.
pub fn discounted_beta1(beta1: f64, gamma: f64, t: u64) -> f64 {
    beta1 * gamma.powi(t as i32)
}

// Seed streams for the independent random processes of a run. Keeping them
// separate makes `train` byte-identical to a `pretrain` stage followed by a
// fine-tuning stage.
const STREAM_INIT: u64 = 0;
const STREAM_AUGMENT: u64 = 1;
const STREAM_PRETRAIN_SHUFFLE: u64 = 2;
const STREAM_TRAIN_SHUFFLE: u64 = 3;

fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 over the seed/stream pair
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn minibatches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    indices.chunks(batch_size).map(|c| c.to_vec()).collect()
}

/// Trains the autoencoder alone by minimizing the reconstruction loss.
pub fn pretrain(data: &Dataset, config: &TrainingConfig) -> Result<GldcModel> {
    let c = config.validate_against(data)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_INIT));
    let mut model = match &config.encoder_dims {
        None => GldcModel::new(data.dim(), c, &mut init_rng)?,
        Some(dims) => {
            if dims.first() != Some(&data.dim()) {
                return Err(Error::Config(format!(
                    "encoder_dims starts at {:?}, dataset has {} features",
                    dims.first(),
                    data.dim()
                )));
            }
            GldcModel::with_encoder_dims(dims, c, &mut init_rng)?
        }
    };
    let mut shuffle_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_PRETRAIN_SHUFFLE));
    for epoch in 0..config.pretrain_epochs {
        let mut epoch_loss = 0.0;
        for batch_idx in minibatches(data.n(), config.batch_size, &mut shuffle_rng) {
            let batch = data.features.select_rows(&batch_idx);
            let (loss, grads) = reconstruction_loss(&batch, &model)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDivergence(format!(
                    "reconstruction loss is not finite at pretrain epoch {epoch}"
                )));
            }
            epoch_loss += loss;
            model.adam_step(&grads, config.learning_rate)?;
        }
        log::debug!("pretrain epoch {epoch}: reconstruction loss {epoch_loss:.6}");
    }
    Ok(model)
}

/// Full GLDC training: pretrains the autoencoder, then minimizes the combined
/// loss. Returns the final model and the probability matrix over the whole
/// dataset.
pub fn train(data: &Dataset, config: &TrainingConfig) -> Result<(GldcModel, ProbabilityMatrix)> {
    let model = pretrain(data, config)?;
    train_from(model, data, config)
}

/// Fine-tunes an already pretrained model with the combined clustering loss.
///
/// The optimizer state is reset at the start, since the objective changes.
pub fn train_from(
    mut model: GldcModel,
    data: &Dataset,
    config: &TrainingConfig,
) -> Result<(GldcModel, ProbabilityMatrix)> {
    let c = config.validate_against(data)?;
    if model.input_dim() != data.dim() || model.clusters() != c {
        return Err(Error::DimensionMismatch(format!(
            "model is {}→{} clusters, dataset needs {}→{c}",
            model.input_dim(),
            model.clusters(),
            data.dim()
        )));
    }
    model.reset_optimizer();
    let augmented = augment(data, config.xi, derive_seed(config.seed, STREAM_AUGMENT));
    let mut shuffle_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_TRAIN_SHUFFLE));
    let mut discount_steps: u64 = 0;
    for epoch in 0..config.train_epochs {
        let beta1_epoch = discounted_beta1(config.beta1, config.discount_gamma, discount_steps);
        let mut first_batch = log::log_enabled!(log::Level::Debug);
        let mut last = LossBreakdown {
            total: 0.0,
            reconstruction: 0.0,
            graph: 0.0,
            augmentation: 0.0,
        };
        for batch_idx in minibatches(data.n(), config.batch_size, &mut shuffle_rng) {
            let beta1_eff = match config.discount_granularity {
                DiscountGranularity::Epoch => beta1_epoch,
                DiscountGranularity::Minibatch => {
                    discounted_beta1(config.beta1, config.discount_gamma, discount_steps)
                }
            };
            let batch = data.features.select_rows(&batch_idx);
            let batch_aug = augmented.features.select_rows(&batch_idx);
            let embed = model.encoder.forward(&batch)?;
            let b = batch.rows();
            let k_eff = config.k_neighbors.min(b.saturating_sub(1));
            let w = build_knn_adjacency(embed.output(), k_eff, config.sigma2)?;
            if first_batch {
                first_batch = false;
                let nonzero: Vec<f64> =
                    w.data().iter().cloned().filter(|&x| x > 0.0).collect();
                let mean = nonzero.iter().sum::<f64>() / nonzero.len().max(1) as f64;
                let strong =
                    nonzero.iter().filter(|&&x| x > 0.01).count() as f64 / nonzero.len().max(1) as f64;
                log::debug!(
                    "epoch {epoch} adjacency: mean weight {mean:.4}, fraction > 0.01 {strong:.3}"
                );
            }
            let (losses, grads) =
                combined_loss(&model, &batch, &batch_aug, &w, beta1_eff, config.beta2)?;
            model.adam_step(&grads, config.learning_rate)?;
            last = losses;
            if config.discount_granularity == DiscountGranularity::Minibatch {
                discount_steps += 1;
            }
        }
        if config.discount_granularity == DiscountGranularity::Epoch {
            discount_steps += 1;
        }
        log::debug!(
            "train epoch {epoch}: total {:.6} (L_r {:.6}, L_w {:.6}, L_a {:.6}), beta1 {beta1_epoch:.4}",
            last.total,
            last.reconstruction,
            last.graph,
            last.augmentation
        );
    }
    let probabilities = infer_probabilities(data, &model)?;
    Ok((model, probabilities))
}

/// Runs every sample through the encoder and head, in the dataset's order.
pub fn infer_probabilities(data: &Dataset, model: &GldcModel) -> Result<ProbabilityMatrix> {
    let chunk = 1024;
    let c = model.clusters();
    let mut values = DenseMatrix::zeros(data.n(), c);
    let mut row = 0;
    let indices: Vec<usize> = (0..data.n()).collect();
    for block in indices.chunks(chunk) {
        let batch = data.features.select_rows(block);
        let embed = model.encoder.forward(&batch)?;
        let head = model.head.forward(embed.output())?;
        for i in 0..block.len() {
            values.row_mut(row).copy_from_slice(head.output().row(i));
            row += 1;
        }
    }
    ProbabilityMatrix::new(values)
}

/// Argmax label per row; ties break toward the lowest cluster index.
pub fn assign_labels(p: &ProbabilityMatrix) -> Vec<usize> {
    (0..p.n())
        .map(|i| {
            let row = p.values().row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_dataset(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = DenseMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
        Dataset::new(features, None).unwrap()
    }

    #[test]
    fn augment_with_zero_xi_is_identity() {
        let data = small_dataset(10, 4, 1);
        let out = augment(&data, 0.0, 7);
        assert_eq!(out.features, data.features);
    }

    #[test]
    fn augment_noise_variance_matches_xi() {
        let n = 2000;
        let d = 64; // 128k draws
        let data = small_dataset(n, d, 2);
        let xi = 0.04;
        let out = augment(&data, xi, 99);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for (a, b) in out.features.data().iter().zip(data.features.data()) {
            let eps = a - b;
            sum += eps;
            sum_sq += eps * eps;
        }
        let count = (n * d) as f64;
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        assert!(
            (var - xi).abs() < 0.1 * xi,
            "sample variance {var} too far from {xi}"
        );
    }

    #[test]
    fn augment_is_deterministic_per_seed() {
        let data = small_dataset(20, 3, 3);
        let a = augment(&data, 0.05, 42);
        let b = augment(&data, 0.05, 42);
        assert_eq!(a.features, b.features);
        let c = augment(&data, 0.05, 43);
        assert_ne!(c.features, a.features);
    }

    #[test]
    fn knn_weight_is_one_for_duplicate_points() {
        let z = DenseMatrix::from_vec(3, 2, vec![0.0, 0.0, 0.0, 0.0, 5.0, 5.0]);
        let w = build_knn_adjacency(&z, 1, 0.5).unwrap();
        // points 0 and 1 coincide: each picks the other with weight exp(0)=1
        assert_eq!(w.get(0, 1), 1.0);
        assert_eq!(w.get(1, 0), 1.0);
        assert_eq!(w.get(0, 2), 0.0);
    }

    #[test]
    fn knn_weight_at_sigma_distance_is_exp_minus_one() {
        // ||z0 - z1||^2 = 0.5 = sigma2 -> weight e^-1
        let z = DenseMatrix::from_vec(2, 1, vec![0.0, 0.5f64.sqrt()]);
        let w = build_knn_adjacency(&z, 1, 0.5).unwrap();
        assert!((w.get(0, 1) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn knn_rows_have_exactly_k_nonzeros_in_unit_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = DenseMatrix::from_fn(12, 3, |_, _| rng.random_range(-2.0..2.0));
        let k = 4;
        let w = build_knn_adjacency(&z, k, 0.3).unwrap();
        for i in 0..12 {
            let nonzero = w.row(i).iter().filter(|&&x| x > 0.0).count();
            assert_eq!(nonzero, k, "row {i}");
            assert!(w.row(i).iter().all(|&x| (0.0..=1.0).contains(&x)));
            assert_eq!(w.get(i, i), 0.0);
        }
    }

    #[test]
    fn knn_ties_at_rank_k_pick_lowest_index() {
        // points 1, 2, 3 all at distance 1 from point 0; k = 2 keeps 1 and 2
        let z = DenseMatrix::from_vec(4, 2, vec![0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 1.0]);
        let w = build_knn_adjacency(&z, 2, 1.0).unwrap();
        assert!(w.get(0, 1) > 0.0);
        assert!(w.get(0, 2) > 0.0);
        assert_eq!(w.get(0, 3), 0.0);
    }

    #[test]
    fn knn_rejects_k_not_below_batch() {
        let z = DenseMatrix::zeros(3, 2);
        assert!(matches!(
            build_knn_adjacency(&z, 3, 0.1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn reconstruction_loss_zero_for_identity_autoencoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = GldcModel::with_encoder_dims(&[2, 2], 2, &mut rng).unwrap();
        model.encoder.layers[0].weights = DenseMatrix::identity(2);
        model.encoder.layers[0].bias = vec![0.0; 2];
        model.decoder.layers[0].weights = DenseMatrix::identity(2);
        model.decoder.layers[0].bias = vec![0.0; 2];
        let batch = DenseMatrix::from_vec(3, 2, vec![1.0, -2.0, 0.5, 0.25, 3.0, 0.0]);
        let (loss, _) = reconstruction_loss(&batch, &model).unwrap();
        assert!(loss.abs() < 1e-24);
    }

    #[test]
    fn reconstruction_loss_of_zero_decoder_is_squared_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = GldcModel::with_encoder_dims(&[2, 2], 2, &mut rng).unwrap();
        model.decoder.layers[0].weights = DenseMatrix::zeros(2, 2);
        model.decoder.layers[0].bias = vec![0.0; 2];
        let batch = DenseMatrix::from_vec(1, 2, vec![1.0, 0.0]);
        let (loss, _) = reconstruction_loss(&batch, &model).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_loss_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let model = GldcModel::with_encoder_dims(&[4, 3, 2], 2, &mut rng).unwrap();
        let batch = DenseMatrix::from_fn(5, 4, |i, j| ((i * 3 + j) as f64 * 0.17).sin());
        let (loss, _) = reconstruction_loss(&batch, &model).unwrap();
        let enc = model.encoder.forward(&batch).unwrap();
        let dec = model.decoder.forward(enc.output()).unwrap();
        let mut expect = 0.0;
        for i in 0..5 {
            for j in 0..4 {
                let diff = batch.get(i, j) - dec.output().get(i, j);
                expect += diff * diff;
            }
        }
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn graph_loss_is_near_zero_for_agreeing_onehots() {
        // both rows one-hot on the same cluster; all weights 1
        let p = DenseMatrix::from_vec(2, 2, vec![1.0, 0.0, 1.0, 0.0]);
        let w = DenseMatrix::from_vec(2, 2, vec![1.0, 1.0, 1.0, 1.0]);
        let (loss, _) = graph_loss(&p, &w).unwrap();
        assert!(loss.abs() < 1e-6, "loss = {loss}");
    }

    #[test]
    fn graph_loss_is_near_zero_for_disjoint_onehots() {
        // one-hot on different clusters, all weights 0; the diagonal is
        // treated as w = 1 so its log(q_ii)=log(~1) terms also vanish
        let p = DenseMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let w = DenseMatrix::zeros(2, 2);
        let (loss, _) = graph_loss(&p, &w).unwrap();
        assert!(loss.abs() < 1e-6, "loss = {loss}");
    }

    #[test]
    fn graph_loss_matches_hand_evaluation_over_ordered_pairs() {
        // p1 = p2 = (0.5, 0.5): every inner product is 0.5. Effective weights
        // (diagonal forced to 1): w11=1, w22=1, w12=1, w21=0. All four ordered
        // pairs contribute log 0.5, so L = -(1/4)·4·log 0.5 = log 2.
        let p = DenseMatrix::from_vec(2, 2, vec![0.5, 0.5, 0.5, 0.5]);
        let mut w = DenseMatrix::zeros(2, 2);
        w.set(0, 1, 1.0);
        let (loss, _) = graph_loss(&p, &w).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-12, "loss = {loss}");
    }

    #[test]
    fn graph_loss_finite_for_any_row_stochastic_input() {
        let p = DenseMatrix::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5]);
        let w = DenseMatrix::from_fn(3, 3, |i, j| ((i + j) % 2) as f64);
        let (loss, grad) = graph_loss(&p, &w).unwrap();
        assert!(loss.is_finite());
        assert!(grad.all_finite());
    }

    #[test]
    fn augmentation_loss_examples() {
        let p = DenseMatrix::from_vec(1, 2, vec![1.0, 0.0]);
        let q = DenseMatrix::from_vec(1, 2, vec![0.0, 1.0]);
        let (loss, _, _) = augmentation_loss(&p, &q).unwrap();
        assert!((loss - 2.0).abs() < 1e-12);

        let (zero, _, _) = augmentation_loss(&p, &p).unwrap();
        assert_eq!(zero, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DenseMatrix::from_fn(6, 3, |_, _| rng.random_range(0.0..1.0));
        let b = DenseMatrix::from_fn(6, 3, |_, _| rng.random_range(0.0..1.0));
        let (loss, _, _) = augmentation_loss(&a, &b).unwrap();
        let expect: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum();
        assert!((loss - expect).abs() < 1e-12);

        let wide = DenseMatrix::zeros(6, 4);
        assert!(matches!(
            augmentation_loss(&a, &wide),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn discount_schedule_matches_formula() {
        let b = discounted_beta1(5.0, 0.8, 3);
        assert!((b - 2.56).abs() < 1e-12);
        assert_eq!(discounted_beta1(5.0, 0.8, 0), 5.0);
        // non-increasing across epochs for gamma <= 1
        let mut prev = f64::INFINITY;
        for t in 0..50 {
            let v = discounted_beta1(5.0, 0.8, t);
            assert!(v <= prev);
            prev = v;
        }
    }

    fn tiny_config(seed: u64) -> TrainingConfig {
        TrainingConfig {
            clusters: Some(2),
            batch_size: 8,
            k_neighbors: 3,
            pretrain_epochs: 40,
            train_epochs: 5,
            seed,
            encoder_dims: Some(vec![3, 10, 4]),
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn pretrain_drives_constant_dataset_loss_toward_zero() {
        let features = DenseMatrix::from_fn(16, 3, |_, _| 0.4);
        let data = Dataset::new(features, None).unwrap();
        let mut config = tiny_config(5);
        config.pretrain_epochs = 500;
        config.learning_rate = 0.01;
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_INIT));
        let init = GldcModel::with_encoder_dims(&[3, 10, 4], 2, &mut init_rng).unwrap();
        let (initial, _) = reconstruction_loss(&data.features, &init).unwrap();
        let model = pretrain(&data, &config).unwrap();
        let (after, _) = reconstruction_loss(&data.features, &model).unwrap();
        assert!(
            after < 1e-3 * initial,
            "loss only went from {initial} to {after}"
        );
    }

    #[test]
    fn pretrain_with_zero_epochs_returns_initialization() {
        let data = small_dataset(16, 3, 6);
        let mut config = tiny_config(7);
        config.pretrain_epochs = 0;
        let model = pretrain(&data, &config).unwrap();
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(7, STREAM_INIT));
        let expect = GldcModel::with_encoder_dims(&[3, 10, 4], 2, &mut init_rng).unwrap();
        assert_eq!(
            model.encoder.layers[0].weights,
            expect.encoder.layers[0].weights
        );
    }

    #[test]
    fn pretrain_is_deterministic_for_a_fixed_seed() {
        let data = small_dataset(16, 3, 6);
        let config = tiny_config(9);
        let a = pretrain(&data, &config).unwrap();
        let b = pretrain(&data, &config).unwrap();
        for (la, lb) in a.encoder.layers.iter().zip(&b.encoder.layers) {
            assert_eq!(la.weights, lb.weights);
            assert_eq!(la.bias, lb.bias);
        }
    }

    #[test]
    fn train_with_zero_betas_still_yields_row_stochastic_p() {
        let data = small_dataset(16, 3, 10);
        let mut config = tiny_config(11);
        config.beta1 = 0.0;
        config.beta2 = 0.0;
        config.pretrain_epochs = 2;
        config.train_epochs = 3;
        let (_, p) = train(&data, &config).unwrap();
        for i in 0..p.n() {
            let sum: f64 = p.values().row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn train_is_deterministic_and_matches_staged_run() {
        let data = small_dataset(16, 3, 12);
        let mut config = tiny_config(13);
        config.pretrain_epochs = 3;
        config.train_epochs = 4;
        let (_, p1) = train(&data, &config).unwrap();
        let (_, p2) = train(&data, &config).unwrap();
        assert_eq!(p1.values(), p2.values());

        // explicit pretrain followed by fine-tuning is byte-identical
        let pretrained = pretrain(&data, &config).unwrap();
        let (_, p3) = train_from(pretrained, &data, &config).unwrap();
        assert_eq!(p1.values(), p3.values());
    }

    #[test]
    fn infer_gives_identical_rows_for_identical_inputs() {
        let features = DenseMatrix::from_fn(6, 3, |i, _| if i < 3 { 0.3 } else { -0.8 });
        let data = Dataset::new(features, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = GldcModel::with_encoder_dims(&[3, 4, 2], 2, &mut rng).unwrap();
        let p = infer_probabilities(&data, &model).unwrap();
        assert_eq!(p.values().row(0), p.values().row(1));
        assert_eq!(p.values().row(3), p.values().row(5));
    }

    #[test]
    fn assign_labels_takes_argmax_with_low_index_ties() {
        let p = ProbabilityMatrix::new(DenseMatrix::from_vec(
            2,
            3,
            vec![0.1, 0.7, 0.2, 0.4, 0.4, 0.2],
        ))
        .unwrap();
        assert_eq!(assign_labels(&p), vec![1, 0]);
    }

    #[test]
    fn assign_labels_is_equivariant_under_column_permutation() {
        let values = DenseMatrix::from_vec(3, 3, vec![
            0.6, 0.3, 0.1, //
            0.2, 0.5, 0.3, //
            0.25, 0.15, 0.6,
        ]);
        let p = ProbabilityMatrix::new(values.clone()).unwrap();
        let labels = assign_labels(&p);
        // permute columns with sigma = (1 2 0): new[j] = old[perm[j]]
        let perm = [1usize, 2, 0];
        let permuted = DenseMatrix::from_fn(3, 3, |i, j| values.get(i, perm[j]));
        let p2 = ProbabilityMatrix::new(permuted).unwrap();
        let labels2 = assign_labels(&p2);
        // sigma maps old label l to the new column where perm[new] == l
        let inverse = |l: usize| perm.iter().position(|&x| x == l).unwrap();
        let expect: Vec<usize> = labels.iter().map(|&l| inverse(l)).collect();
        assert_eq!(labels2, expect);
    }

    #[test]
    fn probability_matrix_rejects_bad_rows() {
        assert!(ProbabilityMatrix::new(DenseMatrix::from_vec(1, 2, vec![0.7, 0.7])).is_err());
        assert!(ProbabilityMatrix::new(DenseMatrix::from_vec(1, 2, vec![1.1, -0.1])).is_err());
        assert!(ProbabilityMatrix::new(DenseMatrix::from_vec(1, 2, vec![1.0, 0.0])).is_ok());
        assert!(ProbabilityMatrix::new(DenseMatrix::from_vec(1, 2, vec![0.5, 0.5])).is_ok());
    }

    #[test]
    fn config_validation_enforces_ranges() {
        let mut config = TrainingConfig::default();
        config.clusters = Some(2);
        assert!(config.validate().is_ok());
        config.discount_gamma = 1.5;
        assert!(matches!(config.validate(), Err(Error::Config(_))));
        config.discount_gamma = 0.8;
        config.k_neighbors = 128;
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }
}
