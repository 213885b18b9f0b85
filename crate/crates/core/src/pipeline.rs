//! Visual encoding, semantic-space training on seen classes and zero-shot
//! prediction over unseen class embeddings.
//!
//! The visual vector of a video is its time-pooled skeleton features
//! (standardised, then repeated per family) followed by the 510-dim latent
//! that the LSTM + autoencoder produce from its snippet vectors. A two-layer
//! projection maps it into the class-embedding space, where classes are
//! ranked by cosine similarity.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::features::{self, repeat_fuse, repeat_skeleton, FeatureConfig, SkeletonBlocks, DEEP_LATENT_DIM};
use crate::model::{EmbeddingSet, FeatureVector, Layout, SignSample, DEFAULT_SNIPPET_LEN};
use crate::neural::checkpoint::Checkpoint;
use crate::neural::{
    mse_loss, prefixed, Activation, AdamConfig, AdamState, AutoEncoder, DenseLayer, LossKind, LstmCell, LstmTrace,
    Params,
};
use crate::numerics::{argmax, cosine_similarity, norm, softmax};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepChannelConfig {
    pub snippet_len: usize,
    /// Dimension of one snippet vector.
    pub input_dim: usize,
    pub lstm_hidden: usize,
    pub latent: usize,
}

impl Default for DeepChannelConfig {
    fn default() -> Self {
        DeepChannelConfig {
            snippet_len: DEFAULT_SNIPPET_LEN,
            input_dim: 4096,
            lstm_hidden: 1024,
            latent: DEEP_LATENT_DIM,
        }
    }
}

impl DeepChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snippet_len == 0 || self.input_dim == 0 || self.lstm_hidden == 0 {
            return Err(Error::invalid("deep channel sizes must be positive"));
        }
        if self.latent != DEEP_LATENT_DIM {
            return Err(Error::invalid(format!(
                "latent dimension must be {DEEP_LATENT_DIM}, got {}",
                self.latent
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub loss: LossKind,
    /// Weight of the autoencoder reconstruction term.
    pub lambda_recon: f64,
    pub seed: u64,
    /// Width of the hidden projection layer.
    pub projection_hidden: usize,
    /// Standardise skeleton features with statistics of the training set.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            lr: 1e-3,
            batch: 32,
            loss: LossKind::Cosine,
            lambda_recon: 0.1,
            seed: 0,
            projection_hidden: 1024,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 || self.projection_hidden == 0 {
            return Err(Error::invalid("epochs, batch and projection width must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.lambda_recon >= 0.0 && self.lambda_recon.is_finite()) {
            return Err(Error::invalid("lambda_recon must be >= 0"));
        }
        Ok(())
    }
}

/// LSTM over snippet vectors followed by the autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepEncoder {
    pub lstm: LstmCell,
    pub autoencoder: AutoEncoder,
}

impl DeepEncoder {
    pub fn new(cfg: &DeepChannelConfig, rng: &mut ChaCha8Rng) -> Self {
        DeepEncoder {
            lstm: LstmCell::new(cfg.input_dim, cfg.lstm_hidden, rng),
            autoencoder: AutoEncoder::with_latent(cfg.lstm_hidden, cfg.latent, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        DeepEncoder {
            lstm: self.lstm.zeros_like(),
            autoencoder: self.autoencoder.zeros_like(),
        }
    }

    fn trace(&self, snippets: &[Vec<f32>]) -> Result<LstmTrace> {
        let seq: Vec<Array1<f64>> = snippets
            .iter()
            .map(|v| v.iter().map(|&x| x as f64).collect())
            .collect();
        self.lstm.forward_trace(seq.iter().map(|v| v.view()))
    }

    /// 510-dim latent of a snippet sequence.
    pub fn encode(&self, snippets: &[Vec<f32>]) -> Result<Array1<f64>> {
        let trace = self.trace(snippets)?;
        self.autoencoder.encode(trace.final_hidden().view())
    }
}

impl Params for DeepEncoder {
    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut v = prefixed("lstm", self.lstm.shapes());
        v.extend(prefixed("autoencoder", self.autoencoder.shapes()));
        v
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.lstm.slices();
        v.extend(self.autoencoder.slices());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.lstm.slices_mut();
        v.extend(self.autoencoder.slices_mut());
        v
    }
}

/// Two fully connected layers: `visual → hidden (ReLU) → embedding`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionNet {
    pub layer1: DenseLayer,
    pub layer2: DenseLayer,
}

impl ProjectionNet {
    pub fn new(input: usize, hidden: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        ProjectionNet {
            layer1: DenseLayer::new(input, hidden, Activation::Relu, rng),
            layer2: DenseLayer::new(hidden, output, Activation::Identity, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        ProjectionNet {
            layer1: self.layer1.zeros_like(),
            layer2: self.layer2.zeros_like(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer1.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layer2.output_dim()
    }

    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let h = self.layer1.forward_batch(x.view())?;
        self.layer2.forward_batch(h.view())
    }
}

impl Params for ProjectionNet {
    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut v = prefixed("layer1", self.layer1.shapes());
        v.extend(prefixed("layer2", self.layer2.shapes()));
        v
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.layer1.slices();
        v.extend(self.layer2.slices());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.layer1.slices_mut();
        v.extend(self.layer2.slices_mut());
        v
    }
}

/// Everything the optimizer updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub projection: ProjectionNet,
    pub deep: Option<DeepEncoder>,
}

impl Network {
    pub fn zeros_like(&self) -> Self {
        Network {
            projection: self.projection.zeros_like(),
            deep: self.deep.as_ref().map(DeepEncoder::zeros_like),
        }
    }
}

impl Params for Network {
    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut v = prefixed("projection", self.projection.shapes());
        if let Some(d) = &self.deep {
            v.extend(prefixed("deep", d.shapes()));
        }
        v
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.projection.slices();
        if let Some(d) = &self.deep {
            v.extend(d.slices());
        }
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.projection.slices_mut();
        if let Some(d) = &mut self.deep {
            v.extend(d.slices_mut());
        }
        v
    }
}

/// One training example as seen by [`Network::loss_and_grad`].
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    /// Standardised, repeated skeleton block (may be empty).
    pub skeleton: &'a [f64],
    pub snippets: Option<&'a [Vec<f32>]>,
    pub target: &'a [f64],
}

/// Mean objective over a batch, its parameter gradient and the gradient
/// with respect to every item's skeleton block.
pub struct BatchGrad {
    pub loss: f64,
    pub grads: Network,
    pub skeleton_grads: Vec<Vec<f64>>,
}

/// Activations and output-side gradients of one batch.
struct Forward {
    x: Array2<f64>,
    h: Array2<f64>,
    z: Array2<f64>,
    /// `d loss / d z`, already divided by the batch size.
    dz: Array2<f64>,
    deep: Option<DeepForward>,
    loss: f64,
}

struct DeepForward {
    traces: Vec<LstmTrace>,
    /// Final LSTM hidden state per item.
    finals: Array2<f64>,
    latent: Array2<f64>,
    /// Decoder output and the weighted reconstruction gradient, when the
    /// reconstruction term is on.
    recon: Option<(Array2<f64>, Array2<f64>)>,
}

impl Network {
    fn forward(&self, items: &[BatchItem<'_>], loss: LossKind, lambda_recon: f64) -> Result<Forward> {
        let b = items.len();
        if b == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let in_dim = self.projection.input_dim();
        let skel_dim = items[0].skeleton.len();
        let deep_dim = if self.deep.is_some() { DEEP_LATENT_DIM } else { 0 };
        ensure_dim("projection input", in_dim, skel_dim + deep_dim)?;
        let inv_b = 1.0 / b as f64;
        let mut total = 0.0;

        let mut x = Array2::zeros((b, in_dim));
        for (r, item) in items.iter().enumerate() {
            ensure_dim("skeleton block", skel_dim, item.skeleton.len())?;
            x.slice_mut(s![r, ..skel_dim])
                .assign(&ArrayView1::from(item.skeleton));
        }
        // per-item LSTM, then the autoencoder on the stacked final states
        let deep = match &self.deep {
            None => None,
            Some(deep) => {
                let mut traces = Vec::with_capacity(b);
                let mut finals = Array2::zeros((b, deep.lstm.hidden_dim()));
                for (r, item) in items.iter().enumerate() {
                    let snips = item
                        .snippets
                        .ok_or_else(|| Error::invalid("deep channel enabled but sample has no snippets"))?;
                    let trace = deep.trace(snips)?;
                    finals.row_mut(r).assign(trace.final_hidden());
                    traces.push(trace);
                }
                let latent = deep.autoencoder.encoder.forward_batch(finals.view())?;
                x.slice_mut(s![.., skel_dim..]).assign(&latent);
                let recon = if lambda_recon > 0.0 {
                    let rec = deep.autoencoder.decoder.forward_batch(latent.view())?;
                    let mut d_rec = Array2::zeros(rec.raw_dim());
                    for r in 0..b {
                        let (rl, g) = mse_loss(
                            rec.row(r).as_slice().expect("row-major"),
                            finals.row(r).as_slice().expect("row-major"),
                        )?;
                        total += lambda_recon * rl;
                        d_rec.row_mut(r).assign(&(Array1::from(g) * (lambda_recon * inv_b)));
                    }
                    Some((rec, d_rec))
                } else {
                    None
                };
                Some(DeepForward {
                    traces,
                    finals,
                    latent,
                    recon,
                })
            }
        };

        let h = self.projection.layer1.forward_batch(x.view())?;
        let z = self.projection.layer2.forward_batch(h.view())?;
        let mut dz = Array2::zeros(z.raw_dim());
        for (r, item) in items.iter().enumerate() {
            let (l, g) = loss.eval(z.row(r).as_slice().expect("row-major"), item.target)?;
            total += l;
            dz.row_mut(r).assign(&(Array1::from(g) * inv_b));
        }
        Ok(Forward {
            x,
            h,
            z,
            dz,
            deep,
            loss: total * inv_b,
        })
    }

    /// Mean objective over a batch: embedding loss plus `lambda_recon` times
    /// the reconstruction error of the deep channel.
    pub fn loss(&self, items: &[BatchItem<'_>], loss: LossKind, lambda_recon: f64) -> Result<f64> {
        Ok(self.forward(items, loss, lambda_recon)?.loss)
    }

    pub fn loss_and_grad(&self, items: &[BatchItem<'_>], loss: LossKind, lambda_recon: f64) -> Result<BatchGrad> {
        let fwd = self.forward(items, loss, lambda_recon)?;
        let skel_dim = items[0].skeleton.len();
        let (dh, g2) = self
            .projection
            .layer2
            .backward_batch(fwd.h.view(), fwd.z.view(), fwd.dz.view())?;
        let (dx, g1) = self
            .projection
            .layer1
            .backward_batch(fwd.x.view(), fwd.h.view(), dh.view())?;
        let mut grads = Network {
            projection: ProjectionNet {
                layer1: g1,
                layer2: g2,
            },
            deep: None,
        };

        if let (Some(deep), Some(df)) = (&self.deep, &fwd.deep) {
            let ae = &deep.autoencoder;
            let mut d_latent = dx.slice(s![.., skel_dim..]).to_owned();
            let mut d_finals = Array2::zeros(df.finals.raw_dim());
            let mut g_dec = ae.decoder.zeros_like();
            if let Some((rec, d_rec)) = &df.recon {
                let (dl, g) = ae.decoder.backward_batch(df.latent.view(), rec.view(), d_rec.view())?;
                d_latent += &dl;
                g_dec = g;
                // the reconstruction target is the hidden state itself
                d_finals -= d_rec;
            }
            let (dh_enc, g_enc) = ae
                .encoder
                .backward_batch(df.finals.view(), df.latent.view(), d_latent.view())?;
            d_finals += &dh_enc;

            let mut g_lstm = deep.lstm.zeros_like();
            for (r, trace) in df.traces.iter().enumerate() {
                deep.lstm.backward_into(trace, d_finals.row(r), &mut g_lstm)?;
            }
            grads.deep = Some(DeepEncoder {
                lstm: g_lstm,
                autoencoder: AutoEncoder {
                    encoder: g_enc,
                    decoder: g_dec,
                },
            });
        }

        let skeleton_grads = (0..items.len())
            .map(|r| dx.slice(s![r, ..skel_dim]).to_vec())
            .collect();
        Ok(BatchGrad {
            loss: fwd.loss,
            grads,
            skeleton_grads,
        })
    }
}

/// Per-dimension affine standardisation of the un-repeated skeleton vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonNormalizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl SkeletonNormalizer {
    pub fn identity(dim: usize) -> Self {
        SkeletonNormalizer {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and population standard deviation per dimension. Constant
    /// dimensions pass through unchanged, so a single training row does not
    /// collapse to the zero vector.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::invalid("cannot fit normalizer on no rows"))?;
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            ensure_dim("normalizer row", dim, r.len())?;
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut shift = mean;
        let mut scale = vec![1.0; dim];
        for ((s, m), sc) in var.into_iter().zip(shift.iter_mut()).zip(scale.iter_mut()) {
            let sd = (s / n).sqrt();
            if sd > 1e-9 * m.abs().max(1.0) {
                *sc = sd;
            } else {
                *m = 0.0;
            }
        }
        Ok(SkeletonNormalizer { shift, scale })
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        ensure_dim("normalizer input", self.shift.len(), v.len())?;
        Ok(v.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }
}

impl Params for SkeletonNormalizer {
    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        vec![
            ("shift".into(), vec![self.shift.len()]),
            ("scale".into(), vec![self.scale.len()]),
        ]
    }

    fn slices(&self) -> Vec<&[f64]> {
        vec![&self.shift, &self.scale]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.shift, &mut self.scale]
    }
}

/// 510-dim latent of a sample's snippets.
pub fn encode_deep(sample: &SignSample, cfg: &DeepChannelConfig, encoder: &DeepEncoder) -> Result<FeatureVector> {
    let snips = sample
        .deep()
        .filter(|d| !d.is_empty())
        .ok_or_else(|| Error::invalid(format!("sample {}: deep channel enabled but no snippets", sample.id())))?;
    ensure_dim("snippet dimension", cfg.input_dim, snips.dim())?;
    let latent = encoder.encode(snips.vectors())?;
    FeatureVector::new(latent.to_vec(), Layout::DeepLatent)
}

/// Un-normalised fused visual vector: pooled skeleton families repeated per
/// `cfg`, followed by the deep latent when the deep channel is on.
pub fn build_visual(
    sample: &SignSample,
    cfg: &FeatureConfig,
    deep_cfg: &DeepChannelConfig,
    encoder: Option<&DeepEncoder>,
) -> Result<FeatureVector> {
    cfg.validate()?;
    let blocks = if cfg.uses_skeleton() {
        let pooled = features::video_features(sample, cfg)?;
        SkeletonBlocks::split(pooled.values(), cfg)?
    } else {
        SkeletonBlocks::default()
    };
    let latent = if cfg.use_deep {
        let enc = encoder.ok_or_else(|| Error::invalid("deep channel enabled but no encoder given"))?;
        Some(encode_deep(sample, deep_cfg, enc)?)
    } else {
        None
    };
    repeat_fuse(&blocks, latent.as_ref(), cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelMeta {
    features: FeatureConfig,
    deep: DeepChannelConfig,
    train: TrainConfig,
    visual_dim: usize,
    embed_dim: usize,
    seen_labels: Vec<String>,
}

/// A trained zero-shot model.
#[derive(Debug, Clone, PartialEq)]
pub struct ZslModel {
    pub features: FeatureConfig,
    pub deep_config: DeepChannelConfig,
    pub train_config: TrainConfig,
    pub normalizer: SkeletonNormalizer,
    pub network: Network,
    /// Classes the projection was fitted on.
    pub seen_labels: Vec<String>,
}

impl ZslModel {
    pub fn embed_dim(&self) -> usize {
        self.network.projection.output_dim()
    }

    /// Standardised, repeated skeleton block from a pooled skeleton vector.
    fn skeleton_block(&self, pooled: Option<&[f64]>) -> Result<Vec<f64>> {
        match pooled {
            Some(p) if self.features.uses_skeleton() => repeat_skeleton(&self.normalizer.apply(p)?, &self.features),
            None if self.features.uses_skeleton() => Err(Error::invalid("missing skeleton features")),
            _ => Ok(Vec::new()),
        }
    }

    /// Projected embeddings `z = g(x)` for many samples, one row each.
    /// `pooled` holds each sample's pooled skeleton vector when the model
    /// uses skeleton features.
    pub fn embed_prepared(&self, samples: &[&SignSample], pooled: &[Option<&[f64]>]) -> Result<Array2<f64>> {
        let blocks = pooled
            .iter()
            .map(|p| self.skeleton_block(*p))
            .collect::<Result<Vec<_>>>()?;
        let dim = self.network.projection.input_dim();
        let mut x = Array2::zeros((samples.len(), dim));
        for (r, (sample, block)) in samples.iter().zip(&blocks).enumerate() {
            let k = block.len();
            x.slice_mut(s![r, ..k]).assign(&ArrayView1::from(block.as_slice()));
            if let Some(deep) = &self.network.deep {
                let latent = encode_deep(sample, &self.deep_config, deep)?;
                x.slice_mut(s![r, k..]).assign(&ArrayView1::from(latent.values()));
            }
        }
        self.network.projection.forward_batch(&x)
    }

    pub fn embed(&self, sample: &SignSample) -> Result<Vec<f64>> {
        let pooled = if self.features.uses_skeleton() {
            Some(features::video_features(sample, &self.features)?)
        } else {
            None
        };
        let z = self.embed_prepared(&[sample], &[pooled.as_ref().map(|p| p.values())])?;
        Ok(z.row(0).to_vec())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = ModelMeta {
            features: self.features.clone(),
            deep: self.deep_config.clone(),
            train: self.train_config.clone(),
            visual_dim: self.network.projection.input_dim(),
            embed_dim: self.embed_dim(),
            seen_labels: self.seen_labels.clone(),
        };
        let mut ck = Checkpoint::new(serde_json::to_string(&meta).expect("meta serializes"));
        ck.push_params("normalizer", &self.normalizer);
        ck.push_params("projection", &self.network.projection);
        if let Some(d) = &self.network.deep {
            ck.push_params("deep", d);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta: ModelMeta =
            serde_json::from_str(&ck.meta).map_err(|e| Error::invalid(format!("checkpoint metadata: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut normalizer = SkeletonNormalizer::identity(meta.features.skeleton_dim());
        ck.load_params("normalizer", &mut normalizer)?;
        let mut projection =
            ProjectionNet::new(meta.visual_dim, meta.train.projection_hidden, meta.embed_dim, &mut rng);
        ck.load_params("projection", &mut projection)?;
        let deep = if meta.features.use_deep {
            let mut d = DeepEncoder::new(&meta.deep, &mut rng);
            ck.load_params("deep", &mut d)?;
            Some(d)
        } else {
            None
        };
        Ok(ZslModel {
            features: meta.features,
            deep_config: meta.deep,
            train_config: meta.train,
            normalizer,
            network: Network { projection, deep },
            seen_labels: meta.seen_labels,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ZslModel,
    /// Mean objective per epoch.
    pub losses: Vec<f64>,
}

/// Trains on `samples`, computing pooled skeleton features first.
pub fn train(
    samples: &[SignSample],
    embeddings: &EmbeddingSet,
    features: &FeatureConfig,
    deep: &DeepChannelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let pooled = if features.uses_skeleton() {
        features::extract_batch(samples, features)?
            .into_iter()
            .map(|f| Some(f.into_values()))
            .collect()
    } else {
        vec![None; samples.len()]
    };
    let refs: Vec<&SignSample> = samples.iter().collect();
    train_prepared(&refs, &pooled, embeddings, features, deep, cfg)
}

/// Training with pooled skeleton vectors already computed (`None` entries
/// when the config has no skeleton family).
pub fn train_prepared(
    samples: &[&SignSample],
    pooled: &[Option<Vec<f64>>],
    embeddings: &EmbeddingSet,
    features: &FeatureConfig,
    deep_cfg: &DeepChannelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    features.validate()?;
    cfg.validate()?;
    if features.use_deep {
        deep_cfg.validate()?;
    }
    if samples.is_empty() {
        return Err(Error::invalid("no training samples"));
    }
    ensure_dim("pooled feature rows", samples.len(), pooled.len())?;

    let mut targets = Vec::with_capacity(samples.len());
    for s in samples {
        let e = embeddings
            .get(s.label())
            .ok_or_else(|| Error::invalid(format!("label {:?} has no embedding", s.label())))?;
        targets.push(e.vector.as_slice());
    }
    let mut snippet_refs = Vec::with_capacity(samples.len());
    for s in samples {
        if features.use_deep {
            let d = s
                .deep()
                .filter(|d| !d.is_empty())
                .ok_or_else(|| Error::invalid(format!("sample {}: deep channel enabled but no snippets", s.id())))?;
            ensure_dim("snippet dimension", deep_cfg.input_dim, d.dim())?;
            snippet_refs.push(Some(d.vectors()));
        } else {
            snippet_refs.push(None);
        }
    }

    let normalizer = if features.uses_skeleton() {
        let rows: Vec<Vec<f64>> = pooled
            .iter()
            .map(|p| p.clone().ok_or_else(|| Error::invalid("missing pooled skeleton features")))
            .collect::<Result<_>>()?;
        if cfg.standardize {
            SkeletonNormalizer::fit(&rows)?
        } else {
            SkeletonNormalizer::identity(features.skeleton_dim())
        }
    } else {
        SkeletonNormalizer::identity(0)
    };

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let projection = ProjectionNet::new(features.visual_dim(), cfg.projection_hidden, embeddings.dim(), &mut init_rng);
    let deep = features.use_deep.then(|| DeepEncoder::new(deep_cfg, &mut init_rng));
    let mut model = ZslModel {
        features: features.clone(),
        deep_config: deep_cfg.clone(),
        train_config: cfg.clone(),
        normalizer,
        network: Network { projection, deep },
        seen_labels: Vec::new(),
    };
    let mut labels: Vec<String> = samples.iter().map(|s| s.label().to_string()).collect();
    labels.sort();
    labels.dedup();
    model.seen_labels = labels;

    let blocks = pooled
        .iter()
        .map(|p| model.skeleton_block(p.as_deref()))
        .collect::<Result<Vec<_>>>()?;

    let mut adam = AdamState::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_total = 0.0;
        let mut epoch_used = 0;
        for chunk in order.chunks(cfg.batch) {
            let items: Vec<BatchItem<'_>> = chunk
                .iter()
                .map(|&i| BatchItem {
                    skeleton: &blocks[i],
                    snippets: snippet_refs[i],
                    target: targets[i],
                })
                .collect();
            let (step, used) = match model.network.loss_and_grad(&items, cfg.loss, cfg.lambda_recon) {
                Err(Error::ZeroNorm(_)) => {
                    // an exactly-zero prediction has no cosine gradient; drop
                    // those samples from this step
                    let kept: Vec<BatchItem<'_>> = items
                        .iter()
                        .filter(|it| {
                            !matches!(
                                model.network.loss(std::slice::from_ref(*it), cfg.loss, cfg.lambda_recon),
                                Err(Error::ZeroNorm(_))
                            )
                        })
                        .copied()
                        .collect();
                    log::warn!(
                        "epoch {epoch}: skipped {} sample(s) with a zero-norm prediction",
                        items.len() - kept.len()
                    );
                    if kept.is_empty() {
                        continue;
                    }
                    (model.network.loss_and_grad(&kept, cfg.loss, cfg.lambda_recon)?, kept.len())
                }
                other => (other?, items.len()),
            };
            if !step.loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_total += step.loss * used as f64;
            epoch_used += used;
            adam.step(&mut model.network, &step.grads).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { epoch },
                other => other,
            })?;
        }
        if epoch_used == 0 {
            return Err(Error::invalid(format!(
                "epoch {epoch}: every prediction was the zero vector, nothing to train on"
            )));
        }
        let mean = epoch_total / epoch_used as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        log::debug!("epoch {epoch}: loss {mean:.6}");
        losses.push(mean);
    }
    Ok(TrainOutcome { model, losses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: String,
    pub score: f64,
}

/// Zero-shot decision for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub true_label: String,
    pub predicted_label: String,
    /// Softmax over cosine similarities, in candidate order.
    pub scores: Vec<ClassScore>,
    #[serde(skip)]
    pub similarities: Vec<f64>,
}

/// Classifies a projected embedding `z` against candidate class embeddings.
/// The label is the most similar class (lowest candidate index on ties);
/// scores are the temperature-1 softmax of the similarities.
pub fn classify_embedding(
    id: &str,
    true_label: &str,
    z: &[f64],
    candidates: &EmbeddingSet,
) -> Result<Prediction> {
    if norm(z) == 0.0 {
        return Err(Error::ZeroNorm("projected embedding"));
    }
    let sims = candidates
        .entries()
        .iter()
        .map(|e| cosine_similarity(&e.vector, z))
        .collect::<Result<Vec<_>>>()?;
    let best = argmax(&sims).ok_or_else(|| Error::invalid("no candidate classes"))?;
    let probs = softmax(&sims, 1.0)?;
    Ok(Prediction {
        id: id.to_string(),
        true_label: true_label.to_string(),
        predicted_label: candidates.entries()[best].label.clone(),
        scores: candidates
            .entries()
            .iter()
            .zip(&probs)
            .map(|(e, &p)| ClassScore {
                label: e.label.clone(),
                score: p,
            })
            .collect(),
        similarities: sims,
    })
}

pub fn predict(sample: &SignSample, candidates: &EmbeddingSet, model: &ZslModel) -> Result<Prediction> {
    ensure_dim("candidate embedding", model.embed_dim(), candidates.dim())?;
    let z = model.embed(sample)?;
    classify_embedding(sample.id(), sample.label(), &z, candidates)
}

/// Predictions for many samples; pooled skeleton vectors as in
/// [`ZslModel::embed_prepared`]. A sample whose projected embedding is the
/// zero vector cannot be scored; it gets `None` and a logged warning.
pub fn predict_prepared(
    samples: &[&SignSample],
    pooled: &[Option<&[f64]>],
    candidates: &EmbeddingSet,
    model: &ZslModel,
) -> Result<Vec<Option<Prediction>>> {
    ensure_dim("candidate embedding", model.embed_dim(), candidates.dim())?;
    let z = model.embed_prepared(samples, pooled)?;
    samples
        .iter()
        .zip(z.axis_iter(Axis(0)))
        .map(|(s, row)| {
            match classify_embedding(s.id(), s.label(), row.as_slice().expect("row-major"), candidates) {
                Ok(p) => Ok(Some(p)),
                Err(Error::ZeroNorm(_)) => {
                    log::warn!("sample {}: projected embedding is zero, no prediction", s.id());
                    Ok(None)
                }
                Err(e) => Err(Error::invalid(format!("sample {}: {e}", s.id()))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassEmbedding, DeepSnippets, FrameSkeleton, HandFrame};

    fn hand(seed: f64) -> HandFrame {
        let coords: Vec<[f64; 3]> = (1..=21)
            .map(|j| {
                let j = j as f64;
                [(j + seed).sin(), (0.5 * j - seed).cos(), 0.1 * j * seed]
            })
            .collect();
        HandFrame::from_coords(&coords).unwrap()
    }

    fn sample(id: &str, label: &str, seed: f64, snippets: Option<Vec<Vec<f32>>>) -> SignSample {
        let frames: Vec<FrameSkeleton> = (0..16)
            .map(|t| FrameSkeleton::both(hand(seed + 0.01 * t as f64), hand(seed + 1.0)))
            .collect();
        let deep = snippets.map(|s| DeepSnippets::new(s).unwrap());
        SignSample::new(id, label, frames, deep).unwrap()
    }

    fn embeddings() -> EmbeddingSet {
        EmbeddingSet::new(vec![
            ClassEmbedding {
                label: "a".into(),
                vector: vec![1.0, 0.0, 0.0],
            },
            ClassEmbedding {
                label: "b".into(),
                vector: vec![0.0, 1.0, 0.0],
            },
        ])
        .unwrap()
    }

    fn small_deep() -> DeepChannelConfig {
        DeepChannelConfig {
            input_dim: 4,
            lstm_hidden: 6,
            ..DeepChannelConfig::default()
        }
    }

    #[test]
    fn encode_deep_shapes_and_zero_model() {
        let cfg = small_deep();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = DeepEncoder::new(&cfg, &mut rng);
        let s = sample("x", "a", 0.3, Some(vec![vec![0.5, -0.2, 0.1, 0.9]]));
        assert_eq!(encode_deep(&s, &cfg, &enc).unwrap().len(), 510);

        let mut zero = enc.clone();
        zero.fill(0.0);
        let z = encode_deep(&s, &cfg, &zero).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));

        let no_deep = sample("y", "a", 0.3, None);
        assert!(encode_deep(&no_deep, &cfg, &enc).is_err());
    }

    #[test]
    fn repeated_snippet_changes_latent() {
        let cfg = small_deep();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let enc = DeepEncoder::new(&cfg, &mut rng);
        let v = vec![0.5f32, -0.2, 0.1, 0.9];
        let once = enc.encode(std::slice::from_ref(&v)).unwrap();
        let twice = enc.encode(&[v.clone(), v]).unwrap();
        assert_ne!(once, twice);
    }

    #[test]
    fn build_visual_dimensions() {
        let cfg = small_deep();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = DeepEncoder::new(&cfg, &mut rng);
        let s = sample("x", "a", 0.3, Some(vec![vec![0.5, -0.2, 0.1, 0.9]]));
        let full = build_visual(&s, &FeatureConfig::default(), &cfg, Some(&enc)).unwrap();
        assert_eq!(full.len(), 1024);
        let svd = FeatureConfig::families(false, false, true, false);
        assert_eq!(build_visual(&s, &svd, &cfg, None).unwrap().len(), 210);
        let deep_only = FeatureConfig::families(false, false, false, true);
        assert_eq!(build_visual(&s, &deep_only, &cfg, Some(&enc)).unwrap().len(), 510);
        assert_eq!(
            build_visual(&s, &FeatureConfig::skeleton_only(), &cfg, None).unwrap().len(),
            514
        );
    }

    #[test]
    fn classify_exact_match_and_ties() {
        let emb = embeddings();
        let p = classify_embedding("s", "a", &[2.0, 0.0, 0.0], &emb).unwrap();
        assert_eq!(p.predicted_label, "a");
        assert!((p.scores[0].score - 0.7311).abs() < 1e-4);
        assert!((p.scores[1].score - 0.2689).abs() < 1e-4);

        let tie = classify_embedding("s", "a", &[0.0, 0.0, 1.0], &emb).unwrap();
        assert_eq!(tie.predicted_label, "a");

        assert!(matches!(
            classify_embedding("s", "a", &[0.0; 3], &emb),
            Err(Error::ZeroNorm(_))
        ));
    }

    #[test]
    fn training_is_deterministic_and_finite() {
        let emb = embeddings();
        let samples = vec![sample("1", "a", 0.1, None), sample("2", "b", 0.9, None)];
        let tc = TrainConfig {
            epochs: 5,
            projection_hidden: 16,
            ..TrainConfig::default()
        };
        let fc = FeatureConfig::skeleton_only();
        let a = train(&samples, &emb, &fc, &DeepChannelConfig::default(), &tc).unwrap();
        let b = train(&samples, &emb, &fc, &DeepChannelConfig::default(), &tc).unwrap();
        assert_eq!(a.losses.len(), 5);
        assert!(a.losses.iter().all(|l| l.is_finite()));
        assert_eq!(a.model, b.model);
        assert!(a.model.network.deep.is_none());
        assert_eq!(a.model.seen_labels, vec!["a", "b"]);
    }

    #[test]
    fn training_requires_embeddings_and_samples() {
        let emb = embeddings();
        let fc = FeatureConfig::skeleton_only();
        let tc = TrainConfig {
            epochs: 1,
            projection_hidden: 4,
            ..TrainConfig::default()
        };
        let dc = DeepChannelConfig::default();
        assert!(train(&[], &emb, &fc, &dc, &tc).is_err());
        let orphan = vec![sample("1", "zzz", 0.1, None)];
        assert!(train(&orphan, &emb, &fc, &dc, &tc).is_err());
    }

    #[test]
    fn checkpoint_round_trip_preserves_model() {
        let emb = embeddings();
        let dc = small_deep();
        let snips = |x: f32| Some(vec![vec![x, 0.5, -x, 0.25]]);
        let samples = vec![sample("1", "a", 0.1, snips(0.3)), sample("2", "b", 0.9, snips(-0.7))];
        let tc = TrainConfig {
            epochs: 2,
            projection_hidden: 8,
            ..TrainConfig::default()
        };
        let out = train(&samples, &emb, &FeatureConfig::default(), &dc, &tc).unwrap();
        let ck = out.model.to_checkpoint();
        let back = ZslModel::from_checkpoint(&ck).unwrap();
        assert_eq!(back, out.model);
        assert_eq!(
            predict(&samples[0], &emb, &back).unwrap(),
            predict(&samples[0], &emb, &out.model).unwrap()
        );
    }

    #[test]
    fn normalizer_centres_varying_dims_only() {
        let n = SkeletonNormalizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(n.shift, vec![2.0, 0.0]);
        assert_eq!(n.scale, vec![1.0, 1.0]);
        assert_eq!(n.apply(&[3.0, 5.0]).unwrap(), vec![1.0, 5.0]);
    }

    #[test]
    fn single_sample_skeleton_training_converges() {
        let emb = embeddings();
        let tc = TrainConfig {
            epochs: 150,
            lr: 1e-2,
            projection_hidden: 16,
            lambda_recon: 0.0,
            ..TrainConfig::default()
        };
        let one = vec![sample("1", "a", 0.4, None)];
        let out = train(&one, &emb, &FeatureConfig::skeleton_only(), &DeepChannelConfig::default(), &tc).unwrap();
        assert!(*out.losses.last().unwrap() < 0.01, "{:?}", out.losses.last());
    }
}
