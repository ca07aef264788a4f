//! The two encoders of the grounded-speech model.
//!
//! Captions: feature frames → 1-d convolution → stacked bidirectional LSTM →
//! attention pooling → linear projection → L2 normalization. Images: a
//! single affine projection over precomputed backbone features, normalized
//! the same way. Both land in one embedding space where cosine similarity is
//! a plain dot product.

pub mod checkpoint;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::nn::{attention_pool, bilstm_layer, LstmDirVars};
use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Architecture dimensions. The defaults are the full-scale model; tests and
/// examples shrink them via struct-update syntax.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Input feature columns per frame.
    pub feature_dim: usize,
    pub conv_kernel: usize,
    pub conv_stride: usize,
    pub conv_channels: usize,
    /// Frames of zero padding on each side before the convolution.
    pub conv_padding: usize,
    pub lstm_layers: usize,
    /// Hidden units per LSTM direction.
    pub lstm_hidden: usize,
    /// Hidden width of the attention scorer.
    pub attention_hidden: usize,
    /// Shared embedding dimension.
    pub embedding_dim: usize,
    /// Length of the precomputed image feature vectors.
    pub image_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_dim: 39,
            conv_kernel: 6,
            conv_stride: 2,
            conv_channels: 64,
            conv_padding: 2,
            lstm_layers: 4,
            lstm_hidden: 1024,
            attention_hidden: 128,
            embedding_dim: 2048,
            image_dim: 2048,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("feature_dim", self.feature_dim),
            ("conv_kernel", self.conv_kernel),
            ("conv_stride", self.conv_stride),
            ("conv_channels", self.conv_channels),
            ("lstm_layers", self.lstm_layers),
            ("lstm_hidden", self.lstm_hidden),
            ("attention_hidden", self.attention_hidden),
            ("embedding_dim", self.embedding_dim),
            ("image_dim", self.image_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// LSTM input width for a given layer index.
    fn lstm_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.conv_channels
        } else {
            2 * self.lstm_hidden
        }
    }
}

/// Weights for one LSTM direction. `w_ih` is `input×4H`, `w_hh` is `H×4H`,
/// gate columns packed input/forget/cell/output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirParams<S> {
    pub w_ih: Tensor<S>,
    pub w_hh: Tensor<S>,
    pub bias: Tensor<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmLayerParams<S> {
    pub forward: LstmDirParams<S>,
    pub backward: LstmDirParams<S>,
}

/// All trainable tensors of both encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    /// `K×feature_dim×conv_channels`.
    pub conv_kernel: Tensor<S>,
    pub conv_bias: Tensor<S>,
    pub lstm: Vec<BiLstmLayerParams<S>>,
    /// `2H×attention_hidden`.
    pub attn_w: Tensor<S>,
    pub attn_b: Tensor<S>,
    /// `attention_hidden×1` scorer.
    pub attn_v: Tensor<S>,
    /// `2H×embedding_dim`.
    pub proj_w: Tensor<S>,
    pub proj_b: Tensor<S>,
    /// `image_dim×embedding_dim`.
    pub img_w: Tensor<S>,
    pub img_b: Tensor<S>,
}

impl<S: Scalar> ModelParams<S> {
    /// All-zero tensors with the shapes `config` implies. Used as the
    /// loading target for checkpoints.
    pub fn zeros(config: &ModelConfig) -> Self {
        let h = config.lstm_hidden;
        let lstm = (0..config.lstm_layers)
            .map(|layer| {
                let input = config.lstm_input_dim(layer);
                let dir = || LstmDirParams {
                    w_ih: Tensor::zeros(vec![input, 4 * h]),
                    w_hh: Tensor::zeros(vec![h, 4 * h]),
                    bias: Tensor::zeros(vec![4 * h]),
                };
                BiLstmLayerParams {
                    forward: dir(),
                    backward: dir(),
                }
            })
            .collect();
        ModelParams {
            conv_kernel: Tensor::zeros(vec![
                config.conv_kernel,
                config.feature_dim,
                config.conv_channels,
            ]),
            conv_bias: Tensor::zeros(vec![config.conv_channels]),
            lstm,
            attn_w: Tensor::zeros(vec![2 * h, config.attention_hidden]),
            attn_b: Tensor::zeros(vec![config.attention_hidden]),
            attn_v: Tensor::zeros(vec![config.attention_hidden, 1]),
            proj_w: Tensor::zeros(vec![2 * h, config.embedding_dim]),
            proj_b: Tensor::zeros(vec![config.embedding_dim]),
            img_w: Tensor::zeros(vec![config.image_dim, config.embedding_dim]),
            img_b: Tensor::zeros(vec![config.embedding_dim]),
        }
    }

    /// Xavier-uniform weights, zero biases, drawn from a seeded stream in a
    /// fixed parameter order so identical seeds give identical models.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(config);
        let mut fill = |t: &mut Tensor<S>, fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in t.data_mut() {
                *v = S::from_f64(rng.gen_range(-bound..bound));
            }
        };

        let k = config.conv_kernel;
        fill(
            &mut params.conv_kernel,
            k * config.feature_dim,
            k * config.conv_channels,
        );
        let h = config.lstm_hidden;
        for layer in 0..config.lstm_layers {
            let input = config.lstm_input_dim(layer);
            let (fwd, bwd) = {
                let l = &mut params.lstm[layer];
                (&mut l.forward, &mut l.backward)
            };
            fill(&mut fwd.w_ih, input, 4 * h);
            fill(&mut fwd.w_hh, h, 4 * h);
            fill(&mut bwd.w_ih, input, 4 * h);
            fill(&mut bwd.w_hh, h, 4 * h);
        }
        fill(&mut params.attn_w, 2 * h, config.attention_hidden);
        fill(&mut params.attn_v, config.attention_hidden, 1);
        fill(&mut params.proj_w, 2 * h, config.embedding_dim);
        fill(&mut params.img_w, config.image_dim, config.embedding_dim);
        params
    }

    /// `(name, tensor)` pairs in a fixed order shared by the optimizer and
    /// the checkpoint format.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out: Vec<(String, &Tensor<S>)> = vec![
            ("conv.kernel".into(), &self.conv_kernel),
            ("conv.bias".into(), &self.conv_bias),
        ];
        for (i, layer) in self.lstm.iter().enumerate() {
            for (dir_name, dir) in [("fwd", &layer.forward), ("bwd", &layer.backward)] {
                out.push((format!("lstm.{i}.{dir_name}.w_ih"), &dir.w_ih));
                out.push((format!("lstm.{i}.{dir_name}.w_hh"), &dir.w_hh));
                out.push((format!("lstm.{i}.{dir_name}.bias"), &dir.bias));
            }
        }
        out.push(("attn.w".into(), &self.attn_w));
        out.push(("attn.b".into(), &self.attn_b));
        out.push(("attn.v".into(), &self.attn_v));
        out.push(("proj.w".into(), &self.proj_w));
        out.push(("proj.b".into(), &self.proj_b));
        out.push(("img.w".into(), &self.img_w));
        out.push(("img.b".into(), &self.img_b));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<S>)> {
        let mut out: Vec<(String, &mut Tensor<S>)> = vec![
            ("conv.kernel".into(), &mut self.conv_kernel),
            ("conv.bias".into(), &mut self.conv_bias),
        ];
        for (i, layer) in self.lstm.iter_mut().enumerate() {
            for (dir_name, dir) in [("fwd", &mut layer.forward), ("bwd", &mut layer.backward)] {
                out.push((format!("lstm.{i}.{dir_name}.w_ih"), &mut dir.w_ih));
                out.push((format!("lstm.{i}.{dir_name}.w_hh"), &mut dir.w_hh));
                out.push((format!("lstm.{i}.{dir_name}.bias"), &mut dir.bias));
            }
        }
        out.push(("attn.w".into(), &mut self.attn_w));
        out.push(("attn.b".into(), &mut self.attn_b));
        out.push(("attn.v".into(), &mut self.attn_v));
        out.push(("proj.w".into(), &mut self.proj_w));
        out.push(("proj.b".into(), &mut self.proj_b));
        out.push(("img.w".into(), &mut self.img_w));
        out.push(("img.b".into(), &mut self.img_b));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<T: Scalar>(&self) -> ModelParams<T> {
        ModelParams {
            conv_kernel: self.conv_kernel.cast(),
            conv_bias: self.conv_bias.cast(),
            lstm: self
                .lstm
                .iter()
                .map(|l| BiLstmLayerParams {
                    forward: LstmDirParams {
                        w_ih: l.forward.w_ih.cast(),
                        w_hh: l.forward.w_hh.cast(),
                        bias: l.forward.bias.cast(),
                    },
                    backward: LstmDirParams {
                        w_ih: l.backward.w_ih.cast(),
                        w_hh: l.backward.w_hh.cast(),
                        bias: l.backward.bias.cast(),
                    },
                })
                .collect(),
            attn_w: self.attn_w.cast(),
            attn_b: self.attn_b.cast(),
            attn_v: self.attn_v.cast(),
            proj_w: self.proj_w.cast(),
            proj_b: self.proj_b.cast(),
            img_w: self.img_w.cast(),
            img_b: self.img_b.cast(),
        }
    }
}

/// Tape handles for every parameter, created once per forward pass.
pub struct ModelVars {
    pub conv_kernel: Var,
    pub conv_bias: Var,
    pub lstm: Vec<(LstmDirVars, LstmDirVars)>,
    pub attn_w: Var,
    pub attn_b: Var,
    pub attn_v: Var,
    pub proj_w: Var,
    pub proj_b: Var,
    pub img_w: Var,
    pub img_b: Var,
}

impl ModelVars {
    /// Inserts every parameter tensor as a leaf on `tape`.
    pub fn insert<S: Scalar>(tape: &Tape<S>, params: &ModelParams<S>) -> ModelVars {
        let dir = |d: &LstmDirParams<S>| LstmDirVars {
            w_ih: tape.leaf(d.w_ih.clone()),
            w_hh: tape.leaf(d.w_hh.clone()),
            bias: tape.leaf(d.bias.clone()),
        };
        ModelVars {
            conv_kernel: tape.leaf(params.conv_kernel.clone()),
            conv_bias: tape.leaf(params.conv_bias.clone()),
            lstm: params
                .lstm
                .iter()
                .map(|l| (dir(&l.forward), dir(&l.backward)))
                .collect(),
            attn_w: tape.leaf(params.attn_w.clone()),
            attn_b: tape.leaf(params.attn_b.clone()),
            attn_v: tape.leaf(params.attn_v.clone()),
            proj_w: tape.leaf(params.proj_w.clone()),
            proj_b: tape.leaf(params.proj_b.clone()),
            img_w: tape.leaf(params.img_w.clone()),
            img_b: tape.leaf(params.img_b.clone()),
        }
    }

    /// Gradients for every parameter, in [`ModelParams::named_tensors`]
    /// order. Call after `tape.backward`.
    pub fn gradients<S: Scalar>(&self, tape: &Tape<S>) -> Vec<Tensor<S>> {
        let mut out = vec![tape.grad(self.conv_kernel), tape.grad(self.conv_bias)];
        for (fwd, bwd) in &self.lstm {
            for d in [fwd, bwd] {
                out.push(tape.grad(d.w_ih));
                out.push(tape.grad(d.w_hh));
                out.push(tape.grad(d.bias));
            }
        }
        for v in [
            self.attn_w,
            self.attn_b,
            self.attn_v,
            self.proj_w,
            self.proj_b,
            self.img_w,
            self.img_b,
        ] {
            out.push(tape.grad(v));
        }
        out
    }
}

/// Caption encoder forward pass on `tape`. `features` is `T×feature_dim`;
/// the result is a unit-norm `1×embedding_dim` row.
pub fn caption_forward<S: Scalar>(
    tape: &Tape<S>,
    vars: &ModelVars,
    config: &ModelConfig,
    features: &Tensor<S>,
) -> Result<Var> {
    if features.ndim() != 2 || features.cols() != config.feature_dim {
        return Err(Error::Shape(format!(
            "caption input has shape {:?}, expected T×{}",
            features.shape(),
            config.feature_dim
        )));
    }
    let x = tape.leaf(features.clone());
    let conv = tape.conv1d(x, vars.conv_kernel, config.conv_stride, config.conv_padding)?;
    let mut h = tape.add_row_broadcast(conv, vars.conv_bias)?;
    for (fwd, bwd) in &vars.lstm {
        h = bilstm_layer(tape, h, fwd, bwd, config.lstm_hidden)?;
    }
    let (pooled, _weights) = attention_pool(tape, h, vars.attn_w, vars.attn_b, vars.attn_v)?;
    let projected = tape.add_row_broadcast(tape.matmul(pooled, vars.proj_w)?, vars.proj_b)?;
    tape.l2_normalize_rows(projected)
}

/// Image encoder forward pass: affine projection plus normalization.
/// `vectors` is `B×image_dim`; the result is `B×embedding_dim`, unit-norm
/// rows.
pub fn image_forward<S: Scalar>(
    tape: &Tape<S>,
    vars: &ModelVars,
    config: &ModelConfig,
    vectors: &Tensor<S>,
) -> Result<Var> {
    if vectors.ndim() != 2 || vectors.cols() != config.image_dim {
        return Err(Error::Shape(format!(
            "image input has shape {:?}, expected B×{}",
            vectors.shape(),
            config.image_dim
        )));
    }
    let x = tape.leaf(vectors.clone());
    let projected = tape.add_row_broadcast(tape.matmul(x, vars.img_w)?, vars.img_b)?;
    tape.l2_normalize_rows(projected)
}

/// Full contrastive step for one batch: encodes `caption_features` and
/// `image_vectors` (row `j` of each being a matched pair), forms the
/// caption-by-image cosine matrix and the bidirectional hinge loss.
/// Returns `(loss, similarity matrix)` nodes.
pub fn contrastive_batch_loss<S: Scalar>(
    tape: &Tape<S>,
    vars: &ModelVars,
    config: &ModelConfig,
    caption_features: &[&Tensor<S>],
    image_vectors: &Tensor<S>,
    margin: S,
) -> Result<(Var, Var)> {
    if caption_features.len() != image_vectors.rows() {
        return Err(Error::Shape(format!(
            "{} captions but {} image rows",
            caption_features.len(),
            image_vectors.rows()
        )));
    }
    let caps: Vec<Var> = caption_features
        .iter()
        .map(|f| caption_forward(tape, vars, config, f))
        .collect::<Result<_>>()?;
    let cap_matrix = tape.stack_rows(&caps)?;
    let img_matrix = image_forward(tape, vars, config, image_vectors)?;
    // Unit-norm rows make this dot-product matrix the cosine matrix.
    let sims = tape.matmul(cap_matrix, tape.transpose(img_matrix)?)?;
    let loss = tape.hinge_loss(sims, margin)?;
    Ok((loss, sims))
}

/// A config plus parameters plus training history, ready for inference or
/// more training.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams<f32>,
    /// Training epochs completed when this model was captured (0 = fresh).
    pub epoch: u32,
    pub seed: u64,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(&config, seed);
        Ok(Model {
            config,
            params,
            epoch: 0,
            seed,
        })
    }

    /// Embeds one caption's feature matrix. Output has unit L2 norm.
    pub fn encode_caption(&self, features: &Tensor<f32>) -> Result<Tensor<f32>> {
        let tape = Tape::new();
        let vars = ModelVars::insert(&tape, &self.params);
        let out = caption_forward(&tape, &vars, &self.config, features)?;
        Ok(tape.value(out))
    }

    /// Embeds one image feature vector. Output has unit L2 norm.
    pub fn encode_image(&self, vector: &[f32]) -> Result<Tensor<f32>> {
        if vector.len() != self.config.image_dim {
            return Err(Error::Shape(format!(
                "image vector has length {}, expected {}",
                vector.len(),
                self.config.image_dim
            )));
        }
        let tape = Tape::new();
        let vars = ModelVars::insert(&tape, &self.params);
        let input = Tensor::new(vec![1, self.config.image_dim], vector.to_vec())?;
        let out = image_forward(&tape, &vars, &self.config, &input)?;
        Ok(tape.value(out))
    }
}
