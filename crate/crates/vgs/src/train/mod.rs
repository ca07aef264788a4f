//! The contrastive training loop: epoch batching, per-step cyclical
//! learning rates, dev-error tracking, and best-epoch selection.

pub mod subsets;

pub use subsets::{make_paraphrase_subsets, SubsetSpec};

use std::collections::HashSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::optim::{Adam, LrSchedule};
use crate::autodiff::tape::Tape;
use crate::autodiff::tensor::Tensor;
use crate::encoder::checkpoint::{load_checkpoint, save_checkpoint};
use crate::encoder::{contrastive_batch_loss, Model, ModelConfig, ModelVars};
use crate::error::{Error, Result};
use crate::eval::retrieval_eval;

/// Everything a training run needs to know besides the data.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Hinge margin of the contrastive loss.
    pub margin: f64,
    pub seed: u64,
    pub lr: LrSchedule,
    pub model: ModelConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 32,
            batch_size: 32,
            margin: 0.2,
            seed: 0,
            lr: LrSchedule::default(),
            model: ModelConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(
                "batch_size must be at least 2; the hinge loss needs a negative".into(),
            ));
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return Err(Error::Config(format!(
                "margin must be finite and positive, got {}",
                self.margin
            )));
        }
        self.model.validate()
    }
}

/// One training example, fully materialized.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub caption_id: String,
    pub image_id: String,
    pub features: Tensor<f32>,
    pub image_vector: Vec<f32>,
}

/// The held-out retrieval set scored after every epoch.
#[derive(Debug, Clone)]
pub struct DevSet {
    caption_ids: Vec<String>,
    image_ids: Vec<String>,
    caption_features: Vec<Tensor<f32>>,
    /// Caption index → image index.
    caption_image: Vec<usize>,
    image_vectors: Vec<Vec<f32>>,
}

impl DevSet {
    pub fn new(
        caption_ids: Vec<String>,
        caption_features: Vec<Tensor<f32>>,
        caption_image: Vec<usize>,
        image_ids: Vec<String>,
        image_vectors: Vec<Vec<f32>>,
    ) -> Result<Self> {
        if caption_ids.is_empty() || image_ids.is_empty() {
            return Err(Error::Train("dev set must not be empty".into()));
        }
        if caption_ids.len() != caption_features.len()
            || caption_ids.len() != caption_image.len()
            || image_ids.len() != image_vectors.len()
        {
            return Err(Error::Train(format!(
                "dev set is inconsistent: {} caption ids, {} feature sets, {} truth entries, \
                 {} image ids, {} image vectors",
                caption_ids.len(),
                caption_features.len(),
                caption_image.len(),
                image_ids.len(),
                image_vectors.len()
            )));
        }
        if let Some(&bad) = caption_image.iter().find(|&&i| i >= image_ids.len()) {
            return Err(Error::Train(format!(
                "dev ground truth names image index {bad}, only {} images",
                image_ids.len()
            )));
        }
        Ok(DevSet {
            caption_ids,
            image_ids,
            caption_features,
            caption_image,
            image_vectors,
        })
    }

    pub fn caption_ids(&self) -> &[String] {
        &self.caption_ids
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    /// Retrieval-based dev error of `model` on this set.
    pub fn error_for(&self, model: &Model) -> Result<f64> {
        let cap_rows: Vec<Vec<f32>> = self
            .caption_features
            .iter()
            .map(|f| Ok(model.encode_caption(f)?.data().to_vec()))
            .collect::<Result<_>>()?;
        let img_rows: Vec<Vec<f32>> = self
            .image_vectors
            .iter()
            .map(|v| Ok(model.encode_image(v)?.data().to_vec()))
            .collect::<Result<_>>()?;
        let caps = Tensor::from_rows(&cap_rows)?;
        let imgs = Tensor::from_rows(&img_rows)?;
        Ok(retrieval_eval(&caps, &imgs, &self.caption_image)?.dev_error())
    }
}

/// Seed for the shuffle of one epoch, derived so that epochs differ but the
/// whole run is reproducible from the base seed.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Shuffled index batches for one epoch. Every item appears at most once;
/// a final batch shorter than `batch_size` is dropped.
pub fn make_batches(
    n_items: usize,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<Vec<Vec<usize>>> {
    if batch_size < 2 {
        return Err(Error::Train(format!(
            "batch size {batch_size} cannot form contrastive pairs"
        )));
    }
    if n_items < batch_size {
        return Err(Error::Train(format!(
            "dataset has {n_items} items, smaller than one batch of {batch_size}"
        )));
    }
    let mut order: Vec<usize> = (0..n_items).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(seed, epoch));
    order.shuffle(&mut rng);
    Ok(order
        .chunks_exact(batch_size)
        .map(|c| c.to_vec())
        .collect())
}

/// What one finished epoch left behind.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Mean contrastive loss over the epoch's batches.
    pub train_loss: f64,
    /// Retrieval error on the dev set, in the unit interval.
    pub dev_error: f64,
    pub checkpoint: PathBuf,
}

/// Index (1-based epoch number) of the record with the lowest dev error;
/// ties go to the earliest epoch.
pub fn select_best_epoch(records: &[EpochRecord]) -> Result<usize> {
    let best = records
        .iter()
        .min_by(|a, b| a.dev_error.partial_cmp(&b.dev_error).unwrap())
        .ok_or_else(|| Error::Train("no epoch records to select from".into()))?;
    Ok(best.epoch)
}

/// A finished training run.
#[derive(Debug)]
pub struct TrainRun {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// The best epoch's checkpoint, read back from disk.
    pub best_model: Model,
    pub log_path: PathBuf,
    pub config_path: PathBuf,
}

/// Runs the full training loop and writes checkpoints, a per-epoch CSV log,
/// and a config snapshot into `out_dir`.
pub fn train(
    config: &TrainingConfig,
    train_set: &[TrainExample],
    dev: &DevSet,
    out_dir: &Path,
) -> Result<TrainRun> {
    config.validate()?;
    for ex in train_set {
        if ex.features.ndim() != 2 || ex.features.cols() != config.model.feature_dim {
            return Err(Error::Train(format!(
                "caption {} has feature shape {:?}, expected T×{}",
                ex.caption_id,
                ex.features.shape(),
                config.model.feature_dim
            )));
        }
        if ex.image_vector.len() != config.model.image_dim {
            return Err(Error::Train(format!(
                "image {} has {} feature values, expected {}",
                ex.image_id,
                ex.image_vector.len(),
                config.model.image_dim
            )));
        }
    }

    // The dev set must be untouched by training: any shared caption or
    // image id invalidates epoch selection.
    let dev_captions: HashSet<&str> = dev.caption_ids.iter().map(String::as_str).collect();
    let dev_images: HashSet<&str> = dev.image_ids.iter().map(String::as_str).collect();
    for ex in train_set {
        if dev_captions.contains(ex.caption_id.as_str()) {
            return Err(Error::Train(format!(
                "caption {} appears in both the training and dev sets",
                ex.caption_id
            )));
        }
        if dev_images.contains(ex.image_id.as_str()) {
            return Err(Error::Train(format!(
                "image {} appears in both the training and dev sets",
                ex.image_id
            )));
        }
    }

    std::fs::create_dir_all(out_dir)?;
    let config_path = out_dir.join("run_config.toml");
    let snapshot = toml::to_string_pretty(config)
        .map_err(|e| Error::Config(format!("cannot serialize run config: {e}")))?;
    std::fs::write(&config_path, snapshot)?;
    let log_path = out_dir.join("train_log.csv");
    let mut log = std::io::BufWriter::new(std::fs::File::create(&log_path)?);
    writeln!(log, "epoch,train_loss,dev_error,lr_start,lr_end")?;

    let mut model = Model::new(config.model.clone(), config.seed)?;
    let mut adam = Adam::<f32>::new();
    let margin = config.margin as f32;
    let mut global_step = 0usize;
    let mut records = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let batches = make_batches(train_set.len(), config.batch_size, config.seed, epoch)?;
        let steps_per_epoch = batches.len();
        let lr_start = config.lr.lr_at(global_step as f64 / steps_per_epoch as f64);
        let mut lr_end = lr_start;
        let mut loss_sum = 0.0f64;

        for batch in &batches {
            let lr = config.lr.lr_at(global_step as f64 / steps_per_epoch as f64);
            lr_end = lr;

            let cap_feats: Vec<&Tensor<f32>> =
                batch.iter().map(|&i| &train_set[i].features).collect();
            let img_rows: Vec<Vec<f32>> = batch
                .iter()
                .map(|&i| train_set[i].image_vector.clone())
                .collect();
            let imgs = Tensor::from_rows(&img_rows)?;

            let tape = Tape::new();
            let vars = ModelVars::insert(&tape, &model.params);
            let (loss, _) =
                contrastive_batch_loss(&tape, &vars, &config.model, &cap_feats, &imgs, margin)?;
            let loss_value = f64::from(tape.value_scalar(loss));
            if !loss_value.is_finite() {
                let ids: Vec<&str> = batch
                    .iter()
                    .map(|&i| train_set[i].caption_id.as_str())
                    .collect();
                return Err(Error::Train(format!(
                    "non-finite loss {loss_value} at epoch {epoch} step {global_step}; \
                     batch captions: {}",
                    ids.join(", ")
                )));
            }
            tape.backward(loss)?;
            let grads = vars.gradients(&tape);
            let mut named = model.params.named_tensors_mut();
            let mut refs: Vec<&mut Tensor<f32>> =
                named.iter_mut().map(|(_, t)| &mut **t).collect();
            adam.step(&mut refs, &grads, lr)?;

            loss_sum += loss_value;
            global_step += 1;
        }

        model.epoch = epoch as u32;
        let dev_error = dev.error_for(&model)?;
        let checkpoint = out_dir.join(format!("epoch_{epoch:03}.ckpt"));
        save_checkpoint(&model, &checkpoint)?;
        let train_loss = loss_sum / steps_per_epoch as f64;
        writeln!(
            log,
            "{epoch},{train_loss},{dev_error},{lr_start},{lr_end}"
        )?;
        records.push(EpochRecord {
            epoch,
            train_loss,
            dev_error,
            checkpoint,
        });
    }
    log.flush()?;

    let best_epoch = select_best_epoch(&records)?;
    let best_model = load_checkpoint(&records[best_epoch - 1].checkpoint)?;
    Ok(TrainRun {
        records,
        best_epoch,
        best_model,
        log_path,
        config_path,
    })
}
