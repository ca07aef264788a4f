//! Trains a small caption/image model on synthetic paired data.
//!
//! Captions are short feature sequences whose texture depends on a hidden
//! class; each image vector carries the same class in a different basis.
//! A few epochs of the contrastive objective are enough to line the two
//! spaces up, which shows in the falling dev error. Checkpoints and the
//! training log land in `target/example-out/train_toy`.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use vgs::autodiff::optim::LrSchedule;
use vgs::autodiff::Tensor;
use vgs::encoder::ModelConfig;
use vgs::train::{train, DevSet, TrainExample, TrainingConfig};

const CLASSES: usize = 4;
const FEATURE_DIM: usize = 8;
const IMAGE_DIM: usize = 10;

fn caption_features(class: usize, rng: &mut ChaCha8Rng) -> Tensor<f32> {
    let frames = rng.gen_range(10..16);
    let rows: Vec<Vec<f32>> = (0..frames)
        .map(|t| {
            (0..FEATURE_DIM)
                .map(|d| {
                    let phase = (t * (class + 1) + d) as f32 * 0.7;
                    phase.sin() + 0.1 * rng.gen::<f32>()
                })
                .collect()
        })
        .collect();
    Tensor::from_rows(&rows).expect("rows share a width")
}

fn image_vector(class: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    (0..IMAGE_DIM)
        .map(|d| {
            let on = if d % CLASSES == class { 1.0 } else { -0.2 };
            on + 0.05 * rng.gen::<f32>()
        })
        .collect()
}

fn main() -> vgs::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut train_set = Vec::new();
    for i in 0..24 {
        let class = i % CLASSES;
        train_set.push(TrainExample {
            caption_id: format!("cap_{i}"),
            image_id: format!("img_{i}"),
            features: caption_features(class, &mut rng),
            image_vector: image_vector(class, &mut rng),
        });
    }

    let mut dev_ids = Vec::new();
    let mut dev_feats = Vec::new();
    let mut dev_truth = Vec::new();
    let mut dev_img_ids = Vec::new();
    let mut dev_imgs = Vec::new();
    for i in 0..8 {
        let class = i % CLASSES;
        dev_ids.push(format!("dev_cap_{i}"));
        dev_feats.push(caption_features(class, &mut rng));
        dev_truth.push(i);
        dev_img_ids.push(format!("dev_img_{i}"));
        dev_imgs.push(image_vector(class, &mut rng));
    }
    let dev = DevSet::new(dev_ids, dev_feats, dev_truth, dev_img_ids, dev_imgs)?;

    // The default schedule is tuned for corpus-scale runs; a toy problem
    // wants a hotter cycle.
    let config = TrainingConfig {
        epochs: 8,
        batch_size: 8,
        margin: 0.2,
        seed: 7,
        lr: LrSchedule {
            lr_max: 4e-3,
            lr_min: 4e-5,
            cycle_epochs: 4.0,
        },
        model: ModelConfig {
            feature_dim: FEATURE_DIM,
            conv_kernel: 3,
            conv_stride: 2,
            conv_channels: 8,
            conv_padding: 1,
            lstm_layers: 2,
            lstm_hidden: 8,
            attention_hidden: 8,
            embedding_dim: 16,
            image_dim: IMAGE_DIM,
        },
    };

    let out = Path::new("target/example-out/train_toy");
    let run = train(&config, &train_set, &dev, out)?;
    for r in &run.records {
        println!(
            "epoch {}  train_loss {:.4}  dev_error {:.4}  ({})",
            r.epoch,
            r.train_loss,
            r.dev_error,
            r.checkpoint.file_name().unwrap().to_string_lossy()
        );
    }
    println!("best epoch by dev error: {}", run.best_epoch);

    // The returned model is the best checkpoint loaded back from disk.
    let cap = run.best_model.encode_caption(&train_set[0].features)?;
    let own = run.best_model.encode_image(&train_set[0].image_vector)?;
    let other = run.best_model.encode_image(&train_set[1].image_vector)?;
    let dot = |a: &Tensor<f32>, b: &Tensor<f32>| -> f32 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    };
    println!(
        "caption 0 similarity: own image {:.3}, mismatched image {:.3}",
        dot(&cap, &own),
        dot(&cap, &other)
    );
    Ok(())
}
