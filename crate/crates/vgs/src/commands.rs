//! The operations behind the command-line surface. Each function does one
//! pipeline step end to end: read documented file artifacts, run the
//! corresponding module, write CSV outputs plus a config snapshot.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::autodiff::tensor::Tensor;
use crate::data::{
    load_manifest, load_sts_manifest, read_wav, save_manifest, DatasetManifest, FeaturePack,
    FeaturePackWriter, ImageFeatureIndex, Split,
};
use crate::dsp::{extract_features, FeatureConfig};
use crate::encoder::checkpoint::load_checkpoint;
use crate::encoder::Model;
use crate::error::{Error, Result};
use crate::eval::{
    aic_regression, compare_aic, retrieval_eval, sts_eval, AicModelInput, AicReport,
    RetrievalReport, StsReport,
};
use crate::train::{train, DevSet, SubsetSpec, TrainExample, TrainRun, TrainingConfig};

/// Settings one run needs beyond its file arguments: the audio front-end
/// and the trainer. Loadable from TOML; missing tables fall back to
/// defaults, and flag overrides are applied after loading.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub features: FeatureConfig,
    pub training: TrainingConfig,
}

impl RunConfig {
    /// Defaults, or the contents of `path` when given.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))?;
        config.features.validate()?;
        config.training.validate()?;
        Ok(config)
    }

    /// Command-line overrides win over the file.
    pub fn override_seed(&mut self, seed: Option<u64>) {
        if let Some(seed) = seed {
            self.training.seed = seed;
        }
    }
}

fn write_snapshot<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let text = toml::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("cannot serialize snapshot: {e}")))?;
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Outcome of a feature-extraction pass. Failures leave the pack valid but
/// incomplete, and callers should treat a nonempty list as a partial error.
#[derive(Debug)]
pub struct ExtractSummary {
    pub written: usize,
    pub failures: Vec<(PathBuf, String)>,
    pub pack_path: PathBuf,
    pub index_path: PathBuf,
}

/// Extracts features for every caption of `manifest_path` into a feature
/// pack under `out_dir`. Unreadable audio is collected, not fatal.
pub fn cmd_extract_features(
    manifest_path: &Path,
    data_root: &Path,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<ExtractSummary> {
    config.features.validate()?;
    let manifest = load_manifest(manifest_path, None)?;
    std::fs::create_dir_all(out_dir)?;

    #[derive(serde::Serialize)]
    struct Snapshot<'a> {
        manifest: &'a Path,
        data_root: &'a Path,
        features: &'a FeatureConfig,
    }
    write_snapshot(
        out_dir,
        "extract_config.toml",
        &Snapshot {
            manifest: manifest_path,
            data_root,
            features: &config.features,
        },
    )?;

    // Extraction is embarrassingly parallel; writes happen afterwards in
    // manifest order so reruns produce byte-identical packs.
    let results: Vec<(String, PathBuf, Result<Tensor<f32>>)> = manifest
        .captions()
        .par_iter()
        .map(|cap| {
            let path = data_root.join(&cap.audio_path);
            let frames = read_wav(&path, config.features.sample_rate)
                .and_then(|wav| extract_features(&wav, &config.features))
                .map(|f| f.frames);
            (cap.caption_id.clone(), path, frames)
        })
        .collect();

    let pack_path = out_dir.join("captions.feats");
    let index_path = out_dir.join("captions.feats.idx");
    let mut writer = FeaturePackWriter::create(&pack_path)?;
    let mut failures = Vec::new();
    let mut written = 0usize;
    for (caption_id, path, frames) in results {
        match frames {
            Ok(frames) => {
                writer.append(&caption_id, &frames)?;
                written += 1;
            }
            Err(e) => failures.push((path, e.to_string())),
        }
    }
    writer.finish(&index_path)?;

    Ok(ExtractSummary {
        written,
        failures,
        pack_path,
        index_path,
    })
}

fn feature_pack(dir_or_pack: &Path) -> Result<FeaturePack> {
    let (pack, index) = if dir_or_pack.is_dir() {
        (
            dir_or_pack.join("captions.feats"),
            dir_or_pack.join("captions.feats.idx"),
        )
    } else {
        (
            dir_or_pack.to_path_buf(),
            dir_or_pack.with_extension("feats.idx"),
        )
    };
    FeaturePack::open(&pack, &index)
}

fn require_features(pack: &FeaturePack, id: &str, what: &str) -> Result<Tensor<f32>> {
    if !pack.contains(id) {
        return Err(Error::Train(format!(
            "{what} '{id}' has no entry in the feature pack"
        )));
    }
    pack.load(id)
}

/// Materializes the train and dev splits of a manifest from a feature pack
/// and an image feature file, then runs the training loop into `out_dir`.
pub fn cmd_train(
    manifest_path: &Path,
    features: &Path,
    images: &Path,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<TrainRun> {
    config.training.validate()?;
    let manifest = load_manifest(manifest_path, None)?;
    let pack = feature_pack(features)?;
    let image_index = ImageFeatureIndex::open(images)?;

    let mut train_set = Vec::new();
    for cap in manifest.captions_in_split(Split::Train) {
        train_set.push(TrainExample {
            caption_id: cap.caption_id.clone(),
            image_id: cap.image_id.clone(),
            features: require_features(&pack, &cap.caption_id, "training caption")?,
            image_vector: image_index.get(&cap.image_id)?.to_vec(),
        });
    }

    let mut dev_caption_ids = Vec::new();
    let mut dev_features = Vec::new();
    let mut dev_truth = Vec::new();
    let dev_image_ids: Vec<String> = {
        let mut ids: Vec<&str> = manifest.image_ids_in_split(Split::Dev);
        ids.sort_unstable();
        ids.into_iter().map(str::to_string).collect()
    };
    let mut dev_vectors = Vec::with_capacity(dev_image_ids.len());
    for id in &dev_image_ids {
        dev_vectors.push(image_index.get(id)?.to_vec());
    }
    for cap in manifest.captions_in_split(Split::Dev) {
        dev_caption_ids.push(cap.caption_id.clone());
        dev_features.push(require_features(&pack, &cap.caption_id, "dev caption")?);
        let idx = dev_image_ids
            .binary_search(&cap.image_id)
            .map_err(|_| Error::Train(format!("dev caption {} has no image", cap.caption_id)))?;
        dev_truth.push(idx);
    }
    let dev = DevSet::new(
        dev_caption_ids,
        dev_features,
        dev_truth,
        dev_image_ids,
        dev_vectors,
    )?;

    // train() writes its own run_config.toml snapshot into out_dir.
    train(&config.training, &train_set, &dev, out_dir)
}

/// Splits the training data of a manifest into paraphrase subsets and
/// writes one manifest per spec plus a snapshot of the spec list.
pub fn cmd_make_subsets(
    manifest_path: &Path,
    specs: &[SubsetSpec],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let manifest = load_manifest(manifest_path, None)?;
    let subsets = crate::train::make_paraphrase_subsets(&manifest, specs)?;
    std::fs::create_dir_all(out_dir)?;

    #[derive(serde::Serialize)]
    struct Snapshot<'a> {
        manifest: &'a Path,
        specs: &'a [SubsetSpec],
    }
    write_snapshot(
        out_dir,
        "subsets_config.toml",
        &Snapshot {
            manifest: manifest_path,
            specs,
        },
    )?;

    let mut paths = Vec::with_capacity(subsets.len());
    for (spec, subset) in specs.iter().zip(&subsets) {
        let path = out_dir.join(format!(
            "subset_{}x{}.tsv",
            spec.total_captions / spec.captions_per_image,
            spec.captions_per_image
        ));
        save_manifest(subset, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

fn embed_split(
    model: &Model,
    manifest: &DatasetManifest,
    split: Split,
    pack: &FeaturePack,
    image_index: &ImageFeatureIndex,
) -> Result<(Tensor<f32>, Tensor<f32>, Vec<usize>)> {
    let mut image_ids: Vec<&str> = manifest.image_ids_in_split(split);
    image_ids.sort_unstable();
    if image_ids.is_empty() {
        return Err(Error::Eval(format!("split {split:?} has no images")));
    }

    let captions = manifest.captions_in_split(split);
    let cap_rows: Vec<Vec<f32>> = captions
        .par_iter()
        .map(|cap| {
            let features = require_features(pack, &cap.caption_id, "caption")?;
            Ok(model.encode_caption(&features)?.data().to_vec())
        })
        .collect::<Result<_>>()?;
    let img_rows: Vec<Vec<f32>> = image_ids
        .par_iter()
        .map(|id| Ok(model.encode_image(image_index.get(id)?)?.data().to_vec()))
        .collect::<Result<_>>()?;

    let mut truth = Vec::with_capacity(captions.len());
    for cap in &captions {
        let idx = image_ids
            .binary_search(&cap.image_id.as_str())
            .map_err(|_| Error::Eval(format!("caption {} has no image", cap.caption_id)))?;
        truth.push(idx);
    }
    Ok((
        Tensor::from_rows(&cap_rows)?,
        Tensor::from_rows(&img_rows)?,
        truth,
    ))
}

/// Embeds one split of a manifest with a frozen checkpoint and writes the
/// two-direction retrieval report as CSV.
pub fn cmd_eval_retrieval(
    manifest_path: &Path,
    checkpoint: &Path,
    features: &Path,
    images: &Path,
    split: Split,
    out_dir: &Path,
) -> Result<RetrievalReport> {
    let model = load_checkpoint(checkpoint)?;
    let manifest = load_manifest(manifest_path, None)?;
    let pack = feature_pack(features)?;
    let image_index = ImageFeatureIndex::open(images)?;
    let (caps, imgs, truth) = embed_split(&model, &manifest, split, &pack, &image_index)?;
    let report = retrieval_eval(&caps, &imgs, &truth)?;

    #[derive(serde::Serialize)]
    struct Snapshot<'a> {
        manifest: &'a Path,
        checkpoint: &'a Path,
        split: String,
    }
    write_snapshot(
        out_dir,
        "retrieval_config.toml",
        &Snapshot {
            manifest: manifest_path,
            checkpoint,
            split: split.as_str().to_string(),
        },
    )?;

    let mut csv = std::io::BufWriter::new(std::fs::File::create(out_dir.join("retrieval.csv"))?);
    writeln!(csv, "direction,r_at_1,r_at_5,r_at_10,med_r,queries")?;
    for (direction, m) in [
        ("caption_to_image", &report.caption_to_image),
        ("image_to_caption", &report.image_to_caption),
    ] {
        writeln!(
            csv,
            "{direction},{},{},{},{},{}",
            m.r_at_1, m.r_at_5, m.r_at_10, m.med_r, m.queries
        )?;
    }
    csv.flush()?;
    Ok(report)
}

/// Scores a checkpoint on a spoken STS manifest, extracting features from
/// the referenced WAV files on the fly. Missing recordings skip their pair.
pub fn cmd_eval_sts(
    sts_manifest: &Path,
    checkpoint: &Path,
    data_root: &Path,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<StsReport> {
    config.features.validate()?;
    let model = load_checkpoint(checkpoint)?;
    let pairs = load_sts_manifest(sts_manifest)?;

    let report = sts_eval(&model, &pairs, |rel| {
        let path = data_root.join(rel);
        if !path.is_file() {
            return Ok(None);
        }
        let wav = read_wav(&path, config.features.sample_rate)?;
        Ok(Some(extract_features(&wav, &config.features)?.frames))
    })?;

    #[derive(serde::Serialize)]
    struct Snapshot<'a> {
        manifest: &'a Path,
        checkpoint: &'a Path,
        data_root: &'a Path,
        features: &'a FeatureConfig,
    }
    write_snapshot(
        out_dir,
        "sts_config.toml",
        &Snapshot {
            manifest: sts_manifest,
            checkpoint,
            data_root,
            features: &config.features,
        },
    )?;

    let mut csv = std::io::BufWriter::new(std::fs::File::create(out_dir.join("sts.csv"))?);
    writeln!(csv, "subtask,pairs,r,ci_lo,ci_hi")?;
    for s in report.subtasks.iter().chain([&report.overall]) {
        writeln!(csv, "{},{},{},{},{}", s.subtask, s.pairs, s.r, s.ci_lo, s.ci_hi)?;
    }
    csv.flush()?;
    Ok(report)
}

/// Reads a two-column CSV (`human,model_sim`, header required) of aligned
/// similarity scores.
fn read_similarity_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::format(path, format!("cannot read: {e}")))?;
    let mut human = Vec::new();
    let mut sims = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "human,model_sim" {
                return Err(Error::format(
                    path,
                    format!("expected header 'human,model_sim', found '{line}'"),
                ));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(h), Some(s), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::format(path, format!("line {}: expected 2 fields", i + 1)));
        };
        let parse = |v: &str| -> Result<f64> {
            v.trim()
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: bad number '{v}'", i + 1)))
        };
        human.push(parse(h)?);
        sims.push(parse(s)?);
    }
    Ok((human, sims))
}

/// Fits one regression per similarity CSV and ranks them by AIC. Labels are
/// the file stems.
pub fn cmd_compare_aic(sim_csvs: &[PathBuf], out_dir: &Path) -> Result<AicReport> {
    let mut inputs = Vec::with_capacity(sim_csvs.len());
    for path in sim_csvs {
        let (human, sims) = read_similarity_csv(path)?;
        let fit = aic_regression(&human, &sims)
            .map_err(|e| Error::Eval(format!("{}: {e}", path.display())))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        inputs.push(AicModelInput::from_fit(label, &fit));
    }
    let report = compare_aic(&inputs)?;

    #[derive(serde::Serialize)]
    struct Snapshot<'a> {
        inputs: &'a [PathBuf],
    }
    write_snapshot(out_dir, "aic_config.toml", &Snapshot { inputs: sim_csvs })?;

    let mut csv = std::io::BufWriter::new(std::fs::File::create(out_dir.join("aic.csv"))?);
    writeln!(csv, "label,aic,delta_aic,log_likelihood,n")?;
    for row in &report.rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            row.label, row.aic, row.delta_aic, row.log_likelihood, report.n
        )?;
    }
    csv.flush()?;
    Ok(report)
}
