//! Dataset plumbing: manifests, WAV ingestion, feature packs, image
//! embedding packs, similarity-pair manifests, and text normalization.

pub mod features;
pub mod image_features;
pub mod manifest;
pub mod sts;
pub mod text;
pub mod wav;

pub use features::{FeaturePack, FeaturePackWriter};
pub use image_features::{load_image_features, write_image_features, ImageFeatureIndex};
pub use manifest::{
    load_manifest, save_manifest, CaptionRecord, DatasetManifest, ImageRecord, Split, SplitSpec,
};
pub use sts::{
    group_by_subtask, load_sts_manifest, save_sts_manifest, StsPair, SUBTASK_INVENTORY,
};
pub use text::{preprocess_sts_text, TextRules};
pub use wav::{read_wav, write_wav_mono};
