//! Paraphrase-subset construction: fixed caption budget, varying captions
//! per image, maximal data overlap between the resulting training sets.
//!
//! All specs draw from one pool: training images that own enough captions
//! for the most demanding spec, sorted by image id. A spec taking c
//! captions per image uses the first `total/c` pool images and the first c
//! captions (by caption id) of each. Fewer captions per image means a
//! longer image prefix, so image sets nest across specs, and per shared
//! image the caption lists are prefixes of one another.

use crate::data::{CaptionRecord, DatasetManifest, ImageRecord, Split};
use crate::error::{Error, Result};

/// One training-set shape: how many captions total and per image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SubsetSpec {
    pub total_captions: usize,
    pub captions_per_image: usize,
}

impl SubsetSpec {
    pub fn new(total_captions: usize, captions_per_image: usize) -> Result<Self> {
        let spec = SubsetSpec {
            total_captions,
            captions_per_image,
        };
        spec.image_count()?;
        Ok(spec)
    }

    /// The five standard shapes: 30,000 captions at one through five
    /// captions per image.
    pub fn standard_five() -> Vec<SubsetSpec> {
        (1..=5)
            .rev()
            .map(|c| SubsetSpec {
                total_captions: 30_000,
                captions_per_image: c,
            })
            .collect()
    }

    /// Images this spec needs; errors unless the budget divides evenly.
    pub fn image_count(&self) -> Result<usize> {
        if self.captions_per_image == 0 {
            return Err(Error::Config("captions_per_image must be positive".into()));
        }
        if self.total_captions == 0 || !self.total_captions.is_multiple_of(self.captions_per_image)
        {
            return Err(Error::Config(format!(
                "{} captions cannot be split evenly into {} per image",
                self.total_captions, self.captions_per_image
            )));
        }
        Ok(self.total_captions / self.captions_per_image)
    }
}

/// Builds one training sub-manifest per spec from the training split of
/// `manifest`. Returned manifests hold exactly `total_captions` captions
/// each and satisfy the nesting and prefix-overlap guarantees above.
pub fn make_paraphrase_subsets(
    manifest: &DatasetManifest,
    specs: &[SubsetSpec],
) -> Result<Vec<DatasetManifest>> {
    if specs.is_empty() {
        return Err(Error::Config("no subset specs given".into()));
    }
    let mut image_counts = Vec::with_capacity(specs.len());
    for spec in specs {
        image_counts.push(spec.image_count()?);
    }
    let max_captions = specs
        .iter()
        .map(|s| s.captions_per_image)
        .max()
        .expect("specs checked nonempty");

    // Shared eligibility pool: training images with enough captions for
    // every spec, in stable id order.
    let mut pool: Vec<&str> = manifest
        .image_ids_in_split(Split::Train)
        .into_iter()
        .filter(|id| manifest.captions_for_image(id).len() >= max_captions)
        .collect();
    pool.sort_unstable();

    let mut out = Vec::with_capacity(specs.len());
    for (spec, &needed_images) in specs.iter().zip(&image_counts) {
        if pool.len() < needed_images {
            return Err(Error::Config(format!(
                "spec with {} captions per image needs {needed_images} images, but only {} \
                 training images have at least {max_captions} captions",
                spec.captions_per_image,
                pool.len()
            )));
        }
        let mut images = Vec::with_capacity(needed_images);
        let mut captions = Vec::with_capacity(spec.total_captions);
        for &image_id in &pool[..needed_images] {
            images.push(ImageRecord {
                image_id: image_id.to_string(),
                split: Split::Train,
            });
            let mut owned: Vec<&CaptionRecord> = manifest.captions_for_image(image_id);
            owned.sort_by(|a, b| a.caption_id.cmp(&b.caption_id));
            for cap in owned.into_iter().take(spec.captions_per_image) {
                captions.push(cap.clone());
            }
        }
        debug_assert_eq!(captions.len(), spec.total_captions);
        out.push(DatasetManifest::build(
            images,
            captions,
            "paraphrase-subset",
        )?);
    }
    Ok(out)
}
