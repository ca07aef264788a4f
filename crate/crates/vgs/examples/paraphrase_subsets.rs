//! Carves caption-budget-matched subsets out of a training split.
//!
//! Every subset spends the same caption budget but spreads it differently:
//! many images with one caption each, or fewer images with up to five
//! paraphrases. Image sets nest (each smaller set is a prefix of the next)
//! and the kept captions per image nest too, so the only thing that varies
//! across subsets is paraphrase breadth, not which side of the data is
//! easy.

use vgs::data::{CaptionRecord, DatasetManifest, ImageRecord, Split};
use vgs::train::{make_paraphrase_subsets, SubsetSpec};

fn synthetic_manifest(train_images: usize, captions_each: usize) -> DatasetManifest {
    let mut images = Vec::new();
    let mut captions = Vec::new();
    for i in 0..train_images + 4 {
        // Four extra images sit in dev/test to show they are never drawn on.
        let split = if i < train_images {
            Split::Train
        } else if i % 2 == 0 {
            Split::Dev
        } else {
            Split::Test
        };
        let image_id = format!("img_{i:04}");
        for c in 0..captions_each {
            captions.push(CaptionRecord {
                caption_id: format!("{image_id}_cap{c}"),
                image_id: image_id.clone(),
                audio_path: format!("audio/{image_id}_{c}.wav").into(),
            });
        }
        images.push(ImageRecord { image_id, split });
    }
    DatasetManifest::build(images, captions, "synthetic").expect("consistent records")
}

fn main() -> vgs::error::Result<()> {
    let manifest = synthetic_manifest(120, 5);

    let budget = 120;
    let specs: Vec<SubsetSpec> = [5, 4, 3, 2, 1]
        .iter()
        .map(|&c| SubsetSpec::new(budget, c))
        .collect::<Result<_, _>>()?;
    let subsets = make_paraphrase_subsets(&manifest, &specs)?;

    println!("caption budget {budget} split five ways:");
    for (spec, subset) in specs.iter().zip(&subsets) {
        let images = subset.image_ids_in_split(Split::Train).len();
        let captions = subset.captions_in_split(Split::Train).len();
        println!(
            "  {} captions/image -> {images:3} images, {captions} captions",
            spec.captions_per_image
        );
    }

    // Nesting check: every image of the 5-caption subset also appears in
    // the 1-caption subset, with its captions a prefix of the larger list.
    let widest = &subsets[subsets.len() - 1];
    let narrow = &subsets[0];
    let all_nested = narrow.image_ids_in_split(Split::Train).iter().all(|id| {
        let wide: Vec<_> = widest.captions_for_image(id).iter().map(|c| &c.caption_id).collect();
        let ours: Vec<_> = narrow.captions_for_image(id).iter().map(|c| &c.caption_id).collect();
        !wide.is_empty() && ours.starts_with(&wide[..wide.len().min(ours.len())])
    });
    println!("5-caption subset nests inside the 1-caption subset: {all_nested}");
    Ok(())
}
