//! Cross-modal retrieval scoring: recall at N and median rank in both
//! directions over a caption/image embedding set.

use crate::autodiff::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Recall percentages and median rank for one retrieval direction.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RetrievalMetrics {
    pub r_at_1: f64,
    pub r_at_5: f64,
    pub r_at_10: f64,
    pub med_r: f64,
    pub queries: usize,
}

impl RetrievalMetrics {
    fn from_ranks(mut ranks: Vec<usize>) -> Self {
        let n = ranks.len();
        let recall = |cut: usize| {
            100.0 * ranks.iter().filter(|&&r| r <= cut).count() as f64 / n as f64
        };
        let (r_at_1, r_at_5, r_at_10) = (recall(1), recall(5), recall(10));
        ranks.sort_unstable();
        // Median uses the lower-middle element when the count is even.
        let med_r = ranks[(n - 1) / 2] as f64;
        RetrievalMetrics {
            r_at_1,
            r_at_5,
            r_at_10,
            med_r,
            queries: n,
        }
    }
}

/// Both retrieval directions over one embedding set.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RetrievalReport {
    pub caption_to_image: RetrievalMetrics,
    pub image_to_caption: RetrievalMetrics,
}

impl RetrievalReport {
    /// The scalar minimized during epoch selection: one minus the mean of
    /// the six recall percentages, rescaled to the unit interval.
    pub fn dev_error(&self) -> f64 {
        let sum = self.caption_to_image.r_at_1
            + self.caption_to_image.r_at_5
            + self.caption_to_image.r_at_10
            + self.image_to_caption.r_at_1
            + self.image_to_caption.r_at_5
            + self.image_to_caption.r_at_10;
        1.0 - sum / 600.0
    }
}

/// Rank of `target` when candidates are sorted by descending score, ties
/// broken by original index. One-based.
fn rank_of(scores: &[f64], target: usize) -> usize {
    let pivot = scores[target];
    let mut rank = 1;
    for (i, &s) in scores.iter().enumerate() {
        if s > pivot || (s == pivot && i < target) {
            rank += 1;
        }
    }
    rank
}

/// Scores retrieval in both directions. `caption_image[j]` is the index of
/// the image that caption `j` describes; several captions may share one
/// image. Image queries score against their best-ranked correct caption.
pub fn retrieval_eval<S: Scalar>(
    caption_embs: &Tensor<S>,
    image_embs: &Tensor<S>,
    caption_image: &[usize],
) -> Result<RetrievalReport> {
    if caption_embs.ndim() != 2 || image_embs.ndim() != 2 {
        return Err(Error::Eval("retrieval expects 2-d embedding matrices".into()));
    }
    let (n_cap, d) = (caption_embs.rows(), caption_embs.cols());
    let n_img = image_embs.rows();
    if image_embs.cols() != d {
        return Err(Error::Eval(format!(
            "embedding widths differ: captions {d}, images {}",
            image_embs.cols()
        )));
    }
    if n_cap == 0 || n_img == 0 {
        return Err(Error::Eval("retrieval needs at least one item per side".into()));
    }
    if caption_image.len() != n_cap {
        return Err(Error::Eval(format!(
            "{n_cap} captions but {} ground-truth entries",
            caption_image.len()
        )));
    }
    if let Some(&bad) = caption_image.iter().find(|&&i| i >= n_img) {
        return Err(Error::Eval(format!(
            "ground truth names image {bad}, but only {n_img} images are present"
        )));
    }

    // Cosine similarities, computed in f64 regardless of the storage type.
    let norms = |t: &Tensor<S>| -> Result<Vec<f64>> {
        (0..t.rows())
            .map(|i| {
                let n = t.row(i).iter().map(|&v| v.to_f64().powi(2)).sum::<f64>().sqrt();
                if n == 0.0 {
                    Err(Error::Eval(format!("row {i} has zero norm")))
                } else {
                    Ok(n)
                }
            })
            .collect()
    };
    let cap_norms = norms(caption_embs)?;
    let img_norms = norms(image_embs)?;
    let mut sims = vec![vec![0.0f64; n_img]; n_cap];
    for (j, row) in sims.iter_mut().enumerate() {
        let cap = caption_embs.row(j);
        for (i, slot) in row.iter_mut().enumerate() {
            let dot: f64 = cap
                .iter()
                .zip(image_embs.row(i))
                .map(|(&a, &b)| a.to_f64() * b.to_f64())
                .sum();
            *slot = dot / (cap_norms[j] * img_norms[i]);
        }
    }

    let cap_ranks: Vec<usize> = (0..n_cap)
        .map(|j| rank_of(&sims[j], caption_image[j]))
        .collect();

    let mut img_ranks = Vec::with_capacity(n_img);
    let mut column = vec![0.0f64; n_cap];
    // The outer index walks image columns of the row-major sims matrix, so
    // an iterator over sims itself cannot replace it.
    #[allow(clippy::needless_range_loop)]
    for i in 0..n_img {
        for (j, slot) in column.iter_mut().enumerate() {
            *slot = sims[j][i];
        }
        let best = caption_image
            .iter()
            .enumerate()
            .filter(|&(_, &img)| img == i)
            .map(|(j, _)| rank_of(&column, j))
            .min();
        // Images without any caption are not queries.
        if let Some(rank) = best {
            img_ranks.push(rank);
        }
    }
    if img_ranks.is_empty() {
        return Err(Error::Eval("no image owns a caption".into()));
    }

    Ok(RetrievalReport {
        caption_to_image: RetrievalMetrics::from_ranks(cap_ranks),
        image_to_caption: RetrievalMetrics::from_ranks(img_ranks),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(rows: &[&[f64]]) -> Tensor<f64> {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_matching_scores_perfectly() {
        let embs = tensor(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let report = retrieval_eval(&embs, &embs, &[0, 1, 2]).unwrap();
        for m in [&report.caption_to_image, &report.image_to_caption] {
            assert_eq!(m.r_at_1, 100.0);
            assert_eq!(m.med_r, 1.0);
        }
        assert!(report.dev_error().abs() < 1e-12);
    }

    #[test]
    fn recalls_are_monotone_in_n() {
        let caps = tensor(&[
            &[0.9, 0.1],
            &[0.2, 0.8],
            &[0.5, 0.5],
            &[-0.3, 0.4],
            &[0.7, -0.7],
        ]);
        let imgs = tensor(&[&[1.0, 0.0], &[0.0, 1.0], &[0.6, 0.4]]);
        let report = retrieval_eval(&caps, &imgs, &[0, 1, 2, 1, 0]).unwrap();
        for m in [&report.caption_to_image, &report.image_to_caption] {
            assert!(m.r_at_1 <= m.r_at_5 && m.r_at_5 <= m.r_at_10);
            assert!(m.med_r >= 1.0);
        }
    }

    #[test]
    fn ties_resolve_by_original_index() {
        // Both images are identical, so every similarity ties; the earlier
        // index must win.
        let caps = tensor(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let imgs = tensor(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let report = retrieval_eval(&caps, &imgs, &[0, 1]).unwrap();
        // Caption 0 ranks image 0 first (tie, lower index): rank 1.
        // Caption 1 wants image 1, which ties behind image 0: rank 2.
        assert_eq!(report.caption_to_image.r_at_1, 50.0);
        assert_eq!(report.caption_to_image.med_r, 1.0);
    }

    #[test]
    fn median_uses_lower_middle_for_even_counts() {
        assert_eq!(RetrievalMetrics::from_ranks(vec![4, 1, 3, 2]).med_r, 2.0);
        assert_eq!(RetrievalMetrics::from_ranks(vec![5, 1, 3]).med_r, 3.0);
    }

    #[test]
    fn rank_ignores_any_monotone_rescaling() {
        let caps = tensor(&[&[0.9, 0.2], &[0.1, 0.8], &[0.4, 0.4]]);
        let imgs = tensor(&[&[1.0, 0.1], &[0.2, 1.0]]);
        let truth = [0, 1, 0];
        let base = retrieval_eval(&caps, &imgs, &truth).unwrap();
        // Scaling every embedding by a positive constant rescales cosines
        // by nothing at all, and row scaling keeps the order.
        let caps2 = Tensor::new(
            caps.shape().to_vec(),
            caps.data().iter().map(|v| v * 3.0).collect(),
        )
        .unwrap();
        let again = retrieval_eval(&caps2, &imgs, &truth).unwrap();
        assert_eq!(base, again);
    }

    #[test]
    fn best_correct_caption_counts_for_image_queries() {
        // Image 0 owns captions 0 and 1; caption 1 is the better match and
        // its rank is what scores.
        let caps = tensor(&[&[0.1, 0.9], &[1.0, 0.0], &[0.7, 0.7]]);
        let imgs = tensor(&[&[1.0, 0.0]]);
        let report = retrieval_eval(&caps, &imgs, &[0, 0, 0]).unwrap();
        assert_eq!(report.image_to_caption.r_at_1, 100.0);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let caps = tensor(&[&[1.0, 0.0]]);
        let imgs = tensor(&[&[1.0, 0.0]]);
        assert!(retrieval_eval(&caps, &imgs, &[1]).is_err(), "image out of range");
        assert!(retrieval_eval(&caps, &imgs, &[0, 0]).is_err(), "truth length");
        let wide = tensor(&[&[1.0, 0.0, 0.0]]);
        assert!(retrieval_eval(&caps, &wide, &[0]).is_err(), "width mismatch");
        let zero = tensor(&[&[0.0, 0.0]]);
        assert!(retrieval_eval(&zero, &imgs, &[0]).is_err(), "zero norm");
    }
}
