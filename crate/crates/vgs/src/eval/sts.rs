//! Spoken sentence-similarity scoring.
//!
//! Every STS pair carries one recorded utterance per voice for each of its
//! two sentences. The model similarity of a pair is the mean cosine over
//! all ordered voice combinations (sentence A in voice i against sentence B
//! in voice j, V² combinations for V voices), which is then correlated with
//! the human judgement per subtask and overall.

use std::collections::BTreeMap;
use std::path::Path;

use crate::autodiff::tensor::Tensor;
use crate::data::StsPair;
use crate::encoder::Model;
use crate::error::{Error, Result};
use crate::eval::stats::{fisher_ci, pearson};

/// Mean cosine similarity over every ordered combination of one embedding
/// from `a` and one from `b`.
pub fn voice_averaged_similarity(a: &[Tensor<f32>], b: &[Tensor<f32>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Eval("voice averaging needs embeddings on both sides".into()));
    }
    let norm = |t: &Tensor<f32>| -> Result<f64> {
        let n = t.data().iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
        if n == 0.0 {
            Err(Error::Eval("zero-norm embedding in voice averaging".into()))
        } else {
            Ok(n)
        }
    };
    let mut total = 0.0;
    for ea in a {
        for eb in b {
            if ea.len() != eb.len() {
                return Err(Error::Eval(format!(
                    "embedding widths differ: {} vs {}",
                    ea.len(),
                    eb.len()
                )));
            }
            let dot: f64 = ea
                .data()
                .iter()
                .zip(eb.data())
                .map(|(x, y)| *x as f64 * *y as f64)
                .sum();
            total += dot / (norm(ea)? * norm(eb)?);
        }
    }
    Ok(total / (a.len() * b.len()) as f64)
}

/// Correlation of one subtask (or the pooled set) with its interval.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StsSubtaskScore {
    pub subtask: String,
    pub pairs: usize,
    pub r: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StsReport {
    /// One entry per subtask, sorted by label.
    pub subtasks: Vec<StsSubtaskScore>,
    /// Correlation over all scored pairs pooled together.
    pub overall: StsSubtaskScore,
    pub scored_pairs: usize,
    /// Pairs dropped because an utterance could not be found.
    pub skipped_pairs: usize,
    pub warnings: Vec<String>,
}

/// Scores `model` against spoken STS data. `features_for` resolves the
/// feature matrix of one utterance path and returns `None` when the
/// recording is missing, which skips the pair with a warning instead of
/// failing the run.
pub fn sts_eval<F>(model: &Model, pairs: &[StsPair], mut features_for: F) -> Result<StsReport>
where
    F: FnMut(&Path) -> Result<Option<Tensor<f32>>>,
{
    if pairs.is_empty() {
        return Err(Error::Eval("no STS pairs to score".into()));
    }

    let mut warnings = Vec::new();
    let mut skipped = 0usize;
    // subtask → (human scores, model sims), label-sorted for determinism.
    let mut by_subtask: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut all_human = Vec::new();
    let mut all_model = Vec::new();

    'pairs: for pair in pairs {
        if pair.voices_a.is_empty() || pair.voices_b.is_empty() {
            return Err(Error::Eval(format!(
                "pair {} has a sentence with no utterances",
                pair.pair_id
            )));
        }
        let mut sides = [Vec::new(), Vec::new()];
        for (slot, paths) in sides.iter_mut().zip([&pair.voices_a, &pair.voices_b]) {
            for path in paths.iter() {
                match features_for(path)? {
                    Some(features) => slot.push(model.encode_caption(&features)?),
                    None => {
                        warnings.push(format!(
                            "pair {}: no utterance at {}, pair skipped",
                            pair.pair_id,
                            path.display()
                        ));
                        skipped += 1;
                        continue 'pairs;
                    }
                }
            }
        }
        let [emb_a, emb_b] = sides;
        let sim = voice_averaged_similarity(&emb_a, &emb_b)?;
        let entry = by_subtask.entry(pair.subtask.clone()).or_default();
        entry.0.push(pair.human_score);
        entry.1.push(sim);
        all_human.push(pair.human_score);
        all_model.push(sim);
    }

    if all_human.is_empty() {
        return Err(Error::Eval(format!(
            "all {skipped} pairs were skipped, nothing to correlate"
        )));
    }

    let score = |label: &str, human: &[f64], sims: &[f64]| -> Result<StsSubtaskScore> {
        let r = pearson(sims, human)
            .map_err(|e| Error::Eval(format!("subtask {label}: {e}")))?;
        let (ci_lo, ci_hi) = fisher_ci(r, human.len(), 0.95)?;
        Ok(StsSubtaskScore {
            subtask: label.to_string(),
            pairs: human.len(),
            r,
            ci_lo,
            ci_hi,
        })
    };

    let mut subtasks = Vec::with_capacity(by_subtask.len());
    for (label, (human, sims)) in &by_subtask {
        subtasks.push(score(label, human, sims)?);
    }
    let overall = score("overall", &all_human, &all_model)?;

    Ok(StsReport {
        subtasks,
        overall,
        scored_pairs: all_human.len(),
        skipped_pairs: skipped,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::tests::{tiny_config, toy_features};
    use crate::encoder::ModelConfig;
    use std::path::PathBuf;

    fn model() -> Model {
        Model::new(tiny_config(), 33).unwrap()
    }

    fn pair(id: &str, subtask: &str, score: f64, voices: &[&str]) -> StsPair {
        let side = |tag: &str| -> Vec<PathBuf> {
            voices
                .iter()
                .map(|v| PathBuf::from(format!("audio/{id}.{tag}.{v}.wav")))
                .collect()
        };
        StsPair {
            pair_id: id.to_string(),
            subtask: subtask.to_string(),
            human_score: score,
            sentence_a: format!("sentence a of {id}"),
            sentence_b: format!("sentence b of {id}"),
            voices_a: side("a"),
            voices_b: side("b"),
        }
    }

    /// Deterministic features keyed by the utterance path.
    fn synth_features(path: &Path) -> Tensor<f32> {
        let mut seed = 0u64;
        for b in path.to_string_lossy().bytes() {
            seed = seed.wrapping_mul(131).wrapping_add(u64::from(b));
        }
        toy_features(seed, 6 + (seed % 5) as usize, 5)
    }

    #[test]
    fn six_voices_average_thirty_six_combinations() {
        let m = model();
        let voices = ["v1", "v2", "v3", "v4", "v5", "v6"];
        let p = pair("p1", "2012.MSRvid", 3.0, &voices);
        // Manual mean over the 36 ordered combinations.
        let emb = |path: &PathBuf| m.encode_caption(&synth_features(path)).unwrap();
        let mut manual = 0.0;
        for pa in &p.voices_a {
            for pb in &p.voices_b {
                let a = emb(pa);
                let b = emb(pb);
                let dot: f64 = a
                    .data()
                    .iter()
                    .zip(b.data())
                    .map(|(x, y)| *x as f64 * *y as f64)
                    .sum();
                let na: f64 = a.data().iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
                let nb: f64 = b.data().iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
                manual += dot / (na * nb);
            }
        }
        manual /= 36.0;

        let embs_a: Vec<_> = p.voices_a.iter().map(emb).collect();
        let embs_b: Vec<_> = p.voices_b.iter().map(emb).collect();
        let sim = voice_averaged_similarity(&embs_a, &embs_b).unwrap();
        assert!((sim - manual).abs() < 1e-12, "{sim} vs {manual}");
    }

    #[test]
    fn identical_voices_collapse_to_a_single_combination() {
        let m = model();
        let e = m.encode_caption(&toy_features(7, 8, 5)).unwrap();
        let g = m.encode_caption(&toy_features(8, 6, 5)).unwrap();
        let one =
            voice_averaged_similarity(std::slice::from_ref(&e), std::slice::from_ref(&g)).unwrap();
        let many =
            voice_averaged_similarity(&[e.clone(), e.clone(), e], &[g.clone(), g]).unwrap();
        assert!((one - many).abs() < 1e-12);
    }

    #[test]
    fn report_scores_each_subtask_and_overall() {
        let m = model();
        let voices = ["v1", "v2"];
        let mut pairs = Vec::new();
        for i in 0..5 {
            pairs.push(pair(&format!("a{i}"), "2014.Images", i as f64, &voices));
            pairs.push(pair(&format!("b{i}"), "2015.Belief", 4.0 - i as f64, &voices));
        }
        let report = sts_eval(&m, &pairs, |path| Ok(Some(synth_features(path)))).unwrap();
        assert_eq!(report.scored_pairs, 10);
        assert_eq!(report.skipped_pairs, 0);
        assert_eq!(report.subtasks.len(), 2);
        assert_eq!(report.subtasks[0].subtask, "2014.Images");
        assert_eq!(report.subtasks[0].pairs, 5);
        assert_eq!(report.overall.pairs, 10);
        for s in report.subtasks.iter().chain([&report.overall]) {
            assert!(s.r.abs() <= 1.0);
            assert!(s.ci_lo <= s.r && s.r <= s.ci_hi);
        }
    }

    #[test]
    fn permuting_voice_order_changes_nothing() {
        let m = model();
        let mut pairs = Vec::new();
        for i in 0..6 {
            pairs.push(pair(&format!("p{i}"), "2013.HDL", i as f64 * 0.8, &["x", "y", "z"]));
        }
        let lookup = |path: &Path| Ok(Some(synth_features(path)));
        let base = sts_eval(&m, &pairs, lookup).unwrap();
        let mut shuffled = pairs.clone();
        for p in &mut shuffled {
            p.voices_a.reverse();
            p.voices_b.reverse();
        }
        let again = sts_eval(&m, &shuffled, lookup).unwrap();
        assert!((base.overall.r - again.overall.r).abs() < 1e-12);
    }

    #[test]
    fn missing_utterances_skip_pairs_with_warnings() {
        let m = model();
        let mut pairs = Vec::new();
        for i in 0..6 {
            pairs.push(pair(&format!("p{i}"), "2016.HDL", i as f64, &["v1", "v2"]));
        }
        let report = sts_eval(&m, &pairs, |path| {
            if path.to_string_lossy().contains("p3.b.v2") {
                Ok(None)
            } else {
                Ok(Some(synth_features(path)))
            }
        })
        .unwrap();
        assert_eq!(report.skipped_pairs, 1);
        assert_eq!(report.scored_pairs, 5);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("p3"), "{}", report.warnings[0]);
    }

    #[test]
    fn all_pairs_missing_is_an_error() {
        let m = model();
        let pairs = vec![pair("p0", "2012.OnWN", 1.0, &["v"])];
        assert!(sts_eval(&m, &pairs, |_| Ok(None)).is_err());
    }

    #[test]
    fn widths_must_agree() {
        let m = model();
        let other_config = ModelConfig {
            embedding_dim: 4,
            ..tiny_config()
        };
        let m2 = Model::new(other_config, 1).unwrap();
        let a = m.encode_caption(&toy_features(1, 6, 5)).unwrap();
        let b = m2.encode_caption(&toy_features(2, 6, 5)).unwrap();
        assert!(voice_averaged_similarity(&[a], &[b]).is_err());
    }
}
