//! Randomized invariant checks over the public API. Each property states a
//! contract the rest of the system leans on; proptest shrinks any
//! counterexample it finds.

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vgs::autodiff::optim::LrSchedule;
use vgs::autodiff::{Tape, Tensor};
use vgs::data::{preprocess_sts_text, CaptionRecord, DatasetManifest, ImageRecord, Split};
use vgs::dsp::{extract_features, FeatureConfig, Waveform};
use vgs::encoder::checkpoint::{load_checkpoint, save_checkpoint};
use vgs::encoder::{Model, ModelConfig};
use vgs::eval::{
    compare_aic, fisher_ci, pearson, retrieval_eval, voice_averaged_similarity, AicModelInput,
};
use vgs::train::{make_batches, make_paraphrase_subsets, SubsetSpec};

/// Paired samples with forced spread so correlation is always defined.
fn paired_samples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (4usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
        )
            .prop_map(|(mut x, mut y)| {
                x[0] = -1.0;
                x[1] = 1.0;
                y[0] = -1.0;
                y[1] = 1.0;
                (x, y)
            })
    })
}

fn tiny_model_config() -> impl Strategy<Value = ModelConfig> {
    (
        2usize..5,
        2usize..4,
        1usize..3,
        2usize..4,
        0usize..2,
        1usize..3,
        2usize..5,
        2usize..5,
        2usize..8,
        2usize..6,
    )
        .prop_map(
            |(feature, kernel, stride, channels, padding, layers, hidden, attn, emb, img)| {
                ModelConfig {
                    feature_dim: feature,
                    conv_kernel: kernel,
                    conv_stride: stride,
                    conv_channels: channels,
                    conv_padding: padding,
                    lstm_layers: layers,
                    lstm_hidden: hidden,
                    attention_hidden: attn,
                    embedding_dim: emb,
                    image_dim: img,
                }
            },
        )
}

/// Integer-valued row with a fixed leading 1 so the norm is never zero.
/// Integer entries scaled by powers of two keep cosines bit-identical.
fn lattice_rows(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec((-3i32..=3).prop_map(f64::from), dim).prop_map(|mut row| {
            row[0] = 1.0;
            row
        }),
        n,
    )
}

fn pow2_scales(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::sample::select(vec![0.25f64, 0.5, 2.0, 4.0]), n)
}

proptest! {
    #[test]
    fn lr_schedule_stays_in_band_and_repeats_each_cycle(
        lr_min in 1e-6f64..1e-4,
        factor in 2.0f64..1000.0,
        cycle in 0.5f64..16.0,
        t in 0.0f64..100.0,
    ) {
        let s = LrSchedule { lr_max: lr_min * factor, lr_min, cycle_epochs: cycle };
        let lr = s.lr_at(t);
        prop_assert!(lr >= s.lr_min);
        prop_assert!(lr <= s.lr_max * (1.0 + 1e-12));
        let next = s.lr_at(t + cycle);
        prop_assert!((lr - next).abs() <= 1e-6 * s.lr_max, "lr {lr} vs next cycle {next}");
    }

    #[test]
    fn pearson_is_invariant_under_positive_affine_maps(
        (x, y) in paired_samples(),
        a in 0.1f64..10.0,
        b in -5.0f64..5.0,
        c in 0.1f64..10.0,
        d in -5.0f64..5.0,
    ) {
        let r = pearson(&x, &y).unwrap();
        prop_assert!(r.abs() <= 1.0 + 1e-12);
        let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let yt: Vec<f64> = y.iter().map(|v| c * v + d).collect();
        let rt = pearson(&xt, &yt).unwrap();
        prop_assert!((r - rt).abs() <= 1e-9, "r {r} vs transformed {rt}");
    }

    #[test]
    fn fisher_interval_contains_the_point_estimate((x, y) in paired_samples()) {
        let r = pearson(&x, &y).unwrap();
        prop_assume!(r.abs() < 0.999_999);
        let (lo, hi) = fisher_ci(r, x.len(), 0.95).unwrap();
        prop_assert!(lo <= r && r <= hi, "({lo}, {hi}) misses {r}");
        prop_assert!(lo >= -1.0 && hi <= 1.0);
    }

    #[test]
    fn aic_comparison_sorts_and_anchors_deltas_at_zero(
        lls in prop::collection::vec(-1e5f64..1e5, 2..6),
        n in 1usize..20_000,
    ) {
        let inputs: Vec<AicModelInput> = lls
            .iter()
            .enumerate()
            .map(|(i, &ll)| AicModelInput { label: format!("m{i}"), log_likelihood: ll, n })
            .collect();
        let report = compare_aic(&inputs).unwrap();
        prop_assert_eq!(report.rows.len(), inputs.len());
        prop_assert_eq!(report.rows[0].delta_aic, 0.0);
        for w in report.rows.windows(2) {
            prop_assert!(w[0].aic <= w[1].aic, "rows out of order");
            prop_assert!(w[0].delta_aic <= w[1].delta_aic);
        }
        let best = report.rows[0].aic;
        for row in &report.rows {
            prop_assert_eq!(row.aic, 6.0 - 2.0 * row.log_likelihood);
            prop_assert_eq!(row.delta_aic, row.aic - best);
        }
    }

    #[test]
    fn hinge_loss_matches_its_formula_and_vanishes_iff_dominant(
        sims in (2usize..5).prop_flat_map(|n| {
            prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |d| (n, d))
        }),
        margin in 0.05f64..0.5,
    ) {
        let (n, data) = sims;
        let s = Tensor::new(vec![n, n], data).unwrap();
        let mut manual = 0.0;
        let mut worst: f64 = f64::NEG_INFINITY;
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                let t1 = margin - s.at2(j, j) + s.at2(j, k);
                let t2 = margin - s.at2(j, j) + s.at2(k, j);
                manual += t1.max(0.0) + t2.max(0.0);
                worst = worst.max(t1).max(t2);
            }
        }

        let tape = Tape::<f64>::new();
        let v = tape.leaf(s);
        let loss = tape.value_scalar(tape.hinge_loss(v, margin).unwrap());
        prop_assert!(loss >= 0.0);
        prop_assert!((loss - manual).abs() <= 1e-9 * (1.0 + manual.abs()));
        if worst <= -1e-6 {
            prop_assert_eq!(loss, 0.0, "dominant diagonal must zero the loss");
        }
        if worst >= 1e-6 {
            prop_assert!(loss > 0.0, "violated margin must cost something");
        }
    }

    #[test]
    fn batches_partition_a_shuffled_prefix(
        n in 4usize..50,
        batch in 2usize..8,
        seed in any::<u64>(),
        epoch in 0usize..40,
    ) {
        prop_assume!(batch <= n);
        let batches = make_batches(n, batch, seed, epoch).unwrap();
        prop_assert_eq!(batches.len(), n / batch);
        let mut seen = vec![false; n];
        for b in &batches {
            prop_assert_eq!(b.len(), batch);
            for &i in b {
                prop_assert!(i < n);
                prop_assert!(!seen[i], "index {} repeated", i);
                seen[i] = true;
            }
        }
        let used = seen.iter().filter(|&&s| s).count();
        prop_assert_eq!(used, n - n % batch);
        let again = make_batches(n, batch, seed, epoch).unwrap();
        prop_assert_eq!(batches, again);
    }

    #[test]
    fn text_rules_leave_trigger_free_sentences_alone(s in "[a-z ]{0,60}") {
        prop_assume!(!contains_initialism(&s));
        prop_assert_eq!(preprocess_sts_text(&s), s);
    }

    #[test]
    fn text_rules_remove_every_lowercase_initialism(
        s in r#"[a-zA-Z0-9 .,'"\u{201d}]{0,60}"#,
    ) {
        let out = preprocess_sts_text(&s);
        prop_assert!(!contains_initialism(&out), "output kept one: {out:?}");
    }

    #[test]
    fn text_rules_are_idempotent_without_initialisms(
        s in r#"[a-z .,'"\u{201d}]{0,60}"#,
    ) {
        prop_assume!(!contains_initialism(&s));
        let once = preprocess_sts_text(&s);
        prop_assert_eq!(preprocess_sts_text(&once), once);
    }
}

/// The published initialism inventory, split out of the input on
/// non-alphanumeric boundaries the way the rewrite rule sees words.
fn contains_initialism(s: &str) -> bool {
    const WORDS: &[&str] = &[
        "usa", "uk", "fbi", "cia", "cnn", "bbc", "dna", "tv", "gdp", "hiv", "ufo", "atm", "gps",
        "usb", "ceo",
    ];
    s.split(|c: char| !c.is_ascii_alphanumeric())
        .any(|w| WORDS.contains(&w))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn retrieval_ignores_per_row_positive_scaling(
        (caps, imgs, truth, cap_scale, img_scale) in (2usize..12, 2usize..12, 2usize..6)
            .prop_flat_map(|(nc, ni, dim)| {
                (
                    lattice_rows(nc, dim),
                    lattice_rows(ni, dim),
                    prop::collection::vec(0..ni, nc),
                    pow2_scales(nc),
                    pow2_scales(ni),
                )
            }),
    ) {
        let base = retrieval_eval(
            &Tensor::from_rows(&caps).unwrap(),
            &Tensor::from_rows(&imgs).unwrap(),
            &truth,
        )
        .unwrap();

        let scale = |rows: &[Vec<f64>], s: &[f64]| -> Vec<Vec<f64>> {
            rows.iter()
                .zip(s)
                .map(|(row, &f)| row.iter().map(|v| v * f).collect())
                .collect()
        };
        let scaled = retrieval_eval(
            &Tensor::from_rows(&scale(&caps, &cap_scale)).unwrap(),
            &Tensor::from_rows(&scale(&imgs, &img_scale)).unwrap(),
            &truth,
        )
        .unwrap();

        for (a, b) in [
            (&base.caption_to_image, &scaled.caption_to_image),
            (&base.image_to_caption, &scaled.image_to_caption),
        ] {
            prop_assert_eq!(a, b);
            prop_assert!(a.r_at_1 <= a.r_at_5 && a.r_at_5 <= a.r_at_10);
            prop_assert!(a.r_at_10 <= 100.0);
            prop_assert!(a.med_r >= 1.0);
        }
    }

    #[test]
    fn voice_averaging_ignores_voice_order(
        (a, b, seed) in (1usize..4, 1usize..4, 2usize..6)
            .prop_flat_map(|(na, nb, dim)| {
                let row = || prop::collection::vec(0.1f32..1.0, dim);
                (
                    prop::collection::vec(row(), na),
                    prop::collection::vec(row(), nb),
                    any::<u64>(),
                )
            }),
    ) {
        let embed = |rows: &[Vec<f32>]| -> Vec<Tensor<f32>> {
            rows.iter().map(|r| Tensor::new(vec![r.len()], r.clone()).unwrap()).collect()
        };
        let ea = embed(&a);
        let eb = embed(&b);
        let sim = voice_averaged_similarity(&ea, &eb).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pa = ea.clone();
        let mut pb = eb.clone();
        pa.shuffle(&mut rng);
        pb.shuffle(&mut rng);
        let permuted = voice_averaged_similarity(&pa, &pb).unwrap();
        prop_assert!((sim - permuted).abs() <= 1e-12, "{sim} vs {permuted}");
    }

    #[test]
    fn frame_count_follows_the_shift_formula(n in 400usize..4000) {
        let cfg = FeatureConfig::default();
        let samples: Vec<f32> = (0..n).map(|i| (0.3 * i as f32).sin() * 0.5).collect();
        let wav = Waveform::new(samples, cfg.sample_rate).unwrap();
        let feats = extract_features(&wav, &cfg).unwrap();
        let expected = 1 + (n - cfg.frame_samples()) / cfg.shift_samples();
        prop_assert_eq!(feats.frames.rows(), expected);
        prop_assert_eq!(feats.frames.cols(), cfg.feature_dim());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn paraphrase_subsets_nest_across_any_source_order(
        images in 60usize..100,
        shuffle_seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
        let mut image_records = Vec::new();
        let mut captions = Vec::new();
        for i in 0..images {
            let image_id = format!("im{i:03}");
            for c in 0..5 {
                captions.push(CaptionRecord {
                    caption_id: format!("{image_id}c{c}"),
                    image_id: image_id.clone(),
                    audio_path: format!("{image_id}_{c}.wav").into(),
                });
            }
            image_records.push(ImageRecord { image_id, split: Split::Train });
        }
        captions.shuffle(&mut rng);
        let manifest = DatasetManifest::build(image_records, captions, "prop").unwrap();

        let specs: Vec<SubsetSpec> = [5usize, 4, 3, 2, 1]
            .iter()
            .map(|&c| SubsetSpec::new(60, c).unwrap())
            .collect();
        let subsets = make_paraphrase_subsets(&manifest, &specs).unwrap();
        for (spec, subset) in specs.iter().zip(&subsets) {
            let imgs = subset.image_ids_in_split(Split::Train).len();
            prop_assert_eq!(imgs, 60 / spec.captions_per_image);
            prop_assert_eq!(subset.captions_in_split(Split::Train).len(), 60);
        }
        for pair in subsets.windows(2) {
            let wide_ids = pair[1].image_ids_in_split(Split::Train);
            for id in pair[0].image_ids_in_split(Split::Train) {
                prop_assert!(wide_ids.contains(&id));
                let narrow: Vec<&String> =
                    pair[0].captions_for_image(id).iter().map(|c| &c.caption_id).collect();
                let wide: Vec<&String> =
                    pair[1].captions_for_image(id).iter().map(|c| &c.caption_id).collect();
                prop_assert_eq!(&narrow[..wide.len()], &wide[..]);
            }
        }
    }

    #[test]
    fn embeddings_land_on_the_unit_sphere(
        config in tiny_model_config(),
        seed in any::<u64>(),
        frames in 6usize..10,
    ) {
        let model = Model::new(config.clone(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let feats = Tensor::new(
            vec![frames, config.feature_dim],
            (0..frames * config.feature_dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
        )
        .unwrap();
        let cap = model.encode_caption(&feats).unwrap();
        let norm: f64 = cap.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-4, "caption norm {norm}");

        let image: Vec<f32> = (0..config.image_dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let img = model.encode_image(&image).unwrap();
        let norm: f64 = img.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-4, "image norm {norm}");
    }

    #[test]
    fn checkpoints_roundtrip_bit_for_bit(
        config in tiny_model_config(),
        seed in any::<u64>(),
        epoch in 0u32..500,
    ) {
        let mut model = Model::new(config.clone(), seed).unwrap();
        model.epoch = epoch;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&model, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        prop_assert_eq!(&loaded.config, &model.config);
        prop_assert_eq!(loaded.epoch, model.epoch);
        prop_assert_eq!(loaded.seed, model.seed);
        let a = model.params.named_tensors();
        let b = loaded.params.named_tensors();
        prop_assert_eq!(a.len(), b.len());
        for ((name_a, ta), (name_b, tb)) in a.iter().zip(&b) {
            prop_assert_eq!(name_a, name_b);
            prop_assert_eq!(ta.shape(), tb.shape());
            prop_assert_eq!(ta.data(), tb.data());
        }
    }
}
