//! Turns a directory of WAV recordings into a feature pack.
//!
//! The example synthesizes three short tones, writes a dataset manifest
//! pointing at them, runs the extraction pipeline, and reads one feature
//! matrix back out of the pack. Outputs land in
//! `target/example-out/extract_features`.

use std::f32::consts::TAU;
use std::path::Path;

use vgs::commands::{cmd_extract_features, RunConfig};
use vgs::data::{read_wav, write_wav_mono, FeaturePack};
use vgs::dsp::extract_features;

fn tone(freq: f32, seconds: f32, rate: u32) -> Vec<f32> {
    let n = (seconds * rate as f32) as usize;
    (0..n)
        .map(|i| {
            let t = i as f32 / rate as f32;
            0.4 * (TAU * freq * t).sin() + 0.1 * (TAU * 2.0 * freq * t).sin()
        })
        .collect()
}

fn main() -> vgs::error::Result<()> {
    let out = Path::new("target/example-out/extract_features");
    let audio = out.join("audio");
    std::fs::create_dir_all(&audio)?;

    let config = RunConfig::default();
    let rate = config.features.sample_rate;
    for (name, freq) in [("cap_a", 220.0), ("cap_b", 440.0), ("cap_c", 660.0)] {
        write_wav_mono(&audio.join(format!("{name}.wav")), &tone(freq, 0.8, rate), rate)?;
    }

    let manifest = out.join("manifest.tsv");
    std::fs::write(
        &manifest,
        "vgs-manifest\tv1\n\
         image\timg_1\ttrain\n\
         image\timg_2\ttrain\n\
         caption\tcap_a\timg_1\taudio/cap_a.wav\n\
         caption\tcap_b\timg_1\taudio/cap_b.wav\n\
         caption\tcap_c\timg_2\taudio/cap_c.wav\n",
    )?;

    let summary = cmd_extract_features(&manifest, out, &config, out)?;
    println!(
        "extracted {} captions into {}",
        summary.written,
        summary.pack_path.display()
    );

    let pack = FeaturePack::open(&summary.pack_path, &summary.index_path)?;
    for id in pack.ids() {
        let frames = pack.load(id)?;
        println!("  {id}: {} frames x {} coefficients", frames.rows(), frames.cols());
    }

    // The same front end is available directly. Normalization and delta
    // features are already part of the pipeline.
    let wav = read_wav(&audio.join("cap_a.wav"), rate)?;
    let feats = extract_features(&wav, &config.features)?;
    println!(
        "cap_a by hand: {:.2}s of audio -> {} frames, {} ms window every {} ms",
        wav.duration_secs(),
        feats.frames.rows(),
        feats.frame_length_ms,
        feats.frame_shift_ms
    );
    Ok(())
}
