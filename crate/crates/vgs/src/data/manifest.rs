//! Dataset manifests: which images exist, which split each belongs to, and
//! which spoken captions describe them.
//!
//! # File format
//!
//! UTF-8 text, one record per line, tab-separated fields. Lines starting
//! with `#` and blank lines are ignored. The first record line must be the
//! header `vgs-manifest<TAB>v1`. Two record kinds follow, in any order:
//!
//! ```text
//! image<TAB><image_id><TAB><train|dev|test>
//! caption<TAB><caption_id><TAB><image_id><TAB><audio_path>
//! ```
//!
//! Every caption must reference a declared image, caption and image ids must
//! be unique, and (when a [`SplitSpec`] is supplied) per-split image counts
//! must match it exactly.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "dev" => Some(Split::Dev),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Expected image counts per split for a named corpus layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub name: String,
    pub train_images: usize,
    pub dev_images: usize,
    pub test_images: usize,
}

impl SplitSpec {
    pub fn new(name: &str, train: usize, dev: usize, test: usize) -> Self {
        SplitSpec {
            name: name.to_string(),
            train_images: train,
            dev_images: dev,
            test_images: test,
        }
    }

    /// Flickr8k: 6,000 training images, 1,000 dev, 1,000 test.
    pub fn flickr8k() -> Self {
        Self::new("flickr8k", 6000, 1000, 1000)
    }

    /// SpokenCOCO with 1,000 dev and 1,000 test images carved out of the
    /// original 5,000-image dev set.
    pub fn spokencoco() -> Self {
        Self::new("spokencoco", 118_287, 1000, 1000)
    }

    pub fn expected(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train_images,
            Split::Dev => self.dev_images,
            Split::Test => self.test_images,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub image_id: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionRecord {
    pub caption_id: String,
    pub image_id: String,
    pub audio_path: PathBuf,
}

/// A validated dataset manifest. Construction goes through
/// [`load_manifest`] or [`DatasetManifest::build`], both of which enforce
/// the id-uniqueness and referential invariants.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    images: Vec<ImageRecord>,
    captions: Vec<CaptionRecord>,
    split_of: HashMap<String, Split>,
    captions_of: HashMap<String, Vec<usize>>,
}

impl DatasetManifest {
    /// Validates records assembled in memory. `source` names the origin in
    /// error messages.
    pub fn build(
        images: Vec<ImageRecord>,
        captions: Vec<CaptionRecord>,
        source: &str,
    ) -> Result<Self> {
        let mut split_of = HashMap::with_capacity(images.len());
        for img in &images {
            if split_of.insert(img.image_id.clone(), img.split).is_some() {
                return Err(Error::manifest(
                    source,
                    0,
                    format!("duplicate image id '{}'", img.image_id),
                ));
            }
        }
        let mut caption_ids = HashSet::with_capacity(captions.len());
        let mut captions_of: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, cap) in captions.iter().enumerate() {
            if !caption_ids.insert(cap.caption_id.clone()) {
                return Err(Error::manifest(
                    source,
                    0,
                    format!("duplicate caption id '{}'", cap.caption_id),
                ));
            }
            if !split_of.contains_key(&cap.image_id) {
                return Err(Error::manifest(
                    source,
                    0,
                    format!(
                        "caption '{}' references unknown image '{}'",
                        cap.caption_id, cap.image_id
                    ),
                ));
            }
            captions_of.entry(cap.image_id.clone()).or_default().push(i);
        }
        Ok(DatasetManifest {
            images,
            captions,
            split_of,
            captions_of,
        })
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn captions(&self) -> &[CaptionRecord] {
        &self.captions
    }

    pub fn split_of(&self, image_id: &str) -> Option<Split> {
        self.split_of.get(image_id).copied()
    }

    /// Caption records for one image, in manifest order.
    pub fn captions_for_image(&self, image_id: &str) -> Vec<&CaptionRecord> {
        self.captions_of
            .get(image_id)
            .map(|idxs| idxs.iter().map(|&i| &self.captions[i]).collect())
            .unwrap_or_default()
    }

    /// Image ids belonging to a split, in manifest order.
    pub fn image_ids_in_split(&self, split: Split) -> Vec<&str> {
        self.images
            .iter()
            .filter(|r| r.split == split)
            .map(|r| r.image_id.as_str())
            .collect()
    }

    /// Captions whose image belongs to a split, in manifest order.
    pub fn captions_in_split(&self, split: Split) -> Vec<&CaptionRecord> {
        self.captions
            .iter()
            .filter(|c| self.split_of[&c.image_id] == split)
            .collect()
    }

    pub fn split_image_counts(&self) -> BTreeMap<Split, usize> {
        let mut counts = BTreeMap::new();
        for split in Split::ALL {
            counts.insert(split, 0);
        }
        for img in &self.images {
            *counts.get_mut(&img.split).unwrap() += 1;
        }
        counts
    }

    fn check_split_spec(&self, spec: &SplitSpec, source: &str) -> Result<()> {
        let counts = self.split_image_counts();
        for split in Split::ALL {
            let got = counts[&split];
            let want = spec.expected(split);
            if got != want {
                return Err(Error::manifest(
                    source,
                    0,
                    format!(
                        "split '{split}' has {got} images but the '{}' layout expects {want}",
                        spec.name
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Reads and validates a manifest file. With a [`SplitSpec`] the per-split
/// image counts are checked as well.
pub fn load_manifest(path: &Path, spec: Option<&SplitSpec>) -> Result<DatasetManifest> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::manifest(path, 0, format!("cannot open: {e}")))?;
    let reader = BufReader::new(file);

    let mut images = Vec::new();
    let mut captions = Vec::new();
    let mut image_lines: HashMap<String, usize> = HashMap::new();
    let mut caption_lines: HashMap<String, usize> = HashMap::new();
    let mut saw_header = false;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::manifest(&display, lineno, format!("read error: {e}")))?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if !saw_header {
            if fields != ["vgs-manifest", "v1"] {
                return Err(Error::manifest(
                    &display,
                    lineno,
                    "expected header 'vgs-manifest\\tv1'".to_string(),
                ));
            }
            saw_header = true;
            continue;
        }
        match fields.as_slice() {
            ["image", image_id, split] => {
                let split = Split::parse(split).ok_or_else(|| {
                    Error::manifest(&display, lineno, format!("unknown split '{split}'"))
                })?;
                if let Some(prev) = image_lines.insert(image_id.to_string(), lineno) {
                    return Err(Error::manifest(
                        &display,
                        lineno,
                        format!("duplicate image id '{image_id}' (first declared on line {prev})"),
                    ));
                }
                images.push(ImageRecord {
                    image_id: image_id.to_string(),
                    split,
                });
            }
            ["caption", caption_id, image_id, audio_path] => {
                if let Some(prev) = caption_lines.insert(caption_id.to_string(), lineno) {
                    return Err(Error::manifest(
                        &display,
                        lineno,
                        format!(
                            "duplicate caption id '{caption_id}' (first declared on line {prev})"
                        ),
                    ));
                }
                captions.push(CaptionRecord {
                    caption_id: caption_id.to_string(),
                    image_id: image_id.to_string(),
                    audio_path: PathBuf::from(audio_path),
                });
            }
            other => {
                return Err(Error::manifest(
                    &display,
                    lineno,
                    format!(
                        "unrecognized record '{}' with {} fields",
                        other.first().unwrap_or(&""),
                        other.len()
                    ),
                ));
            }
        }
    }
    if !saw_header {
        return Err(Error::manifest(&display, 0, "empty manifest".to_string()));
    }

    // Re-check caption references here so the error can carry a line number.
    for cap in &captions {
        if !image_lines.contains_key(&cap.image_id) {
            let line = caption_lines[&cap.caption_id];
            return Err(Error::manifest(
                &display,
                line,
                format!(
                    "caption '{}' references unknown image '{}'",
                    cap.caption_id, cap.image_id
                ),
            ));
        }
    }

    let manifest = DatasetManifest::build(images, captions, &display)?;
    if let Some(spec) = spec {
        manifest.check_split_spec(spec, &display)?;
    }
    Ok(manifest)
}

/// Writes a manifest in the format [`load_manifest`] reads.
pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# images: {}, captions: {}", manifest.images.len(), manifest.captions.len())?;
    writeln!(out, "vgs-manifest\tv1")?;
    for img in &manifest.images {
        writeln!(out, "image\t{}\t{}", img.image_id, img.split)?;
    }
    for cap in &manifest.captions {
        writeln!(
            out,
            "caption\t{}\t{}\t{}",
            cap.caption_id,
            cap.image_id,
            cap.audio_path.display()
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_manifest_text() -> String {
        let mut text = String::from("# toy corpus\nvgs-manifest\tv1\n");
        for i in 0..10 {
            let split = if i < 8 {
                "train"
            } else if i == 8 {
                "dev"
            } else {
                "test"
            };
            text.push_str(&format!("image\timg{i}\t{split}\n"));
        }
        for i in 0..10 {
            for c in 0..5 {
                text.push_str(&format!(
                    "caption\timg{i}_c{c}\timg{i}\taudio/img{i}_{c}.wav\n"
                ));
            }
        }
        text
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), content).unwrap();
        f
    }

    #[test]
    fn toy_manifest_loads_with_matching_spec() {
        let f = write_temp(&toy_manifest_text());
        let spec = SplitSpec::new("toy", 8, 1, 1);
        let m = load_manifest(f.path(), Some(&spec)).unwrap();
        assert_eq!(m.images().len(), 10);
        assert_eq!(m.captions().len(), 50);
        assert_eq!(m.captions_for_image("img3").len(), 5);
        assert_eq!(m.image_ids_in_split(Split::Dev), vec!["img8"]);
        assert_eq!(m.captions_in_split(Split::Train).len(), 40);
    }

    #[test]
    fn split_count_mismatch_is_rejected() {
        let f = write_temp(&toy_manifest_text());
        let spec = SplitSpec::new("toy", 7, 2, 1);
        let err = load_manifest(f.path(), Some(&spec)).unwrap_err();
        assert!(err.to_string().contains("expects 7"), "{err}");
    }

    #[test]
    fn dangling_image_reference_names_id_and_line() {
        let text = "vgs-manifest\tv1\nimage\timg0\ttrain\ncaption\tc0\tmissing\ta.wav\n";
        let f = write_temp(text);
        let err = load_manifest(f.path(), None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("missing"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn duplicate_caption_id_is_rejected_with_line() {
        let text =
            "vgs-manifest\tv1\nimage\ti\ttrain\ncaption\tc\ti\ta.wav\ncaption\tc\ti\tb.wav\n";
        let f = write_temp(text);
        let err = load_manifest(f.path(), None).unwrap_err();
        assert!(err.to_string().contains("duplicate caption id 'c'"), "{err}");
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn missing_header_is_rejected() {
        let f = write_temp("image\ti\ttrain\n");
        assert!(load_manifest(f.path(), None).is_err());
    }

    #[test]
    fn roundtrip_preserves_records_and_order() {
        let f = write_temp(&toy_manifest_text());
        let m = load_manifest(f.path(), None).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_manifest(&m, out.path()).unwrap();
        let back = load_manifest(out.path(), None).unwrap();
        assert_eq!(m.images(), back.images());
        assert_eq!(m.captions(), back.captions());
    }

    #[test]
    fn splits_are_disjoint_by_construction() {
        let f = write_temp(&toy_manifest_text());
        let m = load_manifest(f.path(), None).unwrap();
        let train: HashSet<_> = m.image_ids_in_split(Split::Train).into_iter().collect();
        let dev: HashSet<_> = m.image_ids_in_split(Split::Dev).into_iter().collect();
        let test: HashSet<_> = m.image_ids_in_split(Split::Test).into_iter().collect();
        assert!(train.is_disjoint(&dev));
        assert!(train.is_disjoint(&test));
        assert!(dev.is_disjoint(&test));
    }

    #[test]
    fn flickr8k_spec_counts() {
        let spec = SplitSpec::flickr8k();
        assert_eq!(
            (spec.train_images, spec.dev_images, spec.test_images),
            (6000, 1000, 1000)
        );
    }
}
