//! Per-utterance feature storage: one binary pack file holding every
//! feature matrix plus a human-readable sidecar index.
//!
//! # Pack layout
//!
//! ```text
//! magic "VGSFEAT1" (8 bytes)
//! per record: u32 LE frame count, u32 LE width, then frames·width f32 LE
//! ```
//!
//! # Index layout
//!
//! TSV with header `vgs-feature-index<TAB>v1`, then one line per record:
//! `utterance_id<TAB>byte_offset<TAB>frames<TAB>width`. Offsets point at the
//! record's frame-count field.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"VGSFEAT1";
const INDEX_HEADER: &str = "vgs-feature-index\tv1";

/// Streams feature matrices into a new pack file.
pub struct FeaturePackWriter {
    pack_path: PathBuf,
    file: BufWriter<std::fs::File>,
    offset: u64,
    entries: Vec<IndexEntry>,
    seen: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct IndexEntry {
    id: String,
    offset: u64,
    frames: u32,
    width: u32,
}

impl FeaturePackWriter {
    pub fn create(pack_path: &Path) -> Result<Self> {
        let mut file = BufWriter::new(std::fs::File::create(pack_path)?);
        file.write_all(MAGIC)?;
        Ok(FeaturePackWriter {
            pack_path: pack_path.to_path_buf(),
            file,
            offset: MAGIC.len() as u64,
            entries: Vec::new(),
            seen: HashMap::new(),
        })
    }

    /// Appends one utterance. Ids must be unique within a pack.
    pub fn append(&mut self, id: &str, features: &Tensor<f32>) -> Result<()> {
        if features.ndim() != 2 || features.rows() == 0 {
            return Err(Error::format(
                &self.pack_path,
                format!("feature matrix for '{id}' has shape {:?}", features.shape()),
            ));
        }
        if self.seen.contains_key(id) {
            return Err(Error::format(
                &self.pack_path,
                format!("duplicate utterance id '{id}'"),
            ));
        }
        let frames = features.rows() as u32;
        let width = features.cols() as u32;
        self.file.write_all(&frames.to_le_bytes())?;
        self.file.write_all(&width.to_le_bytes())?;
        for &v in features.data() {
            self.file.write_all(&v.to_le_bytes())?;
        }
        self.seen.insert(id.to_string(), self.entries.len());
        self.entries.push(IndexEntry {
            id: id.to_string(),
            offset: self.offset,
            frames,
            width,
        });
        self.offset += 8 + (frames as u64) * (width as u64) * 4;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Flushes the pack and writes the sidecar index.
    pub fn finish(mut self, index_path: &Path) -> Result<()> {
        self.file.flush()?;
        let mut index = BufWriter::new(std::fs::File::create(index_path)?);
        writeln!(index, "{INDEX_HEADER}")?;
        for e in &self.entries {
            writeln!(index, "{}\t{}\t{}\t{}", e.id, e.offset, e.frames, e.width)?;
        }
        index.flush()?;
        Ok(())
    }
}

/// Read access to a finished feature pack.
pub struct FeaturePack {
    pack_path: PathBuf,
    entries: Vec<IndexEntry>,
    by_id: HashMap<String, usize>,
    pack_len: u64,
}

impl FeaturePack {
    pub fn open(pack_path: &Path, index_path: &Path) -> Result<Self> {
        let display = pack_path.display().to_string();
        let mut file = std::fs::File::open(pack_path)
            .map_err(|e| Error::format(pack_path, format!("cannot open pack: {e}")))?;
        let mut magic = [0_u8; 8];
        file.read_exact(&mut magic)
            .map_err(|e| Error::format(&display, format!("cannot read magic: {e}")))?;
        if &magic != MAGIC {
            return Err(Error::format(&display, "bad magic; not a feature pack".to_string()));
        }
        let pack_len = file.metadata()?.len();

        let index_display = index_path.display().to_string();
        let reader = BufReader::new(
            std::fs::File::open(index_path)
                .map_err(|e| Error::format(index_path, format!("cannot open index: {e}")))?,
        );
        let mut entries = Vec::new();
        let mut by_id = HashMap::new();
        let mut saw_header = false;
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            let trimmed = line.trim_end();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if !saw_header {
                if trimmed != INDEX_HEADER {
                    return Err(Error::format(
                        &index_display,
                        format!("line {lineno}: expected header '{INDEX_HEADER}'"),
                    ));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            let [id, offset, frames, width] = fields.as_slice() else {
                return Err(Error::format(
                    &index_display,
                    format!("line {lineno}: expected 4 fields, got {}", fields.len()),
                ));
            };
            let parse = |name: &str, v: &str| -> Result<u64> {
                v.parse().map_err(|_| {
                    Error::format(&index_display, format!("line {lineno}: bad {name} '{v}'"))
                })
            };
            let entry = IndexEntry {
                id: id.to_string(),
                offset: parse("offset", offset)?,
                frames: parse("frames", frames)? as u32,
                width: parse("width", width)? as u32,
            };
            let end = entry.offset + 8 + entry.frames as u64 * entry.width as u64 * 4;
            if end > pack_len {
                return Err(Error::format(
                    &index_display,
                    format!(
                        "line {lineno}: record '{id}' extends to byte {end} but the pack has {pack_len}"
                    ),
                ));
            }
            if by_id.insert(entry.id.clone(), entries.len()).is_some() {
                return Err(Error::format(
                    &index_display,
                    format!("line {lineno}: duplicate id '{id}'"),
                ));
            }
            entries.push(entry);
        }
        if !saw_header {
            return Err(Error::format(&index_display, "empty index".to_string()));
        }

        Ok(FeaturePack {
            pack_path: pack_path.to_path_buf(),
            entries,
            by_id,
            pack_len,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// Utterance ids in pack order.
    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    /// Loads one utterance's feature matrix.
    pub fn load(&self, id: &str) -> Result<Tensor<f32>> {
        let display = self.pack_path.display().to_string();
        let &i = self.by_id.get(id).ok_or_else(|| {
            Error::format(&display, format!("unknown utterance id '{id}'"))
        })?;
        let entry = &self.entries[i];

        let mut file = std::fs::File::open(&self.pack_path)?;
        file.seek(SeekFrom::Start(entry.offset))?;
        let mut head = [0_u8; 8];
        file.read_exact(&mut head)
            .map_err(|e| Error::format(&display, format!("truncated record '{id}': {e}")))?;
        let frames = u32::from_le_bytes(head[0..4].try_into().unwrap());
        let width = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if frames != entry.frames || width != entry.width {
            return Err(Error::format(
                &display,
                format!(
                    "record '{id}' header says {frames}×{width} but the index says {}×{}",
                    entry.frames, entry.width
                ),
            ));
        }
        let n = frames as usize * width as usize;
        let mut bytes = vec![0_u8; n * 4];
        file.read_exact(&mut bytes)
            .map_err(|e| Error::format(&display, format!("truncated record '{id}': {e}")))?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Tensor::new(vec![frames as usize, width as usize], data)
    }

    /// Total bytes in the pack file, as opened.
    pub fn pack_bytes(&self) -> u64 {
        self.pack_len
    }
}
