//! Precomputed image embeddings in a single binary pack.
//!
//! One file stores every vector, avoiding tens of thousands of tiny files:
//!
//! ```text
//! magic "VGSIMGF1" (8 bytes)
//! u32 LE count, u32 LE dim
//! count·dim f32 LE vectors, in id-table order
//! id table: per image, u32 LE byte length + UTF-8 id
//! ```
//!
//! The whole pack is loaded into memory on open; at 2048 floats per image a
//! Flickr8k-sized pack is ~65 MB.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"VGSIMGF1";

/// Writes a pack from `(image_id, vector)` pairs. All vectors must have
/// length `dim`; ids must be unique; values must be finite.
pub fn write_image_features(path: &Path, dim: usize, entries: &[(String, Vec<f32>)]) -> Result<()> {
    let display = path.display().to_string();
    if dim == 0 {
        return Err(Error::format(&display, "dim must be positive".to_string()));
    }
    let mut seen = HashMap::new();
    for (i, (id, vec)) in entries.iter().enumerate() {
        if vec.len() != dim {
            return Err(Error::format(
                &display,
                format!("vector for '{id}' has length {}, expected {dim}", vec.len()),
            ));
        }
        if vec.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(&display, format!("vector for '{id}' is not finite")));
        }
        if seen.insert(id.as_str(), i).is_some() {
            return Err(Error::format(&display, format!("duplicate image id '{id}'")));
        }
    }

    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(entries.len() as u32).to_le_bytes())?;
    out.write_all(&(dim as u32).to_le_bytes())?;
    for (_, vec) in entries {
        for &v in vec {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    for (id, _) in entries {
        let bytes = id.as_bytes();
        out.write_all(&(bytes.len() as u32).to_le_bytes())?;
        out.write_all(bytes)?;
    }
    out.flush()?;
    Ok(())
}

/// In-memory index over an image-feature pack.
pub struct ImageFeatureIndex {
    dim: usize,
    ids: Vec<String>,
    by_id: HashMap<String, usize>,
    data: Vec<f32>,
}

impl ImageFeatureIndex {
    pub fn open(path: &Path) -> Result<Self> {
        let display = path.display().to_string();
        let mut reader = BufReader::new(
            std::fs::File::open(path)
                .map_err(|e| Error::format(path, format!("cannot open: {e}")))?,
        );

        let mut magic = [0_u8; 8];
        reader
            .read_exact(&mut magic)
            .map_err(|e| Error::format(&display, format!("cannot read magic: {e}")))?;
        if &magic != MAGIC {
            return Err(Error::format(&display, "bad magic; not an image-feature pack".to_string()));
        }
        let mut head = [0_u8; 8];
        reader
            .read_exact(&mut head)
            .map_err(|e| Error::format(&display, format!("truncated header: {e}")))?;
        let count = u32::from_le_bytes(head[0..4].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
        if dim == 0 {
            return Err(Error::format(&display, "dim must be positive".to_string()));
        }

        let mut bytes = vec![0_u8; count * dim * 4];
        reader
            .read_exact(&mut bytes)
            .map_err(|e| Error::format(&display, format!("truncated vector block: {e}")))?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(
                &display,
                format!("non-finite value in vector {}", bad / dim),
            ));
        }

        let mut ids = Vec::with_capacity(count);
        let mut by_id = HashMap::with_capacity(count);
        for i in 0..count {
            let mut len_bytes = [0_u8; 4];
            reader
                .read_exact(&mut len_bytes)
                .map_err(|e| Error::format(&display, format!("truncated id table: {e}")))?;
            let len = u32::from_le_bytes(len_bytes) as usize;
            let mut id_bytes = vec![0_u8; len];
            reader
                .read_exact(&mut id_bytes)
                .map_err(|e| Error::format(&display, format!("truncated id table: {e}")))?;
            let id = String::from_utf8(id_bytes)
                .map_err(|_| Error::format(&display, format!("id {i} is not UTF-8")))?;
            if by_id.insert(id.clone(), i).is_some() {
                return Err(Error::format(&display, format!("duplicate image id '{id}'")));
            }
            ids.push(id);
        }

        Ok(ImageFeatureIndex { dim, ids, by_id, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, image_id: &str) -> bool {
        self.by_id.contains_key(image_id)
    }

    /// Image ids in pack order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// The stored vector for one image.
    pub fn get(&self, image_id: &str) -> Result<&[f32]> {
        let &i = self
            .by_id
            .get(image_id)
            .ok_or_else(|| Error::Eval(format!("unknown image id '{image_id}'")))?;
        Ok(&self.data[i * self.dim..(i + 1) * self.dim])
    }
}

/// Convenience wrapper matching the lookup-by-id access pattern.
pub fn load_image_features<'a>(index: &'a ImageFeatureIndex, image_id: &str) -> Result<&'a [f32]> {
    index.get(image_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_entries(n: usize, dim: usize) -> Vec<(String, Vec<f32>)> {
        (0..n)
            .map(|i| {
                let v = (0..dim)
                    .map(|j| ((i * dim + j) as f32 * 0.37).sin())
                    .collect();
                (format!("img{i}"), v)
            })
            .collect()
    }

    #[test]
    fn vectors_roundtrip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pack");
        let entries = toy_entries(20, 64);
        write_image_features(&path, 64, &entries).unwrap();

        let index = ImageFeatureIndex::open(&path).unwrap();
        assert_eq!(index.len(), 20);
        assert_eq!(index.dim(), 64);
        for (id, vec) in &entries {
            assert_eq!(load_image_features(&index, id).unwrap(), vec.as_slice());
        }
    }

    #[test]
    fn bulk_order_matches_write_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pack");
        let entries = toy_entries(1000, 8);
        write_image_features(&path, 8, &entries).unwrap();

        let index = ImageFeatureIndex::open(&path).unwrap();
        let expected: Vec<&str> = entries.iter().map(|(id, _)| id.as_str()).collect();
        let got: Vec<&str> = index.ids().iter().map(|s| s.as_str()).collect();
        assert_eq!(got, expected);
        // Order-preservation against a sequential scan of the raw block.
        for (i, (_, vec)) in entries.iter().enumerate() {
            assert_eq!(&index.data[i * 8..(i + 1) * 8], vec.as_slice());
        }
    }

    #[test]
    fn unknown_id_error_names_the_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pack");
        write_image_features(&path, 4, &toy_entries(3, 4)).unwrap();
        let index = ImageFeatureIndex::open(&path).unwrap();
        let err = index.get("img99").unwrap_err();
        assert!(err.to_string().contains("img99"), "{err}");
    }

    #[test]
    fn nan_content_is_rejected_at_write_and_open() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pack");
        let mut entries = toy_entries(2, 4);
        entries[1].1[2] = f32::NAN;
        assert!(write_image_features(&path, 4, &entries).is_err());

        // Write a valid pack, then corrupt one float to NaN on disk.
        let entries = toy_entries(2, 4);
        write_image_features(&path, 4, &entries).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let float_start = 16; // magic + count + dim
        bytes[float_start..float_start + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(ImageFeatureIndex::open(&path).is_err());
    }

    #[test]
    fn wrong_dim_vector_rejected_at_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pack");
        let entries = vec![("a".to_string(), vec![1.0_f32; 3])];
        assert!(write_image_features(&path, 4, &entries).is_err());
    }

    #[test]
    fn truncated_pack_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pack");
        write_image_features(&path, 16, &toy_entries(5, 16)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 3]).unwrap();
        assert!(ImageFeatureIndex::open(&path).is_err());
    }
}
