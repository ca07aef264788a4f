//! Binary model checkpoints.
//!
//! Layout: 8-byte magic, little-endian u32 format version, u32 header
//! length, a JSON header (config, epoch, seed, tensor names and shapes, a
//! checksum), then the raw float32 little-endian data of every parameter in
//! header order. The loader verifies all of it before returning, so a bad
//! file never yields a partially filled model.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{Model, ModelConfig, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"VGSCKPT1";
const FORMAT_VERSION: u32 = 1;
/// Upper bound on the JSON header; anything larger is treated as corrupt.
const MAX_HEADER_BYTES: u32 = 1 << 24;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    epoch: u32,
    seed: u64,
    tensors: Vec<TensorEntry>,
    /// Wrapping byte sum of all parameter data, to catch in-place damage.
    byte_sum: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let named = model.params.named_tensors();
    let mut byte_sum = 0u32;
    for (_, tensor) in &named {
        for v in tensor.data() {
            for b in v.to_le_bytes() {
                byte_sum = byte_sum.wrapping_add(u32::from(b));
            }
        }
    }
    let header = Header {
        config: model.config.clone(),
        epoch: model.epoch,
        seed: model.seed,
        tensors: named
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        byte_sum,
    };
    let json = serde_json::to_vec(&header)
        .map_err(|e| Error::format(path, format!("cannot encode checkpoint header: {e}")))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, tensor) in &named {
        for v in tensor.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, path, "magic")?;
    if &magic != MAGIC {
        return Err(Error::format(path, "not a model checkpoint (bad magic)"));
    }
    let version = read_u32(&mut r, path, "format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported checkpoint format version {version}, expected {FORMAT_VERSION}"),
        ));
    }
    let header_len = read_u32(&mut r, path, "header length")?;
    if header_len == 0 || header_len > MAX_HEADER_BYTES {
        return Err(Error::format(
            path,
            format!("implausible header length {header_len}"),
        ));
    }
    let mut json = vec![0u8; header_len as usize];
    read_exact(&mut r, &mut json, path, "header")?;
    let header: Header = serde_json::from_slice(&json)
        .map_err(|e| Error::format(path, format!("checkpoint header is not valid JSON: {e}")))?;
    header.config.validate()?;

    let mut params = ModelParams::<f32>::zeros(&header.config);
    {
        let named = params.named_tensors_mut();
        if named.len() != header.tensors.len() {
            return Err(Error::format(
                path,
                format!(
                    "checkpoint lists {} tensors, config implies {}",
                    header.tensors.len(),
                    named.len()
                ),
            ));
        }
        let mut byte_sum = 0u32;
        for ((name, tensor), entry) in named.into_iter().zip(&header.tensors) {
            if entry.name != name {
                return Err(Error::format(
                    path,
                    format!("expected tensor {name}, checkpoint has {}", entry.name),
                ));
            }
            if entry.shape != tensor.shape() {
                return Err(Error::format(
                    path,
                    format!(
                        "tensor {name} has shape {:?}, config implies {:?}",
                        entry.shape,
                        tensor.shape()
                    ),
                ));
            }
            let mut buf = vec![0u8; tensor.len() * 4];
            read_exact(&mut r, &mut buf, path, &format!("tensor {name}"))?;
            for &b in &buf {
                byte_sum = byte_sum.wrapping_add(u32::from(b));
            }
            for (slot, chunk) in tensor.data_mut().iter_mut().zip(buf.chunks_exact(4)) {
                *slot = f32::from_le_bytes(chunk.try_into().unwrap());
            }
            if !tensor.is_finite() {
                return Err(Error::format(
                    path,
                    format!("tensor {name} contains non-finite values"),
                ));
            }
        }
        if byte_sum != header.byte_sum {
            return Err(Error::format(
                path,
                "parameter data does not match its checksum",
            ));
        }
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::format(path, "trailing bytes after parameter data"));
    }

    Ok(Model {
        config: header.config,
        params,
        epoch: header.epoch,
        seed: header.seed,
    })
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::format(path, format!("checkpoint truncated while reading {what}")))
}

fn read_u32(r: &mut impl Read, path: &Path, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, path, what)?;
    Ok(u32::from_le_bytes(buf))
}
