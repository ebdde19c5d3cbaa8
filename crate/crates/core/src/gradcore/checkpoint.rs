//! Parameter checkpoints: a text manifest followed by a little-endian f32 blob.
//!
//! ```text
//! hppo-checkpoint 1
//! params 2
//! actor.l0.weight 116x128 0
//! actor.l0.bias 128 59392
//! blob 59904
//! <59904 bytes>
//! ```

use super::{ParamSet, Tensor};
use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

const MAGIC: &str = "hppo-checkpoint 1";

pub fn encode(params: &ParamSet) -> Vec<u8> {
    let mut header = format!("{MAGIC}\nparams {}\n", params.len());
    let mut offset = 0usize;
    for (name, t) in params.iter() {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        header.push_str(&format!("{name} {} {offset}\n", dims.join("x")));
        offset += t.len() * 4;
    }
    header.push_str(&format!("blob {offset}\n"));
    let mut out = header.into_bytes();
    out.reserve(offset);
    for (_, t) in params.iter() {
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

/// Parses a checkpoint into a fresh [`ParamSet`].
pub fn decode(bytes: &[u8]) -> Result<ParamSet> {
    let mut pos = 0usize;
    let mut next_line = || -> Result<String> {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("truncated manifest"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad("manifest is not UTF-8"))?;
        pos += end + 1;
        Ok(line.to_owned())
    };
    if next_line()? != MAGIC {
        return Err(bad("unrecognized checkpoint header"));
    }
    let count: usize = next_line()?
        .strip_prefix("params ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("missing parameter count"))?;
    let mut entries = Vec::with_capacity(count);
    let mut expected_offset = 0usize;
    for _ in 0..count {
        let line = next_line()?;
        let fields: Vec<&str> = line.split(' ').collect();
        let [name, dims, offset] = fields[..] else {
            return Err(bad(format!("malformed manifest line '{line}'")));
        };
        let shape: Vec<usize> = dims
            .split('x')
            .map(|d| d.parse().map_err(|_| bad(format!("bad shape '{dims}'"))))
            .collect::<Result<_>>()?;
        let offset: usize = offset.parse().map_err(|_| bad(format!("bad offset '{offset}'")))?;
        if offset != expected_offset {
            return Err(bad(format!("offset {offset} for '{name}' should be {expected_offset}")));
        }
        expected_offset += shape.iter().product::<usize>() * 4;
        entries.push((name.to_owned(), shape, offset));
    }
    let total: usize = next_line()?
        .strip_prefix("blob ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("missing blob length"))?;
    let blob = &bytes[pos..];
    if total != expected_offset || blob.len() != total {
        return Err(bad(format!(
            "blob length {} does not match manifest total {expected_offset} (declared {total})",
            blob.len()
        )));
    }
    let mut params = ParamSet::new();
    for (name, shape, offset) in entries {
        let n: usize = shape.iter().product();
        let data = blob[offset..offset + n * 4]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        params.add(name, Tensor::new(shape, data)?);
    }
    Ok(params)
}

pub fn save(params: &ParamSet, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(params))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ParamSet> {
    decode(&std::fs::read(path)?)
}

/// Loads into an existing layout, validating names and shapes.
pub fn load_into(params: &mut ParamSet, path: &Path) -> Result<()> {
    let loaded = load(path)?;
    params
        .copy_from(&loaded)
        .map_err(|e| bad(format!("{}: {e}", path.display())))
}
