//! Binary checkpoint format.
//!
//! ```text
//! "EGTCKPT1"                      8-byte magic
//! u32 manifest_len                byte length of the manifest that follows
//! manifest:
//!   u32 entry_count
//!   entry_count x {
//!     u16 name_len, name (UTF-8)
//!     u8  ndims, ndims x u32 dims
//!     u64 offset                  in f32 elements from the payload start
//!   }
//! payload                         little-endian f32, entries back to back
//! ```
//!
//! All integers are little-endian. Entries appear in a fixed order: for each
//! conv block its kernels, bias and batchnorm gamma/beta/running_mean/
//! running_var, then fc1, the 1-D batchnorm and fc2.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{NetworkParams, BN_NAMES, CONV_FILTERS, CONV_NAMES, HIDDEN_UNITS};
use crate::error::{Error, Result};
use crate::tensor::{BatchNormState, ConvLayerState, Linear, CONV_KERNEL};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"EGTCKPT1";

struct Entry {
    name: String,
    dims: Vec<u32>,
    values: Vec<f32>,
}

fn entries(params: &NetworkParams<f32>) -> Vec<Entry> {
    let e = |name: String, dims: &[usize], values: &[f32]| Entry {
        name,
        dims: dims.iter().map(|&d| d as u32).collect(),
        values: values.to_vec(),
    };
    let bn = |out: &mut Vec<Entry>, prefix: &str, b: &BatchNormState<f32>| {
        let f = [b.gamma.len()];
        out.push(e(format!("{prefix}.gamma"), &f, &b.gamma));
        out.push(e(format!("{prefix}.beta"), &f, &b.beta));
        out.push(e(format!("{prefix}.running_mean"), &f, &b.running_mean));
        out.push(e(format!("{prefix}.running_var"), &f, &b.running_var));
    };
    let mut out = Vec::new();
    for l in 0..3 {
        let c = &params.conv[l];
        out.push(e(
            format!("{}.kernels", CONV_NAMES[l]),
            &[CONV_KERNEL, CONV_KERNEL, c.in_ch(), c.out_ch()],
            c.kernels(),
        ));
        out.push(e(format!("{}.bias", CONV_NAMES[l]), &[c.out_ch()], c.bias()));
        bn(&mut out, BN_NAMES[l], &params.bn2d[l]);
    }
    for (name, lin, norm) in [("fc1", &params.fc1, Some(&params.bn1d)), ("fc2", &params.fc2, None)] {
        out.push(e(
            format!("{name}.weights"),
            &[lin.inputs(), lin.outputs()],
            &lin.weights,
        ));
        out.push(e(format!("{name}.bias"), &[lin.outputs()], &lin.bias));
        if let Some(b) = norm {
            bn(&mut out, "bn1d", b);
        }
    }
    out
}

/// Serializes `params` into checkpoint bytes.
pub fn write_checkpoint(params: &NetworkParams<f32>) -> Vec<u8> {
    let entries = entries(params);
    let mut manifest = Vec::new();
    manifest.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    let mut offset = 0u64;
    for en in &entries {
        manifest.extend_from_slice(&(en.name.len() as u16).to_le_bytes());
        manifest.extend_from_slice(en.name.as_bytes());
        manifest.push(en.dims.len() as u8);
        for d in &en.dims {
            manifest.extend_from_slice(&d.to_le_bytes());
        }
        manifest.extend_from_slice(&offset.to_le_bytes());
        offset += en.values.len() as u64;
    }
    let mut out = Vec::with_capacity(12 + manifest.len() + 4 * offset as usize);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest);
    for en in &entries {
        for v in &en.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(params: &NetworkParams<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<NetworkParams<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes, path)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                expected: end as u64,
                actual: self.bytes.len() as u64,
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses checkpoint bytes; `path` is only used in error messages.
pub fn read_checkpoint(bytes: &[u8], path: &Path) -> Result<NetworkParams<f32>> {
    let mut cur = Cursor { bytes, pos: 0, path };
    let dim_err = |detail: String| Error::DimMismatch {
        path: path.to_path_buf(),
        detail,
    };
    if cur.take(8).ok() != Some(&CHECKPOINT_MAGIC[..]) {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "EGTCKPT1",
        });
    }
    let manifest_len = cur.u32()? as usize;
    let manifest_end = cur.pos + manifest_len;
    let count = cur.u32()? as usize;
    let mut headers = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = cur.u16()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|e| dim_err(format!("entry name is not UTF-8: {e}")))?
            .to_string();
        let ndims = cur.u8()? as usize;
        let dims = (0..ndims).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
        let offset = cur.u64()?;
        headers.push((name, dims, offset));
    }
    if cur.pos != manifest_end {
        return Err(dim_err(format!(
            "manifest length {manifest_len} does not match its entries"
        )));
    }
    let payload_start = cur.pos;
    let total: u64 = headers
        .iter()
        .map(|(_, d, _)| d.iter().map(|&x| x as u64).product::<u64>())
        .sum();
    let want_len = payload_start as u64 + 4 * total;
    if (bytes.len() as u64) < want_len {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: want_len,
            actual: bytes.len() as u64,
        });
    }
    if bytes.len() as u64 > want_len {
        return Err(dim_err(format!(
            "{} trailing bytes after payload",
            bytes.len() as u64 - want_len
        )));
    }
    let mut tensors = HashMap::new();
    let mut expected_offset = 0u64;
    for (name, dims, offset) in headers {
        if offset != expected_offset {
            return Err(dim_err(format!(
                "entry {name} at offset {offset}, expected {expected_offset}"
            )));
        }
        let n: u64 = dims.iter().map(|&x| x as u64).product();
        let start = payload_start + 4 * offset as usize;
        let values: Vec<f32> = bytes[start..start + 4 * n as usize]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        expected_offset += n;
        tensors.insert(name, (dims, values));
    }

    // conv1's input depth and fc2's width are free; every other dim is fixed.
    let free_dim = |name: &str, axis: usize| -> Result<usize> {
        tensors
            .get(name)
            .and_then(|(d, _)| d.get(axis).copied())
            .map(|d| d as usize)
            .ok_or_else(|| dim_err(format!("missing or malformed entry {name}")))
    };
    let input_channels = free_dim("conv1.kernels", 2)?;
    let classes = free_dim("fc2.weights", 1)?;
    let mut store = Store { tensors, path };
    let mut conv = Vec::with_capacity(3);
    let mut bn2d = Vec::with_capacity(3);
    let mut in_ch = input_channels;
    for l in 0..3 {
        let out_ch = CONV_FILTERS[l];
        let k = store.get(
            &format!("{}.kernels", CONV_NAMES[l]),
            &[CONV_KERNEL, CONV_KERNEL, in_ch, out_ch],
        )?;
        let b = store.get(&format!("{}.bias", CONV_NAMES[l]), &[out_ch])?;
        conv.push(ConvLayerState::from_parts(in_ch, out_ch, k, b)?);
        bn2d.push(store.batchnorm(BN_NAMES[l], out_ch)?);
        in_ch = out_ch;
    }
    let fc1 = store.linear("fc1", in_ch, HIDDEN_UNITS)?;
    let bn1d = store.batchnorm("bn1d", HIDDEN_UNITS)?;
    let fc2 = store.linear("fc2", HIDDEN_UNITS, classes)?;
    if let Some(extra) = store.tensors.keys().next() {
        return Err(dim_err(format!("unexpected entry {extra}")));
    }
    let params = NetworkParams {
        conv: conv.try_into().map_err(|_| dim_err("conv layers".into()))?,
        bn2d: bn2d.try_into().map_err(|_| dim_err("batchnorm layers".into()))?,
        fc1,
        bn1d,
        fc2,
    };
    if params
        .bn2d
        .iter()
        .chain([&params.bn1d])
        .any(|b| b.running_var.iter().any(|&v| v < 0.0))
    {
        return Err(dim_err("negative running variance".into()));
    }
    Ok(params)
}

struct Store<'a> {
    tensors: HashMap<String, (Vec<u32>, Vec<f32>)>,
    path: &'a Path,
}

impl Store<'_> {
    fn get(&mut self, name: &str, want: &[usize]) -> Result<Vec<f32>> {
        let (dims, values) = self.tensors.remove(name).ok_or_else(|| Error::DimMismatch {
            path: self.path.to_path_buf(),
            detail: format!("missing entry {name}"),
        })?;
        let dims: Vec<usize> = dims.iter().map(|&d| d as usize).collect();
        if dims != want {
            return Err(Error::DimMismatch {
                path: self.path.to_path_buf(),
                detail: format!("{name} has dims {dims:?}, expected {want:?}"),
            });
        }
        Ok(values)
    }

    fn batchnorm(&mut self, prefix: &str, f: usize) -> Result<BatchNormState<f32>> {
        let mut b = BatchNormState::new(f);
        b.gamma = self.get(&format!("{prefix}.gamma"), &[f])?;
        b.beta = self.get(&format!("{prefix}.beta"), &[f])?;
        b.running_mean = self.get(&format!("{prefix}.running_mean"), &[f])?;
        b.running_var = self.get(&format!("{prefix}.running_var"), &[f])?;
        Ok(b)
    }

    fn linear(&mut self, name: &str, inputs: usize, outputs: usize) -> Result<Linear<f32>> {
        let w = self.get(&format!("{name}.weights"), &[inputs, outputs])?;
        let b = self.get(&format!("{name}.bias"), &[outputs])?;
        Linear::from_parts(inputs, outputs, w, b)
    }
}
