//! Binary parameter checkpoints and TSV training history.
//!
//! A checkpoint is the line `GEFA-CKPT v1\n` followed by one record per
//! tensor: name length (u32), UTF-8 name, rank (u32), each dimension (u64)
//! and the values as f64, all little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{CheckpointError, EpochRecord};
use crate::gnn::ParamStore;
use crate::numcore::Tensor;

pub const CHECKPOINT_HEADER: &[u8] = b"GEFA-CKPT v1\n";
pub const HISTORY_HEADER: &str = "epoch\ttrain_mse\tval_mse\tlr";

pub fn encode_checkpoint(params: &ParamStore) -> Vec<u8> {
    let mut out = CHECKPOINT_HEADER.to_vec();
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                CheckpointError::Format(format!("truncated {what} at byte {}", self.pos))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Tensor)>, CheckpointError> {
    if !bytes.starts_with(CHECKPOINT_HEADER) {
        return Err(CheckpointError::Format(
            "missing GEFA-CKPT v1 header".into(),
        ));
    }
    let mut r = Reader {
        bytes,
        pos: CHECKPOINT_HEADER.len(),
    };
    let mut out = Vec::new();
    while r.pos < bytes.len() {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| CheckpointError::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32("rank")? as usize;
        if rank > 8 {
            return Err(CheckpointError::Format(format!(
                "tensor '{name}' has implausible rank {rank}"
            )));
        }
        let shape = (0..rank)
            .map(|_| r.u64("dimension").map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&c| c.checked_mul(8).is_some_and(|b| b <= bytes.len()))
            .ok_or_else(|| {
                CheckpointError::Format(format!("tensor '{name}' has implausible shape {shape:?}"))
            })?;
        let raw = r.take(count * 8, "values")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let tensor = Tensor::new(shape, data).expect("length checked");
        out.push((name, tensor));
    }
    Ok(out)
}

/// Overwrites every parameter of `params` from `bytes`. The checkpoint must
/// hold exactly the same names with the same shapes.
pub fn restore_checkpoint(params: &mut ParamStore, bytes: &[u8]) -> Result<(), CheckpointError> {
    let records = decode_checkpoint(bytes)?;
    if records.len() != params.len() {
        return Err(CheckpointError::Mismatch(format!(
            "checkpoint has {} tensors, model has {}",
            records.len(),
            params.len()
        )));
    }
    for (name, tensor) in &records {
        let Some(slot) = params.by_name(name) else {
            return Err(CheckpointError::Mismatch(format!(
                "model has no parameter '{name}'"
            )));
        };
        if slot.shape() != tensor.shape() {
            return Err(CheckpointError::Mismatch(format!(
                "parameter '{name}' has shape {:?} in the model but {:?} in the checkpoint",
                slot.shape(),
                tensor.shape()
            )));
        }
    }
    for (name, tensor) in records {
        *params.by_name_mut(&name).expect("checked above") = tensor;
    }
    Ok(())
}

/// Writes `bytes` to a sibling temporary file, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn save_checkpoint(path: &Path, params: &ParamStore) -> Result<(), CheckpointError> {
    write_atomic(path, &encode_checkpoint(params)).map_err(|e| CheckpointError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn load_checkpoint(path: &Path, params: &mut ParamStore) -> Result<(), CheckpointError> {
    let bytes = fs::read(path).map_err(|e| CheckpointError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    restore_checkpoint(params, &bytes)
}

pub fn history_tsv(history: &[EpochRecord]) -> String {
    let mut out = format!("{HISTORY_HEADER}\n");
    for r in history {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.epoch, r.train_mse, r.val_mse, r.lr
        ));
    }
    out
}
