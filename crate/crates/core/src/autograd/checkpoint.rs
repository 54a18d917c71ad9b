//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "PACCCKPT"
//! version      u32
//! param_count  u32
//! per parameter:
//!   name_len   u32, name (UTF-8)
//!   rows       u64
//!   cols       u64
//!   data       rows*cols f64, row-major
//! config_len   u64
//! config       UTF-8 JSON snapshot of the configuration
//! ```

use std::io::{Read, Write};

use super::{AutogradError, ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PACCCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ParamStore,
    pub config_json: String,
}

pub fn write_checkpoint<W: Write>(w: &mut W, ckpt: &Checkpoint) -> Result<(), AutogradError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(ckpt.params.len() as u32).to_le_bytes())?;
    for (name, t) in ckpt.params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.rows() as u64).to_le_bytes())?;
        w.write_all(&(t.cols() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.write_all(&(ckpt.config_json.len() as u64).to_le_bytes())?;
    w.write_all(ckpt.config_json.as_bytes())?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint, AutogradError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(AutogradError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(AutogradError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(r)?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name_len = read_u32(r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| AutogradError::Checkpoint(e.to_string()))?;
        let rows = read_u64(r)? as usize;
        let cols = read_u64(r)? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| AutogradError::Checkpoint("tensor size overflow".into()))?;
        let mut bytes = vec![0u8; n * 8];
        r.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        params.add(name, Tensor::from_vec(rows, cols, data)?);
    }
    let json_len = read_u64(r)? as usize;
    let mut json = vec![0u8; json_len];
    r.read_exact(&mut json)?;
    let config_json = String::from_utf8(json).map_err(|e| AutogradError::Checkpoint(e.to_string()))?;
    Ok(Checkpoint { params, config_json })
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
