//! Binary checkpoint format.
//!
//! ```text
//! magic    8 bytes  "MVAECKPT"
//! version  u32 LE
//! count    u32 LE   number of parameter records
//! record*  name_len u32 | name (UTF-8) | rank u32 | dims u32* | values f32 LE*
//! ```

use std::io::{Read, Write};

use crate::error::{NnError, Result};
use crate::params::ParamStore;
use crate::real::Real;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MVAECKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

// Guards against absurd allocations when decoding corrupt input.
const MAX_NAME_LEN: usize = 1 << 16;
const MAX_RANK: usize = 8;
const MAX_VALUES: usize = 1 << 28;

fn io_err(e: std::io::Error) -> NnError {
    NnError::Checkpoint(e.to_string())
}

pub fn write_checkpoint<F: Real, W: Write>(store: &ParamStore<F>, mut w: W) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC).map_err(io_err)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(store.len() as u32).to_le_bytes()).map_err(io_err)?;
    for p in store.params() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(name).map_err(io_err)?;
        w.write_all(&(p.value.rank() as u32).to_le_bytes()).map_err(io_err)?;
        for &d in p.value.shape() {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io_err)?;
        }
        let mut buf = Vec::with_capacity(p.value.len() * 4);
        for v in p.value.data() {
            buf.extend_from_slice(&v.to_f32_storage().to_le_bytes());
        }
        w.write_all(&buf).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<F: Real, R: Read>(mut r: R) -> Result<ParamStore<F>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        if name_len > MAX_NAME_LEN {
            return Err(NnError::Checkpoint(format!("name length {name_len} too large")));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(io_err)?;
        let name = String::from_utf8(name).map_err(|_| NnError::Checkpoint("name is not UTF-8".into()))?;
        let rank = read_u32(&mut r)? as usize;
        if rank > MAX_RANK {
            return Err(NnError::Checkpoint(format!("rank {rank} too large")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut n: usize = 1;
        for _ in 0..rank {
            let d = read_u32(&mut r)? as usize;
            n = n
                .checked_mul(d)
                .filter(|&n| n <= MAX_VALUES)
                .ok_or_else(|| NnError::Checkpoint("tensor too large".into()))?;
            shape.push(d);
        }
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw).map_err(io_err)?;
        let data: Vec<F> = raw
            .chunks_exact(4)
            .map(|c| F::from_f32_storage(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        let value = Tensor::new(&shape, data)?;
        if !value.all_finite() {
            return Err(NnError::Checkpoint(format!("non-finite value in `{name}`")));
        }
        store.add(name, value)?;
    }
    let mut rest = [0u8; 1];
    match r.read(&mut rest) {
        Ok(0) => Ok(store),
        Ok(_) => Err(NnError::Checkpoint("trailing bytes".into())),
        Err(e) => Err(io_err(e)),
    }
}
