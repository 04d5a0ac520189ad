//! Binary checkpoint layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "TREEDEC\0"
//! version      u32
//! vocab        u32
//! embed        u32
//! hidden       u32
//! arity        u32
//! fingerprint  u64      vocabulary fingerprint
//! blocks       u32      number of parameter blocks
//! per block:   u16 name length, name (UTF-8), u64 element count,
//!              element count × f64
//! ```
//!
//! Blocks appear in [`Params::blocks`] order and are checked by name and
//! length on load.

use super::{Dims, ModelError, Params, TreeDecoderModel};
use std::io::{Read, Write};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"TREEDEC\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(
    model: &TreeDecoderModel,
    fingerprint: u64,
    mut out: W,
) -> Result<(), ModelError> {
    let dims = model.dims();
    out.write_all(&CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for d in [dims.vocab, dims.embed, dims.hidden, dims.arity] {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    out.write_all(&fingerprint.to_le_bytes())?;
    let blocks = model.params.blocks();
    out.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for (name, values) in blocks {
        out.write_all(&(name.len() as u16).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(values.len() as u64).to_le_bytes())?;
        for v in values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N], ModelError> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => ModelError::Checkpoint("truncated file".into()),
        _ => ModelError::Io(e),
    })?;
    Ok(buf)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, ModelError> {
    Ok(u32::from_le_bytes(read_array(input)?))
}

/// Returns the model and the vocabulary fingerprint it was saved with.
pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(TreeDecoderModel, u64), ModelError> {
    let bad = |msg: String| ModelError::Checkpoint(msg);
    if read_array::<8, _>(&mut input)? != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file (bad magic)".into()));
    }
    let version = read_u32(&mut input)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mut d = [0usize; 4];
    for slot in &mut d {
        *slot = read_u32(&mut input)? as usize;
    }
    let dims = Dims {
        vocab: d[0],
        embed: d[1],
        hidden: d[2],
        arity: d[3],
    };
    if dims.arity == 0 || dims.vocab == 0 || dims.arity > 64 {
        return Err(bad(format!("implausible dimensions {dims:?}")));
    }
    let fingerprint = u64::from_le_bytes(read_array(&mut input)?);
    let mut params = Params::zeros(dims);
    let count = read_u32(&mut input)? as usize;
    let mut blocks = params.blocks_mut();
    if count != blocks.len() {
        return Err(bad(format!("{count} blocks, expected {}", blocks.len())));
    }
    for (name, values) in blocks.iter_mut() {
        let len = u16::from_le_bytes(read_array(&mut input)?) as usize;
        let mut raw = vec![0u8; len];
        input.read_exact(&mut raw)?;
        if raw != name.as_bytes() {
            return Err(bad(format!(
                "block {:?} where {name:?} was expected",
                String::from_utf8_lossy(&raw)
            )));
        }
        let n = u64::from_le_bytes(read_array(&mut input)?) as usize;
        if n != values.len() {
            return Err(bad(format!(
                "block {name} has {n} values, expected {}",
                values.len()
            )));
        }
        for v in values.iter_mut() {
            *v = f64::from_le_bytes(read_array(&mut input)?);
        }
    }
    drop(blocks);
    if !params.is_finite() {
        return Err(bad("non-finite parameter".into()));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes".into()));
    }
    Ok((TreeDecoderModel::new(dims, params)?, fingerprint))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> TreeDecoderModel {
        TreeDecoderModel::init(
            Dims {
                vocab: 6,
                embed: 2,
                hidden: 3,
                arity: 3,
            },
            0.1,
            8,
        )
    }

    #[test]
    fn round_trip_is_bitwise() {
        let m = model();
        let mut buf = Vec::new();
        write_checkpoint(&m, 0xfeed, &mut buf).unwrap();
        assert_eq!(&buf[..8], b"TREEDEC\0");
        assert_eq!(&buf[8..12], &[1, 0, 0, 0]);
        let (back, fp) = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(fp, 0xfeed);
        assert_eq!(back, m);
    }

    #[test]
    fn corrupt_files_rejected() {
        let mut buf = Vec::new();
        write_checkpoint(&model(), 1, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        let mut magic = buf.clone();
        magic[0] = b'X';
        assert!(read_checkpoint(&magic[..]).is_err());
        let mut version = buf.clone();
        version[8] = 2;
        assert!(read_checkpoint(&version[..]).is_err());
        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(read_checkpoint(&trailing[..]).is_err());
    }
}
