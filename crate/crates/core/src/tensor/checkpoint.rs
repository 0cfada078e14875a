//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "JTVAECK1"
//! config_hash  u64      FNV-1a 64 of the config text
//! vocab_hash   u64      FNV-1a 64 of the vocabulary text
//! config       u32 length + UTF-8 bytes
//! vocab        u32 length + UTF-8 bytes
//! count        u32      number of tensor records
//! record       u32 name length + UTF-8 name
//!              u32 rank (always 2) + rank × u64 extents
//!              extents product × f64 values
//! ```

use super::Tensor;
use crate::error::{Error, Result};
use crate::molgraph::fnv1a64;

pub const MAGIC: &[u8; 8] = b"JTVAECK1";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointData {
    pub config: String,
    pub vocab: String,
    pub tensors: Vec<(String, Tensor)>,
}

impl CheckpointData {
    pub fn config_hash(&self) -> u64 {
        fnv1a64(self.config.as_bytes())
    }

    pub fn vocab_hash(&self) -> u64 {
        fnv1a64(self.vocab.as_bytes())
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn write_checkpoint(data: &CheckpointData) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&data.config_hash().to_le_bytes());
    out.extend_from_slice(&data.vocab_hash().to_le_bytes());
    put_str(&mut out, &data.config);
    put_str(&mut out, &data.vocab);
    out.extend_from_slice(&(data.tensors.len() as u32).to_le_bytes());
    for (name, t) in &data.tensors {
        put_str(&mut out, name);
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&(t.rows as u64).to_le_bytes());
        out.extend_from_slice(&(t.cols as u64).to_le_bytes());
        for x in &t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

pub fn read_checkpoint(buf: &[u8]) -> Result<CheckpointData> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let config_hash = r.u64()?;
    let vocab_hash = r.u64()?;
    let config = r.string()?;
    let vocab = r.string()?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()?;
        if rank != 2 {
            return Err(Error::Checkpoint(format!(
                "{name}: rank {rank} unsupported"
            )));
        }
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint(format!("{name}: extents overflow")))?;
        let bytes = r.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("size overflow".into()))?,
        )?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push((name, Tensor { rows, cols, data }));
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    let data = CheckpointData {
        config,
        vocab,
        tensors,
    };
    if data.config_hash() != config_hash {
        return Err(Error::Checkpoint("config hash mismatch".into()));
    }
    if data.vocab_hash() != vocab_hash {
        return Err(Error::Checkpoint("vocabulary hash mismatch".into()));
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CheckpointData {
        CheckpointData {
            config: "hidden_dim=4\n".into(),
            vocab: "CC\nCO\n".into(),
            tensors: vec![
                (
                    "W".into(),
                    Tensor::from_vec(2, 2, vec![1.0, -0.5, 0.25, 3.0]).unwrap(),
                ),
                ("b".into(), Tensor::row(vec![f64::MIN_POSITIVE, -0.0])),
            ],
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let bytes = write_checkpoint(&sample());
        let back = read_checkpoint(&bytes).unwrap();
        assert_eq!(back, sample());
        assert_eq!(write_checkpoint(&back), bytes);
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = write_checkpoint(&sample());
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        bytes[30] ^= 1; // inside the config text
        assert!(matches!(read_checkpoint(&bytes), Err(Error::Checkpoint(_))));
        assert!(read_checkpoint(b"nonsense").is_err());
    }
}
