//! Binary tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "ATNS" | u8 version | u8 dtype (0 = f32, 1 = f64) | u32 rank | rank × u64 extent | payload
//! ```
//!
//! Several records may be concatenated in one stream.

use std::io::{Read, Write};

use super::scalar::{DType, Scalar};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ATNS";
pub const VERSION: u8 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::Format(format!("tensor stream: {e}"))
}

pub fn encode<S: Scalar>(tensor: &Tensor<S>) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + 8 * tensor.rank() + tensor.len() * S::DTYPE.width());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(S::DTYPE.code());
    out.extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
    for &e in tensor.shape() {
        out.extend_from_slice(&(e as u64).to_le_bytes());
    }
    for &v in tensor.data() {
        v.write_le(&mut out);
    }
    out
}

pub fn write_tensor<S: Scalar, W: Write>(w: &mut W, tensor: &Tensor<S>) -> Result<()> {
    w.write_all(&encode(tensor)).map_err(io_err)
}

/// Reads one record, converting the payload to `S` when the stored dtype
/// differs. Returns the stored dtype too.
pub fn read_tensor<S: Scalar, R: Read>(r: &mut R) -> Result<(Tensor<S>, DType)> {
    let mut head = [0u8; 10];
    r.read_exact(&mut head).map_err(io_err)?;
    if &head[..4] != MAGIC {
        return Err(Error::Format("bad magic, not an ATNS record".into()));
    }
    if head[4] != VERSION {
        return Err(Error::Format(format!("unsupported ATNS version {}", head[4])));
    }
    let dtype = DType::from_code(head[5])
        .ok_or_else(|| Error::Format(format!("unknown dtype code {}", head[5])))?;
    let rank = u32::from_le_bytes(head[6..10].try_into().unwrap()) as usize;
    if rank == 0 || rank > 16 {
        return Err(Error::Format(format!("implausible rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut b = [0u8; 8];
        r.read_exact(&mut b).map_err(io_err)?;
        shape.push(u64::from_le_bytes(b) as usize);
    }
    let len: usize = shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| Error::Format("extent product overflows".into()))?;
    let mut payload = vec![0u8; len * dtype.width()];
    r.read_exact(&mut payload).map_err(io_err)?;
    let data: Vec<S> = match dtype {
        DType::F32 => payload
            .chunks_exact(4)
            .map(|c| S::lit(f32::read_le(c) as f64))
            .collect(),
        DType::F64 => payload.chunks_exact(8).map(|c| S::lit(f64::read_le(c))).collect(),
    };
    Ok((Tensor::new(&shape, data)?, dtype))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_exact() {
        let t = Tensor::new(&[2, 1], vec![1.0f32, -2.0]).unwrap();
        let bytes = encode(&t);
        assert_eq!(&bytes[..4], b"ATNS");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 0);
        assert_eq!(&bytes[6..10], &2u32.to_le_bytes());
        assert_eq!(&bytes[10..18], &2u64.to_le_bytes());
        assert_eq!(&bytes[18..26], &1u64.to_le_bytes());
        assert_eq!(&bytes[26..30], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 34);
    }

    #[test]
    fn truncated_and_corrupt_streams_fail() {
        let t = Tensor::new(&[3], vec![1.0f64, 2.0, 3.0]).unwrap();
        let bytes = encode(&t);
        assert!(read_tensor::<f64, _>(&mut &bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_tensor::<f64, _>(&mut bad.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_preserves_bits(shape in prop::collection::vec(1usize..4, 1..4), seed in any::<u64>()) {
            let n: usize = shape.iter().product();
            let data: Vec<f64> = (0..n).map(|i| ((seed.wrapping_add(i as u64)) as f64).sin() * 1e3).collect();
            let t = Tensor::new(&shape, data).unwrap();
            let mut stream = encode(&t);
            stream.extend(encode(&t.cast::<f32>()));
            let mut r = stream.as_slice();
            let (back, dt) = read_tensor::<f64, _>(&mut r).unwrap();
            prop_assert_eq!(dt, DType::F64);
            prop_assert_eq!(&back, &t);
            let (back32, dt32) = read_tensor::<f32, _>(&mut r).unwrap();
            prop_assert_eq!(dt32, DType::F32);
            prop_assert_eq!(back32, t.cast::<f32>());
        }
    }
}
