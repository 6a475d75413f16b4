//! Binary tensor (`DTCT`) and mask (`DTCM`) files.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! magic[4] | version: u8 = 1 | order: u32 | dims: order × u64 | payload
//! ```
//!
//! The tensor payload is the row-major element buffer as IEEE-754 `f64`; the
//! mask payload lists the observed linear indices ascending as `u64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, ObservationMask, Shape};

const TENSOR_MAGIC: &[u8; 4] = b"DTCT";
const MASK_MAGIC: &[u8; 4] = b"DTCM";
const VERSION: u8 = 1;

fn write_header(out: &mut Vec<u8>, magic: &[u8; 4], shape: &Shape) {
    out.extend_from_slice(magic);
    out.push(VERSION);
    out.extend_from_slice(&(shape.order() as u32).to_le_bytes());
    for &d in shape.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format(format!("truncated while reading {what}")));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

fn read_header<'a>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<(Shape, Cursor<'a>)> {
    let mut cur = Cursor { bytes };
    if cur.take(4, "magic")? != magic {
        return Err(Error::Format(format!(
            "bad magic, expected {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = cur.take(1, "version")?[0];
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let order = u32::from_le_bytes(cur.take(4, "order")?.try_into().expect("4 bytes")) as usize;
    if order == 0 {
        return Err(Error::Format("tensor order is zero".into()));
    }
    // Bound the allocation by what the file can actually hold.
    if order > cur.bytes.len() / 8 {
        return Err(Error::Format("truncated while reading dims".into()));
    }
    let dims = (0..order)
        .map(|_| {
            let d = cur.u64("dims")?;
            usize::try_from(d).map_err(|_| Error::Format(format!("dimension {d} too large")))
        })
        .collect::<Result<Vec<_>>>()?;
    let shape = Shape::new(dims).map_err(|e| Error::Format(e.to_string()))?;
    Ok((shape, cur))
}

pub fn write_tensor(t: &DenseTensor, out: &mut impl Write) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(17 + 8 * t.shape().order() + 8 * t.data().len());
    write_header(&mut buf, TENSOR_MAGIC, t.shape());
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)
}

pub fn read_tensor(input: &mut impl Read) -> Result<DenseTensor> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Format(e.to_string()))?;
    let (shape, mut cur) = read_header(&bytes, TENSOR_MAGIC)?;
    let expected = shape
        .numel()
        .checked_mul(8)
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    if cur.bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {expected}",
            cur.bytes.len()
        )));
    }
    let data = (0..shape.numel())
        .map(|_| cur.u64("payload").map(f64::from_bits))
        .collect::<Result<Vec<_>>>()?;
    DenseTensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_mask(mask: &ObservationMask, out: &mut impl Write) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(17 + 8 * mask.observed_count());
    write_header(&mut buf, MASK_MAGIC, mask.shape());
    for &i in mask.observed_indices() {
        buf.extend_from_slice(&(i as u64).to_le_bytes());
    }
    out.write_all(&buf)
}

pub fn read_mask(input: &mut impl Read) -> Result<ObservationMask> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Format(e.to_string()))?;
    let (shape, mut cur) = read_header(&bytes, MASK_MAGIC)?;
    if cur.bytes.len() % 8 != 0 {
        return Err(Error::Format("mask payload is not a whole number of indices".into()));
    }
    let count = cur.bytes.len() / 8;
    let mut indices = Vec::with_capacity(count);
    for _ in 0..count {
        let i = cur.u64("indices")? as usize;
        if indices.last().is_some_and(|&last| i <= last) {
            return Err(Error::Format("mask indices are not strictly ascending".into()));
        }
        indices.push(i);
    }
    ObservationMask::from_indices(shape, &indices).map_err(|e| Error::Format(e.to_string()))
}

pub fn tensor_save(t: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_tensor(t, &mut file).map_err(|e| Error::io(path, e))
}

pub fn tensor_load(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensor(&mut file)
}

pub fn mask_save(mask: &ObservationMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_mask(mask, &mut file).map_err(|e| Error::io(path, e))
}

pub fn mask_load(path: impl AsRef<Path>) -> Result<ObservationMask> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_mask(&mut file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(t: &DenseTensor) -> Vec<u8> {
        let mut buf = Vec::new();
        write_tensor(t, &mut buf).unwrap();
        buf
    }

    #[test]
    fn header_layout() {
        let t = DenseTensor::new(Shape::new(vec![2, 1]).unwrap(), vec![1.0, -0.5]).unwrap();
        let bytes = encode(&t);
        assert_eq!(&bytes[..5], b"DTCT\x01");
        assert_eq!(&bytes[5..9], &2u32.to_le_bytes());
        assert_eq!(&bytes[9..17], &2u64.to_le_bytes());
        assert_eq!(&bytes[17..25], &1u64.to_le_bytes());
        assert_eq!(&bytes[25..33], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 41);
    }

    #[test]
    fn malformed_inputs() {
        let t = DenseTensor::filled(Shape::new(vec![3, 4, 5]).unwrap(), 2.5).unwrap();
        let good = encode(&t);

        assert!(matches!(read_tensor(&mut &b""[..]), Err(Error::Format(_))));

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_tensor(&mut bad_magic.as_slice()), Err(Error::Format(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(read_tensor(&mut bad_version.as_slice()), Err(Error::Format(_))));

        let truncated = &good[..good.len() - 3];
        assert!(matches!(read_tensor(&mut &truncated[..]), Err(Error::Format(_))));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(read_tensor(&mut trailing.as_slice()), Err(Error::Format(_))));

        let mut huge_order = good.clone();
        huge_order[5..9].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(read_tensor(&mut huge_order.as_slice()), Err(Error::Format(_))));

        let mut buf = Vec::new();
        write_mask(&ObservationMask::all(t.shape().clone()), &mut buf).unwrap();
        assert!(matches!(read_tensor(&mut buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn mask_roundtrip_and_order_check() {
        let shape = Shape::new(vec![4, 5]).unwrap();
        let mask = ObservationMask::from_indices(shape, &[1, 7, 8, 19]).unwrap();
        let mut buf = Vec::new();
        write_mask(&mask, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"DTCM");
        assert_eq!(read_mask(&mut buf.as_slice()).unwrap(), mask);

        let n = buf.len();
        buf[n - 8..].copy_from_slice(&3u64.to_le_bytes());
        assert!(read_mask(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.dtct");
        let t = DenseTensor::from_fn(Shape::new(vec![3, 4, 5]).unwrap(), |ix| {
            (ix[0] as f64).sin() * 1e-300 + ix[1] as f64 - 1e17 * ix[2] as f64
        })
        .unwrap();
        tensor_save(&t, &path).unwrap();
        let back = tensor_load(&path).unwrap();
        assert!(t.data().iter().zip(back.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(tensor_load(dir.path().join("missing")).is_err());
    }

    proptest! {
        #[test]
        fn tensor_roundtrip_is_bit_exact(
            dims in prop::collection::vec(1usize..5, 1..4),
            seed in any::<u64>(),
        ) {
            let shape = Shape::new(dims).unwrap();
            let mut state = seed;
            let t = DenseTensor::from_fn(shape, |_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = f64::from_bits(state);
                if v.is_finite() { v } else { 0.0 }
            }).unwrap();
            let back = read_tensor(&mut encode(&t).as_slice()).unwrap();
            prop_assert_eq!(back.shape(), t.shape());
            prop_assert!(t.data().iter().zip(back.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
