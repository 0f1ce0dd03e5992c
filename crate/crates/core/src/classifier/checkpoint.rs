//! Binary checkpoint: magic `MLPC`, version, four u32 dims, f32 slope, then
//! all parameters as little-endian f32 in w1, b1, w2, b2, w3, b3 order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::mlp::MlpParams;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MLPC";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut w: W, p: &MlpParams) -> Result<()> {
    let io = |e| Error::io("<checkpoint writer>", e);
    let (d, h1, h2, c) = p.dims();
    w.write_all(MAGIC).map_err(io)?;
    w.write_u32::<LittleEndian>(VERSION).map_err(io)?;
    for dim in [d, h1, h2, c] {
        w.write_u32::<LittleEndian>(dim as u32).map_err(io)?;
    }
    w.write_f32::<LittleEndian>(p.leaky_slope as f32).map_err(io)?;
    for v in p.to_flat() {
        w.write_f32::<LittleEndian>(v as f32).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<MlpParams> {
    let bad = |msg: String| Error::Format { what: "checkpoint".into(), line: 0, msg };
    let io = |e: std::io::Error| bad(e.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(io)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 4];
    for d in dims.iter_mut() {
        *d = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    }
    if dims.contains(&0) {
        return Err(bad("zero dimension".into()));
    }
    let slope = r.read_f32::<LittleEndian>().map_err(io)? as f64;
    let mut p = MlpParams::zeros(dims[0], dims[1], dims[2], dims[3], slope);
    let mut raw = vec![0f32; p.n_params()];
    r.read_f32_into::<LittleEndian>(&mut raw).map_err(io)?;
    p.set_flat(&raw.iter().map(|&v| v as f64).collect::<Vec<_>>());
    if !p.is_finite() {
        return Err(bad("non-finite parameter".into()));
    }
    Ok(p)
}

pub fn save_checkpoint(path: impl AsRef<Path>, p: &MlpParams) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(BufWriter::new(f), p)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpParams> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::init_params;

    #[test]
    fn round_trip_at_f32_precision() {
        let p = init_params(7, 5, 4, 3, 0.01, 2).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 16 + 4 + 4 * p.n_params());
        let q = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(q.dims(), p.dims());
        for (a, b) in p.to_flat().iter().zip(q.to_flat()) {
            assert_eq!(*a as f32 as f64, b);
        }
    }

    #[test]
    fn truncated_is_error() {
        let p = init_params(3, 2, 2, 2, 0.01, 0).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(&buf[..]).is_err());
        assert!(read_checkpoint(&b"XXXX"[..]).is_err());
    }
}
