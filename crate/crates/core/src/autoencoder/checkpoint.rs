//! Binary checkpoint: `AESQ`, version, K, N_actions, block count, then each
//! block's `(rows, cols)`, then the action labels, then every block's values
//! as little-endian f64 in storage order. All integers are little-endian u32.

use std::io::{Read, Write};
use std::path::Path;

use super::{AeParams, TrainedAutoencoder};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"AESQ";
const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::Parse {
        path: "<checkpoint>".into(),
        line: 0,
        message: msg.into(),
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| bad("truncated checkpoint"))?;
    Ok(u32::from_le_bytes(b))
}

impl TrainedAutoencoder {
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<checkpoint>", e);
        let (k, v) = (self.params.dims(), self.params.n_actions());
        let shapes = AeParams::block_shapes(v, k);
        w.write_all(MAGIC).map_err(io)?;
        for x in [VERSION, k as u32, v as u32, shapes.len() as u32] {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
        for (r, c) in &shapes {
            w.write_all(&(*r as u32).to_le_bytes()).map_err(io)?;
            w.write_all(&(*c as u32).to_le_bytes()).map_err(io)?;
        }
        for l in &self.labels {
            w.write_all(&(l.len() as u32).to_le_bytes()).map_err(io)?;
            w.write_all(l.as_bytes()).map_err(io)?;
        }
        for (_, block) in self.params.blocks() {
            for x in block {
                w.write_all(&x.to_le_bytes()).map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| bad("truncated checkpoint"))?;
        if &magic != MAGIC {
            return Err(bad("not an autoencoder checkpoint"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let k = read_u32(&mut r)? as usize;
        let v = read_u32(&mut r)? as usize;
        let n_blocks = read_u32(&mut r)? as usize;
        let expected = AeParams::block_shapes(v, k);
        if n_blocks != expected.len() {
            return Err(bad("block count does not match K and vocabulary size"));
        }
        for want in &expected {
            let got = (read_u32(&mut r)? as usize, read_u32(&mut r)? as usize);
            if got != *want {
                return Err(bad(format!("block shape {got:?}, expected {want:?}")));
            }
        }
        let mut labels = Vec::with_capacity(v);
        for _ in 0..v {
            let len = read_u32(&mut r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)
                .map_err(|_| bad("truncated labels"))?;
            labels.push(String::from_utf8(buf).map_err(|_| bad("label is not utf-8"))?);
        }
        let mut params = AeParams::zeros(v, k);
        let mut b8 = [0u8; 8];
        for (_, block) in params.blocks_mut() {
            for x in block {
                r.read_exact(&mut b8)
                    .map_err(|_| bad("truncated weights"))?;
                *x = f64::from_le_bytes(b8);
            }
        }
        Ok(Self { labels, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_checkpoint(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let model = TrainedAutoencoder {
            labels: vec!["Start".into(), "Click".into(), "Next".into()],
            params: AeParams::random(3, 4, 1.0, &mut rng),
        };
        let mut buf = Vec::new();
        model.write_checkpoint(&mut buf).unwrap();
        let back = TrainedAutoencoder::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, model);
        buf[0] = b'X';
        assert!(TrainedAutoencoder::read_checkpoint(buf.as_slice()).is_err());
    }
}
