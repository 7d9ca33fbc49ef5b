//! Binary checkpoint: magic, version, JSON metadata, named tensors, optional Adam state.
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Adam, ParamStore, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SDMCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub metadata: serde_json::Value,
    pub params: ParamStore,
    pub optimizer: Option<Adam>,
}

fn write_tensor<W: Write>(w: &mut W, t: &Tensor) -> std::io::Result<()> {
    w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
    for d in &t.shape {
        w.write_all(&(*d as u64).to_le_bytes())?;
    }
    for x in &t.data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u64).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    (|| -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        write_str(&mut w, &checkpoint.metadata.to_string())?;
        w.write_all(&(checkpoint.params.len() as u32).to_le_bytes())?;
        for (name, t) in checkpoint.params.iter() {
            write_str(&mut w, name)?;
            write_tensor(&mut w, t)?;
        }
        match &checkpoint.optimizer {
            None => w.write_all(&[0])?,
            Some(adam) => {
                w.write_all(&[1])?;
                for x in [adam.lr, adam.beta1, adam.beta2, adam.eps] {
                    w.write_all(&x.to_le_bytes())?;
                }
                w.write_all(&adam.step.to_le_bytes())?;
                for t in adam.m.iter().chain(&adam.v) {
                    write_tensor(&mut w, t)?;
                }
            }
        }
        w.flush()
    })()
    .map_err(io)
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Checkpoint("unexpected end of file".into()))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u64()?;
        if n > 1 << 30 {
            return Err(Error::Checkpoint("string length out of range".into()));
        }
        let mut buf = vec![0u8; n as usize];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Checkpoint("unexpected end of file".into()))?;
        String::from_utf8(buf).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let ndim = self.u32()?;
        if ndim > 8 {
            return Err(Error::Checkpoint(format!("tensor rank {ndim} out of range")));
        }
        let shape = (0..ndim)
            .map(|_| self.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let n = n
            .filter(|&n| n <= 1 << 28)
            .ok_or_else(|| Error::Checkpoint("tensor size out of range".into()))?;
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Tensor { shape, data })
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        inner: BufReader::new(file),
    };
    if &r.bytes::<8>()? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a checkpoint", path.display())));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let metadata = serde_json::from_str(&r.string()?)
        .map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
    let count = r.u32()?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name = r.string()?;
        if params.id(&name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate parameter {name}")));
        }
        let t = r.tensor()?;
        params.insert(&name, t);
    }
    let optimizer = match r.bytes::<1>()?[0] {
        0 => None,
        1 => {
            let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
            let step = r.u64()?;
            let m = (0..count).map(|_| r.tensor()).collect::<Result<Vec<_>>>()?;
            let v = (0..count).map(|_| r.tensor()).collect::<Result<Vec<_>>>()?;
            for (a, p) in m.iter().chain(&v).zip(params.tensors().iter().cycle()) {
                if a.shape != p.shape {
                    return Err(Error::Checkpoint("optimizer state shape mismatch".into()));
                }
            }
            Some(Adam { lr, beta1, beta2, eps, step, m, v })
        }
        b => return Err(Error::Checkpoint(format!("bad optimizer flag {b}"))),
    };
    Ok(Checkpoint {
        metadata,
        params,
        optimizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = ParamStore::new();
        params.weight("layer.w", 3, 5, &mut rng);
        params.bias("layer.b", 3, 5, &mut rng);
        let mut adam = Adam::new(&params, 1e-3);
        let grads: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|t| Tensor { shape: t.shape.clone(), data: t.data.iter().map(|x| x * 0.3).collect() })
            .collect();
        adam.update(&mut params, &grads);
        let ck = Checkpoint {
            metadata: serde_json::json!({"kind": "test"}),
            params,
            optimizer: Some(adam),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        save_checkpoint(&path, &ck).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ck);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"SDMCKPT\0\x01\0\0\0").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
        std::fs::write(&path, b"garbage").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
