//! Versioned binary checkpoints: layer specs, flat little-endian f64
//! parameters, and a SHA-256 content checksum.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Activation, Layer, Mat, Mlp, NnError};

const MAGIC: &[u8; 4] = b"GWNN";
const VERSION: u32 = 1;

fn activation_tag(act: Activation) -> (u8, f64) {
    match act {
        Activation::Identity => (0, 0.0),
        Activation::Tanh => (1, 0.0),
        Activation::Relu => (2, 0.0),
        Activation::SteepenedSigmoid(a) => (3, a),
    }
}

fn activation_from_tag(tag: u8, alpha: f64) -> Result<Activation, NnError> {
    match tag {
        0 => Ok(Activation::Identity),
        1 => Ok(Activation::Tanh),
        2 => Ok(Activation::Relu),
        3 => {
            if alpha > 0.0 {
                Ok(Activation::SteepenedSigmoid(alpha))
            } else {
                Err(NnError::Format("non-positive sigmoid steepness".into()))
            }
        }
        _ => Err(NnError::Format(format!("unknown activation tag {tag}"))),
    }
}

impl Mlp {
    pub fn save(&self, mut w: impl Write) -> Result<(), NnError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.layers().len() as u32).to_le_bytes());
        for layer in self.layers() {
            buf.extend_from_slice(&(layer.w.rows() as u32).to_le_bytes());
            buf.extend_from_slice(&(layer.w.cols() as u32).to_le_bytes());
            let (tag, alpha) = activation_tag(layer.activation);
            buf.push(tag);
            buf.extend_from_slice(&alpha.to_le_bytes());
        }
        buf.extend_from_slice(&(self.param_count() as u64).to_le_bytes());
        for p in self.params() {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        let digest = Sha256::digest(&buf);
        w.write_all(&buf)?;
        w.write_all(&digest)?;
        Ok(())
    }

    pub fn load(mut r: impl Read) -> Result<Mlp, NnError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 32 {
            return Err(NnError::Format("checkpoint truncated".into()));
        }
        let (body, checksum) = bytes.split_at(bytes.len() - 32);
        let digest = Sha256::digest(body);
        if digest.as_slice() != checksum {
            return Err(NnError::ChecksumMismatch);
        }

        let mut cursor = Cursor { body, pos: 0 };
        if cursor.take(4)? != MAGIC.as_slice() {
            return Err(NnError::Format("bad checkpoint magic".into()));
        }
        let version = cursor.u32()?;
        if version != VERSION {
            return Err(NnError::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let n_layers = cursor.u32()? as usize;
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let rows = cursor.u32()? as usize;
            let cols = cursor.u32()? as usize;
            let tag = cursor.take(1)?[0];
            let alpha = cursor.f64()?;
            shapes.push((rows, cols, activation_from_tag(tag, alpha)?));
        }
        let declared = cursor.u64()? as usize;
        let expected: usize = shapes.iter().map(|&(r, c, _)| r * c + c).sum();
        if declared != expected {
            return Err(NnError::Format(format!(
                "declared {declared} params, layer specs imply {expected}"
            )));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for (rows, cols, act) in shapes {
            let mut wdata = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                wdata.push(cursor.f64()?);
            }
            let mut b = Vec::with_capacity(cols);
            for _ in 0..cols {
                b.push(cursor.f64()?);
            }
            layers.push(Layer {
                w: Mat::from_vec(rows, cols, wdata)?,
                b,
                activation: act,
            });
        }
        if cursor.pos != body.len() {
            return Err(NnError::Format("trailing bytes in checkpoint".into()));
        }
        Mlp::from_layers(layers)
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> Result<(), NnError> {
        let file = std::fs::File::create(path)?;
        self.save(std::io::BufWriter::new(file))
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Mlp, NnError> {
        let file = std::fs::File::open(path)?;
        Mlp::load(std::io::BufReader::new(file))
    }
}

struct Cursor<'a> {
    body: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.body.len() {
            return Err(NnError::Format("checkpoint truncated".into()));
        }
        let s = &self.body[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
