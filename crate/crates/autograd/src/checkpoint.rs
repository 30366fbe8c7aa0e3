//! Binary parameter container. Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  b"CWCKPT01"
//! version  u32
//! n_meta   u32, then n_meta x { name: u32 len + utf8, value: u64 }
//! n_tensor u32, then a shape table of n_tensor x { name, rows: u64, cols: u64 }
//! data     concatenated f64 payloads in table order
//! ```
//!
//! Round-trips are bit-exact.

use crate::error::Error;
use crate::tensor::Tensor;
use crate::Result;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"CWCKPT01";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    pub meta: Vec<(String, u64)>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint::default()
    }

    pub fn meta_value(&self, name: &str) -> Option<u64> {
        self.meta.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.meta.len() as u32).to_le_bytes())?;
        for (name, value) in &self.meta {
            write_name(&mut w, name)?;
            w.write_all(&value.to_le_bytes())?;
        }
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            write_name(&mut w, name)?;
            w.write_all(&(t.rows as u64).to_le_bytes())?;
            w.write_all(&(t.cols as u64).to_le_bytes())?;
        }
        for (_, t) in &self.tensors {
            for x in &t.data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut r = BufReader::new(File::open(path)?);
        // A short read mid-stream means the container is damaged, not that
        // the file system failed. Report it as a checkpoint problem.
        Checkpoint::read_from(&mut r).map_err(|e| match e {
            Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
                Error::BadCheckpoint("file is truncated".into())
            }
            other => other,
        })
    }

    fn read_from<R: Read>(mut r: &mut R) -> Result<Checkpoint> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::BadCheckpoint(format!(
                "bad magic {:?}, not a checkpoint file",
                magic
            )));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::BadCheckpoint(format!(
                "unsupported version {version}, expected {VERSION}"
            )));
        }
        let n_meta = read_u32(&mut r)? as usize;
        let mut meta = Vec::with_capacity(n_meta);
        for _ in 0..n_meta {
            let name = read_name(&mut r)?;
            let value = read_u64(&mut r)?;
            meta.push((name, value));
        }
        let n_tensor = read_u32(&mut r)? as usize;
        let mut shapes = Vec::with_capacity(n_tensor);
        for _ in 0..n_tensor {
            let name = read_name(&mut r)?;
            let rows = read_u64(&mut r)? as usize;
            let cols = read_u64(&mut r)? as usize;
            shapes.push((name, rows, cols));
        }
        let mut tensors = Vec::with_capacity(n_tensor);
        for (name, rows, cols) in shapes {
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::BadCheckpoint(format!("tensor `{name}` shape overflow")))?;
            let mut data = vec![0.0f64; n];
            let mut buf = [0u8; 8];
            for x in data.iter_mut() {
                r.read_exact(&mut buf)?;
                *x = f64::from_le_bytes(buf);
            }
            tensors.push((name, Tensor::new(rows, cols, data)));
        }
        Ok(Checkpoint { meta, tensors })
    }
}

fn write_name<W: Write>(w: &mut W, name: &str) -> Result<()> {
    let bytes = name.as_bytes();
    w.write_all(&(bytes.len() as u32).to_le_bytes())?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_name<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 4096 {
        return Err(Error::BadCheckpoint(format!("name length {len} too large")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::BadCheckpoint("name is not utf-8".into()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
